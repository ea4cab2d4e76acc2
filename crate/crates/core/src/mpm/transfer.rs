//! One MLS-MPM substep, split into its grid and particle phases.

use super::grid::{GridField, Stencil};
use super::indenter::IndenterState;
use super::material::{first_piola_stress, MaterialParams, PA_TO_INTERNAL};
use super::particles::ParticleSet;
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;
use rayon::prelude::*;

/// Nodes lighter than this fraction of the lightest particle are treated as empty.
const MASS_EPS_FRACTION: f64 = 1e-12;

fn mass_eps<T: Real>(particles: &ParticleSet<T>) -> f64 {
    let m = particles.mass.iter().map(|m| m.value()).fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m * MASS_EPS_FRACTION
    } else {
        0.0
    }
}

/// Particle-to-grid scatter with elastic forces and gravity. On return the grid
/// holds node masses and velocities.
pub fn p2g<T: Real>(
    particles: &ParticleSet<T>,
    grid: &mut GridField<T>,
    material: &MaterialParams<T>,
    dt: f64,
) -> Result<()> {
    let (mu, lambda) = material.lame()?;
    let scale = T::lit(PA_TO_INTERNAL);
    let (mu, lambda) = (mu * scale, lambda * scale);
    let dinv = 4.0 / (grid.h * grid.h);

    // Per-particle affine momentum matrices are independent; the scatter below
    // runs in particle order so sums are reproducible.
    let prepared: Vec<Result<(Stencil<T>, Mat3<T>)>> = (0..particles.len())
        .into_par_iter()
        .map(|p| {
            let stencil = Stencil::new(grid, particles.x[p])
                .ok_or_else(|| Error::ParticleOutsideGrid { index: p, position: particles.x[p].value().to_array() })?;
            let f = &particles.f[p];
            let stress = first_piola_stress(f, mu, lambda).map_err(|e| match e {
                Error::InvertedDeformation { det, .. } => Error::InvertedDeformation { index: p, det },
                other => other,
            })?;
            let affine =
                stress * f.transpose() * (particles.vol0[p] * T::lit(-dt * dinv)) + particles.c[p] * particles.mass[p];
            Ok((stencil, affine))
        })
        .collect();

    grid.clear();
    for (p, prep) in prepared.into_iter().enumerate() {
        let (stencil, affine) = prep?;
        let m = particles.mass[p];
        let mv = particles.v[p] * m;
        let (mass, mom) = (&mut grid.mass, &mut grid.velocity);
        stencil.for_each(grid.dims, |idx, w, dpos| {
            mass[idx] += w * m;
            mom[idx] += (mv + affine * dpos) * w;
        });
    }

    let eps = mass_eps(particles);
    let g = Vec3::<T>::lift(material.gravity * dt);
    for (m, v) in grid.mass.iter().zip(grid.velocity.iter_mut()) {
        if m.value() > eps {
            *v = *v * m.recip() + g;
        } else {
            *v = Vec3::zero();
        }
    }
    Ok(())
}

/// Grid velocity update between scatter and contact: mass-proportional
/// damping, a sticky base (nodes within one voxel of z = 0) and sticky lattice
/// walls (outermost two node layers).
pub fn grid_update<T: Real>(grid: &mut GridField<T>, damping: f64, dt: f64, sticky_base: bool) {
    let decay = T::lit(1.0 / (1.0 + damping * dt));
    let h = grid.h;
    let dims = grid.dims;
    let base_k = if sticky_base {
        // Node planes with z <= h (with a little slack for rounding).
        ((h * 1.0001 - grid.origin.z) / h).floor() as i64
    } else {
        -1
    };
    for idx in 0..grid.len() {
        if grid.mass[idx].value() == 0.0 {
            continue;
        }
        let [i, j, k] = grid.node_coords(idx);
        let wall = i < 2 || j < 2 || k < 2 || i + 2 >= dims[0] || j + 2 >= dims[1] || k + 2 >= dims[2];
        if wall || (k as i64) <= base_k {
            grid.velocity[idx] = Vec3::zero();
        } else if damping > 0.0 {
            grid.velocity[idx] = grid.velocity[idx] * decay;
        }
    }
}

/// Outcome of projecting one node velocity against the indenter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactResult {
    Free,
    Separating,
    Projected,
}

/// Rigid contact on one node velocity `v`: outward normal `n`, indenter
/// surface velocity `u`. Approaching motion loses its normal component and the
/// tangential part is reduced by Coulomb friction.
pub fn project_velocity<T: Real>(v: Vec3<T>, n: Vec3<f64>, u: Vec3<f64>, friction: f64) -> (Vec3<T>, ContactResult) {
    let u_t = Vec3::<T>::lift(u);
    let n_t = Vec3::<T>::lift(n);
    let rel = v - u_t;
    let vn = rel.dot(n_t);
    if vn.value() >= 0.0 {
        return (v, ContactResult::Separating);
    }
    let vt = rel - n_t * vn;
    let vt_norm = vt.norm();
    let vt_new = if vt_norm.value() > 0.0 {
        let s = T::one() - T::lit(friction) * (-vn) / vt_norm;
        if s.value() > 0.0 {
            vt * s
        } else {
            Vec3::zero()
        }
    } else {
        Vec3::zero()
    };
    (u_t + vt_new, ContactResult::Projected)
}

/// Contact projection for every massive node within the contact radius.
/// Returns the number of projected nodes.
pub fn contact_project<T: Real>(grid: &mut GridField<T>, indenter: &IndenterState) -> usize {
    let radius = indenter.contact_radius(grid.h);
    let reach = indenter.shape.bounding_radius() + radius + grid.h;
    let c = indenter.pose.translation;
    let mut count = 0;
    for idx in 0..grid.len() {
        if grid.mass[idx].value() == 0.0 {
            continue;
        }
        let x = grid.node_position(idx);
        if (x - c).norm() > reach {
            continue;
        }
        let s = indenter.sdf(x);
        if s.distance >= radius {
            continue;
        }
        let u = indenter.surface_velocity(x);
        let (v, res) = project_velocity(grid.velocity[idx], s.gradient, u, indenter.friction);
        if res == ContactResult::Projected {
            grid.velocity[idx] = v;
            count += 1;
        }
    }
    count
}

/// Grid-to-particle gather, APIC affine update, advection and deformation update.
pub fn g2p<T: Real>(grid: &GridField<T>, particles: &mut ParticleSet<T>, dt: f64) -> Result<()> {
    let dinv = T::lit(4.0 / (grid.h * grid.h));
    let dt_t = T::lit(dt);
    let dims = grid.dims;
    let ParticleSet { x, v, f, c, .. } = particles;
    x.par_iter_mut().zip(v.par_iter_mut()).zip(f.par_iter_mut()).zip(c.par_iter_mut()).enumerate().try_for_each(
        |(p, (((xp, vp), fp), cp))| {
            let stencil = Stencil::new(grid, *xp)
                .ok_or_else(|| Error::ParticleOutsideGrid { index: p, position: xp.value().to_array() })?;
            let mut vel = Vec3::zero();
            let mut b = Mat3::zero();
            stencil.for_each(dims, |idx, w, dpos| {
                let gv = grid.velocity[idx] * w;
                vel += gv;
                b += Mat3::outer(gv, dpos);
            });
            let cnew = b * dinv;
            let fnew = (Mat3::identity() + cnew * dt_t) * *fp;
            let det = fnew.det().value();
            if !(det > 0.0) {
                return Err(Error::InvertedDeformation { index: p, det });
            }
            *vp = vel;
            *cp = cnew;
            *xp += vel * dt_t;
            *fp = fnew;
            Ok(())
        },
    )
}

/// Fails when some particle travels a voxel or more per substep, or any state
/// is non-finite.
pub fn check_cfl<T: Real>(particles: &ParticleSet<T>, dt: f64, h: f64) -> Result<()> {
    for (i, (v, x)) in particles.v.iter().zip(&particles.x).enumerate() {
        if !v.is_finite() || !x.is_finite() || !particles.f[i].is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let speed = v.value().norm();
        if speed * dt >= h {
            return Err(Error::Cfl { index: i, speed, travel: speed * dt, limit: h });
        }
    }
    Ok(())
}
