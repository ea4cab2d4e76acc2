use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Pa → kg/(mm·s²), the stress unit of the mm/kg/s system the solver runs in.
pub const PA_TO_INTERNAL: f64 = 1e-3;
/// kg/m³ → kg/mm³.
pub const DENSITY_TO_INTERNAL: f64 = 1e-9;

/// Young's modulus and Poisson ratio, plus the fixed (non-calibrated) material knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams<T> {
    /// Young's modulus, Pa.
    pub youngs: T,
    pub poisson: T,
    /// Effective density, kg/m³. This is a mass-scaled value: it sets the time
    /// scale of the explicit dynamics, not the physical gel mass.
    pub density: f64,
    /// mm/s².
    pub gravity: Vec3<f64>,
    /// Mass-proportional velocity damping on the grid, 1/s.
    pub damping: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialDefaults {
    pub youngs: f64,
    pub poisson: f64,
    pub density: f64,
    pub damping: f64,
}

/// Calibrated gel parameters and the solver's mass scaling.
pub const DEFAULT_MATERIAL: MaterialDefaults =
    MaterialDefaults { youngs: 27575.0, poisson: 0.303, density: 2.0e6, damping: 40.0 };

impl MaterialParams<f64> {
    pub fn new(youngs: f64, poisson: f64) -> Self {
        MaterialParams {
            youngs,
            poisson,
            density: DEFAULT_MATERIAL.density,
            gravity: Vec3::zero(),
            damping: DEFAULT_MATERIAL.damping,
        }
    }
}

impl Default for MaterialParams<f64> {
    fn default() -> Self {
        Self::new(DEFAULT_MATERIAL.youngs, DEFAULT_MATERIAL.poisson)
    }
}

impl<T: Real> MaterialParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.youngs.value() > 0.0) {
            return Err(Error::InvalidParameter(format!("Young's modulus must be > 0, got {}", self.youngs.value())));
        }
        lame_from_e_nu(self.youngs, self.poisson)?;
        if !(self.density > 0.0) || !(self.damping >= 0.0) {
            return Err(Error::InvalidParameter("density must be > 0 and damping >= 0".into()));
        }
        Ok(())
    }

    /// Lamé parameters in Pa.
    pub fn lame(&self) -> Result<(T, T)> {
        lame_from_e_nu(self.youngs, self.poisson)
    }

    /// Re-types the calibratable parameters (e.g. to attach tangents).
    pub fn with_elastic<U: Real>(&self, youngs: U, poisson: U) -> MaterialParams<U> {
        MaterialParams { youngs, poisson, density: self.density, gravity: self.gravity, damping: self.damping }
    }
}

/// `mu = E / (2(1+nu))`, `lambda = E nu / ((1+nu)(1-2nu))`.
pub fn lame_from_e_nu<T: Real>(youngs: T, poisson: T) -> Result<(T, T)> {
    let nu = poisson.value();
    if !(nu > -1.0 && nu < 0.5) {
        return Err(Error::IncompressibleLimit { nu });
    }
    if !(youngs.value() > 0.0) {
        return Err(Error::InvalidParameter(format!("Young's modulus must be > 0, got {}", youngs.value())));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let mu = youngs / (two * (one + poisson));
    let lambda = youngs * poisson / ((one + poisson) * (one - two * poisson));
    Ok((mu, lambda))
}

/// Fixed-corotated first Piola–Kirchhoff stress
/// `P = 2 mu (F - R) + lambda (J - 1) J F⁻ᵀ`, in the units of `mu`/`lambda`.
pub fn first_piola_stress<T: Real>(f: &Mat3<T>, mu: T, lambda: T) -> Result<Mat3<T>> {
    let j = f.det();
    if !(j.value() > 0.0) {
        return Err(Error::InvertedDeformation { index: 0, det: j.value() });
    }
    let r = f.polar_rotation().ok_or(Error::InvertedDeformation { index: 0, det: j.value() })?;
    // J F⁻ᵀ is the cofactor matrix.
    Ok((*f - r) * (mu + mu) + f.cofactor() * (lambda * (j - T::one())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Quat;

    #[test]
    fn lame_of_calibrated_gel() {
        let (mu, lambda) = lame_from_e_nu(27575.0f64, 0.303).unwrap();
        // Independent evaluation of the closed forms.
        let mu_ref = 27575.0 / 2.606;
        let lambda_ref = 27575.0 * 0.303 / (1.303 * 0.394);
        assert!((mu - mu_ref).abs() / mu_ref < 1e-12);
        assert!((lambda - lambda_ref).abs() / lambda_ref < 1e-12);
        assert!((mu - 10581.4).abs() / 10581.4 < 1e-4, "{mu}");
        assert!((lambda - 16275.4).abs() / 16275.4 < 1e-4, "{lambda}");
    }

    #[test]
    fn lame_edge_cases() {
        assert_eq!(lame_from_e_nu(2.0, 0.0).unwrap(), (1.0, 0.0));
        assert!(matches!(lame_from_e_nu(1.0, 0.5), Err(Error::IncompressibleLimit { .. })));
        assert!(lame_from_e_nu(1.0, -1.0).is_err());
        assert!(lame_from_e_nu(0.0, 0.3).is_err());
    }

    #[test]
    fn stress_vanishes_at_rest_and_under_rotation() {
        let p = first_piola_stress(&Mat3::<f64>::identity(), 3.0, 2.0).unwrap();
        assert_eq!(p, Mat3::zero());
        let r = Quat::from_axis_angle(Vec3::new(1.0, -2.0, 0.5), 1.1).to_matrix();
        let p = first_piola_stress(&r, 3.0, 2.0).unwrap();
        assert!(p.frobenius_sq().sqrt() < 1e-12);
    }

    #[test]
    fn small_strain_matches_linear_elasticity() {
        let eps = 1e-4;
        let p: Mat3<f64> = first_piola_stress(&Mat3::diag(1.0 + eps, 1.0, 1.0), 1.0, 1.0).unwrap();
        let lin = (2.0 * 1.0 + 1.0) * eps;
        assert!((p.m[0][0] - lin).abs() / lin < 0.01, "{}", p.m[0][0]);
        // Lateral stress is lambda * eps.
        assert!((p.m[1][1] - eps).abs() / eps < 0.01);
    }

    #[test]
    fn stress_is_objective() {
        let f = Mat3::from_rows([[1.1, 0.05, 0.0], [0.02, 0.93, 0.1], [0.0, -0.04, 1.02]]);
        let r = Quat::from_axis_angle(Vec3::new(0.2, 1.0, 0.3), 0.9).to_matrix();
        let p = first_piola_stress(&f, 2.0, 5.0).unwrap();
        let pr = first_piola_stress(&(r * f), 2.0, 5.0).unwrap();
        assert!((pr - r * p).frobenius_sq().sqrt() < 1e-12);
    }

    #[test]
    fn inverted_deformation_is_rejected() {
        assert!(first_piola_stress(&Mat3::diag(-1.0, 1.0, 1.0), 1.0, 1.0).is_err());
    }
}
