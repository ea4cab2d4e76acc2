use crate::config::{write_json, SceneConfig};
use crate::dataset::{sequence_dirs, SequenceDir};
use crate::error::CliError;
use crate::scene::{build_shape, build_trajectory, gel_particles, template, with_contact};
use crate::SCHEMA_VERSION;
use gelsim_core::calib::{calibrate, DemoSequence, Optimizer};
use gelsim_core::mpm::IndenterState;
use serde::Serialize;
use std::path::Path;

pub const RESULT_FILE: &str = "calibration_result.json";

#[derive(Debug, Serialize)]
struct Iteration {
    iter: usize,
    #[serde(rename = "E")]
    youngs: f64,
    nu: f64,
    loss: f64,
    #[serde(rename = "grad_log_E")]
    grad_log_e: f64,
    grad_nu: f64,
}

#[derive(Debug, Serialize)]
struct SequenceResult {
    name: String,
    #[serde(rename = "E")]
    youngs: Option<f64>,
    nu: Option<f64>,
    error: Option<String>,
    history: Vec<Iteration>,
}

#[derive(Debug, Serialize)]
struct Init {
    #[serde(rename = "E")]
    youngs: f64,
    nu: f64,
}

#[derive(Debug, Serialize)]
struct Settings {
    lr: f64,
    iters: usize,
    optimizer: Optimizer,
    substeps: u32,
}

#[derive(Debug, Serialize)]
struct CalibrationResult {
    schema_version: u32,
    #[serde(rename = "E")]
    youngs: f64,
    nu: f64,
    #[serde(rename = "log_E")]
    log_e: f64,
    init: Init,
    settings: Settings,
    sequences: Vec<SequenceResult>,
}

/// Calibrated parameters as read back by other commands.
#[derive(Debug, serde::Deserialize)]
pub struct CalibratedParams {
    #[serde(rename = "E")]
    pub youngs: f64,
    pub nu: f64,
}

pub fn read_result(path: &Path) -> Result<CalibratedParams, CliError> {
    let p: CalibratedParams = serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !(p.youngs > 0.0 && p.youngs.is_finite() && p.nu > -1.0 && p.nu < 0.5) {
        return Err(CliError::Input(format!("{}: invalid parameters E={} nu={}", path.display(), p.youngs, p.nu)));
    }
    Ok(p)
}

/// Optimizes every sequence under `sequences` and writes `calibration_result.json`.
/// Sequences that blow up are reported by name with exit status 3 after the
/// result of the remaining ones is written.
pub fn run(cfg: &SceneConfig, sequences: &Path, out: &Path) -> Result<(), CliError> {
    let dirs = sequence_dirs(sequences)?;
    if dirs.is_empty() {
        return Err(CliError::Input(format!(
            "no sequences (subdirectories with indenter.json) in {}",
            sequences.display()
        )));
    }
    let r = cfg.sensor.radius_mm;
    let mut seqs = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let s = SequenceDir::load(dir)?;
        let shape = build_shape(&s.indenter.shape, cfg.grid.voxel_res_mm)?;
        let trajectory = build_trajectory(&s.indenter, &shape, r)?;
        let seq = DemoSequence { name: s.name, indenter: shape, trajectory, targets: s.targets };
        seq.validate().map_err(|e| CliError::Input(format!("sequence {}: {e}", seq.name)))?;
        seqs.push(seq);
    }
    let mut tmpl = template(cfg, gel_particles(cfg)?, cfg.sim.substeps)?;
    // Contact settings travel with the template's indenter slot.
    let first = IndenterState::new(seqs[0].indenter.clone(), seqs[0].trajectory.clone())?;
    tmpl.indenter = Some(with_contact(cfg, first)?);
    let opt = cfg.calibration.optimizer();
    let init = cfg.calibration.init();
    log::info!("calibrating {} sequences from E={} nu={}", seqs.len(), init.youngs(), init.nu);
    let outcome = calibrate(&tmpl, &seqs, init, &opt).map_err(|e| {
        let named: Vec<&str> = seqs.iter().map(|s| s.name.as_str()).collect();
        CliError::from(e).context(format_args!("sequences {}", named.join(", ")))
    })?;

    let result = CalibrationResult {
        schema_version: SCHEMA_VERSION,
        youngs: outcome.params.youngs(),
        nu: outcome.params.nu,
        log_e: outcome.params.log_e,
        init: Init { youngs: cfg.calibration.init_youngs, nu: cfg.calibration.init_nu },
        settings: Settings { lr: opt.lr, iters: opt.iters, optimizer: opt.optimizer, substeps: cfg.sim.substeps },
        sequences: outcome
            .sequences
            .iter()
            .map(|s| SequenceResult {
                name: s.name.clone(),
                youngs: s.params.map(|p| p.youngs()),
                nu: s.params.map(|p| p.nu),
                error: s.error.clone(),
                history: s
                    .history
                    .iter()
                    .enumerate()
                    .map(|(i, h)| Iteration {
                        iter: i,
                        youngs: h.log_e.exp(),
                        nu: h.nu,
                        loss: h.loss,
                        grad_log_e: h.grad[0],
                        grad_nu: h.grad[1],
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(&out.join(RESULT_FILE), &result)?;
    let failed: Vec<String> =
        outcome.sequences.iter().filter_map(|s| s.error.as_ref().map(|e| format!("{}: {e}", s.name))).collect();
    if !failed.is_empty() {
        return Err(CliError::Numeric(format!("calibration failed for {}", failed.join("; "))));
    }
    Ok(())
}
