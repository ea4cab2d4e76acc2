use crate::config::{write_json, SceneConfig};
use crate::dataset::{read_idle, read_image, read_maps, Manifest, Role};
use crate::error::CliError;
use crate::SCHEMA_VERSION;
use gelsim_core::geometry::fmt_sig9;
use gelsim_optical::train::train_with;
use gelsim_optical::weights::save_weights;
use gelsim_optical::{normalize_inputs, OpticalModel, Sample, TargetMode};
use serde::Serialize;
use std::path::Path;

pub const WEIGHTS_FILE: &str = "weights.optw";

#[derive(Debug, Serialize)]
struct TrainingSummary {
    schema_version: u32,
    mode: TargetMode,
    samples: usize,
    epochs: usize,
    parameters: usize,
    final_loss: f64,
}

/// Trains on the train split; writes `weights.optw`, `loss_history.csv` and
/// `training.json`.
pub fn run(cfg: &SceneConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = Manifest::load(dataset)?;
    let idle = read_idle(dataset)?;
    let frames = manifest.frames(Some(Role::Train));
    if frames.is_empty() {
        return Err(CliError::Input(format!("{}: the train split has no frames", dataset.display())));
    }
    let mode = cfg.optical.mode;
    let samples = frames
        .iter()
        .map(|&k| {
            let maps = read_maps(dataset, k, &manifest.camera)?;
            let real = read_image(dataset, k)?;
            Ok(Sample { input: normalize_inputs(&maps), target: mode.target(&real, &idle)? })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut net = OpticalModel::new(cfg.seeds.run);
    let tc = cfg.optical.train_config(cfg.seeds.run);
    let history = train_with(&mut net, &samples, &tc, |epoch, loss| log::info!("epoch {epoch}: loss {loss:.6e}"))?;

    save_weights(&net, &out.join(WEIGHTS_FILE))?;
    let path = out.join("loss_history.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "loss"]).map_err(csv_err)?;
    for (epoch, loss) in history.iter().enumerate() {
        w.write_record([epoch.to_string(), fmt_sig9(*loss)]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(
        &out.join("training.json"),
        &TrainingSummary {
            schema_version: SCHEMA_VERSION,
            mode,
            samples: samples.len(),
            epochs: tc.epochs,
            parameters: net.param_count(),
            final_loss: history.last().copied().unwrap_or(f64::NAN),
        },
    )
}
