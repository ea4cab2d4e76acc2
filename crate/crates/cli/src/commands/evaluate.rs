use crate::config::{write_json, SceneConfig};
use crate::dataset::{cloud_path, frame_stem, list_frames, read_image, Manifest, Role};
use crate::error::CliError;
use crate::SCHEMA_VERSION;
use gelsim_core::geometry::{fmt_sig9, load_xyz};
use gelsim_core::metrics::{cloud_metrics, image_metrics, CloudMetricsReport, ImageMetricsReport, Psnr, Shape};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

pub const REPORT_FILE: &str = "metrics_report.json";
pub const CSV_FILE: &str = "metrics_report.csv";

#[derive(Debug, Serialize)]
pub struct FrameReport {
    pub frame: usize,
    pub image: ImageMetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<CloudMetricsReport>,
}

#[derive(Debug, Serialize)]
pub struct MeanCloud {
    pub l2_cd: f64,
    pub sig_l2_cd: f64,
    pub emd: f64,
    pub fscore_1mm: f64,
}

#[derive(Debug, Serialize)]
pub struct Means {
    pub image: ImageMetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<MeanCloud>,
}

#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub n_frames: usize,
    pub image_quantile: f64,
    pub n_points: usize,
    pub seed: u64,
    pub frames: Vec<FrameReport>,
    pub mean: Means,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn frame_report(cfg: &SceneConfig, pred: &Path, gt: &Path, k: usize) -> Result<FrameReport, CliError> {
    let image = image_metrics(&read_image(pred, k)?, &read_image(gt, k)?, cfg.evaluation.image_quantile)
        .map_err(|e| CliError::from(e).context(format_args!("frame {}", frame_stem(k))))?;
    let (pc, gc) = (cloud_path(pred, k), cloud_path(gt, k));
    let cloud = match (pc.is_file(), gc.is_file()) {
        (true, true) => {
            let (a, b) = (load_xyz(&pc)?, load_xyz(&gc)?);
            Some(cloud_metrics(Shape::Cloud(&a), Shape::Cloud(&b), cfg.evaluation.n_points, cfg.seeds.run)?)
        }
        (false, false) => None,
        _ => {
            return Err(CliError::Input(format!("frame {}: only one side has a point cloud", frame_stem(k))));
        }
    };
    Ok(FrameReport { frame: k, image, cloud })
}

/// Compares `pred/frames` against `gt/frames` and writes `metrics_report.json`
/// and `metrics_report.csv`. The two sides must hold the same frame numbers.
pub fn run(cfg: &SceneConfig, pred: &Path, gt: &Path, split: Option<Role>, out: &Path) -> Result<(), CliError> {
    let pred_frames = list_frames(pred)?;
    let gt_frames = match split {
        Some(role) => {
            let mut f = Manifest::load(gt)?.frames(Some(role));
            f.sort_unstable();
            f
        }
        None => list_frames(gt)?,
    };
    if pred_frames != gt_frames {
        return Err(CliError::Input(format!(
            "frame mismatch: {} predicted frames vs {} ground-truth frames",
            pred_frames.len(),
            gt_frames.len()
        )));
    }
    if pred_frames.is_empty() {
        return Err(CliError::Input("no frames to evaluate".into()));
    }
    let frames: Vec<FrameReport> =
        pred_frames.par_iter().map(|&k| frame_report(cfg, pred, gt, k)).collect::<Result<_, _>>()?;

    let psnr = if frames.iter().any(|f| f.image.psnr.is_infinite()) {
        Psnr(f64::INFINITY)
    } else {
        Psnr(mean(frames.iter().map(|f| f.image.psnr.0)))
    };
    let image = ImageMetricsReport {
        mean_l2: mean(frames.iter().map(|f| f.image.mean_l2)),
        sig_l2: mean(frames.iter().map(|f| f.image.sig_l2)),
        psnr,
    };
    let clouds: Vec<&CloudMetricsReport> = frames.iter().filter_map(|f| f.cloud.as_ref()).collect();
    let cloud = (!clouds.is_empty()).then(|| MeanCloud {
        l2_cd: mean(clouds.iter().map(|c| c.l2_cd)),
        sig_l2_cd: mean(clouds.iter().map(|c| c.sig_l2_cd)),
        emd: mean(clouds.iter().map(|c| c.emd)),
        fscore_1mm: mean(clouds.iter().map(|c| c.fscore_1mm)),
    });

    crate::create_dir(out)?;
    let path = out.join(CSV_FILE);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(["frame", "mean_l2", "sig_l2", "psnr", "l2_cd", "sig_l2_cd", "emd", "fscore_1mm"])
        .map_err(csv_err)?;
    for f in &frames {
        let psnr = if f.image.psnr.is_infinite() { "inf".to_string() } else { fmt_sig9(f.image.psnr.0) };
        let mut row = vec![frame_stem(f.frame), fmt_sig9(f.image.mean_l2), fmt_sig9(f.image.sig_l2), psnr];
        match &f.cloud {
            Some(c) => row.extend(c.values().map(fmt_sig9)),
            None => row.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        n_frames: frames.len(),
        image_quantile: cfg.evaluation.image_quantile,
        n_points: cfg.evaluation.n_points,
        seed: cfg.seeds.run,
        frames,
        mean: Means { image, cloud },
    };
    write_json(&out.join(REPORT_FILE), &report)
}
