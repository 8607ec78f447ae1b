//! One experiment: train both stages, evaluate on the HF grid, persist.

use std::path::Path;
use std::time::Instant;

use qlmf_core::kan::KanNetwork;
use qlmf_core::metrics::relative_l2;
use qlmf_core::multifidelity::{freeze_alpha, train_lf, train_mf, Architecture, MfTrace, Region, TrainConfig};
use qlmf_core::MultifidelityModel64;
use serde::{Deserialize, Serialize};

use crate::config::{AlphaMode, ExperimentConfig, Problem};
use crate::data::{fmt_f64, generate_datasets, head_box, Datasets};
use crate::error::{HarnessError, Result};
use crate::io::write_table;

/// Relative L² on each region; a region with no samples is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionL2 {
    pub train: Option<f64>,
    pub extrap: Option<f64>,
    pub full: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityMetrics {
    pub quantity: String,
    /// Blended multifidelity prediction.
    pub mf: RegionL2,
    /// Trained `K_LF` surrogate alone.
    pub lf_surrogate: RegionL2,
    /// Raw LF solution interpolated onto the HF grid.
    pub lf_baseline: RegionL2,
}

impl QuantityMetrics {
    /// Fractional reduction of the full-window error relative to the baseline.
    pub fn reduction(&self) -> f64 {
        1.0 - self.mf.full / self.lf_baseline.full
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub problem: Problem,
    pub seed: u64,
    pub alpha: f64,
    /// Seconds spent in both training stages.
    pub wall_time_s: f64,
    pub lf_final_loss: f64,
    pub mf_final_loss: f64,
    /// Smallest and largest alpha seen over the stage-two trace.
    #[serde(default)]
    pub alpha_range: Option<[f64; 2]>,
    pub n_lf: usize,
    pub n_hf_train: usize,
    pub n_hf_eval: usize,
    pub quantities: Vec<QuantityMetrics>,
}

impl MetricsReport {
    pub fn quantity(&self, name: &str) -> Option<&QuantityMetrics> {
        self.quantities.iter().find(|q| q.quantity == name)
    }
}

/// Trained `K_LF` together with its loss trace, shareable between runs that
/// use the same LF network settings.
#[derive(Debug, Clone)]
pub struct LfStage {
    pub net: KanNetwork<f64>,
    pub trace: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: MultifidelityModel64,
    pub lf_trace: Vec<f64>,
    pub mf_trace: MfTrace<f64>,
    pub wall_time_s: f64,
}

pub fn architecture(cfg: &ExperimentConfig) -> Architecture {
    Architecture {
        lf_dims: cfg.lf_dims.clone(),
        head_dims: cfg.head_dims.clone(),
        grid_size: cfg.grid_size,
        degree: cfg.degree,
    }
}

pub fn train_config(cfg: &ExperimentConfig) -> TrainConfig<f64> {
    TrainConfig {
        lf_epochs: cfg.lf_epochs,
        hf_epochs: cfg.hf_epochs,
        learning_rate: cfg.learning_rate,
        lambda_alpha: cfg.lambda_alpha,
        alpha_exponent: 4,
        seed: cfg.seed,
    }
}

/// Stage one only.
pub fn train_lf_stage(cfg: &ExperimentConfig, data: &Datasets) -> Result<LfStage> {
    let start = Instant::now();
    let (net, trace) = train_lf(&data.lf, &train_config(cfg), &architecture(cfg)).map_err(HarnessError::training("LF stage"))?;
    Ok(LfStage {
        net,
        trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Both stages; a cached LF stage is reused (its time still counts).
pub fn train(cfg: &ExperimentConfig, data: &Datasets, lf: Option<&LfStage>) -> Result<TrainedRun> {
    let owned;
    let lf = match lf {
        Some(s) => s,
        None => {
            owned = train_lf_stage(cfg, data)?;
            &owned
        }
    };
    let start = Instant::now();
    let mut model = MultifidelityModel64::new(lf.net.clone(), &data.lf, head_box(cfg), &architecture(cfg), cfg.seed)
        .map_err(HarnessError::training("head setup"))?;
    if let AlphaMode::Fixed(a) = cfg.alpha {
        model = freeze_alpha(model, a).map_err(HarnessError::training("head setup"))?;
    }
    let mf_trace = train_mf(&mut model, &data.hf_train, &train_config(cfg)).map_err(HarnessError::training("MF stage"))?;
    Ok(TrainedRun {
        model,
        lf_trace: lf.trace.clone(),
        mf_trace,
        wall_time_s: lf.seconds + start.elapsed().as_secs_f64(),
    })
}

/// Component `c` of the rows in `rows`.
fn gather(v: &[f64], out_dim: usize, c: usize, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i * out_dim + c]).collect()
}

/// Region-split relative L² of `pred` against `reference` for component `c`.
pub fn region_l2(pred: &[f64], reference: &[f64], regions: &[Region], out_dim: usize, c: usize) -> Result<RegionL2> {
    let all: Vec<usize> = (0..regions.len()).collect();
    let pick = |r: Region| -> Vec<usize> { all.iter().copied().filter(|&i| regions[i] == r).collect() };
    let l2 = |rows: &[usize]| -> Result<Option<f64>> {
        if rows.is_empty() {
            return Ok(None);
        }
        Ok(Some(relative_l2(&gather(pred, out_dim, c, rows), &gather(reference, out_dim, c, rows))?))
    };
    Ok(RegionL2 {
        train: l2(&pick(Region::Train))?,
        extrap: l2(&pick(Region::Extrapolation))?,
        full: l2(&all)?.ok_or_else(|| HarnessError::Config("evaluation set is empty".into()))?,
    })
}

/// Model outputs on every `hf_eval` row.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub mf: Vec<f64>,
    pub lf: Vec<f64>,
}

pub fn predict(model: &MultifidelityModel64, data: &Datasets) -> Result<Predictions> {
    let (mf, lf) = model.predict(&data.hf_eval)?;
    Ok(Predictions { mf, lf })
}

pub fn metrics(
    cfg: &ExperimentConfig,
    data: &Datasets,
    pred: &Predictions,
    run: Option<&TrainedRun>,
    alpha: f64,
) -> Result<MetricsReport> {
    let d = &data.hf_eval;
    let mut quantities = Vec::new();
    for (c, q) in data.quantities().iter().enumerate() {
        quantities.push(QuantityMetrics {
            quantity: q.to_string(),
            mf: region_l2(&pred.mf, &d.targets, &d.regions, d.out_dim, c)?,
            lf_surrogate: region_l2(&pred.lf, &d.targets, &d.regions, d.out_dim, c)?,
            lf_baseline: region_l2(&data.lf_interp, &d.targets, &d.regions, d.out_dim, c)?,
        });
    }
    let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
    Ok(MetricsReport {
        name: cfg.name.clone(),
        problem: cfg.problem,
        seed: cfg.seed,
        alpha,
        wall_time_s: run.map_or(0.0, |r| r.wall_time_s),
        lf_final_loss: run.map_or(f64::NAN, |r| last(&r.lf_trace)),
        mf_final_loss: run.map_or(f64::NAN, |r| last(&r.mf_trace.loss)),
        alpha_range: run.map(|r| {
            let a = &r.mf_trace.alpha;
            [a.iter().copied().fold(f64::INFINITY, f64::min), a.iter().copied().fold(f64::NEG_INFINITY, f64::max)]
        }),
        n_lf: data.lf.len(),
        n_hf_train: data.hf_train.len(),
        n_hf_eval: d.len(),
        quantities,
    })
}

/// Errors of the raw interpolated LF solution alone, before any training.
pub fn baseline_metrics(data: &Datasets) -> Result<Vec<(String, RegionL2)>> {
    let d = &data.hf_eval;
    data.quantities()
        .iter()
        .enumerate()
        .map(|(c, q)| Ok((q.to_string(), region_l2(&data.lf_interp, &d.targets, &d.regions, d.out_dim, c)?)))
        .collect()
}

/// Generates data, trains, evaluates and writes the artifact tree under
/// `cfg.run_dir()`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let data = generate_datasets(cfg)?;
    run_with_data(cfg, &data, None, true)
}

/// As [`run_experiment`] on pre-generated data; `persist` controls whether
/// artifacts are written.
pub fn run_with_data(cfg: &ExperimentConfig, data: &Datasets, lf: Option<&LfStage>, persist: bool) -> Result<MetricsReport> {
    let run = train(cfg, data, lf)?;
    let pred = predict(&run.model, data)?;
    let report = metrics(cfg, data, &pred, Some(&run), run.model.alpha)?;
    if persist {
        write_artifacts(cfg, data, &run, &pred, &report)?;
    }
    Ok(report)
}

pub fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

pub fn write_artifacts(cfg: &ExperimentConfig, data: &Datasets, run: &TrainedRun, pred: &Predictions, report: &MetricsReport) -> Result<()> {
    let dir = cfg.run_dir();
    write_config(cfg, &dir)?;
    data.save(&dir)?;
    let meta = serde_json::json!({ "name": cfg.name, "seed": cfg.seed, "problem": cfg.problem });
    run.model.save_json(&dir.join("model.json"), &meta)?;
    write_predictions(&dir.join("predictions.csv"), data, pred)?;
    write_metrics(&dir.join("metrics.json"), report)?;
    write_loss_trace(&dir.join("loss_trace.csv"), run)?;
    Ok(())
}

pub fn write_metrics(path: &Path, report: &MetricsReport) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Coordinates, region, then `hf_*`, `mf_*`, `lf_*` and `lf_interp_*` per quantity.
pub fn write_predictions(path: &Path, data: &Datasets, pred: &Predictions) -> Result<()> {
    let d = &data.hf_eval;
    let qs = data.quantities();
    let mut header: Vec<String> = match d.in_dim {
        2 => vec!["x".into(), "t".into()],
        _ => vec!["x".into(), "y".into(), "t".into()],
    };
    header.push("region".into());
    for prefix in ["hf", "mf", "lf", "lf_interp"] {
        header.extend(qs.iter().map(|q| format!("{prefix}_{q}")));
    }
    let rows = (0..d.len()).map(|i| {
        let mut r: Vec<String> = d.coord(i).iter().map(|v| fmt_f64(*v)).collect();
        r.push(
            match d.regions[i] {
                Region::Train => "train",
                Region::Extrapolation => "extrap",
            }
            .into(),
        );
        let span = i * d.out_dim..(i + 1) * d.out_dim;
        for src in [&d.targets, &pred.mf, &pred.lf, &data.lf_interp] {
            r.extend(src[span.clone()].iter().map(|v| fmt_f64(*v)));
        }
        r
    });
    write_table(path, &header, rows)
}

pub fn write_loss_trace(path: &Path, run: &TrainedRun) -> Result<()> {
    let header = ["stage", "epoch", "loss", "alpha"].map(String::from);
    let lf = run
        .lf_trace
        .iter()
        .enumerate()
        .map(|(e, l)| vec!["lf".to_string(), e.to_string(), fmt_f64(*l), String::new()]);
    let mf = run
        .mf_trace
        .loss
        .iter()
        .zip(&run.mf_trace.alpha)
        .enumerate()
        .map(|(e, (l, a))| vec!["mf".to_string(), e.to_string(), fmt_f64(*l), fmt_f64(*a)]);
    write_table(path, &header, lf.chain(mf))
}

/// Recomputes metrics for an existing run directory from `model.json` and
/// the persisted datasets.
pub fn evaluate_run(dir: &Path) -> Result<MetricsReport> {
    let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("config.json"))?)?;
    let data = Datasets::load(dir, &cfg)?;
    let model = MultifidelityModel64::load_json(&dir.join("model.json"))?;
    let pred = predict(&model, &data)?;
    let mut report = metrics(&cfg, &data, &pred, None, model.alpha)?;
    if let Ok(old) = std::fs::read_to_string(dir.join("metrics.json")) {
        if let Ok(prev) = serde_json::from_str::<MetricsReport>(&old) {
            report.wall_time_s = prev.wall_time_s;
            report.lf_final_loss = prev.lf_final_loss;
            report.mf_final_loss = prev.mf_final_loss;
            report.alpha_range = prev.alpha_range;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_region_is_absent() {
        let pred = [1.0, 2.0, 3.0];
        let reference = [1.0, 2.0, 4.0];
        let r = region_l2(&pred, &reference, &[Region::Train; 3], 1, 0).unwrap();
        assert!(r.extrap.is_none());
        assert_eq!(r.train, Some(r.full));
    }

    #[test]
    fn full_lies_between_regions() {
        let pred = [1.0, 0.0, 2.0, 2.5, 0.1, 3.0];
        let reference = [1.2, 0.3, 2.0, 2.0, 0.2, 3.5];
        let regions = [Region::Train, Region::Train, Region::Train, Region::Extrapolation, Region::Extrapolation, Region::Extrapolation];
        let r = region_l2(&pred, &reference, &regions, 1, 0).unwrap();
        let (a, b) = (r.train.unwrap(), r.extrap.unwrap());
        assert!(a.min(b) <= r.full && r.full <= a.max(b));
    }

    #[test]
    fn components_are_separate() {
        // Two components interleaved; only the second differs.
        let pred = [1.0, 1.0, 2.0, 1.0];
        let reference = [1.0, 0.0, 2.0, 0.0];
        let regions = [Region::Train, Region::Train];
        assert_eq!(region_l2(&pred, &reference, &regions, 2, 0).unwrap().full, 0.0);
        assert!(region_l2(&pred, &reference, &regions, 2, 1).is_err());
    }
}
