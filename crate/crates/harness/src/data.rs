//! Dataset generation from both solvers and the on-disk CSV form.

use std::path::Path;

use qlmf_core::multifidelity::{Dataset, Region};
use qlmf_core::pde_classical::{burgers_hf_solve, cavity_hf_solve, gaussian_pulse, BurgersParams, CavityParams};
use qlmf_core::qlbm::{qlbm_burgers_solve, qlbm_cavity_solve, D1Q3Params, D2Q5Params, StepRecord};
use qlmf_core::{Dataset64, Field, Grid1D, Grid2D};

use crate::config::{ExperimentConfig, HeadBox, Problem};
use crate::error::{HarnessError, Result};
use crate::io::{read_table, write_table};

/// Everything one experiment trains and evaluates on.
#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    /// LF lattice solution over the whole window.
    pub lf: Dataset64,
    /// HF reference restricted to the training window and subsampled.
    pub hf_train: Dataset64,
    /// HF reference on the full grid over `[0, horizon]`.
    pub hf_eval: Dataset64,
    /// Raw LF solution interpolated onto each `hf_eval` row, same layout as
    /// `hf_eval.targets`.
    pub lf_interp: Vec<f64>,
}

impl Datasets {
    pub fn quantities(&self) -> &'static [&'static str] {
        quantities(self.lf.out_dim)
    }
}

pub fn quantities(out_dim: usize) -> &'static [&'static str] {
    if out_dim == 1 {
        &["u"]
    } else {
        &["u", "v"]
    }
}

fn coord_names(in_dim: usize) -> &'static [&'static str] {
    if in_dim == 2 {
        &["x", "t"]
    } else {
        &["x", "y", "t"]
    }
}

/// Physical box mapped onto `[-1, 1]` for every input axis (time last).
pub fn coord_box(cfg: &ExperimentConfig) -> (Vec<f64>, Vec<f64>) {
    match cfg.problem {
        Problem::Burgers => (vec![0.0, 0.0], vec![1.0, cfg.t_end]),
        Problem::Cavity => (vec![0.0, 0.0, 0.0], vec![1.0, 1.0, cfg.t_end]),
    }
}

/// Box the head inputs are mapped from (see [`HeadBox`]).
pub fn head_box(cfg: &ExperimentConfig) -> (Vec<f64>, Vec<f64>) {
    let (lo, mut hi) = coord_box(cfg);
    if cfg.head_box == HeadBox::Train {
        if let Some(t) = hi.last_mut() {
            *t = cfg.hf_cutoff;
        }
    }
    (lo, hi)
}

/// Runs both solvers and builds the three datasets.
pub fn generate_datasets(cfg: &ExperimentConfig) -> Result<Datasets> {
    generate_datasets_observed(cfg, &mut |_| {})
}

/// As [`generate_datasets`], passing every emulated lattice step to `observer`.
pub fn generate_datasets_observed(cfg: &ExperimentConfig, observer: &mut dyn FnMut(&StepRecord<'_, f64>)) -> Result<Datasets> {
    cfg.validate()?;
    match cfg.problem {
        Problem::Burgers => burgers_datasets(cfg, observer),
        Problem::Cavity => cavity_datasets(cfg, observer),
    }
}

fn lf_step_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = (cfg.t_end / cfg.lf_dt).round() as usize;
    (0..=n).map(|k| (k as f64 * cfg.lf_dt).min(cfg.t_end)).collect()
}

/// LF snapshot indices used for training: the steps nearest to the requested
/// snapshot times, each kept once.
fn lf_training_steps(cfg: &ExperimentConfig, n_steps: usize) -> Vec<usize> {
    let times: Vec<f64> = (0..cfg.n_snapshots)
        .map(|i| {
            if cfg.n_snapshots == 1 {
                cfg.t_end
            } else {
                cfg.t_end * i as f64 / (cfg.n_snapshots - 1) as f64
            }
        })
        .collect();
    let mut steps: Vec<usize> = times
        .iter()
        .map(|&t| ((t / cfg.lf_dt).round() as usize).min(n_steps))
        .collect();
    steps.dedup();
    steps
}

/// Indices `0, s, 2s, ...` below `n`, plus `n - 1` when `include_last`.
fn strided(n: usize, stride: usize, include_last: bool) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).step_by(stride).collect();
    if include_last && v.last() != Some(&(n - 1)) {
        v.push(n - 1);
    }
    v
}

/// Linear weights for `t` on the uniform time axis `k * dt`, `k <= last`.
fn time_bracket(t: f64, dt: f64, last: usize) -> (usize, usize, f64) {
    let pos = (t / dt).clamp(0.0, last as f64);
    let k0 = (pos.floor() as usize).min(last);
    let k1 = (k0 + 1).min(last);
    (k0, k1, pos - k0 as f64)
}

fn periodic_lerp(values: &[f64], length: f64, x: f64) -> f64 {
    let n = values.len();
    let pos = (x / length * n as f64).rem_euclid(n as f64);
    let j0 = (pos.floor() as usize) % n;
    let f = pos - pos.floor();
    (1.0 - f) * values[j0] + f * values[(j0 + 1) % n]
}

fn bilinear(f: &Field<f64>, x: f64, y: f64) -> f64 {
    let n = f.nx;
    let scale = (n - 1) as f64;
    let px = (x * scale).clamp(0.0, scale);
    let py = (y * scale).clamp(0.0, scale);
    let i0 = (px.floor() as usize).min(n - 2);
    let j0 = (py.floor() as usize).min(n - 2);
    let fx = px - i0 as f64;
    let fy = py - j0 as f64;
    (1.0 - fx) * (1.0 - fy) * f.at(i0, j0)
        + fx * (1.0 - fy) * f.at(i0 + 1, j0)
        + (1.0 - fx) * fy * f.at(i0, j0 + 1)
        + fx * fy * f.at(i0 + 1, j0 + 1)
}

fn burgers_datasets(cfg: &ExperimentConfig, observer: &mut dyn FnMut(&StepRecord<'_, f64>)) -> Result<Datasets> {
    let (lo, hi) = coord_box(cfg);
    let (amp, width, center) = (cfg.pulse_amplitude, cfg.pulse_width, cfg.pulse_center);

    let lf_grid = Grid1D::periodic(cfg.lf_points, 1.0).map_err(HarnessError::solver("LF grid"))?;
    let lf_u0 = gaussian_pulse(&lf_grid, amp, width, center);
    let lf_params = D1Q3Params::for_burgers(cfg.lf_points, 1.0, cfg.lf_dt, cfg.viscosity)
        .map_err(HarnessError::solver("D1Q3 setup"))?;
    let lf_all = qlbm_burgers_solve(&lf_u0, &lf_params, cfg.t_end, &lf_step_times(cfg), observer)
        .map_err(HarnessError::solver("LF Burgers solve"))?;

    let mut coords = Vec::new();
    let mut targets = Vec::new();
    for k in lf_training_steps(cfg, lf_all.len() - 1) {
        let snap = &lf_all[k];
        for (j, &u) in snap.values.iter().enumerate() {
            coords.extend([lf_grid.coord(j), snap.time]);
            targets.push(u);
        }
    }
    let lf = Dataset::from_rows(coords, targets, 2, 1, lo.clone(), hi.clone(), cfg.t_end)?;

    let hf_grid = Grid1D::periodic(cfg.hf_points, 1.0).map_err(HarnessError::solver("HF grid"))?;
    let hf_u0 = gaussian_pulse(&hf_grid, amp, width, center);
    let hf_params = BurgersParams::with_default_dt(&hf_grid, &hf_u0, cfg.viscosity, cfg.horizon);
    let hf_snaps = burgers_hf_solve(&hf_u0, &hf_grid, &hf_params, &cfg.snapshot_times())
        .map_err(HarnessError::solver("HF Burgers solve"))?;

    let keep = strided(cfg.hf_points, cfg.hf_stride, false);
    let mut coords = Vec::new();
    let mut targets = Vec::new();
    let mut lf_interp = Vec::new();
    let mut train_rows = Vec::new();
    let last = lf_all.len() - 1;
    for snap in &hf_snaps {
        let (k0, k1, w) = time_bracket(snap.time, cfg.lf_dt, last);
        for (i, &u) in snap.values.iter().enumerate() {
            let x = hf_grid.coord(i);
            if snap.time <= cfg.hf_cutoff + 1e-9 && keep.binary_search(&i).is_ok() {
                train_rows.push(targets.len());
            }
            coords.extend([x, snap.time]);
            targets.push(u);
            let a = periodic_lerp(&lf_all[k0].values, 1.0, x);
            let b = periodic_lerp(&lf_all[k1].values, 1.0, x);
            lf_interp.push((1.0 - w) * a + w * b);
        }
    }
    let hf_eval = Dataset::from_rows(coords, targets, 2, 1, lo, hi, cfg.hf_cutoff)?;
    let hf_train = hf_eval.select(&train_rows);
    Ok(Datasets {
        lf,
        hf_train,
        hf_eval,
        lf_interp,
    })
}

fn cavity_datasets(cfg: &ExperimentConfig, observer: &mut dyn FnMut(&StepRecord<'_, f64>)) -> Result<Datasets> {
    let (lo, hi) = coord_box(cfg);
    let lf_params = D2Q5Params::for_cavity(cfg.lf_points, cfg.reynolds, cfg.lf_dt, cfg.t_end)
        .map_err(HarnessError::solver("D2Q5 setup"))?;
    let lf_run = qlbm_cavity_solve(&lf_params, &lf_step_times(cfg), observer)
        .map_err(HarnessError::solver("LF cavity solve"))?;
    let lf_grid = lf_params.grid();

    let mut coords = Vec::new();
    let mut targets = Vec::new();
    for k in lf_training_steps(cfg, lf_run.snapshots.len() - 1) {
        let s = &lf_run.snapshots[k];
        push_cavity_rows(&lf_grid, s.u.time, &s.u, &s.v, &mut coords, &mut targets, |_, _| true, |_| {});
    }
    let lf = Dataset::from_rows(coords, targets, 3, 2, lo.clone(), hi.clone(), cfg.t_end)?;

    let hf_grid = Grid2D::new(cfg.hf_points).map_err(HarnessError::solver("HF grid"))?;
    let hf_params = CavityParams::new(cfg.reynolds, &hf_grid, cfg.horizon);
    let hf_run = cavity_hf_solve(&hf_params, &hf_grid, &cfg.snapshot_times()).map_err(HarnessError::solver("HF cavity solve"))?;

    let keep = strided(cfg.hf_points, cfg.hf_stride, true);
    let on_keep = |i: usize, j: usize| keep.binary_search(&i).is_ok() && keep.binary_search(&j).is_ok();
    let mut coords = Vec::new();
    let mut targets = Vec::new();
    let mut lf_interp = Vec::new();
    let mut train_rows = Vec::new();
    let last = lf_run.snapshots.len() - 1;
    for s in &hf_run.snapshots {
        let t = s.u.time;
        let (k0, k1, w) = time_bracket(t, cfg.lf_dt, last);
        let (a, b) = (&lf_run.snapshots[k0], &lf_run.snapshots[k1]);
        let in_window = t <= cfg.hf_cutoff + 1e-9;
        let first_row = targets.len() / 2;
        let mut row = first_row;
        push_cavity_rows(
            &hf_grid,
            t,
            &s.u,
            &s.v,
            &mut coords,
            &mut targets,
            |i, j| {
                if in_window && on_keep(i, j) {
                    train_rows.push(row);
                }
                row += 1;
                true
            },
            |xy| {
                let (x, y) = (xy[0], xy[1]);
                lf_interp.push((1.0 - w) * bilinear(&a.u, x, y) + w * bilinear(&b.u, x, y));
                lf_interp.push((1.0 - w) * bilinear(&a.v, x, y) + w * bilinear(&b.v, x, y));
            },
        );
    }
    let hf_eval = Dataset::from_rows(coords, targets, 3, 2, lo, hi, cfg.hf_cutoff)?;
    let hf_train = hf_eval.select(&train_rows);
    Ok(Datasets {
        lf,
        hf_train,
        hf_eval,
        lf_interp,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_cavity_rows(
    grid: &Grid2D,
    t: f64,
    u: &Field<f64>,
    v: &Field<f64>,
    coords: &mut Vec<f64>,
    targets: &mut Vec<f64>,
    mut keep: impl FnMut(usize, usize) -> bool,
    mut each: impl FnMut(&[f64]),
) {
    for j in 0..grid.n {
        for i in 0..grid.n {
            if !keep(i, j) {
                continue;
            }
            let xy = [grid.coord(i), grid.coord(j)];
            coords.extend([xy[0], xy[1], t]);
            targets.extend([u.at(i, j), v.at(i, j)]);
            each(&xy);
        }
    }
}

fn dataset_header(d: &Dataset64, extra: &[String]) -> Vec<String> {
    let mut h: Vec<String> = coord_names(d.in_dim).iter().map(|s| s.to_string()).collect();
    h.extend(quantities(d.out_dim).iter().map(|s| s.to_string()));
    h.push("region".into());
    h.extend(extra.iter().cloned());
    h
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::Train => "train",
        Region::Extrapolation => "extrap",
    }
}

/// Writes a dataset with physical coordinates; `extra` appends
/// `out_dim`-wide column groups (one value per target component).
fn write_dataset(path: &Path, d: &Dataset64, extra: &[(&str, &[f64])]) -> Result<()> {
    let mut names = Vec::new();
    for (prefix, _) in extra {
        names.extend(quantities(d.out_dim).iter().map(|q| format!("{prefix}_{q}")));
    }
    let header = dataset_header(d, &names);
    let rows = (0..d.len()).map(|i| {
        let mut r: Vec<String> = d.coord(i).iter().chain(d.target(i)).map(|v| fmt_f64(*v)).collect();
        r.push(region_name(d.regions[i]).into());
        for (_, vals) in extra {
            r.extend(vals[i * d.out_dim..(i + 1) * d.out_dim].iter().map(|v| fmt_f64(*v)));
        }
        r
    });
    write_table(path, &header, rows)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl Datasets {
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_dataset(&dir.join("lf.csv"), &self.lf, &[])?;
        write_dataset(&dir.join("hf_train.csv"), &self.hf_train, &[])?;
        write_dataset(&dir.join("hf_eval.csv"), &self.hf_eval, &[("lf_interp", &self.lf_interp)])?;
        Ok(())
    }

    /// Reads the three CSV files written by [`Self::save`].
    pub fn load(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let (lo, hi) = coord_box(cfg);
        let (in_dim, out_dim) = match cfg.problem {
            Problem::Burgers => (2, 1),
            Problem::Cavity => (3, 2),
        };
        let read = |name: &str, cutoff: f64| -> Result<(Dataset64, Vec<f64>)> {
            let path = dir.join(name);
            let (header, rows) = read_table(&path)?;
            let width = in_dim + out_dim;
            let mut coords = Vec::with_capacity(rows.len() * in_dim);
            let mut targets = Vec::with_capacity(rows.len() * out_dim);
            let mut extra = Vec::new();
            for (n, r) in rows.iter().enumerate() {
                let bad = |m: String| HarnessError::Artifact {
                    path: path.clone(),
                    message: format!("row {}: {m}", n + 1),
                };
                if r.len() != header.len() || r.len() < width + 1 {
                    return Err(bad(format!("expected {} fields, got {}", header.len(), r.len())));
                }
                let parse = |s: &String| s.parse::<f64>().map_err(|_| bad(format!("not a number: `{s}`")));
                for s in &r[..in_dim] {
                    coords.push(parse(s)?);
                }
                for s in &r[in_dim..width] {
                    targets.push(parse(s)?);
                }
                for s in &r[width + 1..] {
                    extra.push(parse(s)?);
                }
            }
            Ok((Dataset::from_rows(coords, targets, in_dim, out_dim, lo.clone(), hi.clone(), cutoff)?, extra))
        };
        let (lf, _) = read("lf.csv", cfg.t_end)?;
        let (hf_train, _) = read("hf_train.csv", cfg.hf_cutoff)?;
        let (hf_eval, lf_interp) = read("hf_eval.csv", cfg.hf_cutoff)?;
        if lf_interp.len() != hf_eval.targets.len() {
            return Err(HarnessError::Artifact {
                path: dir.join("hf_eval.csv"),
                message: "missing lf_interp columns".into(),
            });
        }
        Ok(Self {
            lf,
            hf_train,
            hf_eval,
            lf_interp,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides() {
        assert_eq!(strided(9, 4, true), vec![0, 4, 8]);
        assert_eq!(strided(10, 4, true), vec![0, 4, 8, 9]);
        assert_eq!(strided(8, 2, false), vec![0, 2, 4, 6]);
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(periodic_lerp(&v, 1.0, 0.25), 1.0);
        assert!((periodic_lerp(&v, 1.0, 0.375) - 1.5).abs() < 1e-15);
        assert!((periodic_lerp(&v, 1.0, 0.875) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let g = Grid2D::new(5).unwrap();
        let f = Field::from_fn_2d(&g, 0.0, |x, y| 2.0 * x - y + 0.5);
        for &(x, y) in &[(0.1, 0.9), (0.33, 0.5), (1.0, 1.0), (0.0, 0.0)] {
            assert!((bilinear(&f, x, y) - (2.0 * x - y + 0.5)).abs() < 1e-14);
        }
    }

    #[test]
    fn time_brackets() {
        assert_eq!(time_bracket(0.0, 0.1, 5), (0, 1, 0.0));
        let (a, b, w) = time_bracket(0.25, 0.1, 5);
        assert_eq!((a, b), (2, 3));
        assert!((w - 0.5).abs() < 1e-12);
        assert_eq!(time_bracket(0.5, 0.1, 5).0, 5);
    }

    #[test]
    fn lf_steps_are_unique() {
        let cfg = ExperimentConfig::burgers();
        let s = lf_training_steps(&cfg, 50);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.first(), Some(&0));
        assert_eq!(s.last(), Some(&50));
    }

    #[test]
    fn zero_snapshots_rejected_before_solving() {
        let mut cfg = ExperimentConfig::cavity();
        cfg.n_snapshots = 0;
        let mut calls = 0;
        let err = generate_datasets_observed(&cfg, &mut |_| calls += 1).unwrap_err();
        assert!(matches!(err, HarnessError::Config(_)));
        assert_eq!(calls, 0);
    }
}
