//! Multi-seed reproduction of the B and C result tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::config::{b_series, c_series, ExperimentConfig, Problem, RowSpec};
use crate::data::{fmt_f64, generate_datasets};
use crate::error::{HarnessError, Result};
use crate::experiment::{baseline_metrics, run_with_data, train_lf_stage, LfStage, MetricsReport, RegionL2};
use crate::io::write_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    B,
    C,
}

impl FromStr for Series {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            other => Err(HarnessError::Config(format!("unknown series `{other}` (b | c)"))),
        }
    }
}

impl Series {
    pub fn rows(self) -> Vec<RowSpec> {
        match self {
            Self::B => b_series(),
            Self::C => c_series(),
        }
    }

    pub fn problem(self) -> Problem {
        match self {
            Self::B => Problem::Burgers,
            Self::C => Problem::Cavity,
        }
    }
}

/// Summary of one metric over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub spread: f64,
    pub median: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let spread = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        Some(Self { mean, spread, median, n })
    }
}

#[derive(Debug, Clone)]
pub struct RowResult {
    pub id: String,
    pub label: String,
    pub reports: Vec<MetricsReport>,
    /// `(seed, message)` for every failed run of this row.
    pub failures: Vec<(u64, String)>,
}

impl RowResult {
    /// Per-seed values of a metric, skipping absent ones.
    pub fn values(&self, quantity: &str, pick: impl Fn(&RegionL2) -> Option<f64>) -> Vec<f64> {
        self.reports
            .iter()
            .filter_map(|r| r.quantity(quantity).and_then(|q| pick(&q.mf)))
            .collect()
    }

    pub fn stat(&self, quantity: &str, pick: impl Fn(&RegionL2) -> Option<f64>) -> Option<Stat> {
        Stat::of(&self.values(quantity, pick))
    }

    pub fn alpha(&self) -> Option<Stat> {
        Stat::of(&self.reports.iter().map(|r| r.alpha).collect::<Vec<_>>())
    }

    pub fn time(&self) -> Option<Stat> {
        Stat::of(&self.reports.iter().map(|r| r.wall_time_s).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
pub struct TableArtifact {
    pub series: Series,
    pub quantities: Vec<String>,
    pub baseline: Vec<(String, RegionL2)>,
    pub rows: Vec<RowResult>,
    pub csv_path: PathBuf,
    pub text: String,
}

impl TableArtifact {
    pub fn row(&self, id: &str) -> Option<&RowResult> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn baseline(&self, quantity: &str) -> Option<&RegionL2> {
        self.baseline.iter().find(|(q, _)| q == quantity).map(|(_, r)| r)
    }
}

#[derive(Debug, Clone)]
pub struct TableOptions {
    pub base: ExperimentConfig,
    /// Only these row ids; all rows when empty.
    pub only: Vec<String>,
    pub jobs: usize,
    /// Write per-run artifact trees as well as the table.
    pub persist_runs: bool,
    pub out_dir: PathBuf,
}

impl TableOptions {
    pub fn new(series: Series) -> Self {
        let base = ExperimentConfig::for_problem(series.problem());
        Self {
            out_dir: base.out_dir.join(format!("table_{}", series_name(series))),
            base,
            only: Vec::new(),
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            persist_runs: false,
        }
    }
}

fn series_name(s: Series) -> &'static str {
    match s {
        Series::B => "b",
        Series::C => "c",
    }
}

// Rows that differ only in head settings share one LF network per seed.
fn lf_key(cfg: &ExperimentConfig) -> String {
    format!(
        "{:?}|{}|{}|{}|{}|{}",
        cfg.lf_dims, cfg.grid_size, cfg.degree, cfg.lf_epochs, cfg.learning_rate, cfg.seed
    )
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
fn pool<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
            });
        }
    });
    out.into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Runs every selected row of `series` for every seed and writes
/// `table.csv` and `table.txt` under `opts.out_dir`.
pub fn reproduce_tables(series: Series, seeds: &[u64], opts: &TableOptions) -> Result<TableArtifact> {
    if seeds.is_empty() {
        return Err(HarnessError::Config("seed list is empty".into()));
    }
    if opts.base.problem != series.problem() {
        return Err(HarnessError::Config(format!(
            "series {} needs a {} base config",
            series_name(series),
            series.problem()
        )));
    }
    let rows: Vec<RowSpec> = series
        .rows()
        .into_iter()
        .filter(|r| opts.only.is_empty() || opts.only.iter().any(|o| o.eq_ignore_ascii_case(r.id)))
        .collect();
    if rows.is_empty() {
        return Err(HarnessError::Config(format!("no rows match {:?}", opts.only)));
    }
    let mut base = opts.base.clone();
    base.out_dir = opts.out_dir.join("runs");
    let data = generate_datasets(&base)?;
    let baseline = baseline_metrics(&data)?;

    let mut jobs: Vec<(usize, ExperimentConfig)> = Vec::new();
    let mut failures: Vec<Vec<(u64, String)>> = vec![Vec::new(); rows.len()];
    for (ri, row) in rows.iter().enumerate() {
        for &seed in seeds {
            match row.config(&base, seed) {
                Ok(c) => jobs.push((ri, c)),
                Err(e) => failures[ri].push((seed, e.to_string())),
            }
        }
    }

    let mut lf_jobs: Vec<&ExperimentConfig> = Vec::new();
    for (_, c) in &jobs {
        if !lf_jobs.iter().any(|o| lf_key(o) == lf_key(c)) {
            lf_jobs.push(c);
        }
    }
    let lf_stages: HashMap<String, std::result::Result<LfStage, String>> = lf_jobs
        .iter()
        .zip(pool(&lf_jobs, opts.jobs, |c| train_lf_stage(c, &data).map_err(|e| e.to_string())))
        .map(|(c, r)| (lf_key(c), r))
        .collect();

    let results = pool(&jobs, opts.jobs, |(_, c)| match &lf_stages[&lf_key(c)] {
        Ok(lf) => run_with_data(c, &data, Some(lf), opts.persist_runs).map_err(|e| e.to_string()),
        Err(e) => Err(e.clone()),
    });

    let mut out_rows: Vec<RowResult> = rows
        .iter()
        .zip(failures)
        .map(|(r, failures)| RowResult {
            id: r.id.to_string(),
            label: r.label.to_string(),
            reports: Vec::new(),
            failures,
        })
        .collect();
    for ((ri, c), res) in jobs.iter().zip(results) {
        match res {
            Ok(rep) => out_rows[*ri].reports.push(rep),
            Err(e) => out_rows[*ri].failures.push((c.seed, e)),
        }
    }

    let quantities: Vec<String> = data.quantities().iter().map(|s| s.to_string()).collect();
    let mut artifact = TableArtifact {
        series,
        quantities,
        baseline,
        rows: out_rows,
        csv_path: opts.out_dir.join("table.csv"),
        text: String::new(),
    };
    artifact.text = render_text(&artifact, seeds);
    write_csv(&artifact)?;
    std::fs::write(opts.out_dir.join("table.txt"), &artifact.text)?;
    Ok(artifact)
}

const METRICS: [&str; 3] = ["train", "extrap", "full"];

fn pick(metric: &str) -> impl Fn(&RegionL2) -> Option<f64> + '_ {
    move |r: &RegionL2| match metric {
        "train" => r.train,
        "extrap" => r.extrap,
        _ => Some(r.full),
    }
}

fn write_csv(t: &TableArtifact) -> Result<()> {
    let header = ["row", "label", "quantity", "metric", "mean", "spread", "median", "n", "failures"].map(String::from);
    let mut lines: Vec<Vec<String>> = Vec::new();
    let cell = |row: &str, label: &str, q: &str, m: &str, s: Option<Stat>, fails: usize| -> Vec<String> {
        let (mean, spread, median, n) = match s {
            Some(s) => (fmt_f64(s.mean), fmt_f64(s.spread), fmt_f64(s.median), s.n.to_string()),
            None => (String::new(), String::new(), String::new(), "0".into()),
        };
        vec![row.into(), label.into(), q.into(), m.into(), mean, spread, median, n, fails.to_string()]
    };
    for (q, r) in &t.baseline {
        for m in METRICS {
            let v: Vec<f64> = pick(m)(r).into_iter().collect();
            lines.push(cell("LF", "LF baseline", q, m, Stat::of(&v), 0));
        }
    }
    for row in &t.rows {
        let f = row.failures.len();
        for q in &t.quantities {
            for m in METRICS {
                lines.push(cell(&row.id, &row.label, q, m, row.stat(q, pick(m)), f));
            }
        }
        lines.push(cell(&row.id, &row.label, "", "alpha", row.alpha(), f));
        lines.push(cell(&row.id, &row.label, "", "time_s", row.time(), f));
    }
    write_table(&t.csv_path, &header, lines)
}

fn fmt_stat(s: Option<Stat>, digits: usize) -> String {
    match s {
        Some(s) if s.n > 1 => format!("{:.*}±{:.*}", digits, s.mean, digits, s.spread),
        Some(s) => format!("{:.*}", digits, s.mean),
        None => "-".into(),
    }
}

fn render_text(t: &TableArtifact, seeds: &[u64]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Series {} ({} seeds: {:?}); cells are mean±std, medians in table.csv",
        series_name(t.series).to_uppercase(),
        seeds.len(),
        seeds
    );
    let mut header = format!("{:<5} {:<24}", "row", "config");
    for q in &t.quantities {
        for m in METRICS {
            let name = if t.quantities.len() > 1 { format!("{m}_{q}") } else { m.to_string() };
            let _ = write!(header, " {name:>17}");
        }
    }
    let _ = write!(header, " {:>15} {:>13}", "alpha", "time_s");
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));

    let mut line = format!("{:<5} {:<24}", "LF", "LF baseline");
    for q in &t.quantities {
        let r = t.baseline(q);
        for m in METRICS {
            let v = r.and_then(pick(m));
            let _ = write!(line, " {:>17}", v.map_or("-".into(), |v| format!("{v:.4}")));
        }
    }
    let _ = write!(line, " {:>15} {:>13}", "-", "-");
    let _ = writeln!(out, "{line}");

    for row in &t.rows {
        let mut line = format!("{:<5} {:<24}", row.id, row.label);
        for q in &t.quantities {
            for m in METRICS {
                let _ = write!(line, " {:>17}", fmt_stat(row.stat(q, pick(m)), 4));
            }
        }
        let _ = write!(line, " {:>15} {:>13}", fmt_stat(row.alpha(), 3), fmt_stat(row.time(), 1));
        if !row.failures.is_empty() {
            let _ = write!(line, "  FAILED x{}", row.failures.len());
        }
        let _ = writeln!(out, "{line}");
    }
    for row in &t.rows {
        for (seed, msg) in &row.failures {
            let _ = writeln!(out, "! {} seed {seed}: {msg}", row.id);
        }
    }
    out
}

/// Parses a comma-separated seed list such as `0,1,2`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| HarnessError::Config(format!("bad seed `{p}`"))))
        .collect()
}

/// Directory for a table given a base output directory.
pub fn table_dir(out_dir: &Path, series: Series) -> PathBuf {
    out_dir.join(format!("table_{}", series_name(series)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        let s = Stat::of(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.0);
        assert_eq!(s.mean, 2.0);
        assert!((s.spread - 1.0).abs() < 1e-15);
        assert_eq!(Stat::of(&[1.0, 4.0]).unwrap().median, 2.5);
        assert!(Stat::of(&[]).is_none());
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let opts = TableOptions::new(Series::B);
        assert!(matches!(reproduce_tables(Series::B, &[], &opts), Err(HarnessError::Config(_))));
    }

    #[test]
    fn pool_keeps_order() {
        let v: Vec<u32> = (0..37).collect();
        assert_eq!(pool(&v, 4, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_seeds("a").is_err());
        assert!(parse_seeds("").unwrap().is_empty());
    }
}
