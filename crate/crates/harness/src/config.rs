//! Experiment configuration as a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default for the chosen problem, so a file only needs the keys it changes.
//! Lists are comma separated (`head_dims = 3,12,12,1`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Burgers,
    Cavity,
}

impl FromStr for Problem {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "burgers" => Ok(Self::Burgers),
            "cavity" => Ok(Self::Cavity),
            other => Err(HarnessError::Config(format!("unknown problem `{other}` (burgers | cavity)"))),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Burgers => "burgers",
            Self::Cavity => "cavity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Learned,
    Fixed(f64),
}

impl FromStr for AlphaMode {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("learned") {
            return Ok(Self::Learned);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| HarnessError::Config(format!("alpha must be `learned` or a number, got `{s}`")))?;
        Ok(Self::Fixed(v))
    }
}

/// Time range the head inputs are mapped from. `Full` uses the whole
/// window, so late times stay inside the spline domain; `Train` uses the
/// reference training window, so times past the cutoff clamp to its edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadBox {
    Full,
    Train,
}

impl FromStr for HeadBox {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "train" => Ok(Self::Train),
            other => Err(HarnessError::Config(format!("head_box must be `full` or `train`, got `{other}`"))),
        }
    }
}

impl fmt::Display for HeadBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Train => "train",
        })
    }
}

impl fmt::Display for AlphaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Learned => f.write_str("learned"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: Problem,
    pub seed: u64,
    /// LF lattice sites per axis.
    pub lf_points: usize,
    /// HF grid points per axis.
    pub hf_points: usize,
    /// End of the LF simulation window.
    pub t_end: f64,
    /// HF training data is restricted to `t <= hf_cutoff`.
    pub hf_cutoff: f64,
    /// Evaluation runs over `[0, horizon]`.
    pub horizon: f64,
    pub n_snapshots: usize,
    /// Physical time per LF lattice step.
    pub lf_dt: f64,
    pub viscosity: f64,
    pub reynolds: f64,
    pub pulse_amplitude: f64,
    pub pulse_width: f64,
    pub pulse_center: f64,
    pub lf_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub grid_size: usize,
    pub degree: usize,
    pub lambda_alpha: f64,
    pub alpha: AlphaMode,
    pub lf_epochs: usize,
    pub hf_epochs: usize,
    pub learning_rate: f64,
    /// Keep every `hf_stride`-th HF grid point per spatial axis for training.
    pub hf_stride: usize,
    pub head_box: HeadBox,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn burgers() -> Self {
        Self {
            name: "burgers".into(),
            problem: Problem::Burgers,
            seed: 0,
            lf_points: 16,
            hf_points: 256,
            t_end: 0.5,
            hf_cutoff: 0.25,
            horizon: 0.5,
            n_snapshots: 64,
            lf_dt: 0.01,
            viscosity: 0.01,
            reynolds: 100.0,
            pulse_amplitude: 0.5,
            pulse_width: 40.0,
            pulse_center: 0.35,
            lf_dims: vec![2, 6, 6, 1],
            head_dims: vec![3, 12, 12, 1],
            grid_size: 5,
            degree: 3,
            lambda_alpha: 0.0,
            alpha: AlphaMode::Learned,
            lf_epochs: 1000,
            hf_epochs: 4000,
            learning_rate: 1e-3,
            hf_stride: 2,
            head_box: HeadBox::Full,
            out_dir: PathBuf::from("runs"),
        }
    }

    pub fn cavity() -> Self {
        Self {
            name: "cavity".into(),
            problem: Problem::Cavity,
            lf_points: 16,
            hf_points: 64,
            t_end: 3.0,
            hf_cutoff: 2.0,
            horizon: 3.0,
            n_snapshots: 31,
            lf_dt: 0.02,
            lf_dims: vec![3, 8, 8, 2],
            head_dims: vec![5, 10, 10, 2],
            lambda_alpha: 1e-5,
            head_box: HeadBox::Train,
            ..Self::burgers()
        }
    }

    pub fn for_problem(p: Problem) -> Self {
        match p {
            Problem::Burgers => Self::burgers(),
            Problem::Cavity => Self::cavity(),
        }
    }

    /// Loads a config file; `problem` (default burgers) selects the defaults
    /// the remaining keys override.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let problem = match pairs.get("problem") {
            Some(p) => p.parse()?,
            None => Problem::Burgers,
        };
        let mut cfg = Self::for_problem(problem);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "name" => self.name = v.to_string(),
            "problem" => self.problem = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            "lf_points" => self.lf_points = num(key, v)?,
            "hf_points" => self.hf_points = num(key, v)?,
            "t_end" => self.t_end = num(key, v)?,
            "hf_cutoff" => self.hf_cutoff = num(key, v)?,
            "horizon" => self.horizon = num(key, v)?,
            "n_snapshots" => self.n_snapshots = num(key, v)?,
            "lf_dt" => self.lf_dt = num(key, v)?,
            "viscosity" => self.viscosity = num(key, v)?,
            "reynolds" => self.reynolds = num(key, v)?,
            "pulse_amplitude" => self.pulse_amplitude = num(key, v)?,
            "pulse_width" => self.pulse_width = num(key, v)?,
            "pulse_center" => self.pulse_center = num(key, v)?,
            "lf_dims" => self.lf_dims = list(key, v)?,
            "head_dims" => self.head_dims = list(key, v)?,
            "grid_size" => self.grid_size = num(key, v)?,
            "degree" => self.degree = num(key, v)?,
            "lambda_alpha" => self.lambda_alpha = num(key, v)?,
            "alpha" => self.alpha = v.parse()?,
            "lf_epochs" => self.lf_epochs = num(key, v)?,
            "hf_epochs" => self.hf_epochs = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "hf_stride" => self.hf_stride = num(key, v)?,
            "head_box" => self.head_box = v.parse()?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            other => return Err(HarnessError::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` strings, as given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override `{o}` is not key=value")))?;
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n_snapshots == 0 {
            return bad("n_snapshots must be positive".into());
        }
        if !(self.t_end > 0.0 && self.horizon > 0.0) {
            return bad("t_end and horizon must be positive".into());
        }
        if !(self.hf_cutoff >= 0.0 && self.hf_cutoff <= self.horizon && self.horizon <= self.t_end + 1e-12) {
            return bad(format!(
                "need 0 <= hf_cutoff ({}) <= horizon ({}) <= t_end ({})",
                self.hf_cutoff, self.horizon, self.t_end
            ));
        }
        if !(self.lf_dt > 0.0 && self.lf_dt <= self.t_end) {
            return bad(format!("lf_dt {} must lie in (0, t_end]", self.lf_dt));
        }
        if self.lf_points < 3 || self.hf_points < 3 {
            return bad("grids need at least 3 points per axis".into());
        }
        if self.problem == Problem::Burgers && !self.lf_points.is_power_of_two() {
            return bad(format!("Burgers lf_points {} must be a power of two", self.lf_points));
        }
        if self.hf_stride == 0 {
            return bad("hf_stride must be positive".into());
        }
        let n_coord = match self.problem {
            Problem::Burgers => 2,
            Problem::Cavity => 3,
        };
        let n_out = n_coord - 1;
        if self.lf_dims.len() < 2 || self.lf_dims[0] != n_coord || *self.lf_dims.last().unwrap_or(&0) != n_out {
            return bad(format!("lf_dims {:?} must map {n_coord} inputs to {n_out} outputs", self.lf_dims));
        }
        if self.head_dims.len() < 2 || self.head_dims[0] != n_coord + n_out || *self.head_dims.last().unwrap_or(&0) != n_out {
            return bad(format!(
                "head_dims {:?} must map {} inputs to {n_out} outputs",
                self.head_dims,
                n_coord + n_out
            ));
        }
        if self.lf_dims.contains(&0) || self.head_dims.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if self.grid_size == 0 || self.degree == 0 || self.degree > qlmf_core::kan::MAX_DEGREE {
            return bad(format!("invalid spline grid {} / degree {}", self.grid_size, self.degree));
        }
        if !(self.lambda_alpha >= 0.0) {
            return bad("lambda_alpha must be non-negative".into());
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("fixed alpha {a} outside [0, 1]"));
            }
        }
        if self.lf_epochs == 0 || self.hf_epochs == 0 || !(self.learning_rate > 0.0) {
            return bad("epochs and learning rate must be positive".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("run name `{}` must be a plain directory name", self.name));
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.name)
    }

    /// Snapshot times, uniform over `[0, horizon]`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        if self.n_snapshots == 1 {
            return vec![self.horizon];
        }
        (0..self.n_snapshots)
            .map(|i| self.horizon * i as f64 / (self.n_snapshots - 1) as f64)
            .collect()
    }

    /// Flat text form accepted by [`Self::parse`].
    pub fn to_text(&self) -> String {
        let join = |d: &[usize]| d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        let rows = [
            ("name", self.name.clone()),
            ("problem", self.problem.to_string()),
            ("seed", self.seed.to_string()),
            ("lf_points", self.lf_points.to_string()),
            ("hf_points", self.hf_points.to_string()),
            ("t_end", self.t_end.to_string()),
            ("hf_cutoff", self.hf_cutoff.to_string()),
            ("horizon", self.horizon.to_string()),
            ("n_snapshots", self.n_snapshots.to_string()),
            ("lf_dt", self.lf_dt.to_string()),
            ("viscosity", self.viscosity.to_string()),
            ("reynolds", self.reynolds.to_string()),
            ("pulse_amplitude", self.pulse_amplitude.to_string()),
            ("pulse_width", self.pulse_width.to_string()),
            ("pulse_center", self.pulse_center.to_string()),
            ("lf_dims", join(&self.lf_dims)),
            ("head_dims", join(&self.head_dims)),
            ("grid_size", self.grid_size.to_string()),
            ("degree", self.degree.to_string()),
            ("lambda_alpha", self.lambda_alpha.to_string()),
            ("alpha", self.alpha.to_string()),
            ("lf_epochs", self.lf_epochs.to_string()),
            ("hf_epochs", self.hf_epochs.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("hf_stride", self.hf_stride.to_string()),
            ("head_box", self.head_box.to_string()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", lineno + 1)))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(HarnessError::Config(format!("line {}: duplicate key `{}`", lineno + 1, k.trim())));
        }
    }
    Ok(out)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| HarnessError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|p| num(key, p.trim())).collect()
}

/// A named table row: a label and the overrides it applies to the base config.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSpec {
    pub id: &'static str,
    pub label: &'static str,
    pub overrides: Vec<(&'static str, &'static str)>,
}

fn row(id: &'static str, label: &'static str, overrides: &[(&'static str, &'static str)]) -> RowSpec {
    RowSpec {
        id,
        label,
        overrides: overrides.to_vec(),
    }
}

/// Rows of the Burgers study: blend regularization (B1-B5) and grid size (B6, B7).
pub fn b_series() -> Vec<RowSpec> {
    vec![
        row("B1", "lambda_alpha=0", &[("lambda_alpha", "0")]),
        row("B2", "lambda_alpha=1e-6", &[("lambda_alpha", "1e-6")]),
        row("B3", "lambda_alpha=1e-5", &[("lambda_alpha", "1e-5")]),
        row("B4", "lambda_alpha=1e-4", &[("lambda_alpha", "1e-4")]),
        row("B5", "alpha=1 (fixed)", &[("lambda_alpha", "0"), ("alpha", "1")]),
        row("B6", "G=3", &[("lambda_alpha", "0"), ("grid_size", "3")]),
        row("B7", "G=7", &[("lambda_alpha", "0"), ("grid_size", "7")]),
    ]
}

/// Rows of the cavity study: blend regularization (C1-C5) and width (C6-C8).
pub fn c_series() -> Vec<RowSpec> {
    vec![
        row("C1", "lambda_alpha=1e-3", &[("lambda_alpha", "1e-3")]),
        row("C2", "lambda_alpha=1e-6", &[("lambda_alpha", "1e-6")]),
        row("C3", "lambda_alpha=1e-5", &[("lambda_alpha", "1e-5")]),
        row("C4", "lambda_alpha=1e-4", &[("lambda_alpha", "1e-4")]),
        row("C5", "alpha=1 (fixed)", &[("lambda_alpha", "0"), ("alpha", "1")]),
        row("C6", "[3,5,5,2]/[5,5,5,2]", &[("lf_dims", "3,5,5,2"), ("head_dims", "5,5,5,2")]),
        row("C7", "[3,10,10,2]/[5,10,10,2]", &[("lf_dims", "3,10,10,2"), ("head_dims", "5,10,10,2")]),
        row("C8", "[3,15,15,2]/[5,15,15,2]", &[("lf_dims", "3,15,15,2"), ("head_dims", "5,15,15,2")]),
    ]
}

/// Looks up a row id (case-insensitive) in either series.
pub fn find_row(id: &str) -> Option<(Problem, RowSpec)> {
    let id = id.to_ascii_uppercase();
    b_series()
        .into_iter()
        .map(|r| (Problem::Burgers, r))
        .chain(c_series().into_iter().map(|r| (Problem::Cavity, r)))
        .find(|(_, r)| r.id == id)
}

impl RowSpec {
    /// Base config for the row's problem with the row's overrides applied;
    /// the run is named after the row and seed.
    pub fn config(&self, base: &ExperimentConfig, seed: u64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        for (k, v) in &self.overrides {
            cfg.set(k, v)?;
        }
        cfg.seed = seed;
        cfg.name = format!("{}_seed{seed}", self.id);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::burgers().validate().unwrap();
        ExperimentConfig::cavity().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::cavity();
        c.alpha = AlphaMode::Fixed(1.0);
        c.lambda_alpha = 1e-4;
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_problem_defaults() {
        let c = ExperimentConfig::parse("# cavity run\nproblem = cavity\n\nseed = 3\n").unwrap();
        assert_eq!(c.problem, Problem::Cavity);
        assert_eq!(c.seed, 3);
        assert_eq!(c.head_dims, vec![5, 10, 10, 2]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("nonsense").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("n_snapshots = 0").is_err());
        assert!(ExperimentConfig::parse("hf_cutoff = 0.6").is_err());
        assert!(ExperimentConfig::parse("alpha = 1.5").is_err());
        assert!(ExperimentConfig::parse("head_dims = 2,12,1").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(ExperimentConfig::parse("head_box = sideways").is_err());
    }

    #[test]
    fn head_box_defaults_per_problem() {
        assert_eq!(ExperimentConfig::burgers().head_box, HeadBox::Full);
        assert_eq!(ExperimentConfig::cavity().head_box, HeadBox::Train);
        assert_eq!(ExperimentConfig::parse("head_box = Train").unwrap().head_box, HeadBox::Train);
    }

    #[test]
    fn cutoff_may_equal_horizon() {
        let c = ExperimentConfig::parse("hf_cutoff = 0.5").unwrap();
        assert_eq!(c.hf_cutoff, c.horizon);
    }

    #[test]
    fn rows_are_expressible() {
        for r in b_series() {
            r.config(&ExperimentConfig::burgers(), 0).unwrap();
        }
        for r in c_series() {
            r.config(&ExperimentConfig::cavity(), 0).unwrap();
        }
        let (p, r) = find_row("b5").unwrap();
        assert_eq!(p, Problem::Burgers);
        let c = r.config(&ExperimentConfig::burgers(), 2).unwrap();
        assert_eq!(c.alpha, AlphaMode::Fixed(1.0));
        assert_eq!(c.name, "B5_seed2");
    }

    #[test]
    fn snapshot_times_are_uniform() {
        let t = ExperimentConfig::cavity().snapshot_times();
        assert_eq!(t.len(), 31);
        assert!((t[10] - 1.0).abs() < 1e-15);
        assert_eq!(t[30], 3.0);
    }
}
