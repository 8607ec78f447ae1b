//! Two-stage multifidelity training. Stage one fits `K_LF` to the lattice
//! data over the whole window. Stage two freezes it and fits the blend
//! `alpha * K_nl + (1 - alpha) * K_lin` on the sparse reference data, where
//! both heads see the coordinates plus the normalized `K_LF` output.
//!
//! The model works on physical coordinates. `K_LF` sees them mapped by the
//! LF data box; the heads see them mapped by a caller-supplied box.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kan::{seeded_rng, AdamState, KanNetwork, SplineSpec};
use crate::scalar::Real;

/// Which side of the reference-data cutoff a sample falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Train,
    Extrapolation,
}

/// Row-major samples: `inputs[i * in_dim..]` holds normalized coordinates
/// (time last), `targets[i * out_dim..]` the field values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub inputs: Vec<T>,
    pub targets: Vec<T>,
    /// Physical coordinates before normalization, same layout as `inputs`.
    pub coords: Vec<T>,
    pub regions: Vec<Region>,
    /// Per-axis box used for the affine map onto `[-1, 1]`.
    pub coord_min: Vec<T>,
    pub coord_max: Vec<T>,
}

/// Maps `v` from `[lo, hi]` onto `[-1, 1]`.
#[inline]
pub fn normalize<T: Real>(v: T, lo: T, hi: T) -> T {
    if hi > lo {
        T::lit(2.0) * (v - lo) / (hi - lo) - T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset from physical coordinate rows (time last). Rows with
    /// time `<= cutoff` are tagged [`Region::Train`].
    pub fn from_rows(
        coords: Vec<T>,
        targets: Vec<T>,
        in_dim: usize,
        out_dim: usize,
        coord_min: Vec<T>,
        coord_max: Vec<T>,
        cutoff: T,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 || !coords.len().is_multiple_of(in_dim) {
            return Err(Error::Invalid("dataset coordinate rows do not divide evenly".into()));
        }
        let n = coords.len() / in_dim;
        if targets.len() != n * out_dim {
            return Err(Error::Dimension {
                context: "dataset targets",
                expected: n * out_dim,
                got: targets.len(),
            });
        }
        if coord_min.len() != in_dim || coord_max.len() != in_dim {
            return Err(Error::Dimension {
                context: "dataset normalization box",
                expected: in_dim,
                got: coord_min.len().min(coord_max.len()),
            });
        }
        let inputs = coords
            .chunks(in_dim)
            .flat_map(|row| (0..in_dim).map(|a| normalize(row[a], coord_min[a], coord_max[a])).collect::<Vec<_>>())
            .collect();
        let slack = T::lit(1e-9);
        let regions = coords
            .chunks(in_dim)
            .map(|row| if row[in_dim - 1] <= cutoff + slack { Region::Train } else { Region::Extrapolation })
            .collect();
        Ok(Self {
            in_dim,
            out_dim,
            inputs,
            targets,
            coords,
            regions,
            coord_min,
            coord_max,
        })
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.in_dim..(i + 1) * self.in_dim]
    }

    pub fn target(&self, i: usize) -> &[T] {
        &self.targets[i * self.out_dim..(i + 1) * self.out_dim]
    }

    pub fn coord(&self, i: usize) -> &[T] {
        &self.coords[i * self.in_dim..(i + 1) * self.in_dim]
    }

    /// Rows tagged with `region`, keeping the normalization box.
    pub fn restrict(&self, region: Region) -> Self {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.regions[i] == region).collect();
        self.select(&keep)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let mut out = Self {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            inputs: Vec::with_capacity(rows.len() * self.in_dim),
            targets: Vec::with_capacity(rows.len() * self.out_dim),
            coords: Vec::with_capacity(rows.len() * self.in_dim),
            regions: Vec::with_capacity(rows.len()),
            coord_min: self.coord_min.clone(),
            coord_max: self.coord_max.clone(),
        };
        for &i in rows {
            out.inputs.extend_from_slice(self.input(i));
            out.targets.extend_from_slice(self.target(i));
            out.coords.extend_from_slice(self.coord(i));
            out.regions.push(self.regions[i]);
        }
        out
    }

    /// Per-component min and max of the targets.
    pub fn target_range(&self) -> (Vec<T>, Vec<T>) {
        let mut lo = vec![T::infinity(); self.out_dim];
        let mut hi = vec![T::neg_infinity(); self.out_dim];
        for row in self.targets.chunks(self.out_dim) {
            for c in 0..self.out_dim {
                lo[c] = lo[c].min(row[c]);
                hi[c] = hi[c].max(row[c]);
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub lf_epochs: usize,
    pub hf_epochs: usize,
    pub learning_rate: T,
    pub lambda_alpha: T,
    pub alpha_exponent: i32,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            lf_epochs: 1000,
            hf_epochs: 4000,
            learning_rate: T::lit(1e-3),
            lambda_alpha: T::zero(),
            alpha_exponent: 4,
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.lf_epochs == 0 || self.hf_epochs == 0 {
            return Err(Error::Invalid("epoch counts must be positive".into()));
        }
        if !(self.learning_rate > T::zero()) {
            return Err(Error::Invalid("learning rate must be positive".into()));
        }
        if !(self.lambda_alpha >= T::zero()) {
            return Err(Error::Invalid("lambda_alpha must be non-negative".into()));
        }
        if self.alpha_exponent < 1 {
            return Err(Error::Invalid("alpha exponent must be at least 1".into()));
        }
        Ok(())
    }
}

/// Network shapes for both stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub lf_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub grid_size: usize,
    pub degree: usize,
}

// RNG stream ids, one per network.
const STREAM_LF: u64 = 1;
const STREAM_LIN: u64 = 2;
const STREAM_NL: u64 = 3;

fn mse_check<T: Real>(loss: T, epoch: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            epoch,
            loss: loss.to_f64_lossy(),
        })
    }
}

/// Mean squared error over all samples and components.
fn batch_mse<T: Real>(net: &KanNetwork<T>, data: &Dataset<T>) -> T {
    let mut ws = net.workspace();
    let mut sum = T::zero();
    for i in 0..data.len() {
        let y = net.forward_ws(data.input(i), &mut ws);
        for (a, b) in y.iter().zip(data.target(i)) {
            sum += (*a - *b) * (*a - *b);
        }
    }
    sum / T::from_usize_lossy(data.len() * data.out_dim)
}

/// Full-batch Adam on mean squared error. Returns the network and the loss
/// recorded before each update plus the final loss.
pub fn train_lf<T: Real>(data: &Dataset<T>, cfg: &TrainConfig<T>, arch: &Architecture) -> Result<(KanNetwork<T>, Vec<T>)> {
    cfg.validate()?;
    check_dims(data, arch.lf_dims.first().copied(), arch.lf_dims.last().copied(), "LF network")?;
    let spec = SplineSpec::new(arch.grid_size, arch.degree)?;
    let mut net = KanNetwork::new(&arch.lf_dims, spec, true, &mut seeded_rng(cfg.seed, STREAM_LF))?;
    let mut adam = AdamState::new(net.n_params(), cfg.learning_rate);
    let mut grads = vec![T::zero(); net.n_params()];
    let mut ws = net.workspace();
    let mut trace = Vec::with_capacity(cfg.lf_epochs + 1);
    let scale = T::lit(2.0) / T::from_usize_lossy(data.len() * data.out_dim);
    let mut up = vec![T::zero(); data.out_dim];
    for epoch in 0..cfg.lf_epochs {
        grads.fill(T::zero());
        let mut sum = T::zero();
        for i in 0..data.len() {
            let y = net.forward_ws(data.input(i), &mut ws);
            for ((u, a), b) in up.iter_mut().zip(y).zip(data.target(i)) {
                let r = *a - *b;
                sum += r * r;
                *u = scale * r;
            }
            net.backward_ws(&mut ws, &up, &mut grads);
        }
        let loss = sum * scale / T::lit(2.0);
        mse_check(loss, epoch)?;
        trace.push(loss);
        net.apply_adam(&mut adam, &grads, "lf")?;
    }
    let last = batch_mse(&net, data);
    mse_check(last, cfg.lf_epochs)?;
    trace.push(last);
    Ok((net, trace))
}

fn check_dims<T: Real>(data: &Dataset<T>, input: Option<usize>, output: Option<usize>, what: &'static str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Invalid(format!("{what}: empty training set")));
    }
    if input != Some(data.in_dim) {
        return Err(Error::Dimension {
            context: what,
            expected: input.unwrap_or(0),
            got: data.in_dim,
        });
    }
    if output != Some(data.out_dim) {
        return Err(Error::Dimension {
            context: what,
            expected: output.unwrap_or(0),
            got: data.out_dim,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultifidelityModel<T> {
    pub lf_net: KanNetwork<T>,
    pub lin_net: KanNetwork<T>,
    pub nl_net: KanNetwork<T>,
    /// Blend weight; kept inside `[0, 1]` by projection after every step.
    pub alpha: T,
    pub alpha_frozen: bool,
    /// LF output range mapped onto `[-1, 1]` before it enters the heads.
    pub q_min: Vec<T>,
    pub q_max: Vec<T>,
    /// Coordinate box of the LF data.
    pub lf_box: (Vec<T>, Vec<T>),
    /// Coordinate box of the reference training data.
    pub head_box: (Vec<T>, Vec<T>),
}

/// Result of the second stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfTrace<T> {
    /// Total loss (data term plus regularizer) before each update, then the final value.
    pub loss: Vec<T>,
    pub alpha: Vec<T>,
}

impl<T: Real> MultifidelityModel<T> {
    /// Wraps a trained `K_LF` with freshly initialized heads. The nonlinear
    /// head uses `arch.degree` splines on `arch.grid_size` intervals; the
    /// linear head is exactly affine. `head_box` is the physical box mapped
    /// onto `[-1, 1]` for the head inputs.
    pub fn new(
        lf_net: KanNetwork<T>,
        lf_data: &Dataset<T>,
        head_box: (Vec<T>, Vec<T>),
        arch: &Architecture,
        seed: u64,
    ) -> Result<Self> {
        let expect_in = lf_net.in_dim() + lf_net.out_dim();
        if arch.head_dims.first() != Some(&expect_in) || arch.head_dims.last() != Some(&lf_net.out_dim()) {
            return Err(Error::Invalid(format!(
                "head dims {:?} must map {} inputs to {} outputs",
                arch.head_dims,
                expect_in,
                lf_net.out_dim()
            )));
        }
        let spec = SplineSpec::new(arch.grid_size, arch.degree)?;
        let mut lin_net = KanNetwork::affine(&arch.head_dims, &mut seeded_rng(seed, STREAM_LIN))?;
        let mut nl_net = KanNetwork::new(&arch.head_dims, spec, true, &mut seeded_rng(seed, STREAM_NL))?;
        // Heads start with zero spline coefficients: the linear head outputs
        // zero and the nonlinear head reduces to its silu base branch.
        lin_net.zero_spline_coefficients();
        nl_net.zero_spline_coefficients();
        if head_box.0.len() != lf_net.in_dim() || head_box.1.len() != lf_net.in_dim() {
            return Err(Error::Dimension {
                context: "head coordinate box",
                expected: lf_net.in_dim(),
                got: head_box.0.len().min(head_box.1.len()),
            });
        }
        let (q_min, q_max) = lf_data.target_range();
        Ok(Self {
            lf_net,
            lin_net,
            nl_net,
            alpha: T::lit(0.5),
            alpha_frozen: false,
            q_min,
            q_max,
            lf_box: (lf_data.coord_min.clone(), lf_data.coord_max.clone()),
            head_box,
        })
    }

    /// Physical coordinates mapped by the LF data box.
    pub fn lf_input(&self, x: &[T]) -> Vec<T> {
        map_box(x, &self.lf_box)
    }

    /// Head input `[coords..., normalized K_LF(coords)...]` at physical `x`.
    pub fn head_input(&self, x: &[T]) -> Result<Vec<T>> {
        let q = self.lf_net.forward(&self.lf_input(x))?;
        Ok(self.head_input_from(x, &q))
    }

    fn head_input_from(&self, x: &[T], q: &[T]) -> Vec<T> {
        let mut h = map_box(x, &self.head_box);
        h.extend(q.iter().enumerate().map(|(c, &v)| normalize(v, self.q_min[c], self.q_max[c])));
        h
    }

    /// Blended prediction at physical coordinates `x`.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let h = self.head_input(x)?;
        let lin = self.lin_net.forward(&h)?;
        let nl = self.nl_net.forward(&h)?;
        Ok(blend(self.alpha, &nl, &lin))
    }

    /// `(q_mf, q_lf)` at the physical coordinates of every row of `data`.
    pub fn predict(&self, data: &Dataset<T>) -> Result<(Vec<T>, Vec<T>)> {
        let mut mf = Vec::with_capacity(data.targets.len());
        let mut lf = Vec::with_capacity(data.targets.len());
        let mut ws_lf = self.lf_net.workspace();
        let mut ws_lin = self.lin_net.workspace();
        let mut ws_nl = self.nl_net.workspace();
        for i in 0..data.len() {
            let x = data.coord(i);
            let q = self.lf_net.forward_ws(&self.lf_input(x), &mut ws_lf).to_vec();
            let h = self.head_input_from(x, &q);
            let a = self.lin_net.forward_ws(&h, &mut ws_lin);
            let b = self.nl_net.forward_ws(&h, &mut ws_nl);
            mf.extend(blend(self.alpha, b, a));
            lf.extend(q);
        }
        Ok((mf, lf))
    }

    pub fn save_json(&self, path: &Path, meta: &serde_json::Value) -> Result<()>
    where
        T: Serialize,
    {
        let doc = serde_json::json!({ "model": self, "meta": meta });
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(serde_json::from_value(doc["model"].take())?)
    }
}

fn map_box<T: Real>(x: &[T], (lo, hi): &(Vec<T>, Vec<T>)) -> Vec<T> {
    x.iter().enumerate().map(|(a, &v)| normalize(v, lo[a], hi[a])).collect()
}

/// `alpha * nl + (1 - alpha) * lin`, componentwise.
pub fn blend<T: Real>(alpha: T, nl: &[T], lin: &[T]) -> Vec<T> {
    nl.iter().zip(lin).map(|(&b, &a)| alpha * b + (T::one() - alpha) * a).collect()
}

/// Evaluates the blended model at physical coordinates.
pub fn mf_forward<T: Real>(model: &MultifidelityModel<T>, x: &[T]) -> Result<Vec<T>> {
    model.forward(x)
}

/// Pins `alpha` and removes it from the optimizer.
pub fn freeze_alpha<T: Real>(mut model: MultifidelityModel<T>, value: T) -> Result<MultifidelityModel<T>> {
    if !(value >= T::zero() && value <= T::one()) {
        return Err(Error::Invalid(format!("alpha must lie in [0, 1], got {value}")));
    }
    model.alpha = value;
    model.alpha_frozen = true;
    Ok(model)
}

/// Stage two: minimizes `MSE(q_mf, target) + lambda * alpha^n` over both
/// heads and alpha, with `K_LF` held fixed. Only [`Region::Train`] rows of
/// `hf_data` are used.
pub fn train_mf<T: Real>(model: &mut MultifidelityModel<T>, hf_data: &Dataset<T>, cfg: &TrainConfig<T>) -> Result<MfTrace<T>> {
    cfg.validate()?;
    let data = hf_data.restrict(Region::Train);
    check_dims(&data, Some(model.lf_net.in_dim()), Some(model.lf_net.out_dim()), "HF training set")?;
    let hash_before = model.lf_net.param_hash();

    // K_LF is frozen, so its contribution to every head input is fixed.
    let mut ws_lf = model.lf_net.workspace();
    let head_inputs: Vec<Vec<T>> = (0..data.len())
        .map(|i| {
            let x = data.coord(i);
            let q = model.lf_net.forward_ws(&model.lf_input(x), &mut ws_lf).to_vec();
            model.head_input_from(x, &q)
        })
        .collect();

    let out_dim = data.out_dim;
    let mut adam_lin = AdamState::new(model.lin_net.n_params(), cfg.learning_rate);
    let mut adam_nl = AdamState::new(model.nl_net.n_params(), cfg.learning_rate);
    let mut adam_alpha = AdamState::new(1, cfg.learning_rate);
    let mut g_lin = vec![T::zero(); model.lin_net.n_params()];
    let mut g_nl = vec![T::zero(); model.nl_net.n_params()];
    let mut ws_lin = model.lin_net.workspace();
    let mut ws_nl = model.nl_net.workspace();
    let scale = T::lit(2.0) / T::from_usize_lossy(data.len() * out_dim);
    let mut up_lin = vec![T::zero(); out_dim];
    let mut up_nl = vec![T::zero(); out_dim];
    let n = cfg.alpha_exponent;
    let nf = T::from_usize_lossy(n as usize);
    let mut trace = MfTrace {
        loss: Vec::with_capacity(cfg.hf_epochs + 1),
        alpha: Vec::with_capacity(cfg.hf_epochs + 1),
    };

    let data_loss = |model: &MultifidelityModel<T>, ws_lin: &mut _, ws_nl: &mut _| -> T {
        let mut sum = T::zero();
        for (i, h) in head_inputs.iter().enumerate() {
            let a = model.lin_net.forward_ws(h, ws_lin).to_vec();
            let b = model.nl_net.forward_ws(h, ws_nl);
            for c in 0..out_dim {
                let r = model.alpha * b[c] + (T::one() - model.alpha) * a[c] - data.target(i)[c];
                sum += r * r;
            }
        }
        sum / T::from_usize_lossy(data.len() * out_dim)
    };

    for epoch in 0..cfg.hf_epochs {
        g_lin.fill(T::zero());
        g_nl.fill(T::zero());
        let alpha = model.alpha;
        let mut g_alpha = T::zero();
        let mut sum = T::zero();
        for (i, h) in head_inputs.iter().enumerate() {
            model.lin_net.forward_ws(h, &mut ws_lin);
            model.nl_net.forward_ws(h, &mut ws_nl);
            let target = data.target(i);
            for c in 0..out_dim {
                let a = ws_lin.output()[c];
                let b = ws_nl.output()[c];
                let r = alpha * b + (T::one() - alpha) * a - target[c];
                sum += r * r;
                let dq = scale * r;
                up_lin[c] = (T::one() - alpha) * dq;
                up_nl[c] = alpha * dq;
                g_alpha += dq * (b - a);
            }
            model.lin_net.backward_ws(&mut ws_lin, &up_lin, &mut g_lin);
            model.nl_net.backward_ws(&mut ws_nl, &up_nl, &mut g_nl);
        }
        let reg = cfg.lambda_alpha * alpha.powi(n);
        let loss = sum * scale / T::lit(2.0) + reg;
        mse_check(loss, epoch)?;
        trace.loss.push(loss);
        trace.alpha.push(alpha);
        g_alpha += cfg.lambda_alpha * nf * alpha.powi(n - 1);

        model.lin_net.mask_frozen(&mut g_lin);
        model.lin_net.apply_adam(&mut adam_lin, &g_lin, "lin")?;
        model.nl_net.apply_adam(&mut adam_nl, &g_nl, "nl")?;
        if !model.alpha_frozen {
            let mut a = [model.alpha];
            adam_alpha.step(&mut a, &[g_alpha], |_| "alpha".into())?;
            model.alpha = a[0].max(T::zero()).min(T::one());
        }
    }
    let last = data_loss(model, &mut ws_lin, &mut ws_nl) + cfg.lambda_alpha * model.alpha.powi(n);
    mse_check(last, cfg.hf_epochs)?;
    trace.loss.push(last);
    trace.alpha.push(model.alpha);

    if model.lf_net.param_hash() != hash_before {
        return Err(Error::Invalid("LF network changed during stage two".into()));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_dataset(f: impl Fn(f64, f64) -> f64, n: usize, cutoff: f64) -> Dataset<f64> {
        let mut coords = Vec::new();
        let mut targets = Vec::new();
        for it in 0..n {
            for ix in 0..n {
                let (x, t) = (ix as f64 / (n - 1) as f64, 0.5 * it as f64 / (n - 1) as f64);
                coords.extend([x, t]);
                targets.push(f(x, t));
            }
        }
        Dataset::from_rows(coords, targets, 2, 1, vec![0.0, 0.0], vec![1.0, 0.5], cutoff).unwrap()
    }

    fn arch() -> Architecture {
        Architecture {
            lf_dims: vec![2, 3, 1],
            head_dims: vec![3, 4, 1],
            grid_size: 5,
            degree: 3,
        }
    }

    fn quick_cfg(seed: u64) -> TrainConfig<f64> {
        TrainConfig {
            lf_epochs: 200,
            hf_epochs: 100,
            learning_rate: 1e-2,
            lambda_alpha: 0.0,
            alpha_exponent: 4,
            seed,
        }
    }

    fn model(seed: u64) -> (MultifidelityModel<f64>, Dataset<f64>) {
        let lf = grid_dataset(|x, t| (3.0 * x).sin() * (1.0 - t), 8, 0.5);
        let (net, _) = train_lf(&lf, &quick_cfg(seed), &arch()).unwrap();
        let head_box = (vec![0.0, 0.0], vec![1.0, 0.25]);
        (MultifidelityModel::new(net, &lf, head_box, &arch(), seed).unwrap(), lf)
    }

    #[test]
    fn normalization_box() {
        let d = grid_dataset(|_, _| 0.0, 3, 0.25);
        assert_eq!(d.input(0), &[-1.0, -1.0]);
        assert_eq!(d.input(8), &[1.0, 1.0]);
        assert_eq!(d.regions.iter().filter(|&&r| r == Region::Train).count(), 6);
    }

    #[test]
    fn zero_targets_fit_quickly() {
        let d = grid_dataset(|_, _| 0.0, 6, 0.5);
        let (net, trace) = train_lf(&d, &quick_cfg(1), &arch()).unwrap();
        assert!(trace.last().unwrap() < &1e-3, "{:?}", trace.last());
        assert!(net.forward(&[0.1, 0.2]).unwrap()[0].abs() < 2e-2);
    }

    #[test]
    fn lf_loss_beats_variance() {
        let d = grid_dataset(|x, t| (3.0 * x).sin() * (1.0 - t), 8, 0.5);
        let mean = d.targets.iter().sum::<f64>() / d.len() as f64;
        let var = d.targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let (_, trace) = train_lf(&d, &quick_cfg(2), &arch()).unwrap();
        assert!(*trace.last().unwrap() < 0.1 * var);
    }

    #[test]
    fn fresh_heads_have_zero_spline_coefficients() {
        let (m, _) = model(5);
        let h = m.head_input(&[0.3, 0.1]).unwrap();
        assert_eq!(m.lin_net.forward(&h).unwrap(), vec![0.0]);
        for l in &m.nl_net.layers {
            assert!(m.nl_net.params[l.coeff_offset()..l.base_offset()].iter().all(|&c| c == 0.0));
            assert!(m.nl_net.params[l.base_offset()..l.spline_weight_offset()].iter().any(|&w| w != 0.0));
        }
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let (m, _) = model(3);
        let x = [0.6, 0.15];
        let h = m.head_input(&x).unwrap();
        let lin = m.lin_net.forward(&h).unwrap();
        let nl = m.nl_net.forward(&h).unwrap();
        assert_eq!(freeze_alpha(m.clone(), 0.0).unwrap().forward(&x).unwrap(), lin);
        assert_eq!(freeze_alpha(m.clone(), 1.0).unwrap().forward(&x).unwrap(), nl);
        let mid = freeze_alpha(m.clone(), 0.5).unwrap().forward(&x).unwrap()[0];
        assert!((mid - (lin[0] + nl[0]) / 2.0).abs() <= 1e-15);
        assert!(freeze_alpha(m, 1.5).is_err());
    }

    #[test]
    fn frozen_alpha_and_lf_net_stay_put() {
        let (m, _) = model(4);
        let hf = grid_dataset(|x, t| (3.0 * x).sin() * (1.0 - t) + 0.1 * x, 8, 0.25);
        let mut m = freeze_alpha(m, 0.7).unwrap();
        let before = m.lf_net.clone();
        let trace = train_mf(&mut m, &hf, &quick_cfg(4)).unwrap();
        assert_eq!(m.alpha, 0.7);
        assert_eq!(m.lf_net, before);
        assert!(trace.loss.last().unwrap() < &trace.loss[0]);
    }

    #[test]
    fn alpha_stays_in_unit_interval() {
        let (mut m, _) = model(5);
        let hf = grid_dataset(|x, t| x * t, 8, 0.5);
        let mut cfg = quick_cfg(5);
        cfg.learning_rate = 0.3;
        cfg.lambda_alpha = 10.0;
        let trace = train_mf(&mut m, &hf, &cfg).unwrap();
        assert!(trace.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        assert!(m.alpha < 0.1);
    }

    #[test]
    fn affine_targets_are_learned() {
        // Target is an affine map of (x, t, q_lf); the blended model fits it.
        let (mut m, _) = model(6);
        let mut hf = grid_dataset(|_, _| 0.0, 8, 0.5);
        for i in 0..hf.len() {
            let h = m.head_input(hf.coord(i)).unwrap();
            hf.targets[i] = 0.3 * h[0] - 0.2 * h[1] + 0.5 * h[2] + 0.1;
        }
        let mean = hf.targets.iter().sum::<f64>() / hf.len() as f64;
        let var = hf.targets.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / hf.len() as f64;
        let mut cfg = quick_cfg(6);
        cfg.hf_epochs = 3000;
        let trace = train_mf(&mut m, &hf, &cfg).unwrap();
        assert!(*trace.loss.last().unwrap() <= 1e-4 * var, "{} vs {}", trace.loss.last().unwrap(), var);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (m, _) = model(7);
        let dir = std::env::temp_dir().join(format!("qlmf-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        m.save_json(&path, &serde_json::json!({"seed": 7})).unwrap();
        let back = MultifidelityModel::<f64>::load_json(&path).unwrap();
        assert_eq!(back, m);
        std::fs::remove_dir_all(dir).ok();
    }
}
