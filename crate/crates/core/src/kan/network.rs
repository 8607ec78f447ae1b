use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::spline::{SplineSpec, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Placement of one layer's tensors inside the network's flat parameter
/// vector: spline coefficients `[out][in][G + k]`, then base weights
/// `[out][in]`, then spline weights `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub spec: SplineSpec,
    /// When false the base branch is absent and its weights stay at zero.
    pub base_enabled: bool,
    pub offset: usize,
}

impl KanLayer {
    pub fn n_edges(&self) -> usize {
        self.in_dim * self.out_dim
    }

    pub fn n_params(&self) -> usize {
        self.n_edges() * (self.spec.n_basis() + 2)
    }

    pub fn coeff_offset(&self) -> usize {
        self.offset
    }

    pub fn base_offset(&self) -> usize {
        self.offset + self.n_edges() * self.spec.n_basis()
    }

    pub fn spline_weight_offset(&self) -> usize {
        self.base_offset() + self.n_edges()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanNetwork<T> {
    pub dims: Vec<usize>,
    pub layers: Vec<KanLayer>,
    pub params: Vec<T>,
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Real> KanNetwork<T> {
    /// Spline coefficients drawn from `N(0, 0.01 / sqrt(in_dim))`, unit
    /// spline weights, base weights uniform on `±1 / sqrt(in_dim)` (or 0 when
    /// the base is disabled).
    pub fn new(dims: &[usize], spec: SplineSpec, base_enabled: bool, rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Invalid(format!("KAN dims must have >= 2 positive entries, got {dims:?}")));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        let mut offset = 0;
        for w in dims.windows(2) {
            let l = KanLayer {
                in_dim: w[0],
                out_dim: w[1],
                spec,
                base_enabled,
                offset,
            };
            offset += l.n_params();
            layers.push(l);
        }
        let mut params = vec![T::zero(); offset];
        for l in &layers {
            let std = 0.1 / (l.in_dim as f64).powf(0.25);
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[l.coeff_offset()..l.base_offset()] {
                *p = T::lit(normal.sample(rng));
            }
            let bound = 1.0 / (l.in_dim as f64).sqrt();
            for p in &mut params[l.base_offset()..l.spline_weight_offset()] {
                *p = if base_enabled { T::lit(rng.gen_range(-bound..bound)) } else { T::zero() };
            }
            params[l.spline_weight_offset()..l.offset + l.n_params()].fill(T::one());
        }
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            params,
        })
    }

    /// Sets every spline coefficient to zero, leaving base and spline weights.
    pub fn zero_spline_coefficients(&mut self) {
        for l in &self.layers {
            self.params[l.coeff_offset()..l.base_offset()].fill(T::zero());
        }
    }

    /// Degree-1 splines over one interval, no base branch: an affine map.
    pub fn affine(dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        Self::new(dims, SplineSpec::affine(), false, rng)
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Human-readable name of a flat parameter index.
    pub fn param_path(&self, index: usize) -> String {
        param_path(&self.layers, index)
    }

    /// One optimizer update; a non-finite gradient is reported as
    /// `prefix.layerN.tensor[...]`.
    pub fn apply_adam(&mut self, adam: &mut AdamState<T>, grads: &[T], prefix: &str) -> Result<()> {
        let layers = &self.layers;
        adam.step(&mut self.params, grads, |i| format!("{prefix}.{}", param_path(layers, i)))
    }

    /// Zeros gradient entries of parameters that must not move.
    pub fn mask_frozen(&self, grads: &mut [T]) {
        for l in &self.layers {
            if !l.base_enabled {
                grads[l.base_offset()..l.spline_weight_offset()].fill(T::zero());
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace::new(self)
    }

    /// Forward pass that keeps everything the backward pass needs in `ws`.
    pub fn forward_ws<'w>(&self, x: &[T], ws: &'w mut Workspace<T>) -> &'w [T] {
        debug_assert_eq!(x.len(), self.in_dim());
        ws.acts[0].copy_from_slice(x);
        for (li, l) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(li + 1);
            let input = &head[li];
            let output = &mut tail[0];
            let c = &mut ws.caches[li];
            let k1 = l.spec.degree + 1;
            let nb = l.spec.n_basis();
            for (i, &xi) in input.iter().enumerate() {
                let xp = l.spec.prepare(xi);
                c.inside[i] = l.spec.extrapolate || (xi > -T::one() && xi < T::one());
                c.first[i] = l.spec.eval_nonzero(xp, &mut c.vals[i * k1..(i + 1) * k1], Some(&mut c.ders[i * k1..(i + 1) * k1]));
                if l.base_enabled {
                    let s = sigmoid(xi);
                    c.silu[i] = xi * s;
                    c.dsilu[i] = s * (T::one() + xi * (T::one() - s));
                }
            }
            let coeffs = &self.params[l.coeff_offset()..l.base_offset()];
            let bw = &self.params[l.base_offset()..l.spline_weight_offset()];
            let sw = &self.params[l.spline_weight_offset()..l.offset + l.n_params()];
            for (j, out) in output.iter_mut().enumerate() {
                let mut acc = T::zero();
                for i in 0..l.in_dim {
                    let e = j * l.in_dim + i;
                    let base = e * nb + c.first[i];
                    let mut s = T::zero();
                    for r in 0..k1 {
                        s += coeffs[base + r] * c.vals[i * k1 + r];
                    }
                    c.spline[e] = s;
                    acc += sw[e] * s;
                    if l.base_enabled {
                        acc += bw[e] * c.silu[i];
                    }
                }
                *out = acc;
            }
        }
        ws.acts.last().expect("output activations")
    }

    /// Accumulates `d(upstream . y)/d(params)` into `grads` for the sample
    /// last passed to [`Self::forward_ws`], and leaves the input gradient in
    /// `ws.input_grad()`.
    pub fn backward_ws(&self, ws: &mut Workspace<T>, upstream: &[T], grads: &mut [T]) {
        let n_layers = self.layers.len();
        ws.delta[n_layers].copy_from_slice(upstream);
        for li in (0..n_layers).rev() {
            let l = &self.layers[li];
            let (lower, upper) = ws.delta.split_at_mut(li + 1);
            let din = &mut lower[li];
            let dout = &upper[0];
            din.fill(T::zero());
            let c = &ws.caches[li];
            let k1 = l.spec.degree + 1;
            let nb = l.spec.n_basis();
            let coeffs = &self.params[l.coeff_offset()..l.base_offset()];
            let bw = &self.params[l.base_offset()..l.spline_weight_offset()];
            let sw = &self.params[l.spline_weight_offset()..l.offset + l.n_params()];
            let (gc, rest) = grads[l.offset..l.offset + l.n_params()].split_at_mut(l.n_edges() * nb);
            let (gbw, gsw) = rest.split_at_mut(l.n_edges());
            for (j, &g) in dout.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                for i in 0..l.in_dim {
                    let e = j * l.in_dim + i;
                    let base = e * nb + c.first[i];
                    let gs = g * sw[e];
                    gsw[e] += g * c.spline[e];
                    let mut dx = T::zero();
                    for r in 0..k1 {
                        gc[base + r] += gs * c.vals[i * k1 + r];
                        dx += coeffs[base + r] * c.ders[i * k1 + r];
                    }
                    let mut d = if c.inside[i] { gs * dx } else { T::zero() };
                    if l.base_enabled {
                        gbw[e] += g * c.silu[i];
                        d += g * bw[e] * c.dsilu[i];
                    }
                    din[i] += d;
                }
            }
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut ws = self.workspace();
        Ok(self.forward_ws(x, &mut ws).to_vec())
    }

    /// Parameter gradient and input gradient of `upstream . f(x)`.
    pub fn backward(&self, x: &[T], upstream: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        self.check_input(x)?;
        if upstream.len() != self.out_dim() {
            return Err(Error::Dimension {
                context: "KAN upstream gradient",
                expected: self.out_dim(),
                got: upstream.len(),
            });
        }
        let mut ws = self.workspace();
        self.forward_ws(x, &mut ws);
        let mut grads = vec![T::zero(); self.n_params()];
        self.backward_ws(&mut ws, upstream, &mut grads);
        Ok((grads, ws.input_grad().to_vec()))
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::Dimension {
                context: "KAN input",
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Order-independent fingerprint of the exact parameter bits.
    pub fn param_hash(&self) -> u64 {
        // FNV-1a over the f64 bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_f64_lossy().to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

fn param_path(layers: &[KanLayer], index: usize) -> String {
    for (li, l) in layers.iter().enumerate() {
        if index >= l.offset + l.n_params() {
            continue;
        }
        let nb = l.spec.n_basis();
        if index < l.base_offset() {
            let r = index - l.offset;
            let e = r / nb;
            return format!("layer{li}.spline_coeffs[{},{},{}]", e / l.in_dim, e % l.in_dim, r % nb);
        }
        let (name, e) = if index < l.spline_weight_offset() {
            ("base_weight", index - l.base_offset())
        } else {
            ("spline_weight", index - l.spline_weight_offset())
        };
        return format!("layer{li}.{name}[{},{}]", e / l.in_dim, e % l.in_dim);
    }
    format!("param[{index}]")
}

#[derive(Debug, Clone)]
struct LayerCache<T> {
    first: Vec<usize>,
    inside: Vec<bool>,
    vals: Vec<T>,
    ders: Vec<T>,
    silu: Vec<T>,
    dsilu: Vec<T>,
    spline: Vec<T>,
}

/// Per-sample scratch for forward and backward passes; reuse it across
/// samples to avoid allocation.
#[derive(Debug, Clone)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    delta: Vec<Vec<T>>,
    caches: Vec<LayerCache<T>>,
}

impl<T: Real> Workspace<T> {
    fn new(net: &KanNetwork<T>) -> Self {
        let acts: Vec<Vec<T>> = net.dims.iter().map(|&d| vec![T::zero(); d]).collect();
        let caches = net
            .layers
            .iter()
            .map(|l| {
                let k1 = l.spec.degree + 1;
                debug_assert!(l.spec.degree <= MAX_DEGREE);
                LayerCache {
                    first: vec![0; l.in_dim],
                    inside: vec![true; l.in_dim],
                    vals: vec![T::zero(); l.in_dim * k1],
                    ders: vec![T::zero(); l.in_dim * k1],
                    silu: vec![T::zero(); l.in_dim],
                    dsilu: vec![T::zero(); l.in_dim],
                    spline: vec![T::zero(); l.n_edges()],
                }
            })
            .collect();
        Self {
            delta: acts.clone(),
            acts,
            caches,
        }
    }

    pub fn input_grad(&self) -> &[T] {
        &self.delta[0]
    }

    pub fn output(&self) -> &[T] {
        self.acts.last().expect("output activations")
    }
}
