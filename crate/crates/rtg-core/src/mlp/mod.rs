//! Fully-connected ReLU networks.
//!
//! A network maps `R^d -> R^k` through `depth` hidden layers of `width` ReLU
//! units. Every forward pass also reports the activation pattern: one bit per
//! hidden unit, 1 iff the unit's pre-activation is strictly positive, packed
//! in layer-major order. A pre-activation of exactly zero counts as inactive.

mod data;
mod train;

pub use data::{balanced_circle_radius, make_circle_dataset, make_random_label_dataset, LabeledDataset};
pub use train::{evaluate, loss_and_grads, train, EpochRecord, LossKind, OptimizerKind, TrainConfig};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::ActivationPattern;

/// Architecture and initialization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// Number of hidden layers.
    pub depth: usize,
    /// Units per hidden layer.
    pub width: usize,
    pub output_dim: usize,
    /// Per-layer Gaussian scale; weights use `init_std / sqrt(fan_in)`,
    /// biases use `init_std` directly.
    pub init_std: f64,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, depth: usize, width: usize, output_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            depth,
            width,
            output_dim,
            init_std: std::f64::consts::SQRT_2,
            seed,
        }
    }

    /// Total hidden units `n = depth * width`; the activation pattern length.
    pub fn hidden_units(&self) -> usize {
        self.depth * self.width
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.depth == 0 || self.width == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig(
                "input_dim, depth, width, and output_dim must all be >= 1".into(),
            ));
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "init_std must be positive and finite, got {}",
                self.init_std
            )));
        }
        Ok(())
    }
}

/// Weights and biases of a ReLU network. Immutable by convention: training
/// returns a new value.
///
/// Layer `l` maps a vector of `weights[l].ncols()` inputs to
/// `weights[l].nrows()` outputs via `W x + b`; hidden layers apply ReLU on
/// top, the final layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub config: MlpConfig,
}

impl MlpParams {
    /// Shape chain and finiteness check.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        if self.weights.len() != c.depth + 1 || self.biases.len() != c.depth + 1 {
            return Err(Error::ShapeMismatch(format!(
                "expected {} layers, got {} weight / {} bias tensors",
                c.depth + 1,
                self.weights.len(),
                self.biases.len()
            )));
        }
        let mut in_dim = c.input_dim;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let out_dim = if l == c.depth { c.output_dim } else { c.width };
            if w.dim() != (out_dim, in_dim) || b.len() != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "layer {l}: expected weight {out_dim}x{in_dim}, got {}x{}",
                    w.nrows(),
                    w.ncols()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { layer: l + 1, point: 0 });
            }
            in_dim = out_dim;
        }
        Ok(())
    }

    pub fn hidden_units(&self) -> usize {
        self.config.hidden_units()
    }
}

/// Draws parameters i.i.d. Gaussian: weights with standard deviation
/// `init_std / sqrt(fan_in)`, biases with standard deviation `init_std`.
/// Identical `(config, seed)` always produce identical parameters.
pub fn init_mlp(config: &MlpConfig) -> Result<MlpParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Vec::with_capacity(config.depth + 1);
    let mut biases = Vec::with_capacity(config.depth + 1);
    let mut in_dim = config.input_dim;
    for l in 0..=config.depth {
        let out_dim = if l == config.depth { config.output_dim } else { config.width };
        let w_std = config.init_std / (in_dim as f64).sqrt();
        let w_dist = Normal::new(0.0, w_std).expect("finite std");
        let b_dist = Normal::new(0.0, config.init_std).expect("finite std");
        let w = Array2::from_shape_fn((out_dim, in_dim), |_| w_dist.sample(&mut rng));
        let b = Array1::from_shape_fn(out_dim, |_| b_dist.sample(&mut rng));
        weights.push(w);
        biases.push(b);
        in_dim = out_dim;
    }
    Ok(MlpParams {
        weights,
        biases,
        config: *config,
    })
}

/// Forward pass for a batch of points (rows of `xs`), returning network
/// outputs (one row per point) and the activation pattern of each point.
///
/// Results are identical to calling [`forward`] per row, in row order.
pub fn forward_batch(
    params: &MlpParams,
    xs: ArrayView2<f64>,
) -> Result<(Array2<f64>, Vec<ActivationPattern>)> {
    let c = &params.config;
    if xs.ncols() != c.input_dim {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, network expects {}",
            xs.ncols(),
            c.input_dim
        )));
    }
    let batch = xs.nrows();
    let n_bits = c.hidden_units();
    let mut patterns = vec![ActivationPattern::zeroed(n_bits); batch];

    let mut activ = xs.to_owned();
    for l in 0..=c.depth {
        // z = a W^T + b, rows are points
        let mut z = activ.dot(&params.weights[l].t());
        z += &params.biases[l];
        check_finite(&z, l + 1)?;
        if l < c.depth {
            for (row, p) in z.axis_iter(Axis(0)).zip(patterns.iter_mut()) {
                let base = l * c.width;
                for (u, &v) in row.iter().enumerate() {
                    if v > 0.0 {
                        p.set_bit(base + u);
                    }
                }
            }
            z.mapv_inplace(|v| v.max(0.0));
            activ = z;
        } else {
            return Ok((z, patterns));
        }
    }
    unreachable!("loop returns at the output layer")
}

/// Forward pass for a single point.
pub fn forward(params: &MlpParams, x: ArrayView1<f64>) -> Result<(Array1<f64>, ActivationPattern)> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { layer: 0, point: 0 });
    }
    let xs = x.insert_axis(Axis(0));
    let (out, mut patterns) = forward_batch(params, xs)?;
    Ok((out.row(0).to_owned(), patterns.pop().expect("one pattern")))
}

fn check_finite(z: &Array2<f64>, layer: usize) -> Result<()> {
    if z.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let point = z
        .axis_iter(Axis(0))
        .position(|row| row.iter().any(|v| !v.is_finite()))
        .unwrap_or(0);
    Err(Error::NonFinite { layer, point })
}

/// Upper bound on the Lipschitz constant: the product of layer spectral
/// norms. Each norm comes from power iteration on `W^T W` to relative
/// tolerance 1e-6.
pub fn estimate_lipschitz_upper(params: &MlpParams) -> Result<f64> {
    params.validate()?;
    let mut product = 1.0;
    for w in &params.weights {
        product *= spectral_norm(w);
    }
    Ok(product)
}

fn spectral_norm(w: &Array2<f64>) -> f64 {
    let n = w.ncols();
    // deterministic start with all Fourier-ish components populated
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + (i as f64 * 0.7341).sin() * 0.01);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut sigma = 0.0f64;
    for _ in 0..10_000 {
        let wv = w.dot(&v);
        let next_sigma = wv.dot(&wv).sqrt();
        if next_sigma == 0.0 {
            return 0.0;
        }
        let mut u = w.t().dot(&wv);
        let u_norm = u.dot(&u).sqrt();
        if u_norm == 0.0 {
            return next_sigma;
        }
        u /= u_norm;
        let done = (next_sigma - sigma).abs() <= 1e-6 * next_sigma.max(1e-300);
        sigma = next_sigma;
        v = u;
        if done {
            break;
        }
    }
    sigma
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}
