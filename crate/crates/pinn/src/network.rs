//! Dense feed-forward networks with tanh hidden activations and a linear
//! output layer, plus flat parameter-vector management.
//!
//! Parameters are stored flat, layer by layer: each weight matrix row-major
//! (`n_in` rows of `n_out` columns) followed by its bias vector. Trainable
//! PDE coefficients, when present, are appended after the network weights.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};

/// Layer sizes, first entry the input dimension and last the output dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::structural("architecture needs at least two layers"));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::structural("layer sizes must be positive"));
        }
        Ok(Architecture { layer_sizes })
    }

    /// `[in_dim, width × hidden_layers, out_dim]`.
    pub fn with_hidden(in_dim: usize, hidden_layers: usize, width: usize, out_dim: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden_layers + 2);
        sizes.push(in_dim);
        sizes.extend(std::iter::repeat(width).take(hidden_layers));
        sizes.push(out_dim);
        Architecture::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total weight and bias count.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// Weights and biases in structured form; used by checkpointing and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    /// `weights[l]` is row-major `n_in × n_out`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// A network plus the number of appended trainable PDE coefficients.
#[derive(Debug, Clone)]
pub struct Network {
    pub arch: Architecture,
    pub n_lambda: usize,
}

impl Network {
    pub fn new(arch: Architecture, n_lambda: usize) -> Self {
        Network { arch, n_lambda }
    }

    /// Length of the full parameter vector, λ entries included.
    pub fn param_count(&self) -> usize {
        self.arch.param_count() + self.n_lambda
    }

    /// Parameter slots holding λ.
    pub fn lambda_slots(&self) -> std::ops::Range<usize> {
        let n = self.arch.param_count();
        n..n + self.n_lambda
    }

    /// Glorot-normal weights (std `sqrt(2/(fan_in+fan_out))`), zero biases,
    /// zero λ. Deterministic per seed.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(self.param_count());
        for w in self.arch.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let std = (2.0 / (n_in + n_out) as f64).sqrt();
            let dist = Normal::new(0.0, std).unwrap();
            theta.extend((0..n_in * n_out).map(|_| dist.sample(&mut rng)));
            theta.extend(std::iter::repeat(0.0).take(n_out));
        }
        theta.extend(std::iter::repeat(0.0).take(self.n_lambda));
        theta
    }

    /// Build the forward pass in `g`. Parameter slots `0..arch.param_count()`
    /// are claimed in flat-vector order; inputs must match the input
    /// dimension. Returns one expression per output.
    pub fn build(&self, g: &mut Graph, inputs: &[NodeId]) -> Result<Vec<NodeId>> {
        if inputs.len() != self.arch.input_dim() {
            return Err(Error::structural(format!(
                "network expects {} inputs, got {}",
                self.arch.input_dim(),
                inputs.len()
            )));
        }
        let mut h: Vec<NodeId> = inputs.to_vec();
        let mut slot = 0u32;
        let n_layers = self.arch.layer_sizes.len() - 1;
        for (l, w) in self.arch.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let w_base = slot;
            let b_base = slot + (n_in * n_out) as u32;
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                // pre_j = sum_i h_i * W[i][j] + b_j
                let mut acc = g.param(b_base + j as u32);
                for (i, &hi) in h.iter().enumerate() {
                    let wij = g.param(w_base + (i * n_out + j) as u32);
                    acc = g.mul_add(hi, wij, acc);
                }
                next.push(if l + 1 < n_layers { g.tanh(acc) } else { acc });
            }
            h = next;
            slot = b_base + n_out as u32;
        }
        Ok(h)
    }

    /// λ parameter nodes (appended after the network weights).
    pub fn lambda_nodes(&self, g: &mut Graph) -> Vec<NodeId> {
        self.lambda_slots().map(|s| g.param(s as u32)).collect()
    }
}

/// Split a flat vector into structured layers (λ tail excluded).
pub fn unflatten(arch: &Architecture, theta: &[f64]) -> Result<Layers> {
    if theta.len() < arch.param_count() {
        return Err(Error::structural(format!(
            "parameter vector too short: {} < {}",
            theta.len(),
            arch.param_count()
        )));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut at = 0;
    for w in arch.layer_sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        weights.push(theta[at..at + n_in * n_out].to_vec());
        at += n_in * n_out;
        biases.push(theta[at..at + n_out].to_vec());
        at += n_out;
    }
    Ok(Layers { weights, biases })
}

/// Inverse of [`unflatten`].
pub fn flatten(layers: &Layers) -> Vec<f64> {
    let mut theta = Vec::new();
    for (w, b) in layers.weights.iter().zip(&layers.biases) {
        theta.extend_from_slice(w);
        theta.extend_from_slice(b);
    }
    theta
}
