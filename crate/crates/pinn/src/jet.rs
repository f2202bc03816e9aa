//! Structured derivative propagation through dense tanh networks.
//!
//! The residual losses only ever need a fixed jet of each network output:
//! `(u, u_t, u_x, u_xx)` for continuous-time residuals and
//! `(u, u_x, u_xx, u_xxx)` for the Runge-Kutta stage operators. Pushing those
//! four components through the layers directly, with a hand-written reverse
//! pass for the parameter gradient, is an order of magnitude faster than
//! interpreting the equivalent computational graph: the inner loops are dense
//! matrix work over cache-resident weights.
//!
//! Points flow through in batches of [`BATCH`]; activations are stored as
//! planes indexed `(component, neuron, batch-lane)`, so the affine sweeps
//! and chain rules run over contiguous lanes with independent accumulators.
//! Per-point arithmetic is identical whatever the batch position.
//!
//! This module is a performance path only: it computes exactly what the
//! graph built by [`crate::network::Network::build`] plus
//! [`crate::autodiff::Graph::derive`] computes, and the loss constructors
//! cross-check the two in tests.
//!
//! Jet component order: `[value, d1, d2, d3]`, where for the `Ct` flavor
//! `d1 = ∂/∂t`, `d2 = ∂/∂x`, `d3 = ∂²/∂x²`, and for the `Dx` flavor
//! `d1 = ∂/∂x`, `d2 = ∂²/∂x²`, `d3 = ∂³/∂x³`.

use crate::network::Architecture;

/// One jet: value plus three derivative components.
pub(crate) type Jet = [f64; 4];

/// Points evaluated per dispatch.
pub(crate) const BATCH: usize = 8;

const B: usize = BATCH;

#[inline(always)]
fn fma(a: f64, b: f64, c: f64) -> f64 {
    if cfg!(target_feature = "fma") {
        a.mul_add(b, c)
    } else {
        a * b + c
    }
}

/// Whether the first derivative component is `∂/∂t` (with `d2, d3` the x
/// derivatives) or all components are x derivatives of increasing order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Flavor {
    /// components `[u, u_t, u_x, u_xx]`, inputs `(t, x)`
    Ct,
    /// components `[u, u_x, u_xx, u_xxx]`, input `x`
    Dx,
}

/// Per-batch storage of pre-activation and activation jet planes, reused
/// across batches and required by the backward pass. Plane layout:
/// `buf[(c*width + j)*BATCH + b]`.
#[derive(Default)]
pub(crate) struct Scratch {
    act: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    bar: Vec<f64>,
    bar_prev: Vec<f64>,
    n_last: usize,
}

impl Scratch {
    fn prepare(&mut self, arch: &Architecture) {
        let sizes = arch.layer_sizes();
        self.act.resize(sizes.len(), Vec::new());
        self.pre.resize(sizes.len() - 1, Vec::new());
        for (l, &w) in sizes.iter().enumerate() {
            self.act[l].resize(4 * w * B, 0.0);
            if l > 0 {
                self.pre[l - 1].resize(4 * w * B, 0.0);
            }
        }
        let widest = *sizes.iter().max().unwrap();
        self.bar.resize(4 * widest * B, 0.0);
        self.bar_prev.resize(4 * widest * B, 0.0);
        self.n_last = *sizes.last().unwrap();
    }
}

/// `pre[(c,j)] = bias_j·[c=0] + Σ_i w_ij · h[(c,i)]` over all lanes.
#[inline]
fn affine_forward(w: &[f64], bias: &[f64], h: &[f64], n_in: usize, n_out: usize, pre: &mut [f64]) {
    for j in 0..n_out {
        let mut acc = [[0.0f64; B]; 4];
        acc[0] = [bias[j]; B];
        for i in 0..n_in {
            let wij = w[i * n_out + j];
            for c in 0..4 {
                let hrow = &h[(c * n_in + i) * B..(c * n_in + i) * B + B];
                for b in 0..B {
                    acc[c][b] = fma(hrow[b], wij, acc[c][b]);
                }
            }
        }
        for c in 0..4 {
            pre[(c * n_out + j) * B..(c * n_out + j) * B + B].copy_from_slice(&acc[c]);
        }
    }
}

/// Elementwise tanh chain over one layer's planes.
#[inline]
fn tanh_forward(flavor: Flavor, pre: &[f64], act: &mut [f64], n: usize) {
    for j in 0..n {
        for b in 0..B {
            let at = |c: usize| pre[(c * n + j) * B + b];
            let y0 = at(0).tanh();
            let s = 1.0 - y0 * y0;
            let (p1, p2, p3) = (at(1), at(2), at(3));
            act[j * B + b] = y0;
            match flavor {
                Flavor::Ct => {
                    let y1 = s * p2;
                    act[(n + j) * B + b] = s * p1;
                    act[(2 * n + j) * B + b] = y1;
                    act[(3 * n + j) * B + b] = s * p3 - 2.0 * y0 * p2 * y1;
                }
                Flavor::Dx => {
                    let bq = s * s - 2.0 * y0 * y0 * s;
                    let y1 = s * p1;
                    act[(n + j) * B + b] = y1;
                    act[(2 * n + j) * B + b] = s * p2 - 2.0 * y0 * p1 * y1;
                    act[(3 * n + j) * B + b] =
                        s * p3 - 6.0 * y0 * s * p1 * p2 - 2.0 * bq * p1 * p1 * p1;
                }
            }
        }
    }
}

/// Reverse of [`tanh_forward`]: adjoints of the pre-activation planes given
/// adjoints of the output planes (in `bar`, overwritten in place). `y0s` is
/// the value plane of the layer's activations.
#[inline]
fn tanh_backward(flavor: Flavor, pre: &[f64], y0s: &[f64], bar: &mut [f64], n: usize) {
    for j in 0..n {
        for b in 0..B {
            let y0 = y0s[j * B + b];
            let s = 1.0 - y0 * y0;
            let bq = s * s - 2.0 * y0 * y0 * s;
            let at = |c: usize| pre[(c * n + j) * B + b];
            let (p1, p2, p3) = (at(1), at(2), at(3));
            let (b0, b1, b2, b3) = (
                bar[j * B + b],
                bar[(n + j) * B + b],
                bar[(2 * n + j) * B + b],
                bar[(3 * n + j) * B + b],
            );
            match flavor {
                Flavor::Ct => {
                    // y0 = tanh p0; yt = s p1; y1 = s p2; y2 = s p3 − 2 y0 s p2²
                    bar[j * B + b] = b0 * s
                        - b1 * 2.0 * y0 * s * p1
                        - b2 * 2.0 * y0 * s * p2
                        + b3 * (-2.0 * y0 * s * p3 - 2.0 * p2 * p2 * bq);
                    bar[(n + j) * B + b] = b1 * s;
                    bar[(2 * n + j) * B + b] = b2 * s - b3 * 4.0 * y0 * s * p2;
                    bar[(3 * n + j) * B + b] = b3 * s;
                }
                Flavor::Dx => {
                    // y1 = s p1; y2 = s p2 − 2 y0 s p1²;
                    // y3 = s p3 − 6 y0 s p1 p2 − 2 bq p1³,  bq = s² − 2 y0² s
                    let dbq = -4.0 * y0 * s * (2.0 * s - y0 * y0);
                    bar[j * B + b] = b0 * s
                        - b1 * 2.0 * y0 * s * p1
                        + b2 * (-2.0 * y0 * s * p2 - 2.0 * p1 * p1 * bq)
                        + b3 * (-2.0 * y0 * s * p3
                            - 6.0 * p1 * p2 * bq
                            - 2.0 * p1 * p1 * p1 * dbq);
                    bar[(n + j) * B + b] = b1 * s
                        - b2 * 4.0 * y0 * s * p1
                        + b3 * (-6.0 * y0 * s * p2 - 6.0 * bq * p1 * p1);
                    bar[(2 * n + j) * B + b] = b2 * s - b3 * 6.0 * y0 * s * p1;
                    bar[(3 * n + j) * B + b] = b3 * s;
                }
            }
        }
    }
}

/// Forward pass for up to [`BATCH`] points. `input_jets` is row-major per
/// point (`count × n_in` jets, e.g. from [`ct_inputs`]/[`dx_inputs`]);
/// lanes past `count` replicate the first point.
pub(crate) fn forward(
    arch: &Architecture,
    theta: &[f64],
    flavor: Flavor,
    input_jets: &[Jet],
    count: usize,
    scratch: &mut Scratch,
) {
    let sizes = arch.layer_sizes();
    let n0 = sizes[0];
    debug_assert!(count >= 1 && count <= B);
    debug_assert_eq!(input_jets.len(), count * n0);
    scratch.prepare(arch);
    for i in 0..n0 {
        for c in 0..4 {
            for b in 0..B {
                let p = if b < count { b } else { 0 };
                scratch.act[0][(c * n0 + i) * B + b] = input_jets[p * n0 + i][c];
            }
        }
    }
    let n_layers = sizes.len() - 1;
    let mut at = 0usize;
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &theta[at..at + n_in * n_out];
        let bias = &theta[at + n_in * n_out..at + n_in * n_out + n_out];
        at += n_in * n_out + n_out;
        let (done, rest) = scratch.act.split_at_mut(l + 1);
        let pre = &mut scratch.pre[l];
        affine_forward(w, bias, &done[l], n_in, n_out, pre);
        if l + 1 < n_layers {
            tanh_forward(flavor, pre, &mut rest[0], n_out);
        } else {
            rest[0].copy_from_slice(pre);
        }
    }
}

/// Jet of output `k` for batch lane `b` after [`forward`].
#[inline]
pub(crate) fn output_jet(scratch: &Scratch, k: usize, b: usize) -> Jet {
    let n = scratch.n_last;
    let a = scratch.act.last().unwrap();
    [
        a[(k) * B + b],
        a[(n + k) * B + b],
        a[(2 * n + k) * B + b],
        a[(3 * n + k) * B + b],
    ]
}

/// Reverse pass: given adjoints of the output jets (`count × n_out`,
/// row-major per point), accumulate the loss gradient with respect to every
/// weight and bias (flat layout, matching [`crate::network`]). Must follow a
/// [`forward`] call on the same batch.
pub(crate) fn backward(
    arch: &Architecture,
    theta: &[f64],
    flavor: Flavor,
    out_bar: &[Jet],
    count: usize,
    scratch: &mut Scratch,
    grad: &mut [f64],
) {
    let sizes = arch.layer_sizes();
    let n_layers = sizes.len() - 1;
    let n_last = *sizes.last().unwrap();
    debug_assert_eq!(out_bar.len(), count * n_last);
    for j in 0..n_last {
        for c in 0..4 {
            for b in 0..B {
                // padding lanes carry zero adjoints
                scratch.bar[(c * n_last + j) * B + b] = if b < count {
                    out_bar[b * n_last + j][c]
                } else {
                    0.0
                };
            }
        }
    }
    let mut offsets = Vec::with_capacity(n_layers);
    let mut at = 0usize;
    for l in 0..n_layers {
        offsets.push(at);
        at += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let at = offsets[l];
        let w = &theta[at..at + n_in * n_out];
        let h = &scratch.act[l];
        if l + 1 < n_layers {
            let y0s = &scratch.act[l + 1][..n_out * B];
            tanh_backward(flavor, &scratch.pre[l], y0s, &mut scratch.bar, n_out);
        }
        let bar = &scratch.bar;
        let (gw, gb) = grad[at..at + n_in * n_out + n_out].split_at_mut(n_in * n_out);
        for (j, gbj) in gb.iter_mut().enumerate() {
            let mut s = 0.0;
            for b in 0..B {
                s += bar[j * B + b];
            }
            *gbj += s;
        }
        for i in 0..n_in {
            let grow = &mut gw[i * n_out..(i + 1) * n_out];
            for (j, gij) in grow.iter_mut().enumerate() {
                let mut s = 0.0;
                for c in 0..4 {
                    let hrow = &h[(c * n_in + i) * B..(c * n_in + i) * B + B];
                    let brow = &bar[(c * n_out + j) * B..(c * n_out + j) * B + B];
                    for b in 0..B {
                        s = fma(hrow[b], brow[b], s);
                    }
                }
                *gij += s;
            }
        }
        if l > 0 {
            for i in 0..n_in {
                let wrow = &w[i * n_out..(i + 1) * n_out];
                for c in 0..4 {
                    let mut acc = [0.0f64; B];
                    for (j, &wij) in wrow.iter().enumerate() {
                        let brow = &bar[(c * n_out + j) * B..(c * n_out + j) * B + B];
                        for b in 0..B {
                            acc[b] = fma(wij, brow[b], acc[b]);
                        }
                    }
                    scratch.bar_prev[(c * n_in + i) * B..(c * n_in + i) * B + B]
                        .copy_from_slice(&acc);
                }
            }
            std::mem::swap(&mut scratch.bar, &mut scratch.bar_prev);
        }
    }
}

/// Sharded sum of per-point loss terms with optional gradient accumulation.
///
/// Points are split into a fixed number of contiguous shards aligned to
/// [`BATCH`] boundaries (the same partition whatever the thread count), each
/// shard owns fresh scratch state, and shard results combine in shard order,
/// so the result is independent of scheduling. `per_chunk` handles points
/// `[start, end)` and pushes one term per point. Returns the terms in point
/// order.
pub(crate) fn chunk_sum<S, F>(
    n_points: usize,
    parallel: bool,
    n_params: usize,
    grad: Option<&mut [f64]>,
    per_chunk: F,
) -> Vec<f64>
where
    S: Default + Send,
    F: Fn(usize, usize, &mut S, Option<&mut [f64]>, &mut Vec<f64>) + Sync,
{
    use rayon::prelude::*;
    const SHARDS: usize = 8;
    let want_grad = grad.is_some();
    let chunks = n_points.div_ceil(B);
    let chunks_per_shard = chunks.div_ceil(SHARDS).max(1);
    let per = chunks_per_shard * B;
    let ranges: Vec<(usize, usize)> = (0..n_points)
        .step_by(per)
        .map(|s| (s, (s + per).min(n_points)))
        .collect();
    let run_shard = |&(s, e): &(usize, usize)| {
        let mut scratch = S::default();
        let mut partial = want_grad.then(|| vec![0.0; n_params]);
        let mut terms = Vec::with_capacity(e - s);
        let mut at = s;
        while at < e {
            let hi = (at + B).min(e);
            per_chunk(at, hi, &mut scratch, partial.as_deref_mut(), &mut terms);
            at = hi;
        }
        (terms, partial)
    };
    let results: Vec<(Vec<f64>, Option<Vec<f64>>)> = if parallel {
        ranges.par_iter().map(run_shard).collect()
    } else {
        ranges.iter().map(run_shard).collect()
    };
    let mut terms = Vec::with_capacity(n_points);
    let mut grad = grad;
    for (t, partial) in results {
        terms.extend_from_slice(&t);
        if let (Some(g), Some(p)) = (grad.as_deref_mut(), partial) {
            for (gi, pi) in g.iter_mut().zip(&p) {
                *gi += pi;
            }
        }
    }
    terms
}

/// Input jets for the continuous-time flavor.
#[inline]
pub(crate) fn ct_inputs(t: f64, x: f64) -> [Jet; 2] {
    [[t, 1.0, 0.0, 0.0], [x, 0.0, 1.0, 0.0]]
}

/// Input jet for the x-derivatives flavor.
#[inline]
pub(crate) fn dx_inputs(x: f64) -> [Jet; 1] {
    [[x, 1.0, 0.0, 0.0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;
    use crate::network::Network;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_rel(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            "{a} vs {b}"
        );
    }

    /// Jets must match the graph engine, which is verified independently
    /// against finite differences. Exercises full and ragged batches.
    #[test]
    fn ct_jets_match_graph_engine() {
        let mut rng = StdRng::seed_from_u64(51);
        for sizes in [vec![2, 7, 1], vec![2, 9, 9, 3], vec![2, 20, 20, 20, 2]] {
            let arch = Architecture::new(sizes).unwrap();
            let net = Network::new(arch.clone(), 0);
            let theta = net.init(rng.gen());
            let mut g = Graph::new();
            let t = g.input(0);
            let x = g.input(1);
            let outs = net.build(&mut g, &[t, x]).unwrap();
            let mut scratch = Scratch::default();
            for count in [1usize, 3, BATCH] {
                let pts: Vec<(f64, f64)> = (0..count)
                    .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let jets: Vec<Jet> = pts
                    .iter()
                    .flat_map(|&(t, x)| ct_inputs(t, x))
                    .collect();
                forward(&arch, &theta, Flavor::Ct, &jets, count, &mut scratch);
                for (b, &(tv, xv)) in pts.iter().enumerate() {
                    let pt = [tv, xv];
                    for (k, &o) in outs.iter().enumerate() {
                        let jet = output_jet(&scratch, k, b);
                        let ut = g.derive(o, 0);
                        let ux = g.derive(o, 1);
                        let uxx = g.derive(ux, 1);
                        assert_rel(jet[0], g.eval(o, &theta, &pt).unwrap(), 1e-12);
                        assert_rel(jet[1], g.eval(ut, &theta, &pt).unwrap(), 1e-12);
                        assert_rel(jet[2], g.eval(ux, &theta, &pt).unwrap(), 1e-12);
                        assert_rel(jet[3], g.eval(uxx, &theta, &pt).unwrap(), 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn dx_jets_match_graph_engine() {
        let mut rng = StdRng::seed_from_u64(52);
        for sizes in [vec![1, 8, 2], vec![1, 12, 12, 4]] {
            let arch = Architecture::new(sizes).unwrap();
            let net = Network::new(arch.clone(), 0);
            let theta = net.init(rng.gen());
            let mut g = Graph::new();
            let x = g.input(0);
            let outs = net.build(&mut g, &[x]).unwrap();
            let mut scratch = Scratch::default();
            for count in [1usize, 5, BATCH] {
                let pts: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let jets: Vec<Jet> = pts.iter().flat_map(|&x| dx_inputs(x)).collect();
                forward(&arch, &theta, Flavor::Dx, &jets, count, &mut scratch);
                for (b, &xv) in pts.iter().enumerate() {
                    let pt = [xv];
                    for (k, &o) in outs.iter().enumerate() {
                        let jet = output_jet(&scratch, k, b);
                        let ux = g.derive(o, 0);
                        let uxx = g.derive(ux, 0);
                        let uxxx = g.derive(uxx, 0);
                        assert_rel(jet[0], g.eval(o, &theta, &pt).unwrap(), 1e-12);
                        assert_rel(jet[1], g.eval(ux, &theta, &pt).unwrap(), 1e-12);
                        assert_rel(jet[2], g.eval(uxx, &theta, &pt).unwrap(), 1e-11);
                        assert_rel(jet[3], g.eval(uxxx, &theta, &pt).unwrap(), 1e-11);
                    }
                }
            }
        }
    }

    /// Backward pass against the graph engine's reverse sweep, through a loss
    /// touching every jet component, summed over a ragged batch.
    #[test]
    fn ct_backward_matches_graph_gradient() {
        let mut rng = StdRng::seed_from_u64(53);
        let arch = Architecture::new(vec![2, 10, 10, 2]).unwrap();
        let net = Network::new(arch.clone(), 0);
        let theta = net.init(3);
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let outs = net.build(&mut g, &[t, x]).unwrap();
        // loss = sum over outputs of (u + 2 u_t + 3 u_x + 4 u_xx)^2
        let mut loss = g.constant(0.0);
        let (c2, c3, c4) = (g.constant(2.0), g.constant(3.0), g.constant(4.0));
        for &o in &outs {
            let ut = g.derive(o, 0);
            let ux = g.derive(o, 1);
            let uxx = g.derive(ux, 1);
            let mut s = g.mul_add(c2, ut, o);
            s = g.mul_add(c3, ux, s);
            s = g.mul_add(c4, uxx, s);
            let sq = g.square(s);
            loss = g.add(loss, sq);
        }
        let mut scratch = Scratch::default();
        for count in [1usize, 4, BATCH] {
            let pts: Vec<(f64, f64)> = (0..count)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut want = vec![0.0; theta.len()];
            for &(tv, xv) in &pts {
                let gi = g.grad_params(loss, &theta, &[tv, xv]).unwrap();
                for (w, v) in want.iter_mut().zip(&gi) {
                    *w += v;
                }
            }
            let jets: Vec<Jet> = pts.iter().flat_map(|&(t, x)| ct_inputs(t, x)).collect();
            forward(&arch, &theta, Flavor::Ct, &jets, count, &mut scratch);
            let mut bars = Vec::new();
            for b in 0..count {
                for k in 0..outs.len() {
                    let jet = output_jet(&scratch, k, b);
                    let s = jet[0] + 2.0 * jet[1] + 3.0 * jet[2] + 4.0 * jet[3];
                    bars.push([2.0 * s, 4.0 * s, 6.0 * s, 8.0 * s]);
                }
            }
            let mut grad = vec![0.0; theta.len()];
            backward(&arch, &theta, Flavor::Ct, &bars, count, &mut scratch, &mut grad);
            for (a, b) in grad.iter().zip(&want) {
                assert_rel(*a, *b, 1e-11);
            }
        }
    }

    #[test]
    fn dx_backward_matches_graph_gradient() {
        let mut rng = StdRng::seed_from_u64(54);
        let arch = Architecture::new(vec![1, 9, 9, 3]).unwrap();
        let net = Network::new(arch.clone(), 0);
        let theta = net.init(4);
        let mut g = Graph::new();
        let x = g.input(0);
        let outs = net.build(&mut g, &[x]).unwrap();
        let mut loss = g.constant(0.0);
        let (c2, c3, c4) = (g.constant(2.0), g.constant(3.0), g.constant(4.0));
        for &o in &outs {
            let ux = g.derive(o, 0);
            let uxx = g.derive(ux, 0);
            let uxxx = g.derive(uxx, 0);
            let mut s = g.mul_add(c2, ux, o);
            s = g.mul_add(c3, uxx, s);
            s = g.mul_add(c4, uxxx, s);
            let sq = g.square(s);
            loss = g.add(loss, sq);
        }
        let mut scratch = Scratch::default();
        for count in [1usize, 6, BATCH] {
            let pts: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut want = vec![0.0; theta.len()];
            for &xv in &pts {
                let gi = g.grad_params(loss, &theta, &[xv]).unwrap();
                for (w, v) in want.iter_mut().zip(&gi) {
                    *w += v;
                }
            }
            let jets: Vec<Jet> = pts.iter().flat_map(|&x| dx_inputs(x)).collect();
            forward(&arch, &theta, Flavor::Dx, &jets, count, &mut scratch);
            let mut bars = Vec::new();
            for b in 0..count {
                for k in 0..outs.len() {
                    let jet = output_jet(&scratch, k, b);
                    let s = jet[0] + 2.0 * jet[1] + 3.0 * jet[2] + 4.0 * jet[3];
                    bars.push([2.0 * s, 4.0 * s, 6.0 * s, 8.0 * s]);
                }
            }
            let mut grad = vec![0.0; theta.len()];
            backward(&arch, &theta, Flavor::Dx, &bars, count, &mut scratch, &mut grad);
            for (a, b) in grad.iter().zip(&want) {
                assert_rel(*a, *b, 1e-11);
            }
        }
    }
}
