//! Point-sum objectives.
//!
//! Training losses are sums of identical scalar expressions evaluated at many
//! points with shared parameters. An [`Objective`] holds one compiled graph
//! per term family (a [`PointGroup`]) together with its per-point bindings
//! and weight, and evaluates value and parameter gradient over all groups.
//!
//! Points are split into a fixed number of shards, so results are identical
//! whatever the thread count. The loss value itself sums the per-point terms
//! in ascending value order, which makes it bit-for-bit invariant under
//! permutation of the data points.

use std::cell::RefCell;

use rayon::prelude::*;

use super::batch::{Compiled, LANES};
use crate::error::{Error, Result};

/// Fixed shard count: parallel schedules never change the arithmetic.
const SHARDS: usize = 8;

/// Canonical sum: ascending order, so any permutation of the terms (i.e. of
/// the data points) yields the identical f64.
pub(crate) fn canonical_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Scalar-valued objective with gradient, as consumed by the optimizer.
pub trait ObjectiveFn: Sync {
    fn dim(&self) -> usize;
    /// Value and gradient at `x`. `grad` has length `dim()`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    /// Value only; the default recomputes the gradient.
    fn value(&self, x: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim()];
        self.value_grad(x, &mut g)
    }
}

/// One family of loss terms: a compiled single-output graph, its per-point
/// input bindings, and a multiplicative weight (e.g. `1/N`).
pub struct PointGroup {
    compiled: Compiled,
    bindings: Vec<f64>,
    n_points: usize,
    n_slots: usize,
    weight: f64,
}

impl PointGroup {
    pub fn new(compiled: Compiled, bindings: Vec<f64>, n_slots: usize, weight: f64) -> Result<Self> {
        if compiled.n_outputs() != 1 {
            return Err(Error::structural("loss group graph must have one output"));
        }
        if n_slots < compiled.n_input_slots() {
            return Err(Error::structural(format!(
                "group binds {} input slots but graph uses {}",
                n_slots,
                compiled.n_input_slots()
            )));
        }
        if n_slots == 0 || bindings.len() % n_slots != 0 || bindings.is_empty() {
            return Err(Error::structural("bindings length not a multiple of slot count"));
        }
        let n_points = bindings.len() / n_slots;
        Ok(PointGroup {
            compiled,
            bindings,
            n_points,
            n_slots,
            weight,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Contiguous shard ranges over the points.
    fn shard_ranges(&self) -> Vec<(usize, usize)> {
        let n = self.n_points;
        let per = n.div_ceil(SHARDS);
        (0..n)
            .step_by(per.max(1))
            .map(|s| (s, (s + per).min(n)))
            .collect()
    }

    /// Per-point terms over `[start, end)`, and optionally the gradient
    /// contribution (unweighted terms; gradient is weighted).
    fn eval_range(
        &self,
        params: &[f64],
        start: usize,
        end: usize,
        mut grad: Option<&mut [f64]>,
    ) -> Vec<f64> {
        let mut terms = Vec::with_capacity(end - start);
        SCRATCH.with(|cell| {
            let (vals, adj) = &mut *cell.borrow_mut();
            let need = self.compiled.values_len();
            if vals.len() < need {
                vals.resize(need, 0.0);
            }
            if grad.is_some() && adj.len() < need {
                adj.resize(need, 0.0);
            }
            let mut chunk = start;
            while chunk < end {
                self.compiled.forward_chunk(
                    params,
                    &self.bindings,
                    self.n_slots,
                    chunk,
                    self.n_points,
                    vals,
                );
                let count = LANES.min(end - chunk);
                self.compiled.read_outputs(vals, count, &mut terms);
                if let Some(g) = grad.as_deref_mut() {
                    let mut seeds = [0.0; LANES];
                    for s in seeds.iter_mut().take(count) {
                        *s = self.weight;
                    }
                    self.compiled.reverse_chunk(vals, &seeds, adj, g);
                }
                chunk += LANES;
            }
        });
        terms
    }
}

/// Sum of weighted point groups; the training objective.
pub struct Objective {
    groups: Vec<PointGroup>,
    n_params: usize,
    parallel: bool,
}

impl Objective {
    pub fn new(groups: Vec<PointGroup>, n_params: usize) -> Objective {
        Objective {
            groups,
            n_params,
            parallel: false,
        }
    }

    /// Evaluate group shards on the rayon pool. Off by default; results are
    /// identical either way.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn groups(&self) -> &[PointGroup] {
        &self.groups
    }

    fn canonical_sum(terms: Vec<f64>) -> f64 {
        canonical_sum(terms)
    }

    fn eval(&self, params: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        assert!(params.len() >= self.n_params);
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut total = 0.0;
        for group in &self.groups {
            let ranges = group.shard_ranges();
            let want_grad = grad.is_some();
            let shard_results: Vec<(Vec<f64>, Option<Vec<f64>>)> = if self.parallel {
                ranges
                    .par_iter()
                    .map(|&(s, e)| {
                        let mut g = want_grad.then(|| vec![0.0; self.n_params]);
                        let terms = group.eval_range(params, s, e, g.as_deref_mut());
                        (terms, g)
                    })
                    .collect()
            } else {
                ranges
                    .iter()
                    .map(|&(s, e)| {
                        let mut g = want_grad.then(|| vec![0.0; self.n_params]);
                        let terms = group.eval_range(params, s, e, g.as_deref_mut());
                        (terms, g)
                    })
                    .collect()
            };
            let mut terms = Vec::with_capacity(group.n_points);
            for (t, partial) in shard_results {
                terms.extend_from_slice(&t);
                if let (Some(g), Some(p)) = (grad.as_deref_mut(), partial) {
                    for (gi, pi) in g.iter_mut().zip(&p) {
                        *gi += pi;
                    }
                }
            }
            total += group.weight * Self::canonical_sum(terms);
        }
        total
    }

    pub fn loss(&self, params: &[f64]) -> f64 {
        self.eval(params, None)
    }

    pub fn loss_grad(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(params, Some(grad))
    }
}

impl ObjectiveFn for Objective {
    fn dim(&self) -> usize {
        self.n_params
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.loss_grad(x, grad)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.loss(x)
    }
}
