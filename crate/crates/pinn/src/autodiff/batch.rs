//! Batched graph evaluation.
//!
//! A [`Compiled`] graph evaluates a fixed expression over many points at once:
//! values are stored node-major with a small number of lanes per node, so the
//! interpreter dispatch cost is amortized and the per-lane loops vectorize.
//! The reverse sweep uses precomputed store/accumulate masks instead of
//! zero-initializing the adjoint buffer: the highest-indexed consumer of a
//! node writes its adjoint, everyone else accumulates.

use super::{Graph, NodeId, Op};

/// Lanes evaluated per dispatch. Chosen so the value and adjoint buffers of
/// typical residual graphs stay cache-resident.
pub const LANES: usize = 8;

const L: usize = LANES;

/// An immutable graph compacted to the ancestors of its outputs, ready for
/// batched forward/reverse evaluation. Safe to share across threads.
pub struct Compiled {
    ops: Vec<Op>,
    /// Bit p set: operand position p performs the adjoint store for its node.
    masks: Vec<u8>,
    outputs: Vec<u32>,
    /// (parameter slot, node index) for every parameter the outputs depend on.
    params: Vec<(u32, u32)>,
    n_input_slots: usize,
}

#[inline(always)]
unsafe fn row(buf: *const f64, node: u32) -> [f64; L] {
    *buf.add(node as usize * L).cast::<[f64; L]>()
}

#[inline(always)]
unsafe fn write_row(buf: *mut f64, node: usize, vals: [f64; L]) {
    *buf.add(node * L).cast::<[f64; L]>() = vals;
}

#[inline(always)]
unsafe fn scatter(buf: *mut f64, node: u32, store: bool, c: [f64; L]) {
    let p = buf.add(node as usize * L).cast::<[f64; L]>();
    if store {
        *p = c;
    } else {
        let mut cur = *p;
        for l in 0..L {
            cur[l] += c[l];
        }
        *p = cur;
    }
}

impl Compiled {
    pub fn new(graph: &Graph, outputs: &[NodeId]) -> Compiled {
        // Compact: keep only ancestors of the outputs, preserving order.
        let keep = graph.ancestors(outputs);
        let mut remap = vec![u32::MAX; graph.len()];
        let mut ops = Vec::with_capacity(keep.len());
        let mut params = Vec::new();
        for (new_i, &old_i) in keep.iter().enumerate() {
            remap[old_i as usize] = new_i as u32;
            let op = match graph.ops[old_i as usize] {
                Op::Const(v) => Op::Const(v),
                Op::Param(s) => {
                    params.push((s, new_i as u32));
                    Op::Param(s)
                }
                Op::Input(s) => Op::Input(s),
                Op::Add(a, b) => Op::Add(remap[a as usize], remap[b as usize]),
                Op::Sub(a, b) => Op::Sub(remap[a as usize], remap[b as usize]),
                Op::Mul(a, b) => Op::Mul(remap[a as usize], remap[b as usize]),
                Op::Div(a, b) => Op::Div(remap[a as usize], remap[b as usize]),
                Op::Neg(a) => Op::Neg(remap[a as usize]),
                Op::MulAdd(a, b, c) => {
                    Op::MulAdd(remap[a as usize], remap[b as usize], remap[c as usize])
                }
                Op::Tanh(a) => Op::Tanh(remap[a as usize]),
                Op::Sin(a) => Op::Sin(remap[a as usize]),
                Op::Cos(a) => Op::Cos(remap[a as usize]),
                Op::Exp(a) => Op::Exp(remap[a as usize]),
                Op::Powi(a, k) => Op::Powi(remap[a as usize], k),
            };
            ops.push(op);
        }

        // Highest-indexed consumer of each node (and the first operand
        // position referencing it there) performs the adjoint store.
        let mut last: Vec<(u32, u8)> = vec![(u32::MAX, 0); ops.len()];
        for (j, op) in ops.iter().enumerate() {
            let operands = op.operands();
            for (pos, o) in operands.into_iter().enumerate() {
                let Some(o) = o else { continue };
                // Only the first position within op j counts for node o.
                let first = operands[..pos].iter().all(|p| *p != Some(o));
                if first {
                    last[o as usize] = (j as u32, pos as u8);
                }
            }
        }
        let mut masks = vec![0u8; ops.len()];
        for &(j, pos) in &last {
            if j != u32::MAX {
                masks[j as usize] |= 1 << pos;
            }
        }

        Compiled {
            ops,
            masks,
            outputs: outputs.iter().map(|o| remap[o.idx()]).collect(),
            params,
            n_input_slots: graph.n_input_slots(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn n_input_slots(&self) -> usize {
        self.n_input_slots
    }

    pub(crate) fn values_len(&self) -> usize {
        self.ops.len() * LANES
    }

    /// Forward pass over one chunk of up to `LANES` consecutive points.
    /// `points` is row-major `n_points × n_slots`; rows past the end of the
    /// chunk replicate the last valid row.
    ///
    /// `vals` must hold `n_nodes * LANES` elements.
    pub(crate) fn forward_chunk(
        &self,
        params: &[f64],
        points: &[f64],
        n_slots: usize,
        start: usize,
        n_points: usize,
        vals: &mut [f64],
    ) {
        assert!(vals.len() >= self.ops.len() * L);
        assert!(start < n_points);
        assert!(points.len() >= n_points * n_slots);
        let mut rows = [0usize; L];
        for (l, r) in rows.iter_mut().enumerate() {
            *r = (start + l).min(n_points - 1);
        }
        let v = vals.as_mut_ptr();
        // SAFETY: operand indices are < the node's own index by construction,
        // all node indices are < ops.len(), and `vals` is long enough. Rows
        // are clamped to valid points. Loads go through by-value local
        // arrays, so the store never aliases a live load.
        unsafe {
            for (i, op) in self.ops.iter().enumerate() {
                let mut r = [0.0f64; L];
                match *op {
                    Op::Const(c) => r = [c; L],
                    Op::Param(s) => r = [params[s as usize]; L],
                    Op::Input(s) => {
                        for l in 0..L {
                            r[l] = points[rows[l] * n_slots + s as usize];
                        }
                    }
                    Op::Add(a, b) => {
                        let (x, y) = (row(v, a), row(v, b));
                        for l in 0..L {
                            r[l] = x[l] + y[l];
                        }
                    }
                    Op::Sub(a, b) => {
                        let (x, y) = (row(v, a), row(v, b));
                        for l in 0..L {
                            r[l] = x[l] - y[l];
                        }
                    }
                    Op::Mul(a, b) => {
                        let (x, y) = (row(v, a), row(v, b));
                        for l in 0..L {
                            r[l] = x[l] * y[l];
                        }
                    }
                    Op::Div(a, b) => {
                        let (x, y) = (row(v, a), row(v, b));
                        for l in 0..L {
                            r[l] = x[l] / y[l];
                        }
                    }
                    Op::Neg(a) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = -x[l];
                        }
                    }
                    Op::MulAdd(a, b, c) => {
                        let (x, y, z) = (row(v, a), row(v, b), row(v, c));
                        for l in 0..L {
                            r[l] = x[l] * y[l] + z[l];
                        }
                    }
                    Op::Tanh(a) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = x[l].tanh();
                        }
                    }
                    Op::Sin(a) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = x[l].sin();
                        }
                    }
                    Op::Cos(a) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = x[l].cos();
                        }
                    }
                    Op::Exp(a) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = x[l].exp();
                        }
                    }
                    Op::Powi(a, k) => {
                        let x = row(v, a);
                        for l in 0..L {
                            r[l] = x[l].powi(k);
                        }
                    }
                }
                write_row(v, i, r);
            }
        }
    }

    /// Reverse sweep for a single-output graph after [`Self::forward_chunk`].
    /// The output adjoint is seeded per lane with `seeds` (zero for padding
    /// lanes); parameter-slot gradients accumulate into `grad`.
    pub(crate) fn reverse_chunk(
        &self,
        vals: &[f64],
        seeds: &[f64; LANES],
        adj: &mut [f64],
        grad: &mut [f64],
    ) {
        assert_eq!(self.outputs.len(), 1);
        assert!(vals.len() >= self.ops.len() * L);
        assert!(adj.len() >= self.ops.len() * L);
        let out = self.outputs[0] as usize;
        let v = vals.as_ptr();
        let ad = adj.as_mut_ptr();

        // SAFETY: same index invariants as forward_chunk; adjoints of a node
        // are complete before it is visited because consumers have higher
        // indices and the sweep runs descending. Every non-output node kept
        // by compaction has at least one consumer, whose store-masked write
        // initializes the adjoint row before any accumulate or read.
        unsafe {
            write_row(ad, out, *seeds);
            for i in (0..self.ops.len()).rev() {
                let op = self.ops[i];
                // Leaves carry no operands; their adjoints are read afterwards.
                if matches!(op, Op::Const(_) | Op::Param(_) | Op::Input(_)) {
                    continue;
                }
                let a: [f64; L] = row(ad, i as u32);
                let m = self.masks[i];
                match op {
                    Op::Add(x, y) => {
                        scatter(ad, x, m & 1 != 0, a);
                        scatter(ad, y, m & 2 != 0, a);
                    }
                    Op::Sub(x, y) => {
                        scatter(ad, x, m & 1 != 0, a);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = -a[l];
                        }
                        scatter(ad, y, m & 2 != 0, c);
                    }
                    Op::Mul(x, y) => {
                        let (vx, vy) = (row(v, x), row(v, y));
                        let mut cx = [0.0; L];
                        let mut cy = [0.0; L];
                        for l in 0..L {
                            cx[l] = a[l] * vy[l];
                            cy[l] = a[l] * vx[l];
                        }
                        scatter(ad, x, m & 1 != 0, cx);
                        scatter(ad, y, m & 2 != 0, cy);
                    }
                    Op::Div(x, y) => {
                        let (vy, vr) = (row(v, y), row(v, i as u32));
                        let mut cx = [0.0; L];
                        let mut cy = [0.0; L];
                        for l in 0..L {
                            let inv = a[l] / vy[l];
                            cx[l] = inv;
                            cy[l] = -inv * vr[l];
                        }
                        scatter(ad, x, m & 1 != 0, cx);
                        scatter(ad, y, m & 2 != 0, cy);
                    }
                    Op::Neg(x) => {
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = -a[l];
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::MulAdd(x, y, z) => {
                        let (vx, vy) = (row(v, x), row(v, y));
                        let mut cx = [0.0; L];
                        let mut cy = [0.0; L];
                        for l in 0..L {
                            cx[l] = a[l] * vy[l];
                            cy[l] = a[l] * vx[l];
                        }
                        scatter(ad, x, m & 1 != 0, cx);
                        scatter(ad, y, m & 2 != 0, cy);
                        scatter(ad, z, m & 4 != 0, a);
                    }
                    Op::Tanh(x) => {
                        let vr = row(v, i as u32);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = a[l] * (1.0 - vr[l] * vr[l]);
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::Sin(x) => {
                        let vx = row(v, x);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = a[l] * vx[l].cos();
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::Cos(x) => {
                        let vx = row(v, x);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = -a[l] * vx[l].sin();
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::Exp(x) => {
                        let vr = row(v, i as u32);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = a[l] * vr[l];
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::Powi(x, k) => {
                        let vx = row(v, x);
                        let mut c = [0.0; L];
                        for l in 0..L {
                            c[l] = a[l] * f64::from(k) * vx[l].powi(k - 1);
                        }
                        scatter(ad, x, m & 1 != 0, c);
                    }
                    Op::Const(_) | Op::Param(_) | Op::Input(_) => unreachable!(),
                }
            }
            for &(slot, node) in &self.params {
                let p = row(ad, node);
                let mut s = 0.0;
                for l in 0..L {
                    s += p[l];
                }
                grad[slot as usize] += s;
            }
        }
    }

    /// Read the output values of the lanes `0..count` after a forward pass.
    pub(crate) fn read_outputs(&self, vals: &[f64], count: usize, out: &mut Vec<f64>) {
        for l in 0..count {
            for &o in &self.outputs {
                out.push(vals[o as usize * LANES + l]);
            }
        }
    }

    /// Evaluate all outputs at every point (forward only). Returns a
    /// row-major `n_points × n_outputs` vector.
    pub fn eval_points(&self, params: &[f64], points: &[f64], n_slots: usize) -> Vec<f64> {
        assert!(n_slots >= self.n_input_slots);
        let n_points = if n_slots == 0 { 1 } else { points.len() / n_slots };
        let mut vals = vec![0.0; self.values_len()];
        let mut out = Vec::with_capacity(n_points * self.outputs.len());
        let mut start = 0;
        while start < n_points {
            self.forward_chunk(params, points, n_slots, start, n_points, &mut vals);
            let count = LANES.min(n_points - start);
            self.read_outputs(&vals, count, &mut out);
            start += LANES;
        }
        out
    }
}
