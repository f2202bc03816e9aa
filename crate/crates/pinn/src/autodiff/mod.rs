//! Scalar computational-graph engine.
//!
//! Expressions are recorded as flat opcode graphs that can be re-evaluated at
//! different bindings without re-recording. Differentiation with respect to an
//! input variable is a graph-to-graph transformation ([`Graph::derive`]), so
//! derivative expressions are themselves differentiable: the graph is closed
//! under differentiation. Parameter gradients of a scalar come from a single
//! reverse sweep over the recorded operations.
//!
//! Leaves come in three kinds: `Const` (frozen at record time), `Param`
//! (trainable, shared across all evaluation points) and `Input` (per-point,
//! e.g. coordinates or data labels). Both leaf classes are bound positionally
//! at evaluation time.

mod batch;
mod objective;

pub use batch::{Compiled, LANES};
pub(crate) use objective::canonical_sum;
pub use objective::{Objective, ObjectiveFn, PointGroup};

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Reference to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    #[inline]
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Elementary operations. Operands are indices of earlier nodes, so every
/// graph is topologically ordered by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Const(f64),
    /// Trainable parameter, bound from the shared parameter vector.
    Param(u32),
    /// Per-point input variable (coordinate or label).
    Input(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    /// `a * b + c` evaluated as two roundings (not an IEEE fma), fused only
    /// to shorten the tape.
    MulAdd(u32, u32, u32),
    Tanh(u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
    /// Integer power with fixed exponent.
    Powi(u32, i32),
}

impl Op {
    /// Operand indices (up to three).
    #[inline]
    fn operands(&self) -> [Option<u32>; 3] {
        match *self {
            Op::Const(_) | Op::Param(_) | Op::Input(_) => [None, None, None],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                [Some(a), Some(b), None]
            }
            Op::Neg(a) | Op::Tanh(a) | Op::Sin(a) | Op::Cos(a) | Op::Exp(a) => {
                [Some(a), None, None]
            }
            Op::MulAdd(a, b, c) => [Some(a), Some(b), Some(c)],
            Op::Powi(a, _) => [Some(a), None, None],
        }
    }
}

/// Hashable structural key for common-subexpression elimination.
#[derive(PartialEq, Eq, Hash)]
enum OpKey {
    Const(u64),
    Param(u32),
    Input(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    MulAdd(u32, u32, u32),
    Tanh(u32),
    Sin(u32),
    Cos(u32),
    Exp(u32),
    Powi(u32, i32),
}

fn op_key(op: &Op) -> OpKey {
    match *op {
        Op::Const(v) => OpKey::Const(v.to_bits()),
        Op::Param(s) => OpKey::Param(s),
        Op::Input(s) => OpKey::Input(s),
        // Commutative ops are canonicalized so `a+b` and `b+a` share a node.
        Op::Add(a, b) => OpKey::Add(a.min(b), a.max(b)),
        Op::Sub(a, b) => OpKey::Sub(a, b),
        Op::Mul(a, b) => OpKey::Mul(a.min(b), a.max(b)),
        Op::Div(a, b) => OpKey::Div(a, b),
        Op::Neg(a) => OpKey::Neg(a),
        Op::MulAdd(a, b, c) => OpKey::MulAdd(a.min(b), a.max(b), c),
        Op::Tanh(a) => OpKey::Tanh(a),
        Op::Sin(a) => OpKey::Sin(a),
        Op::Cos(a) => OpKey::Cos(a),
        Op::Exp(a) => OpKey::Exp(a),
        Op::Powi(a, k) => OpKey::Powi(a, k),
    }
}

/// Append-only computational graph.
#[derive(Default)]
pub struct Graph {
    ops: Vec<Op>,
    cse: HashMap<OpKey, NodeId>,
    n_param_slots: u32,
    n_input_slots: u32,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn n_param_slots(&self) -> usize {
        self.n_param_slots as usize
    }

    pub fn n_input_slots(&self) -> usize {
        self.n_input_slots as usize
    }

    #[inline]
    fn const_value(&self, id: NodeId) -> Option<f64> {
        match self.ops[id.idx()] {
            Op::Const(v) => Some(v),
            _ => None,
        }
    }

    #[inline]
    fn push(&mut self, op: Op) -> NodeId {
        let key = op_key(&op);
        if let Some(&id) = self.cse.get(&key) {
            return id;
        }
        let id = NodeId(self.ops.len() as u32);
        self.ops.push(op);
        self.cse.insert(key, id);
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Const(v))
    }

    pub fn param(&mut self, slot: u32) -> NodeId {
        self.n_param_slots = self.n_param_slots.max(slot + 1);
        self.push(Op::Param(slot))
    }

    pub fn input(&mut self, slot: u32) -> NodeId {
        self.n_input_slots = self.n_input_slots.max(slot + 1);
        self.push(Op::Input(slot))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => self.constant(x + y),
            (Some(x), None) if x == 0.0 => b,
            (None, Some(y)) if y == 0.0 => a,
            _ => self.push(Op::Add(a.0, b.0)),
        }
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        if a == b {
            return self.constant(0.0);
        }
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => self.constant(x - y),
            (None, Some(y)) if y == 0.0 => a,
            (Some(x), None) if x == 0.0 => self.neg(b),
            _ => self.push(Op::Sub(a.0, b.0)),
        }
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) => self.constant(x * y),
            (Some(x), None) if x == 0.0 => self.constant(0.0),
            (None, Some(y)) if y == 0.0 => self.constant(0.0),
            (Some(x), None) if x == 1.0 => b,
            (None, Some(y)) if y == 1.0 => a,
            (Some(x), None) if x == -1.0 => self.neg(b),
            (None, Some(y)) if y == -1.0 => self.neg(a),
            _ => self.push(Op::Mul(a.0, b.0)),
        }
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.const_value(a), self.const_value(b)) {
            (Some(x), Some(y)) if y != 0.0 => self.constant(x / y),
            (Some(x), None) if x == 0.0 => self.constant(0.0),
            (None, Some(y)) if y == 1.0 => a,
            _ => self.push(Op::Div(a.0, b.0)),
        }
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        match self.ops[a.idx()] {
            Op::Const(v) => self.constant(-v),
            Op::Neg(inner) => NodeId(inner),
            _ => self.push(Op::Neg(a.0)),
        }
    }

    /// `a*b + c` as a single node.
    pub fn mul_add(&mut self, a: NodeId, b: NodeId, c: NodeId) -> NodeId {
        let (ca, cb, cc) = (
            self.const_value(a),
            self.const_value(b),
            self.const_value(c),
        );
        match (ca, cb, cc) {
            (Some(x), Some(y), Some(z)) => self.constant(x * y + z),
            (Some(x), _, _) if x == 0.0 => c,
            (_, Some(y), _) if y == 0.0 => c,
            (Some(x), _, _) if x == 1.0 => self.add(b, c),
            (_, Some(y), _) if y == 1.0 => self.add(a, c),
            (Some(x), Some(y), _) => {
                let xy = self.constant(x * y);
                self.add(xy, c)
            }
            (_, _, Some(z)) if z == 0.0 => self.mul(a, b),
            _ => self.push(Op::MulAdd(a.0, b.0, c.0)),
        }
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(v) => self.constant(v.tanh()),
            None => self.push(Op::Tanh(a.0)),
        }
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(v) => self.constant(v.sin()),
            None => self.push(Op::Sin(a.0)),
        }
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(v) => self.constant(v.cos()),
            None => self.push(Op::Cos(a.0)),
        }
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        match self.const_value(a) {
            Some(v) => self.constant(v.exp()),
            None => self.push(Op::Exp(a.0)),
        }
    }

    pub fn powi(&mut self, a: NodeId, k: i32) -> NodeId {
        if k == 0 {
            return self.constant(1.0);
        }
        if k == 1 {
            return a;
        }
        match self.const_value(a) {
            Some(v) => self.constant(v.powi(k)),
            None => self.push(Op::Powi(a.0, k)),
        }
    }

    /// Squared value, `a*a`.
    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.mul(a, a)
    }

    /// Ascending indices of all nodes the given roots depend on (roots included).
    fn ancestors(&self, roots: &[NodeId]) -> Vec<u32> {
        let mut seen = vec![false; self.ops.len()];
        let mut stack: Vec<u32> = Vec::new();
        for r in roots {
            if !seen[r.idx()] {
                seen[r.idx()] = true;
                stack.push(r.0);
            }
        }
        while let Some(i) = stack.pop() {
            for o in self.ops[i as usize].operands().into_iter().flatten() {
                if !seen[o as usize] {
                    seen[o as usize] = true;
                    stack.push(o);
                }
            }
        }
        (0..self.ops.len() as u32)
            .filter(|&i| seen[i as usize])
            .collect()
    }

    /// Derivative of `expr` with respect to the input variable in `slot`,
    /// as a new expression in the same graph.
    ///
    /// New nodes are appended through the simplifying constructors, so
    /// branches that do not depend on the variable collapse to constants.
    pub fn derive(&mut self, expr: NodeId, slot: u32) -> NodeId {
        let order = self.ancestors(&[expr]);
        let mut dmap: HashMap<u32, NodeId> = HashMap::with_capacity(order.len());
        for &i in &order {
            let op = self.ops[i as usize];
            let d = match op {
                Op::Const(_) | Op::Param(_) => self.constant(0.0),
                Op::Input(s) => self.constant(if s == slot { 1.0 } else { 0.0 }),
                Op::Add(a, b) => {
                    let (da, db) = (dmap[&a], dmap[&b]);
                    self.add(da, db)
                }
                Op::Sub(a, b) => {
                    let (da, db) = (dmap[&a], dmap[&b]);
                    self.sub(da, db)
                }
                Op::Mul(a, b) => {
                    let (da, db) = (dmap[&a], dmap[&b]);
                    let a_db = self.mul(NodeId(a), db);
                    self.mul_add(da, NodeId(b), a_db)
                }
                Op::Div(a, b) => {
                    // d(a/b) = (da - (a/b)·db) / b
                    let (da, db) = (dmap[&a], dmap[&b]);
                    let r_db = self.mul(NodeId(i), db);
                    let num = self.sub(da, r_db);
                    self.div(num, NodeId(b))
                }
                Op::Neg(a) => {
                    let da = dmap[&a];
                    self.neg(da)
                }
                Op::MulAdd(a, b, c) => {
                    let (da, db, dc) = (dmap[&a], dmap[&b], dmap[&c]);
                    let inner = self.mul_add(NodeId(a), db, dc);
                    self.mul_add(da, NodeId(b), inner)
                }
                Op::Tanh(a) => {
                    let da = dmap[&a];
                    let r2 = self.mul(NodeId(i), NodeId(i));
                    let one = self.constant(1.0);
                    let sech2 = self.sub(one, r2);
                    self.mul(sech2, da)
                }
                Op::Sin(a) => {
                    let da = dmap[&a];
                    let c = self.cos(NodeId(a));
                    self.mul(c, da)
                }
                Op::Cos(a) => {
                    let da = dmap[&a];
                    let s = self.sin(NodeId(a));
                    let m = self.mul(s, da);
                    self.neg(m)
                }
                Op::Exp(a) => {
                    let da = dmap[&a];
                    self.mul(NodeId(i), da)
                }
                Op::Powi(a, k) => {
                    let da = dmap[&a];
                    let kc = self.constant(f64::from(k));
                    let p = self.powi(NodeId(a), k - 1);
                    let kp = self.mul(kc, p);
                    self.mul(kp, da)
                }
            };
            dmap.insert(i, d);
        }
        dmap[&expr.0]
    }

    /// Repeated [`Graph::derive`]; `order` must be 1, 2 or 3.
    pub fn derive_n(&mut self, expr: NodeId, slot: u32, order: u32) -> Result<NodeId> {
        if !(1..=3).contains(&order) {
            return Err(Error::structural(format!(
                "derivative order {order} unsupported (must be 1..=3)"
            )));
        }
        let mut e = expr;
        for _ in 0..order {
            e = self.derive(e, slot);
        }
        Ok(e)
    }

    /// Evaluate one node at the given bindings. Checked, scalar path: intended
    /// for tests and small expressions; batch evaluation goes through
    /// [`Compiled`].
    pub fn eval(&self, expr: NodeId, params: &[f64], inputs: &[f64]) -> Result<f64> {
        let vals = self.eval_all(expr, params, inputs)?;
        Ok(vals[expr.idx()])
    }

    fn eval_all(&self, expr: NodeId, params: &[f64], inputs: &[f64]) -> Result<Vec<f64>> {
        for (what, vs) in [("param", params), ("input", inputs)] {
            if let Some(v) = vs.iter().find(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("non-finite {what} binding {v}")));
            }
        }
        let mut vals = vec![0.0; self.ops.len()];
        for i in self.ancestors(&[expr]) {
            let v = &vals;
            let x = match self.ops[i as usize] {
                Op::Const(c) => c,
                Op::Param(s) => *params.get(s as usize).ok_or_else(|| {
                    Error::structural(format!("unbound parameter slot {s}"))
                })?,
                Op::Input(s) => *inputs.get(s as usize).ok_or_else(|| {
                    Error::structural(format!("unbound input slot {s}"))
                })?,
                Op::Add(a, b) => v[a as usize] + v[b as usize],
                Op::Sub(a, b) => v[a as usize] - v[b as usize],
                Op::Mul(a, b) => v[a as usize] * v[b as usize],
                Op::Div(a, b) => {
                    if v[b as usize] == 0.0 {
                        return Err(Error::numeric("division by zero".to_string()));
                    }
                    v[a as usize] / v[b as usize]
                }
                Op::Neg(a) => -v[a as usize],
                Op::MulAdd(a, b, c) => v[a as usize] * v[b as usize] + v[c as usize],
                Op::Tanh(a) => v[a as usize].tanh(),
                Op::Sin(a) => v[a as usize].sin(),
                Op::Cos(a) => v[a as usize].cos(),
                Op::Exp(a) => v[a as usize].exp(),
                Op::Powi(a, k) => v[a as usize].powi(k),
            };
            if !x.is_finite() {
                return Err(Error::numeric(format!(
                    "non-finite value at node {i} ({:?})",
                    self.ops[i as usize]
                )));
            }
            vals[i as usize] = x;
        }
        Ok(vals)
    }

    /// Gradient of a scalar expression with respect to every parameter slot,
    /// by one reverse sweep. Exact for the recorded graph.
    pub fn grad_params(
        &self,
        expr: NodeId,
        params: &[f64],
        inputs: &[f64],
    ) -> Result<Vec<f64>> {
        let vals = self.eval_all(expr, params, inputs)?;
        let order = self.ancestors(&[expr]);
        let mut adj = vec![0.0; self.ops.len()];
        adj[expr.idx()] = 1.0;
        let mut grad = vec![0.0; params.len()];
        for &i in order.iter().rev() {
            let a = adj[i as usize];
            if a == 0.0 {
                continue;
            }
            match self.ops[i as usize] {
                Op::Const(_) | Op::Input(_) => {}
                Op::Param(s) => grad[s as usize] += a,
                Op::Add(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] += a;
                }
                Op::Sub(x, y) => {
                    adj[x as usize] += a;
                    adj[y as usize] -= a;
                }
                Op::Mul(x, y) => {
                    adj[x as usize] += a * vals[y as usize];
                    adj[y as usize] += a * vals[x as usize];
                }
                Op::Div(x, y) => {
                    adj[x as usize] += a / vals[y as usize];
                    adj[y as usize] -= a * vals[i as usize] / vals[y as usize];
                }
                Op::Neg(x) => adj[x as usize] -= a,
                Op::MulAdd(x, y, c) => {
                    adj[x as usize] += a * vals[y as usize];
                    adj[y as usize] += a * vals[x as usize];
                    adj[c as usize] += a;
                }
                Op::Tanh(x) => {
                    let r = vals[i as usize];
                    adj[x as usize] += a * (1.0 - r * r);
                }
                Op::Sin(x) => adj[x as usize] += a * vals[x as usize].cos(),
                Op::Cos(x) => adj[x as usize] -= a * vals[x as usize].sin(),
                Op::Exp(x) => adj[x as usize] += a * vals[i as usize],
                Op::Powi(x, k) => {
                    adj[x as usize] += a * f64::from(k) * vals[x as usize].powi(k - 1);
                }
            }
        }
        Ok(grad)
    }
}
