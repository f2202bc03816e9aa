//! Discrete-time physics-informed losses.
//!
//! A multi-output network predicts the Runge-Kutta stage values
//! `u^{n+c_j}(x)` at one time level. Rearranging the stage equations gives
//! data-matching maps:
//!
//! - forward (stages + prediction output, matched to the snapshot at `t^n`
//!   plus boundary penalties):
//!   `u^n_j := u^{n+c_j} + Δt Σ_k a_jk N[u^{n+c_k}]`, and
//!   `u^n_{q+1} := u^{n+1} + Δt Σ_k b_k N[u^{n+c_k}]`;
//! - identification (stages only, matched to both snapshots):
//!   `u^n_i := u^{n+c_i} + Δt Σ_j a_ij N[u^{n+c_j};λ]` and
//!   `u^{n+1}_i := u^{n+c_i} + Δt Σ_j (a_ij − b_j) N[u^{n+c_j};λ]`.
//!
//! Losses are sums of squared errors (no normalization), `SSE_n + SSE_b`
//! (forward) and `SSE_n + SSE_{n+1}` (identification).

use super::ButcherTableau;
use crate::autodiff::{
    canonical_sum, Compiled, Graph, Objective, ObjectiveFn, PointGroup,
};
use crate::error::{Error, Result};
use crate::jet;
use crate::network::Network;
use crate::pde::LambdaSource;

/// Solution samples at one time level.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    /// `(x, u)` pairs.
    pub points: Vec<(f64, f64)>,
}

/// Which PDE the stage operator `N[u; λ]` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageEquation {
    /// `N = λ1 u u_x − λ2 u_xx`
    Burgers,
    /// `N = λ1 u u_x + λ2 u_xxx`
    Kdv,
}

impl StageEquation {
    fn graph_operator(
        self,
        g: &mut Graph,
        u: crate::autodiff::NodeId,
        x_slot: u32,
        lambda: LambdaSource,
    ) -> crate::autodiff::NodeId {
        match self {
            StageEquation::Burgers => super::burgers_operator(g, u, x_slot, lambda),
            StageEquation::Kdv => super::kdv_operator(g, u, x_slot, lambda),
        }
    }

    /// Operator value from a jet `[u, u_x, u_xx, u_xxx]`.
    #[inline]
    fn value(self, j: &jet::Jet, l1: f64, l2: f64) -> f64 {
        match self {
            StageEquation::Burgers => l1 * j[0] * j[1] - l2 * j[2],
            StageEquation::Kdv => l1 * j[0] * j[1] + l2 * j[3],
        }
    }

    /// Accumulate `m·∂N/∂jet` into the jet adjoint, and return
    /// `(∂N/∂λ1, ∂N/∂λ2)`.
    #[inline]
    fn seed(self, j: &jet::Jet, l1: f64, l2: f64, m: f64, bar: &mut jet::Jet) -> (f64, f64) {
        bar[0] += m * l1 * j[1];
        bar[1] += m * l1 * j[0];
        match self {
            StageEquation::Burgers => {
                bar[2] -= m * l2;
                (j[0] * j[1], -j[2])
            }
            StageEquation::Kdv => {
                bar[3] += m * l2;
                (j[0] * j[1], j[3])
            }
        }
    }
}

struct DtGroup {
    /// Row-major `n_rows × q` map coefficients (already the bare tableau
    /// entries; Δt is applied at evaluation).
    m: Vec<f64>,
    n_rows: usize,
    /// `(x, u)` data.
    points: Vec<(f64, f64)>,
}

/// Discrete-time loss on the jet engine.
pub struct DtObjective {
    net: Network,
    equation: StageEquation,
    lambda: Option<(usize, usize)>,
    fixed: (f64, f64),
    dt: f64,
    q: usize,
    groups: Vec<DtGroup>,
    /// Boundary abscissae with zero-value penalties on every output
    /// (forward problem only).
    boundary: Vec<f64>,
    n_params: usize,
    parallel: bool,
}

#[derive(Default)]
struct DtScratch {
    jets: jet::Scratch,
    inputs: Vec<jet::Jet>,
    out: Vec<jet::Jet>,
    bars: Vec<jet::Jet>,
    n_vals: Vec<f64>,
    rows: Vec<f64>,
}

impl DtObjective {
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn q(&self) -> usize {
        self.q
    }

    fn lambda_values(&self, x: &[f64]) -> (f64, f64) {
        match self.lambda {
            Some((s1, s2)) => (x[s1], x[s2]),
            None => self.fixed,
        }
    }

    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let (l1, l2) = self.lambda_values(x);
        let q = self.q;
        let n_out = self.net.arch.output_dim();
        let mut total = 0.0;
        for group in &self.groups {
            let terms = jet::chunk_sum::<DtScratch, _>(
                group.points.len(),
                self.parallel,
                self.n_params,
                grad.as_deref_mut(),
                |start, end, s, grad, terms| {
                    let count = end - start;
                    s.inputs.clear();
                    for k in start..end {
                        s.inputs.extend(jet::dx_inputs(group.points[k].0));
                    }
                    jet::forward(&self.net.arch, x, jet::Flavor::Dx, &s.inputs, count, &mut s.jets);
                    s.bars.clear();
                    s.bars.resize(count * n_out, [0.0; 4]);
                    let mut lbar = (0.0, 0.0);
                    for (b, k) in (start..end).enumerate() {
                        let yv = group.points[k].1;
                        s.out.clear();
                        for j in 0..n_out {
                            s.out.push(jet::output_jet(&s.jets, j, b));
                        }
                        s.n_vals.clear();
                        for j in &s.out[..q] {
                            s.n_vals.push(self.equation.value(j, l1, l2));
                        }
                        s.rows.clear();
                        let mut term = 0.0;
                        for i in 0..group.n_rows {
                            let mut r = self.dt
                                * group.m[i * q..(i + 1) * q]
                                    .iter()
                                    .zip(&s.n_vals)
                                    .map(|(m, n)| m * n)
                                    .sum::<f64>();
                            r += s.out[i][0] - yv;
                            s.rows.push(r);
                            term += r * r;
                        }
                        terms.push(term);
                        if grad.is_some() {
                            let bars = &mut s.bars[b * n_out..(b + 1) * n_out];
                            for (i, &r) in s.rows.iter().enumerate() {
                                bars[i][0] += 2.0 * r;
                            }
                            for k in 0..q {
                                let mut m_k = 0.0;
                                for (i, &r) in s.rows.iter().enumerate() {
                                    m_k += r * group.m[i * q + k];
                                }
                                m_k *= 2.0 * self.dt;
                                let (d1, d2) =
                                    self.equation.seed(&s.out[k], l1, l2, m_k, &mut bars[k]);
                                lbar.0 += m_k * d1;
                                lbar.1 += m_k * d2;
                            }
                        }
                    }
                    if let Some(grad) = grad {
                        jet::backward(
                            &self.net.arch,
                            x,
                            jet::Flavor::Dx,
                            &s.bars,
                            count,
                            &mut s.jets,
                            grad,
                        );
                        if let Some((s1, s2)) = self.lambda {
                            grad[s1] += lbar.0;
                            grad[s2] += lbar.1;
                        }
                    }
                },
            );
            total += canonical_sum(terms);
        }
        if !self.boundary.is_empty() {
            let terms = jet::chunk_sum::<DtScratch, _>(
                self.boundary.len(),
                false,
                self.n_params,
                grad.as_deref_mut(),
                |start, end, s, grad, terms| {
                    let count = end - start;
                    s.inputs.clear();
                    for k in start..end {
                        s.inputs.extend(jet::dx_inputs(self.boundary[k]));
                    }
                    jet::forward(&self.net.arch, x, jet::Flavor::Dx, &s.inputs, count, &mut s.jets);
                    s.bars.clear();
                    s.bars.resize(count * n_out, [0.0; 4]);
                    for b in 0..count {
                        let mut term = 0.0;
                        for j in 0..n_out {
                            let v = jet::output_jet(&s.jets, j, b)[0];
                            term += v * v;
                            s.bars[b * n_out + j][0] = 2.0 * v;
                        }
                        terms.push(term);
                    }
                    if let Some(grad) = grad {
                        jet::backward(
                            &self.net.arch,
                            x,
                            jet::Flavor::Dx,
                            &s.bars,
                            count,
                            &mut s.jets,
                            grad,
                        );
                    }
                },
            );
            total += canonical_sum(terms);
        }
        total
    }
}

impl ObjectiveFn for DtObjective {
    fn dim(&self) -> usize {
        self.n_params
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(x, Some(grad))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }
}

fn forward_map(tableau: &ButcherTableau) -> Vec<f64> {
    // q stage rows of a plus the b row for the prediction output
    let q = tableau.q;
    let mut m = Vec::with_capacity((q + 1) * q);
    m.extend_from_slice(&tableau.a);
    m.extend_from_slice(&tableau.b);
    m
}

fn identify_maps(tableau: &ButcherTableau) -> (Vec<f64>, Vec<f64>) {
    let q = tableau.q;
    let mut m1 = tableau.a.clone();
    let m2: Vec<f64> = (0..q * q)
        .map(|idx| tableau.a[idx] - tableau.b[idx % q])
        .collect();
    m1.shrink_to_fit();
    (m1, m2)
}

/// Forward-problem loss `SSE_n + SSE_b`: the network carries `q+1` outputs
/// `[u^{n+c_1} … u^{n+c_q}, u^{n+1}]`, matched to the snapshot at `t^n`
/// through the stage maps, with homogeneous boundary penalties on every
/// output at `x = ±1`.
pub fn dt_forward_loss(
    net: &Network,
    tableau: &ButcherTableau,
    dt: f64,
    snapshot: &Snapshot,
    l1: f64,
    l2: f64,
) -> Result<DtObjective> {
    let q = tableau.q;
    if net.arch.output_dim() != q + 1 {
        return Err(Error::structural(format!(
            "forward stage network must have q+1 = {} outputs, has {}",
            q + 1,
            net.arch.output_dim()
        )));
    }
    if net.arch.input_dim() != 1 {
        return Err(Error::structural("stage network takes x only"));
    }
    if snapshot.points.is_empty() {
        return Err(Error::structural("snapshot has no points"));
    }
    Ok(DtObjective {
        net: net.clone(),
        equation: StageEquation::Burgers,
        lambda: None,
        fixed: (l1, l2),
        dt,
        q,
        groups: vec![DtGroup {
            m: forward_map(tableau),
            n_rows: q + 1,
            points: snapshot.points.clone(),
        }],
        boundary: vec![-1.0, 1.0],
        n_params: net.param_count(),
        parallel: false,
    })
}

/// Identification loss `SSE_n + SSE_{n+1}` from two snapshots a gap `Δt`
/// apart; the network carries `q` stage outputs and trainable λ.
pub fn dt_identify_loss(
    net: &Network,
    tableau: &ButcherTableau,
    dt: f64,
    snap_n: &Snapshot,
    snap_n1: &Snapshot,
    equation: StageEquation,
) -> Result<DtObjective> {
    let q = tableau.q;
    if net.arch.output_dim() != q {
        return Err(Error::structural(format!(
            "identification stage network must have q = {q} outputs, has {}",
            net.arch.output_dim()
        )));
    }
    if net.arch.input_dim() != 1 {
        return Err(Error::structural("stage network takes x only"));
    }
    if net.lambda_slots().len() != 2 {
        return Err(Error::structural("identification needs n_lambda = 2"));
    }
    if ((snap_n1.t - snap_n.t) - dt).abs() > 1e-12 {
        return Err(Error::structural(format!(
            "snapshot gap {} inconsistent with dt {dt}",
            snap_n1.t - snap_n.t
        )));
    }
    if snap_n.points.is_empty() || snap_n1.points.is_empty() {
        return Err(Error::structural("snapshots must be non-empty"));
    }
    let (m1, m2) = identify_maps(tableau);
    let slots = net.lambda_slots();
    Ok(DtObjective {
        net: net.clone(),
        equation,
        lambda: Some((slots.start, slots.start + 1)),
        fixed: (0.0, 0.0),
        dt,
        q,
        groups: vec![
            DtGroup {
                m: m1,
                n_rows: q,
                points: snap_n.points.clone(),
            },
            DtGroup {
                m: m2,
                n_rows: q,
                points: snap_n1.points.clone(),
            },
        ],
        boundary: Vec::new(),
        n_params: net.param_count(),
        parallel: false,
    })
}

/// Graph for one discrete-time group: inputs `x` (slot 0) and label (slot 1),
/// output the summed squared stage-map residuals.
fn dt_group_graph(
    net: &Network,
    equation: StageEquation,
    lambda: LambdaSource,
    dt: f64,
    m: &[f64],
    n_rows: usize,
    q: usize,
) -> Result<(Graph, crate::autodiff::NodeId)> {
    let mut g = Graph::new();
    let x = g.input(0);
    let label = g.input(1);
    let outs = net.build(&mut g, &[x])?;
    let n_ops: Vec<crate::autodiff::NodeId> = outs[..q]
        .iter()
        .map(|&u| equation.graph_operator(&mut g, u, 0, lambda))
        .collect();
    let dt_node = g.constant(dt);
    let mut loss = g.constant(0.0);
    for i in 0..n_rows {
        let mut comb = g.constant(0.0);
        for (k, &nk) in n_ops.iter().enumerate() {
            let mk = g.constant(m[i * q + k]);
            comb = g.mul_add(mk, nk, comb);
        }
        let scaled = g.mul(dt_node, comb);
        let mapped = g.add(outs[i], scaled);
        let r = g.sub(mapped, label);
        let r2 = g.square(r);
        loss = g.add(loss, r2);
    }
    Ok((g, loss))
}

/// Graph-engine equivalent of [`dt_forward_loss`].
pub fn dt_forward_loss_graph(
    net: &Network,
    tableau: &ButcherTableau,
    dt: f64,
    snapshot: &Snapshot,
    l1: f64,
    l2: f64,
) -> Result<Objective> {
    let q = tableau.q;
    if net.arch.output_dim() != q + 1 {
        return Err(Error::structural("forward stage network must have q+1 outputs"));
    }
    let m = forward_map(tableau);
    let (g, loss) = dt_group_graph(
        net,
        StageEquation::Burgers,
        LambdaSource::Fixed(l1, l2),
        dt,
        &m,
        q + 1,
        q,
    )?;
    let bindings: Vec<f64> = snapshot.points.iter().flat_map(|&(x, u)| [x, u]).collect();
    let data_group = PointGroup::new(Compiled::new(&g, &[loss]), bindings, 2, 1.0)?;

    let mut gb = Graph::new();
    let xb = gb.input(0);
    let outs = net.build(&mut gb, &[xb])?;
    let mut bl = gb.constant(0.0);
    for &o in &outs {
        let sq = gb.square(o);
        bl = gb.add(bl, sq);
    }
    let boundary_group =
        PointGroup::new(Compiled::new(&gb, &[bl]), vec![-1.0, 1.0], 1, 1.0)?;
    Ok(Objective::new(
        vec![data_group, boundary_group],
        net.param_count(),
    ))
}

/// Graph-engine equivalent of [`dt_identify_loss`].
pub fn dt_identify_loss_graph(
    net: &Network,
    tableau: &ButcherTableau,
    dt: f64,
    snap_n: &Snapshot,
    snap_n1: &Snapshot,
    equation: StageEquation,
) -> Result<Objective> {
    let q = tableau.q;
    if net.arch.output_dim() != q {
        return Err(Error::structural("identification stage network must have q outputs"));
    }
    if ((snap_n1.t - snap_n.t) - dt).abs() > 1e-12 {
        return Err(Error::structural("snapshot gap inconsistent with dt"));
    }
    let slots = net.lambda_slots();
    let lambda = LambdaSource::Slots(slots.start as u32, slots.start as u32 + 1);
    let (m1, m2) = identify_maps(tableau);
    let mut groups = Vec::new();
    for (m, snap) in [(m1, snap_n), (m2, snap_n1)] {
        let (g, loss) = dt_group_graph(net, equation, lambda, dt, &m, q, q)?;
        let bindings: Vec<f64> = snap.points.iter().flat_map(|&(x, u)| [x, u]).collect();
        groups.push(PointGroup::new(Compiled::new(&g, &[loss]), bindings, 2, 1.0)?);
    }
    Ok(Objective::new(groups, net.param_count()))
}
