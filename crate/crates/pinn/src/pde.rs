//! Continuous-time physics-informed residuals and losses for the Burgers
//! equation, in the fixed-coefficient (forward) and λ-parameterized
//! (identification) forms:
//!
//! `f = u_t + λ1·u·u_x − λ2·u_xx`, with `(λ1, λ2) = (1, 0.01/π)` frozen for
//! the forward problem and trainable for identification.
//!
//! Each loss comes in two implementations: a fused one built on the jet
//! engine (the training path, [`CtObjective`]) and one assembled as a
//! computational graph (`*_graph`), which the tests hold against each other.

use crate::autodiff::{canonical_sum, Compiled, Graph, NodeId, Objective, ObjectiveFn, PointGroup};
use crate::error::{Error, Result};
use crate::jet;
use crate::network::Network;

/// Burgers viscosity of the benchmark problem, `0.01/π`.
pub const BURGERS_NU: f64 = 0.01 / std::f64::consts::PI;

/// Coefficients of `u_t + λ1 u u_x − λ2 u_xx = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub trainable: bool,
}

impl BurgersParams {
    /// The forward benchmark fixes `λ1 = 1`, `λ2 = 0.01/π`.
    pub fn forward() -> Self {
        BurgersParams {
            lambda1: 1.0,
            lambda2: BURGERS_NU,
            trainable: false,
        }
    }

    /// Trainable coefficients for identification.
    pub fn identify() -> Self {
        BurgersParams {
            lambda1: 0.0,
            lambda2: 0.0,
            trainable: true,
        }
    }
}

/// Where the residual coefficients come from when building expressions.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource {
    Fixed(f64, f64),
    /// Parameter slots holding `(λ1, λ2)`.
    Slots(u32, u32),
}

impl LambdaSource {
    pub(crate) fn nodes(self, g: &mut Graph) -> (NodeId, NodeId) {
        match self {
            LambdaSource::Fixed(l1, l2) => (g.constant(l1), g.constant(l2)),
            LambdaSource::Slots(s1, s2) => (g.param(s1), g.param(s2)),
        }
    }

    fn for_net(params: &BurgersParams, net: &Network) -> Result<Self> {
        if params.trainable {
            let slots = net.lambda_slots();
            if slots.len() != 2 {
                return Err(Error::structural(
                    "trainable Burgers coefficients need a network with n_lambda = 2",
                ));
            }
            Ok(LambdaSource::Slots(slots.start as u32, slots.start as u32 + 1))
        } else {
            Ok(LambdaSource::Fixed(params.lambda1, params.lambda2))
        }
    }
}

/// One observation of the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub t: f64,
    pub x: f64,
    pub u: f64,
}

/// Labeled data plus collocation points for the continuous-time forward
/// problem.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet {
    pub labeled: Vec<LabeledPoint>,
    pub collocation: Vec<(f64, f64)>,
}

/// Burgers residual `f = u_t + λ1 u u_x − λ2 u_xx` as a graph expression.
/// `u` must be built from inputs in slots `t_slot` and `x_slot`.
pub fn burgers_residual(
    g: &mut Graph,
    u: NodeId,
    t_slot: u32,
    x_slot: u32,
    lambda: LambdaSource,
) -> NodeId {
    let (l1, l2) = lambda.nodes(g);
    let ut = g.derive(u, t_slot);
    let ux = g.derive(u, x_slot);
    let uxx = g.derive(ux, x_slot);
    let uux = g.mul(u, ux);
    let adv = g.mul_add(l1, uux, ut);
    let visc = g.mul(l2, uxx);
    g.sub(adv, visc)
}

/// Continuous-time loss on the jet engine. Covers both the forward split
/// (labeled group + collocation group) and identification (one group with
/// fit and residual at the same points).
pub struct CtObjective {
    net: Network,
    lambda: Option<(usize, usize)>,
    fixed: (f64, f64),
    groups: Vec<CtGroup>,
    n_params: usize,
    parallel: bool,
}

struct CtGroup {
    /// `(t, x, label)` per point; label ignored when `fit` is false.
    points: Vec<[f64; 3]>,
    weight: f64,
    fit: bool,
    residual: bool,
}

#[derive(Default)]
struct CtScratch {
    jets: jet::Scratch,
    inputs: Vec<jet::Jet>,
    bars: Vec<jet::Jet>,
}

impl CtObjective {
    fn new(net: &Network, params: &BurgersParams, groups: Vec<CtGroup>) -> Result<Self> {
        let lambda = if params.trainable {
            let slots = net.lambda_slots();
            if slots.len() != 2 {
                return Err(Error::structural(
                    "trainable Burgers coefficients need a network with n_lambda = 2",
                ));
            }
            Some((slots.start, slots.start + 1))
        } else {
            None
        };
        if net.arch.input_dim() != 2 || net.arch.output_dim() != 1 {
            return Err(Error::structural(
                "continuous-time losses need a (t, x) → u network",
            ));
        }
        Ok(CtObjective {
            net: net.clone(),
            lambda,
            fixed: (params.lambda1, params.lambda2),
            groups,
            n_params: net.param_count(),
            parallel: false,
        })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    fn eval(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let (l1, l2) = match self.lambda {
            Some((s1, s2)) => (x[s1], x[s2]),
            None => self.fixed,
        };
        let mut total = 0.0;
        for group in &self.groups {
            let terms = jet::chunk_sum::<CtScratch, _>(
                group.points.len(),
                self.parallel,
                self.n_params,
                grad.as_deref_mut(),
                |start, end, s, grad, terms| {
                    let count = end - start;
                    s.inputs.clear();
                    for k in start..end {
                        let [t, xx, _] = group.points[k];
                        s.inputs.extend(jet::ct_inputs(t, xx));
                    }
                    jet::forward(
                        &self.net.arch,
                        x,
                        jet::Flavor::Ct,
                        &s.inputs,
                        count,
                        &mut s.jets,
                    );
                    s.bars.clear();
                    let mut lbar = (0.0, 0.0);
                    for (b, k) in (start..end).enumerate() {
                        let y = group.points[k][2];
                        let j = jet::output_jet(&s.jets, 0, b);
                        let mut term = 0.0;
                        let mut bar = [0.0; 4];
                        if group.fit {
                            let d = j[0] - y;
                            term += d * d;
                            bar[0] += 2.0 * d;
                        }
                        if group.residual {
                            let f = j[1] + l1 * j[0] * j[2] - l2 * j[3];
                            term += f * f;
                            let w = 2.0 * f;
                            bar[0] += w * l1 * j[2];
                            bar[1] += w;
                            bar[2] += w * l1 * j[0];
                            bar[3] -= w * l2;
                            lbar.0 += w * j[0] * j[2];
                            lbar.1 -= w * j[3];
                        }
                        for v in bar.iter_mut() {
                            *v *= group.weight;
                        }
                        s.bars.push(bar);
                        terms.push(term);
                    }
                    if let Some(grad) = grad {
                        jet::backward(
                            &self.net.arch,
                            x,
                            jet::Flavor::Ct,
                            &s.bars,
                            count,
                            &mut s.jets,
                            grad,
                        );
                        if let Some((s1, s2)) = self.lambda {
                            grad[s1] += lbar.0 * group.weight;
                            grad[s2] += lbar.1 * group.weight;
                        }
                    }
                },
            );
            total += group.weight * canonical_sum(terms);
        }
        total
    }
}

impl ObjectiveFn for CtObjective {
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

/// `MSE = (1/N_u) Σ |u − u^i|² + (1/N_f) Σ |f|²`; the collocation term
/// vanishes when `N_f = 0` (plain regression).
pub fn mse_forward(net: &Network, data: &TrainingSet, pde: &BurgersParams) -> Result<CtObjective> {
    if data.labeled.is_empty() {
        return Err(Error::structural("forward loss needs at least one labeled point"));
    }
    let mut groups = vec![CtGroup {
        points: data.labeled.iter().map(|p| [p.t, p.x, p.u]).collect(),
        weight: 1.0 / data.labeled.len() as f64,
        fit: true,
        residual: false,
    }];
    if !data.collocation.is_empty() {
        groups.push(CtGroup {
            points: data.collocation.iter().map(|&(t, x)| [t, x, 0.0]).collect(),
            weight: 1.0 / data.collocation.len() as f64,
            fit: false,
            residual: true,
        });
    }
    CtObjective::new(net, pde, groups)
}

/// Identification loss: fit and residual terms over the same `N` points,
/// `MSE = (1/N) Σ |u − u^i|² + (1/N) Σ |f|²`, with gradient flow into λ.
pub fn mse_identify(net: &Network, data: &[LabeledPoint]) -> Result<CtObjective> {
    if data.is_empty() {
        return Err(Error::structural("identification loss needs data"));
    }
    let groups = vec![CtGroup {
        points: data.iter().map(|p| [p.t, p.x, p.u]).collect(),
        weight: 1.0 / data.len() as f64,
        fit: true,
        residual: true,
    }];
    CtObjective::new(net, &BurgersParams::identify(), groups)
}

fn fit_group_graph(net: &Network, pts: &[LabeledPoint], weight: f64) -> Result<PointGroup> {
    let mut g = Graph::new();
    let t = g.input(0);
    let x = g.input(1);
    let u = net.build(&mut g, &[t, x])?[0];
    let label = g.input(2);
    let d = g.sub(u, label);
    let loss = g.square(d);
    let bindings = pts.iter().flat_map(|p| [p.t, p.x, p.u]).collect();
    PointGroup::new(Compiled::new(&g, &[loss]), bindings, 3, weight)
}

fn residual_group_graph(
    net: &Network,
    pde: &BurgersParams,
    pts: &[(f64, f64)],
    weight: f64,
    with_fit_label: bool,
    labels: &[f64],
) -> Result<PointGroup> {
    let mut g = Graph::new();
    let t = g.input(0);
    let x = g.input(1);
    let u = net.build(&mut g, &[t, x])?[0];
    let lambda = LambdaSource::for_net(pde, net)?;
    let f = burgers_residual(&mut g, u, 0, 1, lambda);
    let mut loss = g.square(f);
    let n_slots = if with_fit_label {
        let label = g.input(2);
        let d = g.sub(u, label);
        let dd = g.square(d);
        loss = g.add(loss, dd);
        3
    } else {
        2
    };
    let bindings = pts
        .iter()
        .enumerate()
        .flat_map(|(i, &(t, x))| {
            if with_fit_label {
                vec![t, x, labels[i]]
            } else {
                vec![t, x]
            }
        })
        .collect();
    PointGroup::new(Compiled::new(&g, &[loss]), bindings, n_slots, weight)
}

/// Graph-engine equivalent of [`mse_forward`].
pub fn mse_forward_graph(
    net: &Network,
    data: &TrainingSet,
    pde: &BurgersParams,
) -> Result<Objective> {
    if data.labeled.is_empty() {
        return Err(Error::structural("forward loss needs at least one labeled point"));
    }
    let mut groups = vec![fit_group_graph(net, &data.labeled, 1.0 / data.labeled.len() as f64)?];
    if !data.collocation.is_empty() {
        groups.push(residual_group_graph(
            net,
            pde,
            &data.collocation,
            1.0 / data.collocation.len() as f64,
            false,
            &[],
        )?);
    }
    Ok(Objective::new(groups, net.param_count()))
}

/// Graph-engine equivalent of [`mse_identify`].
pub fn mse_identify_graph(net: &Network, data: &[LabeledPoint]) -> Result<Objective> {
    if data.is_empty() {
        return Err(Error::structural("identification loss needs data"));
    }
    let pts: Vec<(f64, f64)> = data.iter().map(|p| (p.t, p.x)).collect();
    let labels: Vec<f64> = data.iter().map(|p| p.u).collect();
    let group = residual_group_graph(
        net,
        &BurgersParams::identify(),
        &pts,
        1.0 / data.len() as f64,
        true,
        &labels,
    )?;
    Ok(Objective::new(vec![group], net.param_count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Architecture;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn small_net(trainable: bool) -> Network {
        let arch = Architecture::new(vec![2, 8, 8, 1]).unwrap();
        Network::new(arch, if trainable { 2 } else { 0 })
    }

    #[test]
    fn residual_of_zero_network_is_zero() {
        let net = small_net(false);
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = net.build(&mut g, &[t, x]).unwrap()[0];
        let f = burgers_residual(&mut g, u, 0, 1, LambdaSource::Fixed(1.0, BURGERS_NU));
        let theta = vec![0.0; net.param_count()];
        for pt in [[0.1, 0.2], [0.9, -0.7]] {
            assert_eq!(g.eval(f, &theta, &pt).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_of_manufactured_u_t_times_x() {
        // u = t·x: u_t = x, u_x = t, u_xx = 0 → f = x + λ1·t²·x
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = g.mul(t, x);
        let f = burgers_residual(&mut g, u, 0, 1, LambdaSource::Fixed(1.0, 0.37));
        for (tv, xv) in [(0.5, 0.25), (0.2, -0.8), (1.0, 1.0)] {
            let want = xv + tv * tv * xv;
            let got = g.eval(f, &[], &[tv, xv]).unwrap();
            assert!((got - want).abs() <= 1e-14 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn forward_loss_zero_when_network_interpolates_zero_data() {
        // all-zero network with zero labels and a residual that vanishes
        let net = small_net(false);
        let theta = vec![0.0; net.param_count()];
        let data = TrainingSet {
            labeled: vec![
                LabeledPoint { t: 0.0, x: 0.5, u: 0.0 },
                LabeledPoint { t: 0.3, x: -1.0, u: 0.0 },
            ],
            collocation: vec![(0.5, 0.1), (0.7, -0.2)],
        };
        let loss = mse_forward(&net, &data, &BurgersParams::forward()).unwrap();
        assert_eq!(loss.value(&theta), 0.0);
    }

    #[test]
    fn forward_loss_with_no_collocation_is_plain_regression() {
        let net = small_net(false);
        let theta = net.init(3);
        let data = TrainingSet {
            labeled: vec![
                LabeledPoint { t: 0.1, x: 0.4, u: 0.2 },
                LabeledPoint { t: 0.6, x: -0.3, u: -0.1 },
                LabeledPoint { t: 0.9, x: 0.9, u: 0.05 },
            ],
            collocation: vec![],
        };
        let loss = mse_forward(&net, &data, &BurgersParams::forward()).unwrap();
        // independent regression MSE
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = net.build(&mut g, &[t, x]).unwrap()[0];
        let mut want = 0.0;
        for p in &data.labeled {
            let v = g.eval(u, &theta, &[p.t, p.x]).unwrap();
            want += (v - p.u) * (v - p.u);
        }
        want /= data.labeled.len() as f64;
        let got = loss.value(&theta);
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn empty_labeled_set_is_rejected() {
        let net = small_net(false);
        let data = TrainingSet::default();
        assert!(mse_forward(&net, &data, &BurgersParams::forward()).is_err());
        assert!(mse_identify(&net, &[]).is_err());
    }

    #[test]
    fn loss_matches_independent_two_pass_summation() {
        let net = small_net(false);
        let theta = net.init(11);
        let mut rng = StdRng::seed_from_u64(4);
        let labeled: Vec<LabeledPoint> = (0..40)
            .map(|_| LabeledPoint {
                t: rng.gen_range(0.0..1.0),
                x: rng.gen_range(-1.0..1.0),
                u: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let collocation: Vec<(f64, f64)> = (0..60)
            .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let data = TrainingSet { labeled: labeled.clone(), collocation: collocation.clone() };
        let loss = mse_forward(&net, &data, &BurgersParams::forward()).unwrap();

        // two-pass: evaluate u and f separately with the graph engine
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = net.build(&mut g, &[t, x]).unwrap()[0];
        let f = burgers_residual(&mut g, u, 0, 1, LambdaSource::Fixed(1.0, BURGERS_NU));
        let mut mse_u = 0.0;
        for p in &labeled {
            let v = g.eval(u, &theta, &[p.t, p.x]).unwrap();
            mse_u += (v - p.u) * (v - p.u);
        }
        mse_u /= labeled.len() as f64;
        let mut mse_f = 0.0;
        for &(tv, xv) in &collocation {
            let v = g.eval(f, &theta, &[tv, xv]).unwrap();
            mse_f += v * v;
        }
        mse_f /= collocation.len() as f64;
        let want = mse_u + mse_f;
        let got = loss.value(&theta);
        assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn fused_and_graph_forward_losses_agree() {
        let net = small_net(false);
        let theta = net.init(21);
        let mut rng = StdRng::seed_from_u64(8);
        let data = TrainingSet {
            labeled: (0..17)
                .map(|_| LabeledPoint {
                    t: rng.gen_range(0.0..1.0),
                    x: rng.gen_range(-1.0..1.0),
                    u: rng.gen_range(-1.0..1.0),
                })
                .collect(),
            collocation: (0..29)
                .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        };
        let pde = BurgersParams::forward();
        let fused = mse_forward(&net, &data, &pde).unwrap();
        let graph = mse_forward_graph(&net, &data, &pde).unwrap();
        let mut gf = vec![0.0; net.param_count()];
        let mut gg = vec![0.0; net.param_count()];
        let vf = fused.value_grad(&theta, &mut gf);
        let vg = graph.value_grad(&theta, &mut gg);
        assert!((vf - vg).abs() <= 1e-12 * (1.0 + vg.abs()), "{vf} vs {vg}");
        for (a, b) in gf.iter().zip(&gg) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn fused_and_graph_identify_losses_agree_including_lambda() {
        let net = small_net(true);
        let mut theta = net.init(31);
        let slots = net.lambda_slots();
        theta[slots.start] = 0.8;
        theta[slots.start + 1] = 0.05;
        let mut rng = StdRng::seed_from_u64(9);
        let data: Vec<LabeledPoint> = (0..23)
            .map(|_| LabeledPoint {
                t: rng.gen_range(0.0..1.0),
                x: rng.gen_range(-1.0..1.0),
                u: rng.gen_range(-1.0..1.0),
            })
            .collect();
        let fused = mse_identify(&net, &data).unwrap();
        let graph = mse_identify_graph(&net, &data).unwrap();
        let mut gf = vec![0.0; net.param_count()];
        let mut gg = vec![0.0; net.param_count()];
        let vf = fused.value_grad(&theta, &mut gf);
        let vg = graph.value_grad(&theta, &mut gg);
        assert!((vf - vg).abs() <= 1e-12 * (1.0 + vg.abs()));
        for (a, b) in gf.iter().zip(&gg) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
        }
        // λ gradient actually flows
        assert!(gf[slots.start].abs() > 0.0);
        assert!(gf[slots.start + 1].abs() > 0.0);
    }

    #[test]
    fn identify_loss_and_lambda_gradient_vanish_at_manufactured_truth() {
        // u = e^{−νπ²t} sin(πx) solves u_t + λ1 u u_x − λ2 u_xx = 0 with
        // λ = (0, ν): fit the "network" exactly by constructing the loss
        // from a manufactured graph instead.
        let nu = 0.07;
        let pi = std::f64::consts::PI;
        let mut g = Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let l1 = g.param(0);
        let l2 = g.param(1);
        let pin = g.constant(pi);
        let px = g.mul(pin, x);
        let sin = g.sin(px);
        let decay = g.constant(-nu * pi * pi);
        let dt = g.mul(decay, t);
        let e = g.exp(dt);
        let u = g.mul(e, sin);
        let ut = g.derive(u, 0);
        let ux = g.derive(u, 1);
        let uxx = g.derive(ux, 1);
        let uux = g.mul(u, ux);
        let adv = g.mul_add(l1, uux, ut);
        let visc = g.mul(l2, uxx);
        let f = g.sub(adv, visc);
        let label = g.input(2);
        let d = g.sub(u, label);
        let dd = g.square(d);
        let ff = g.square(f);
        let loss = g.add(dd, ff);

        let mut rng = StdRng::seed_from_u64(17);
        let mut bindings = Vec::new();
        let n = 50;
        for _ in 0..n {
            let (tv, xv) = (rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0));
            let uv = (-nu * pi * pi * tv).exp() * (pi * xv).sin();
            bindings.extend_from_slice(&[tv, xv, uv]);
        }
        let group =
            PointGroup::new(Compiled::new(&g, &[loss]), bindings, 3, 1.0 / n as f64).unwrap();
        let obj = Objective::new(vec![group], 2);
        let truth = [0.0, nu];
        let mut grad = vec![0.0; 2];
        let v = obj.loss_grad(&truth, &mut grad);
        assert!(v <= 1e-20, "loss at truth {v}");
        assert!(grad[0].abs() <= 1e-12 && grad[1].abs() <= 1e-12);

        // one-dimensional scan: inflating λ2 away from truth increases MSE_f
        let mut prev = v;
        for k in 1..=4 {
            let cur = obj.loss(&[0.0, nu + 0.1 * k as f64]);
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn single_point_identify_reduces_to_residual_magnitude() {
        // constant network equal to the label: fit term 0, loss = |f|²
        let net = small_net(true);
        let mut theta = vec![0.0; net.param_count()];
        let label = 0.42;
        // output bias is the last network parameter before λ
        theta[net.arch.param_count() - 1] = label;
        let data = [LabeledPoint { t: 0.5, x: 0.2, u: label }];
        let obj = mse_identify(&net, &data).unwrap();
        // constant u: u_t = u_x = u_xx = 0 → f = 0 regardless of λ
        assert_eq!(obj.value(&theta), 0.0);
        // now with nonzero λ1 the residual picks up u·u_x = 0 still; check a
        // case with nonzero gradient path instead: f at λ=(0,0) is u_t = 0.
        let slots = net.lambda_slots();
        theta[slots.start] = 2.0;
        assert_eq!(obj.value(&theta), 0.0);
    }
}
