//! Experiment orchestration: build data from the oracle and samplers,
//! assemble the mode's loss, train, and evaluate the report metrics.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Equation, ExperimentConfig, LossEngine, Mode, ResolvedConfig};
use super::metrics::{percent_error, relative_l2};
use crate::autodiff::{Compiled, Graph, ObjectiveFn};
use crate::error::{Error, Result};
use crate::irk::{self, StageEquation};
use crate::network::{Architecture, Network};
use crate::optimizer::{self, IterInfo, LbfgsOptions, OptResult};
use crate::oracle::{self, GridSolution};
use crate::pde::{self, BurgersParams, LabeledPoint, TrainingSet, BURGERS_NU};
use crate::sampling::{self, Domain2D, NoiseSpec};

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ResolvedConfig,
    pub rel_l2: f64,
    pub lambda_hat: Option<(f64, f64)>,
    pub pct_err: Option<(f64, f64)>,
    pub loss_final: f64,
    pub iterations: usize,
    pub termination: String,
    pub wall_seconds: f64,
}

/// Trained model plus whatever the mode predicts, for artifact export.
pub struct RunOutput {
    pub report: ExperimentReport,
    pub network: Network,
    pub params: Vec<f64>,
    pub prediction: Prediction,
    /// The labeled training data (for export).
    pub training_data: Vec<LabeledPoint>,
}

pub enum Prediction {
    /// Solution over the evaluation grid (continuous-time modes).
    Grid(GridSolution),
    /// Stage values over the evaluation x-grid, one row per stage time
    /// (discrete-time modes; the forward problem's last row is `u^{n+1}`).
    Stages(GridSolution),
}

/// Per-purpose seeds derived from the base seed in a fixed order.
struct Seeds {
    init: u64,
    data_a: u64,
    data_b: u64,
    noise_a: u64,
    noise_b: u64,
}

impl Seeds {
    fn derive(base: u64) -> Seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        Seeds {
            init: rng.gen(),
            data_a: rng.gen(),
            data_b: rng.gen(),
            noise_a: rng.gen(),
            noise_b: rng.gen(),
        }
    }
}

fn lbfgs_options(cfg: &ExperimentConfig) -> LbfgsOptions {
    let o = &cfg.optimizer;
    LbfgsOptions {
        memory: o.memory,
        max_iterations: o.max_iterations,
        grad_tol: o.grad_tol,
        f_rel_tol: o.f_rel_tol,
        wolfe_c1: o.wolfe_c1,
        wolfe_c2: o.wolfe_c2,
        adam_warmup: o.adam_warmup,
        adam_lr: o.adam_lr,
        record_trace: false,
    }
}

fn train(
    cfg: &ExperimentConfig,
    objective: &dyn ObjectiveFn,
    theta0: &[f64],
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<OptResult> {
    let result =
        optimizer::minimize_observed(objective, theta0, &lbfgs_options(cfg), observer)?;
    if !result.loss.is_finite() {
        return Err(Error::numeric(format!(
            "training diverged: final loss {}",
            result.loss
        )));
    }
    Ok(result)
}

/// Uniform grid over `[−1, 1]` with `nx` points.
fn x_grid(nx: usize) -> Vec<f64> {
    (0..nx)
        .map(|j| -1.0 + 2.0 * j as f64 / (nx - 1) as f64)
        .collect()
}

/// Forward evaluation of a `(t,x) → u` network over the evaluation grid.
fn predict_grid(net: &Network, params: &[f64], grid: &GridSolution) -> Vec<f64> {
    let mut g = Graph::new();
    let t = g.input(0);
    let x = g.input(1);
    let u = net.build(&mut g, &[t, x]).expect("grid network");
    let compiled = Compiled::new(&g, &u);
    let mut pts = Vec::with_capacity(grid.t_values.len() * grid.x_values.len() * 2);
    for &tv in &grid.t_values {
        for &xv in &grid.x_values {
            pts.push(tv);
            pts.push(xv);
        }
    }
    compiled.eval_points(params, &pts, 2)
}

/// Forward evaluation of a stage network over an x-grid; returns row-major
/// `n_outputs × nx` (transposed from eval order).
fn predict_stages(net: &Network, params: &[f64], xs: &[f64]) -> Vec<f64> {
    let mut g = Graph::new();
    let x = g.input(0);
    let outs = net.build(&mut g, &[x]).expect("stage network");
    let compiled = Compiled::new(&g, &outs);
    let flat = compiled.eval_points(params, xs, 1);
    let m = outs.len();
    let mut rows = vec![0.0; m * xs.len()];
    for (j, chunk) in flat.chunks(m).enumerate() {
        for (k, &v) in chunk.iter().enumerate() {
            rows[k * xs.len() + j] = v;
        }
    }
    rows
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    run_observed(cfg, &mut |_| {})
}

pub fn run_observed(
    cfg: &ExperimentConfig,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let resolved = cfg.resolve()?;
    let seeds = Seeds::derive(cfg.seed);
    let mut out = match cfg.mode {
        Mode::SolveCt => run_solve_ct(cfg, &seeds, observer),
        Mode::IdentifyCt => run_identify_ct(cfg, &seeds, observer),
        Mode::SolveDt => run_solve_dt(cfg, &seeds, observer),
        Mode::IdentifyDt => run_identify_dt(cfg, &seeds, observer),
    }?;
    out.report.config = resolved;
    out.report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn report_skeleton(r: &OptResult) -> ExperimentReport {
    ExperimentReport {
        config: ResolvedConfig {
            config: ExperimentConfig::new(Mode::SolveCt),
            q_resolved: None,
            generator: String::new(),
        },
        rel_l2: f64::NAN,
        lambda_hat: None,
        pct_err: None,
        loss_final: r.loss,
        iterations: r.iterations,
        termination: format!("{:?}", r.termination),
        wall_seconds: 0.0,
    }
}

fn run_solve_ct(
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<RunOutput> {
    let domain = Domain2D::burgers();
    let u0 = |x: f64| -(std::f64::consts::PI * x).sin();
    let labeled = sampling::sample_ib_data(cfg.data.n_u, u0, domain, seeds.data_a)?;
    let collocation = if cfg.data.n_f > 0 {
        sampling::latin_hypercube(cfg.data.n_f, domain, seeds.data_b)?
    } else {
        Vec::new()
    };
    let data = TrainingSet { labeled: labeled.clone(), collocation };
    let arch = Architecture::with_hidden(2, cfg.architecture.hidden_layers, cfg.architecture.width, 1)?;
    let net = Network::new(arch, 0);
    let pde_params = BurgersParams::forward();
    let theta0 = net.init(seeds.init);
    let result = match cfg.engine.loss {
        LossEngine::Fused => {
            let obj = pde::mse_forward(&net, &data, &pde_params)?
                .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
        LossEngine::Graph => {
            let obj = pde::mse_forward_graph(&net, &data, &pde_params)?
                .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
    };

    let grid = oracle::burgers_grid(cfg.eval.nt, cfg.eval.nx, BURGERS_NU)?;
    let pred = predict_grid(&net, &result.params, &grid);
    let rel = relative_l2(&pred, &grid.u)?;
    let mut report = report_skeleton(&result);
    report.rel_l2 = rel;
    Ok(RunOutput {
        report,
        network: net,
        params: result.params,
        prediction: Prediction::Grid(GridSolution {
            t_values: grid.t_values.clone(),
            x_values: grid.x_values.clone(),
            u: pred,
        }),
        training_data: labeled,
    })
}

fn run_identify_ct(
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<RunOutput> {
    let grid = oracle::burgers_grid(cfg.eval.nt, cfg.eval.nx, BURGERS_NU)?;
    let n_total = grid.t_values.len() * grid.x_values.len();
    let idx = sampling::subsample_indices(n_total, cfg.data.n_u, seeds.data_a)?;
    let nx = grid.x_values.len();
    let mut labeled: Vec<LabeledPoint> = idx
        .into_iter()
        .map(|k| LabeledPoint {
            t: grid.t_values[k / nx],
            x: grid.x_values[k % nx],
            u: grid.u[k],
        })
        .collect();
    if cfg.data.noise_level > 0.0 {
        let us: Vec<f64> = labeled.iter().map(|p| p.u).collect();
        let noisy = sampling::add_noise(
            &us,
            &NoiseSpec { level: cfg.data.noise_level, seed: seeds.noise_a },
        )?;
        for (p, v) in labeled.iter_mut().zip(noisy) {
            p.u = v;
        }
    }
    let arch = Architecture::with_hidden(2, cfg.architecture.hidden_layers, cfg.architecture.width, 1)?;
    let net = Network::new(arch, 2);
    let theta0 = net.init(seeds.init);
    let result = match cfg.engine.loss {
        LossEngine::Fused => {
            let obj = pde::mse_identify(&net, &labeled)?.with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
        LossEngine::Graph => {
            let obj =
                pde::mse_identify_graph(&net, &labeled)?.with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
    };

    let slots = net.lambda_slots();
    let lambda_hat = (result.params[slots.start], result.params[slots.start + 1]);
    let pct = (
        percent_error(lambda_hat.0, 1.0)?,
        percent_error(lambda_hat.1, BURGERS_NU)?,
    );
    let pred = predict_grid(&net, &result.params, &grid);
    let rel = relative_l2(&pred, &grid.u)?;
    let mut report = report_skeleton(&result);
    report.rel_l2 = rel;
    report.lambda_hat = Some(lambda_hat);
    report.pct_err = Some(pct);
    Ok(RunOutput {
        report,
        network: net,
        params: result.params,
        prediction: Prediction::Grid(GridSolution {
            t_values: grid.t_values.clone(),
            x_values: grid.x_values.clone(),
            u: pred,
        }),
        training_data: labeled,
    })
}

fn run_solve_dt(
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<RunOutput> {
    let q = cfg.resolved_q()?;
    let tableau = irk::gauss_legendre(q)?;
    let xs = x_grid(cfg.eval.nx);
    let t_n = cfg.data.t_n;
    let u_n: Vec<f64> = xs.iter().map(|&x| oracle::burgers_exact(t_n, x, BURGERS_NU)).collect();
    let mut points = sampling::subsample_snapshot(&xs, &u_n, cfg.data.n_n, seeds.data_a)?;
    if cfg.data.noise_level > 0.0 {
        let us: Vec<f64> = points.iter().map(|p| p.1).collect();
        let noisy = sampling::add_noise(
            &us,
            &NoiseSpec { level: cfg.data.noise_level, seed: seeds.noise_a },
        )?;
        for (p, v) in points.iter_mut().zip(noisy) {
            p.1 = v;
        }
    }
    let snapshot = irk::Snapshot { t: t_n, points: points.clone() };
    let arch = Architecture::with_hidden(
        1,
        cfg.architecture.hidden_layers,
        cfg.architecture.width,
        q + 1,
    )?;
    let net = Network::new(arch, 0);
    let theta0 = net.init(seeds.init);
    let result = match cfg.engine.loss {
        LossEngine::Fused => {
            let obj = irk::dt_forward_loss(&net, &tableau, cfg.data.dt, &snapshot, 1.0, BURGERS_NU)?
                .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
        LossEngine::Graph => {
            let obj =
                irk::dt_forward_loss_graph(&net, &tableau, cfg.data.dt, &snapshot, 1.0, BURGERS_NU)?
                    .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
    };

    // prediction output u^{n+1} against the oracle at t_n + dt
    let rows = predict_stages(&net, &result.params, &xs);
    let pred_next = &rows[q * xs.len()..(q + 1) * xs.len()];
    let exact_next: Vec<f64> = xs
        .iter()
        .map(|&x| oracle::burgers_exact(t_n + cfg.data.dt, x, BURGERS_NU))
        .collect();
    let rel = relative_l2(pred_next, &exact_next)?;
    let mut times: Vec<f64> = tableau.c.iter().map(|&c| t_n + c * cfg.data.dt).collect();
    times.push(t_n + cfg.data.dt);
    let mut report = report_skeleton(&result);
    report.rel_l2 = rel;
    Ok(RunOutput {
        report,
        network: net,
        params: result.params,
        prediction: Prediction::Stages(GridSolution { t_values: times, x_values: xs, u: rows }),
        training_data: points.iter().map(|&(x, u)| LabeledPoint { t: t_n, x, u }).collect(),
    })
}

fn run_identify_dt(
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<RunOutput> {
    let q = cfg.resolved_q()?;
    let tableau = irk::gauss_legendre(q)?;
    let (t_n, dt) = (cfg.data.t_n, cfg.data.dt);
    let stage_times: Vec<f64> = tableau.c.iter().map(|&c| t_n + c * dt).collect();

    // snapshot curves and per-stage reference rows from the oracle
    let (xs, u_n, u_n1, truth, stage_rows, equation) = match cfg.equation {
        Equation::Burgers => {
            let xs = x_grid(cfg.eval.nx);
            let u_at = |t: f64, xs: &[f64]| -> Vec<f64> {
                xs.iter().map(|&x| oracle::burgers_exact(t, x, BURGERS_NU)).collect()
            };
            let stage_rows: Vec<f64> =
                stage_times.iter().flat_map(|&t| u_at(t, &xs)).collect();
            (
                xs.clone(),
                u_at(t_n, &xs),
                u_at(t_n + dt, &xs),
                (1.0, BURGERS_NU),
                stage_rows,
                StageEquation::Burgers,
            )
        }
        Equation::Kdv => {
            let o = &cfg.oracle;
            // snap stage times onto the simulation step grid
            let snap = |t: f64| (t / o.kdv_dt_sim).round() * o.kdv_dt_sim;
            let mut times: Vec<f64> = vec![snap(t_n), snap(t_n + dt)];
            times.extend(stage_times.iter().map(|&t| snap(t)));
            times.sort_by(f64::total_cmp);
            times.dedup();
            let sim = oracle::kdv_simulate(
                o.kdv_lambda1,
                o.kdv_lambda2,
                o.kdv_modes,
                o.kdv_dt_sim,
                snap(t_n + dt),
                &times,
            )?;
            let row = |t: f64| -> Result<Vec<f64>> {
                Ok(sim.row(sim.row_at_time(snap(t))?).to_vec())
            };
            let stage_rows: Vec<f64> = stage_times
                .iter()
                .map(|&t| row(t))
                .collect::<Result<Vec<_>>>()?
                .concat();
            (
                sim.x_values.clone(),
                row(t_n)?,
                row(t_n + dt)?,
                (o.kdv_lambda1, o.kdv_lambda2),
                stage_rows,
                StageEquation::Kdv,
            )
        }
    };

    let mut pts_n = sampling::subsample_snapshot(&xs, &u_n, cfg.data.n_n, seeds.data_a)?;
    let mut pts_n1 = sampling::subsample_snapshot(&xs, &u_n1, cfg.data.n_n1, seeds.data_b)?;
    if cfg.data.noise_level > 0.0 {
        for (pts, noise_seed) in [(&mut pts_n, seeds.noise_a), (&mut pts_n1, seeds.noise_b)] {
            let us: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let noisy =
                sampling::add_noise(&us, &NoiseSpec { level: cfg.data.noise_level, seed: noise_seed })?;
            for (p, v) in pts.iter_mut().zip(noisy) {
                p.1 = v;
            }
        }
    }
    let snap_n = irk::Snapshot { t: t_n, points: pts_n.clone() };
    let snap_n1 = irk::Snapshot { t: t_n + dt, points: pts_n1.clone() };

    let arch =
        Architecture::with_hidden(1, cfg.architecture.hidden_layers, cfg.architecture.width, q)?;
    let net = Network::new(arch, 2);
    let theta0 = net.init(seeds.init);
    let result = match cfg.engine.loss {
        LossEngine::Fused => {
            let obj = irk::dt_identify_loss(&net, &tableau, dt, &snap_n, &snap_n1, equation)?
                .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
        LossEngine::Graph => {
            let obj = irk::dt_identify_loss_graph(&net, &tableau, dt, &snap_n, &snap_n1, equation)?
                .with_parallel(cfg.engine.parallel);
            train(cfg, &obj, &theta0, observer)?
        }
    };

    let slots = net.lambda_slots();
    let lambda_hat = (result.params[slots.start], result.params[slots.start + 1]);
    let pct = (
        percent_error(lambda_hat.0, truth.0)?,
        percent_error(lambda_hat.1, truth.1)?,
    );
    // stage outputs against the oracle at the stage times
    let rows = predict_stages(&net, &result.params, &xs);
    let rel = relative_l2(&rows, &stage_rows)?;
    let mut report = report_skeleton(&result);
    report.rel_l2 = rel;
    report.lambda_hat = Some(lambda_hat);
    report.pct_err = Some(pct);

    let mut training: Vec<LabeledPoint> = pts_n
        .iter()
        .map(|&(x, u)| LabeledPoint { t: t_n, x, u })
        .collect();
    training.extend(pts_n1.iter().map(|&(x, u)| LabeledPoint { t: t_n + dt, x, u }));
    Ok(RunOutput {
        report,
        network: net,
        params: result.params,
        prediction: Prediction::Stages(GridSolution {
            t_values: stage_times,
            x_values: xs,
            u: rows,
        }),
        training_data: training,
    })
}
