use pinn::autodiff::ObjectiveFn;
use pinn::network::{Architecture, Network};
use pinn::optimizer::{minimize_observed, LbfgsOptions};
use pinn::oracle::burgers_grid;
use pinn::pde::{mse_forward, BurgersParams, TrainingSet, BURGERS_NU};
use pinn::sampling::{latin_hypercube, sample_ib_data, Domain2D};
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let iters: usize = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(12000);
    let t0 = Instant::now();
    let arch = Architecture::with_hidden(2, 8, 20, 1).unwrap();
    let net = Network::new(arch, 0);
    let domain = Domain2D::burgers();
    let u0 = |x: f64| -(std::f64::consts::PI * x).sin();
    let data = TrainingSet {
        labeled: sample_ib_data(100, u0, domain, seed * 1000 + 1).unwrap(),
        collocation: latin_hypercube(10000, domain, seed * 1000 + 2).unwrap(),
    };
    let obj = mse_forward(&net, &data, &BurgersParams::forward()).unwrap().with_parallel(true);
    let theta0 = net.init(seed);
    let opts = LbfgsOptions { max_iterations: iters, ..Default::default() };
    let grid = burgers_grid(100, 256, BURGERS_NU).unwrap();
    let rel = |params: &[f64]| {
        let mut g = pinn::autodiff::Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let u = net.build(&mut g, &[t, x]).unwrap();
        let c = pinn::autodiff::Compiled::new(&g, &u);
        let mut pts = Vec::new();
        for &tv in &grid.t_values {
            for &xv in &grid.x_values {
                pts.push(tv);
                pts.push(xv);
            }
        }
        let pred = c.eval_points(params, &pts, 2);
        let num: f64 = pred.iter().zip(&grid.u).map(|(p, e)| (p - e) * (p - e)).sum::<f64>().sqrt();
        let den: f64 = grid.u.iter().map(|e| e * e).sum::<f64>().sqrt();
        num / den
    };
    let mut last_print = Instant::now();
    let r = minimize_observed(&obj, &theta0, &opts, &mut |info| {
        if info.iteration % 2000 == 0 || last_print.elapsed().as_secs() > 120 {
            println!("  iter {:6} loss {:.3e} |g| {:.2e} [{:.0}s]", info.iteration, info.loss, info.grad_norm, t0.elapsed().as_secs_f64());
            last_print = Instant::now();
        }
    }).unwrap();
    println!("seed {seed}: loss {:.3e} after {} iters ({:?}), rel_l2 = {:.3e}, {:.1}s",
             r.loss, r.iterations, r.termination, rel(&r.params), t0.elapsed().as_secs_f64());
}
