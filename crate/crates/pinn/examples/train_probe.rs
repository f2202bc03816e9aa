use pinn::autodiff::ObjectiveFn;
use pinn::network::{Architecture, Network};
use pinn::optimizer::{minimize, LbfgsOptions};
use pinn::oracle::burgers_grid;
use pinn::pde::{mse_forward, BurgersParams, TrainingSet, BURGERS_NU};
use pinn::sampling::{latin_hypercube, sample_ib_data, Domain2D};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let arch = Architecture::with_hidden(2, 4, 20, 1).unwrap();
    let net = Network::new(arch, 0);
    let domain = Domain2D::burgers();
    let u0 = |x: f64| -(std::f64::consts::PI * x).sin();
    let data = TrainingSet {
        labeled: sample_ib_data(100, u0, domain, 1).unwrap(),
        collocation: latin_hypercube(2000, domain, 2).unwrap(),
    };
    let obj = mse_forward(&net, &data, &BurgersParams::forward()).unwrap().with_parallel(true);
    let theta0 = net.init(0);
    let opts = LbfgsOptions { max_iterations: 3000, ..Default::default() };
    let r = minimize(&obj, &theta0, &opts).unwrap();
    println!("loss {:.3e} after {} iters ({:?}), {:.1}s", r.loss, r.iterations, r.termination, t0.elapsed().as_secs_f64());

    // rel l2 on a 100x256 grid
    let grid = burgers_grid(100, 256, BURGERS_NU).unwrap();
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
    let pred = c.eval_points(&r.params, &pts, 2);
    let num: f64 = pred.iter().zip(&grid.u).map(|(p, e)| (p - e) * (p - e)).sum::<f64>().sqrt();
    let den: f64 = grid.u.iter().map(|e| e * e).sum::<f64>().sqrt();
    println!("rel_l2 = {:.3e}  (total {:.1}s)", num / den, t0.elapsed().as_secs_f64());
}
