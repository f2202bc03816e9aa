use pinn::autodiff::{Compiled, Graph, Objective, PointGroup};
use pinn::network::{Architecture, Network};
use std::time::Instant;

fn main() {
    let arch = Architecture::with_hidden(2, 8, 20, 1).unwrap();
    let net = Network::new(arch, 0);
    let theta = net.init(0);

    // residual graph: f = u_t + u*u_x - nu*u_xx, loss = f^2
    let mut g = Graph::new();
    let t = g.input(0);
    let x = g.input(1);
    let u = net.build(&mut g, &[t, x]).unwrap()[0];
    let ut = g.derive(u, 0);
    let ux = g.derive(u, 1);
    let uxx = g.derive(ux, 1);
    let nu = g.constant(0.01 / std::f64::consts::PI);
    let uux = g.mul(u, ux);
    let nuxx = g.mul(nu, uxx);
    let s = g.add(ut, uux);
    let f = g.sub(s, nuxx);
    let loss = g.square(f);
    println!("graph nodes (raw): {}", g.len());
    let compiled = Compiled::new(&g, &[loss]);
    println!("graph nodes (compacted): {}", compiled.n_nodes());

    // labeled graph: (u - label)^2
    let mut g2 = Graph::new();
    let t2 = g2.input(0);
    let x2 = g2.input(1);
    let u2 = net.build(&mut g2, &[t2, x2]).unwrap()[0];
    let lab = g2.input(2);
    let d = g2.sub(u2, lab);
    let l2 = g2.square(d);
    let c2 = Compiled::new(&g2, &[l2]);

    let nf = 10000;
    let nu_pts = 100;
    let mut pts = Vec::with_capacity(nf * 2);
    for i in 0..nf {
        pts.push((i as f64 / nf as f64) % 1.0);
        pts.push(((i * 7919) % 2000) as f64 / 1000.0 - 1.0);
    }
    let mut lpts = Vec::with_capacity(nu_pts * 3);
    for i in 0..nu_pts {
        lpts.push(0.0);
        lpts.push((i as f64 / 50.0) - 1.0);
        lpts.push(0.3);
    }
    let obj = Objective::new(
        vec![
            PointGroup::new(c2, lpts, 3, 1.0 / nu_pts as f64).unwrap(),
            PointGroup::new(compiled, pts, 2, 1.0 / nf as f64).unwrap(),
        ],
        net.param_count(),
    );

    let mut grad = vec![0.0; net.param_count()];
    // warmup
    let v = obj.loss_grad(&theta, &mut grad);
    println!("loss = {v:.6e}, grad[0] = {:.6e}", grad[0]);

    for par in [false, true] {
        let obj = if par {
            Objective::new(vec![], 0) // placeholder, rebuilt below
        } else {
            Objective::new(vec![], 0)
        };
        drop(obj);
        let _ = par;
    }

    let t0 = Instant::now();
    let n_iter = 20;
    for _ in 0..n_iter {
        let _ = obj.loss_grad(&theta, &mut grad);
    }
    let dt = t0.elapsed().as_secs_f64() / n_iter as f64;
    println!("serial    loss+grad: {:.1} ms/iter", dt * 1e3);

    let obj = obj.with_parallel(true);
    let t0 = Instant::now();
    for _ in 0..n_iter {
        let _ = obj.loss_grad(&theta, &mut grad);
    }
    let dt = t0.elapsed().as_secs_f64() / n_iter as f64;
    println!("parallel  loss+grad: {:.1} ms/iter", dt * 1e3);

    let t0 = Instant::now();
    for _ in 0..n_iter {
        let _ = obj.loss(&theta);
    }
    let dt = t0.elapsed().as_secs_f64() / n_iter as f64;
    println!("parallel  loss only: {:.1} ms/iter", dt * 1e3);
}
