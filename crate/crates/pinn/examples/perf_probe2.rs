use pinn::network::{Architecture, Network};
use std::time::Instant;

fn main() {
    let arch = Architecture::with_hidden(2, 8, 20, 1).unwrap();
    let net = Network::new(arch.clone(), 0);
    let theta = net.init(0);
    let nu = 0.01 / std::f64::consts::PI;

    let nf = 10000;
    let pts: Vec<(f64, f64)> = (0..nf)
        .map(|i| ((i as f64 / nf as f64) % 1.0, ((i * 7919) % 2000) as f64 / 1000.0 - 1.0))
        .collect();

    let mut grad = vec![0.0; net.param_count()];
    let mut terms = vec![0.0; nf];
    let t0 = Instant::now();
    let n_iter = 20;
    let mut sink = 0.0;
    for _ in 0..n_iter {
        grad.fill(0.0);
        pinn::bench_ct_residual(&arch, &theta, nu, &pts, &mut terms, &mut grad);
        sink += terms.iter().sum::<f64>() / nf as f64;
    }
    let dt = t0.elapsed().as_secs_f64() / n_iter as f64;
    println!("jet serial loss+grad ({} pts): {:.2} ms/iter (loss {:.4e})", nf, dt * 1e3, sink / n_iter as f64);
}
