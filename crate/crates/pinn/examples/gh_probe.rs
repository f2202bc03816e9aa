use pinn::oracle::burgers_exact_n;
use pinn::pde::BURGERS_NU;

fn main() {
    for n in [128usize, 192, 256, 384, 512, 768] {
        let mut worst = 0.0f64;
        let mut at = (0.0, 0.0);
        // dense sweep incl. the shock neighborhood
        for it in 1..=40 {
            let t = it as f64 / 40.0;
            for ix in 0..=200 {
                let x = -1.0 + ix as f64 / 100.0;
                let a = burgers_exact_n(t, x, BURGERS_NU, n);
                let b = burgers_exact_n(t, x, BURGERS_NU, 2 * n);
                let d = (a - b).abs();
                if d > worst { worst = d; at = (t, x); }
            }
        }
        println!("n = {n:4}: worst doubling diff {worst:.3e} at {at:?}");
    }
}
