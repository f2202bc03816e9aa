//! Physics-informed neural networks for 1-D nonlinear PDEs.
//!
//! Small dense networks are trained against data-misfit plus PDE-residual
//! losses, in two formulations:
//!
//! - **continuous time**: the network takes `(t, x)` and the Burgers residual
//!   is penalized at scattered collocation points;
//! - **discrete time**: a multi-output network predicts the stage values of a
//!   high-order Gauss–Legendre implicit Runge-Kutta scheme at one time level,
//!   coupled through the stage equations.
//!
//! Both support the forward problem (solve the PDE from initial/boundary or
//! snapshot data) and coefficient identification (recover λ from
//! observations). See the `harness` module and the `pinn` binary for the
//! experiment drivers.

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod network;
pub mod oracle;
pub(crate) mod jet;
pub mod irk;
pub mod optimizer;
pub mod pde;
pub mod sampling;

pub use error::{Error, Result};

/// Scale probe for the jet engine; not part of the public surface.
#[doc(hidden)]
pub fn bench_ct_residual(
    arch: &network::Architecture,
    theta: &[f64],
    nu: f64,
    pts: &[(f64, f64)],
    terms: &mut [f64],
    grad: &mut [f64],
) {
    let mut scratch = jet::Scratch::default();
    let mut inputs = Vec::new();
    let mut bars = Vec::new();
    let weight = 1.0 / pts.len() as f64;
    let mut at = 0;
    while at < pts.len() {
        let hi = (at + jet::BATCH).min(pts.len());
        let count = hi - at;
        inputs.clear();
        for &(t, x) in &pts[at..hi] {
            inputs.extend(jet::ct_inputs(t, x));
        }
        jet::forward(arch, theta, jet::Flavor::Ct, &inputs, count, &mut scratch);
        bars.clear();
        for (b, k) in (at..hi).enumerate() {
            let j = jet::output_jet(&scratch, 0, b);
            let f = j[1] + j[0] * j[2] - nu * j[3];
            terms[k] = f * f;
            let w = 2.0 * f * weight;
            bars.push([w * j[2], w, w * j[0], -w * nu]);
        }
        jet::backward(arch, theta, jet::Flavor::Ct, &bars, count, &mut scratch, grad);
        at = hi;
    }
}
