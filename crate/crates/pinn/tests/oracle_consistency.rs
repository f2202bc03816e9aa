//! Independent numerical checks of the reference solutions: a
//! Crank–Nicolson finite-difference solve for Burgers (Richardson
//! extrapolated) and resolution refinement plus stage-equation consistency
//! for the spectral machinery.

use pinn::irk::{choose_q, gauss_legendre};
use pinn::oracle::{burgers_exact, kdv_simulate};
use pinn::pde::BURGERS_NU;

/// Crank–Nicolson solve of `u_t + u u_x = ν u_xx` on `[−1,1]` with the
/// benchmark initial and boundary data, on an `nt × nx`-interval grid.
/// Nonlinear steps are resolved with Newton iterations over a tridiagonal
/// Jacobian. Returns the solution values at the final time.
fn crank_nicolson(nt: usize, nx: usize, t_final: f64, nu: f64) -> Vec<f64> {
    let n = nx + 1;
    let dx = 2.0 / nx as f64;
    let dt = t_final / nt as f64;
    let mut u: Vec<f64> = (0..n)
        .map(|j| -(std::f64::consts::PI * (-1.0 + j as f64 * dx)).sin())
        .collect();
    u[0] = 0.0;
    u[n - 1] = 0.0;

    let rhs = |w: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.push(0.0);
        for j in 1..n - 1 {
            let wx = (w[j + 1] - w[j - 1]) / (2.0 * dx);
            let wxx = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dx * dx);
            out.push(nu * wxx - w[j] * wx);
        }
        out.push(0.0);
    };

    let mut f_old = Vec::with_capacity(n);
    let mut f_new = Vec::with_capacity(n);
    let mut v = u.clone();
    // tridiagonal Jacobian bands and residual
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut res = vec![0.0; n];
    for _ in 0..nt {
        rhs(&u, &mut f_old);
        v.copy_from_slice(&u);
        for _ in 0..3 {
            rhs(&v, &mut f_new);
            // residual of v − u − dt/2 (f(v) + f(u)) = 0 with Dirichlet rows
            res[0] = v[0];
            res[n - 1] = v[n - 1];
            for j in 1..n - 1 {
                res[j] = v[j] - u[j] - 0.5 * dt * (f_new[j] + f_old[j]);
            }
            diag[0] = 1.0;
            upper[0] = 0.0;
            diag[n - 1] = 1.0;
            lower[n - 1] = 0.0;
            for j in 1..n - 1 {
                let vx = (v[j + 1] - v[j - 1]) / (2.0 * dx);
                // ∂f_j/∂v_{j−1}, ∂f_j/∂v_j, ∂f_j/∂v_{j+1}
                let df_m = nu / (dx * dx) + v[j] / (2.0 * dx);
                let df_c = -2.0 * nu / (dx * dx) - vx;
                let df_p = nu / (dx * dx) - v[j] / (2.0 * dx);
                lower[j] = -0.5 * dt * df_m;
                diag[j] = 1.0 - 0.5 * dt * df_c;
                upper[j] = -0.5 * dt * df_p;
            }
            // Thomas solve J δ = res, then v ← v − δ
            let mut c_star = vec![0.0; n];
            let mut d_star = vec![0.0; n];
            c_star[0] = upper[0] / diag[0];
            d_star[0] = res[0] / diag[0];
            for j in 1..n {
                let m = diag[j] - lower[j] * c_star[j - 1];
                c_star[j] = upper[j] / m;
                d_star[j] = (res[j] - lower[j] * d_star[j - 1]) / m;
            }
            let mut delta = vec![0.0; n];
            delta[n - 1] = d_star[n - 1];
            for j in (0..n - 1).rev() {
                delta[j] = d_star[j] - c_star[j] * delta[j + 1];
            }
            for j in 0..n {
                v[j] -= delta[j];
            }
        }
        u.copy_from_slice(&v);
    }
    u
}

/// The quadrature-based exact solution must agree with a Richardson-
/// extrapolated Crank–Nicolson solve to 1e-5 away from the shock.
#[test]
fn cole_hopf_matches_crank_nicolson_oracle() {
    let (t, x) = (0.5, 0.25);
    let fine = crank_nicolson(4096, 8192, t, BURGERS_NU);
    let coarse = crank_nicolson(2048, 4096, t, BURGERS_NU);
    // x = 0.25 sits on both grids
    let uf = fine[5120];
    let uc = coarse[2560];
    let extrapolated = (4.0 * uf - uc) / 3.0;
    let exact = burgers_exact(t, x, BURGERS_NU);
    assert!(
        (exact - extrapolated).abs() <= 1e-5,
        "Cole–Hopf {exact} vs Crank–Nicolson {extrapolated} (CN raw {uf}, {uc})"
    );
}

/// Doubling the KdV resolution in both space and time (512 modes need the
/// smaller step: RK4 requires `λ2·k_max³·Δt ≲ 2.8`) leaves the t = 0.5
/// snapshot unchanged to 1e-6 in the sup norm.
#[test]
fn kdv_resolution_refinement() {
    let a = kdv_simulate(1.0, 0.0025, 256, 1e-5, 0.5, &[0.5]).unwrap();
    let b = kdv_simulate(1.0, 0.0025, 512, 2e-6, 0.5, &[0.5]).unwrap();
    let mut worst = 0.0_f64;
    for j in 0..256 {
        // the 256-grid is every second point of the 512-grid
        worst = worst.max((a.value(0, j) - b.value(0, 2 * j)).abs());
    }
    assert!(worst <= 1e-6, "sup-norm refinement difference {worst}");
}

/// Stage-equation consistency: plugging the exact solution (plus its
/// finite-difference derivatives) into the rearranged stage maps must
/// reproduce the snapshot values to within the data tolerance.
#[test]
fn stage_maps_reproduce_the_snapshot_from_oracle_stages() {
    let dt = 0.2;
    let t_n = 0.1;
    let q = choose_q(f64::EPSILON, dt).unwrap();
    let tableau = gauss_legendre(q).unwrap();
    let n_pts = 50;
    let xs: Vec<f64> = (0..n_pts)
        .map(|k| -0.9 + 1.8 * k as f64 / (n_pts - 1) as f64)
        .collect();
    let h = 1e-4;
    let n_op = |t: f64, x: f64| {
        let u = burgers_exact(t, x, BURGERS_NU);
        let ux = (burgers_exact(t, x + h, BURGERS_NU) - burgers_exact(t, x - h, BURGERS_NU))
            / (2.0 * h);
        let uxx = (burgers_exact(t, x + h, BURGERS_NU) - 2.0 * u
            + burgers_exact(t, x - h, BURGERS_NU))
            / (h * h);
        u * ux - BURGERS_NU * uxx
    };
    let mut sse = 0.0;
    for &x in &xs {
        let n_vals: Vec<f64> = tableau.c.iter().map(|&c| n_op(t_n + c * dt, x)).collect();
        let u_n = burgers_exact(t_n, x, BURGERS_NU);
        for i in 0..q {
            let u_stage = burgers_exact(t_n + tableau.c[i] * dt, x, BURGERS_NU);
            let mapped = u_stage
                + dt * (0..q).map(|j| tableau.a(i, j) * n_vals[j]).sum::<f64>();
            sse += (mapped - u_n) * (mapped - u_n);
        }
    }
    let bound = 1e-6 * n_pts as f64;
    assert!(sse <= bound, "SSE {sse} exceeds {bound}");
}
