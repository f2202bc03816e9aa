//! Reference solutions: the exact Burgers solution through the Cole–Hopf
//! transform evaluated by Gauss–Hermite quadrature, and a Fourier
//! pseudospectral KdV integrator for data generation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Solution values on a tensor-product grid, row `i` holding time `t_values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub t_values: Vec<f64>,
    pub x_values: Vec<f64>,
    /// Row-major `len(t_values) × len(x_values)`.
    pub u: Vec<f64>,
}

impl GridSolution {
    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.u[it * self.x_values.len() + ix]
    }

    pub fn row(&self, it: usize) -> &[f64] {
        let nx = self.x_values.len();
        &self.u[it * nx..(it + 1) * nx]
    }

    /// Row index of the time closest to `t` (must match within 1e-9).
    pub fn row_at_time(&self, t: f64) -> Result<usize> {
        self.t_values
            .iter()
            .position(|&tv| (tv - t).abs() <= 1e-9)
            .ok_or_else(|| Error::structural(format!("no snapshot at t = {t}")))
    }
}

/// Orthonormal Hermite values `(p_n(x), p_{n-1}(x))` for weight `e^{−x²}`.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}

/// Number of eigenvalues of the Hermite Jacobi matrix below `sigma`
/// (Sturm count via the LDLᵀ recurrence; off-diagonals `β_k² = k/2`).
fn hermite_sturm_count(n: usize, sigma: f64) -> usize {
    let mut count = 0;
    let mut d = -sigma;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let beta2 = k as f64 / 2.0;
        d = -sigma - beta2 / if d != 0.0 { d } else { f64::MIN_POSITIVE };
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gauss–Hermite nodes and weights for `∫ f(x) e^{−x²} dx`, mirrored exactly
/// about zero. Nodes come from Sturm-sequence bisection on the Jacobi matrix
/// with a Newton polish; weights are the reciprocal Christoffel function
/// `w_i = 1/Σ_{k<n} p_k(x_i)²`, which is stable at any order.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 4096 {
        return Err(Error::structural(format!("node count {n} out of range")));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let upper = (2.0 * n as f64 + 2.0).sqrt();
    // positive roots have Sturm index n/2 .. n−1 (ascending)
    for i in n / 2..n {
        if n % 2 == 1 && i == n / 2 {
            x[i] = 0.0;
            continue;
        }
        // eigenvalue with exactly i eigenvalues below it
        let (mut lo, mut hi) = (0.0, upper);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if hermite_sturm_count(n, mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..4 {
            let (p, pm1) = hermite_orthonormal(n, z);
            let pp = (2.0 * n as f64).sqrt() * pm1;
            let dz = p / pp;
            if !dz.is_finite() {
                break;
            }
            z -= dz;
        }
        if !(lo - 1e-6..=hi + 1e-6).contains(&z) {
            return Err(Error::numeric(format!(
                "Hermite node polish left its bracket (n = {n})"
            )));
        }
        x[i] = z;
        x[n - 1 - i] = -z;
    }
    for i in n / 2..n {
        // Christoffel function at the node; once the recurrence exceeds
        // 1e150 the weight is below 1e-300 and is flushed to zero
        let mut p1 = std::f64::consts::PI.powf(-0.25);
        let mut p2 = 0.0;
        let mut lambda = p1 * p1;
        for j in 0..n - 1 {
            let p3 = p2;
            p2 = p1;
            p1 = x[i] * (2.0 / (j as f64 + 1.0)).sqrt() * p2
                - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            lambda += p1 * p1;
            if p1.abs() > 1e150 {
                lambda = f64::INFINITY;
                break;
            }
        }
        w[i] = if lambda.is_finite() { 1.0 / lambda } else { 0.0 };
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

fn gh_table(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap();
    map.entry(n)
        .or_insert_with(|| Arc::new(gauss_hermite(n).expect("valid node count")))
        .clone()
}

/// Default Gauss–Hermite node count; the doubling check in the tests shows
/// 128 already reproduces the 256-node value to well below 1e-10.
pub const GH_NODES: usize = 128;

/// Exact Burgers solution via Cole–Hopf,
///
/// `u(t,x) = −∫ sin(π(x−η)) F(x−η) e^{−η²/4νt} dη / ∫ F(x−η) e^{−η²/4νt} dη`
///
/// with `F(y) = exp(−cos(πy)/(2πν))`, for the initial condition
/// `u(0,x) = −sin(πx)` and boundaries `u(t,±1) = 0`. Integrands are
/// rescaled by the maximum exponent, and the quadrature is summed over
/// mirrored node pairs so the odd symmetry is exact.
pub fn burgers_exact(t: f64, x: f64, nu: f64) -> f64 {
    burgers_exact_n(t, x, nu, GH_NODES)
}

/// [`burgers_exact`] with an explicit node count (for adequacy checks).
pub fn burgers_exact_n(t: f64, x: f64, nu: f64, n: usize) -> f64 {
    assert!(nu > 0.0, "viscosity must be positive");
    let pi = std::f64::consts::PI;
    if t <= 0.0 {
        return -(pi * x).sin();
    }
    let table = gh_table(n);
    let (nodes, weights) = (&table.0, &table.1);
    let s = (4.0 * nu * t).sqrt();
    // exponent of F at y = x − s·z
    let expo = |z: f64| -((pi * (x - s * z)).cos()) / (2.0 * pi * nu);
    let mut m = f64::NEG_INFINITY;
    for &z in nodes.iter() {
        m = m.max(expo(z));
    }
    let term = |i: usize| -> (f64, f64) {
        let z = nodes[i];
        let y = x - s * z;
        let f = (expo(z) - m).exp() * weights[i];
        ((pi * y).sin() * f, f)
    };
    let mut num = 0.0;
    let mut den = 0.0;
    // mirrored pairs first: cancellation at x = ±1 is exact
    for i in 0..n / 2 {
        let (a1, b1) = term(i);
        let (a2, b2) = term(n - 1 - i);
        num += a1 + a2;
        den += b1 + b2;
    }
    if n % 2 == 1 {
        let (a, b) = term(n / 2);
        num += a;
        den += b;
    }
    -num / den
}

fn grid_cache() -> &'static Mutex<HashMap<(usize, usize, u64), Arc<GridSolution>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, u64), Arc<GridSolution>>>> =
        OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Tensor-product evaluation of [`burgers_exact`] on uniform grids over
/// `[0,1] × [−1,1]`. Results are cached per `(nt, nx, nu)`.
pub fn burgers_grid(nt: usize, nx: usize, nu: f64) -> Result<Arc<GridSolution>> {
    if nt < 2 || nx < 2 {
        return Err(Error::structural("grid needs at least 2 points per axis"));
    }
    let key = (nt, nx, nu.to_bits());
    if let Some(g) = grid_cache().lock().unwrap().get(&key) {
        return Ok(g.clone());
    }
    let t_values: Vec<f64> = (0..nt).map(|i| i as f64 / (nt - 1) as f64).collect();
    let x_values: Vec<f64> = (0..nx)
        .map(|j| -1.0 + 2.0 * j as f64 / (nx - 1) as f64)
        .collect();
    let u: Vec<f64> = t_values
        .par_iter()
        .flat_map_iter(|&t| {
            let x_values = x_values.clone();
            x_values.into_iter().map(move |x| burgers_exact(t, x, nu))
        })
        .collect();
    let grid = Arc::new(GridSolution { t_values, x_values, u });
    grid_cache().lock().unwrap().insert(key, grid.clone());
    Ok(grid)
}

/// Pseudospectral KdV integration of `u_t = −λ1·u·u_x − λ2·u_xxx` on the
/// periodic interval `[−1, 1]` from `u(0,x) = cos(πx)`, dealiased by the 2/3
/// rule and stepped with classical RK4 in spectral space. Snapshots are
/// recorded at `output_times` (each must be a multiple of `dt_sim`).
pub fn kdv_simulate(
    lambda1: f64,
    lambda2: f64,
    n_modes: usize,
    dt_sim: f64,
    t_final: f64,
    output_times: &[f64],
) -> Result<GridSolution> {
    if n_modes < 8 || !n_modes.is_power_of_two() {
        return Err(Error::structural("n_modes must be a power of two ≥ 8"));
    }
    if dt_sim <= 0.0 || t_final <= 0.0 {
        return Err(Error::structural("time step and horizon must be positive"));
    }
    let n = n_modes;
    let pi = std::f64::consts::PI;
    let x_values: Vec<f64> = (0..n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    // wavenumbers for domain length 2: k_m = π·m in FFT order
    let k: Vec<f64> = (0..n)
        .map(|m| {
            let m = if m <= n / 2 { m as isize } else { m as isize - n as isize };
            pi * m as f64
        })
        .collect();
    let cutoff = (n as f64 / 3.0).floor();

    let mut steps_for: Vec<(u64, f64)> = output_times
        .iter()
        .map(|&t| {
            let steps = t / dt_sim;
            if (steps - steps.round()).abs() > 1e-6 {
                return Err(Error::structural(format!(
                    "output time {t} is not a multiple of dt_sim {dt_sim}"
                )));
            }
            Ok((steps.round() as u64, t))
        })
        .collect::<Result<Vec<_>>>()?;
    steps_for.sort_by_key(|&(s, _)| s);
    let total_steps = (t_final / dt_sim).round() as u64;
    if steps_for.last().map_or(false, |&(s, _)| s > total_steps) {
        return Err(Error::structural("output time beyond t_final"));
    }

    let mut u_hat: Vec<Complex<f64>> = x_values
        .iter()
        .map(|&x| Complex::new((pi * x).cos(), 0.0))
        .collect();
    fft.process(&mut u_hat);
    let scale = 1.0 / n as f64;
    for v in u_hat.iter_mut() {
        *v *= scale;
    }
    let dealias = |v: &mut [Complex<f64>]| {
        for (m, kv) in k.iter().enumerate() {
            if (kv / pi).abs() > cutoff {
                v[m] = Complex::new(0.0, 0.0);
            }
        }
    };
    dealias(&mut u_hat);

    // RHS in spectral space: −λ1·FFT(u·u_x) − λ2·(ik)³·û
    let mut scratch_u = vec![Complex::new(0.0, 0.0); n];
    let mut scratch_ux = vec![Complex::new(0.0, 0.0); n];
    let mut rhs = |v: &[Complex<f64>], out: &mut Vec<Complex<f64>>| {
        scratch_u.copy_from_slice(v);
        for m in 0..n {
            let ik = Complex::new(0.0, k[m]);
            scratch_ux[m] = ik * v[m];
        }
        ifft.process(&mut scratch_u);
        ifft.process(&mut scratch_ux);
        out.clear();
        out.extend(
            scratch_u
                .iter()
                .zip(&scratch_ux)
                .map(|(a, b)| Complex::new(a.re * b.re, 0.0)),
        );
        fft.process(out);
        for m in 0..n {
            let ik3 = Complex::new(0.0, -k[m] * k[m] * k[m]); // (ik)³ = −i k³
            out[m] = -lambda1 * out[m] * scale - lambda2 * ik3 * v[m];
        }
        dealias(out);
    };

    let mut snapshots: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut record = |step: u64, u_hat: &[Complex<f64>], snapshots: &mut Vec<(f64, Vec<f64>)>| {
        while let Some(&(s, t)) = steps_for.first() {
            if s != step {
                break;
            }
            let mut phys = u_hat.to_vec();
            ifft.process(&mut phys);
            snapshots.push((t, phys.iter().map(|c| c.re).collect()));
            steps_for.remove(0);
        }
    };
    record(0, &u_hat, &mut snapshots);

    let (mut k1, mut k2, mut k3, mut k4) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut tmp = vec![Complex::new(0.0, 0.0); n];
    for step in 1..=total_steps {
        rhs(&u_hat, &mut k1);
        for m in 0..n {
            tmp[m] = u_hat[m] + 0.5 * dt_sim * k1[m];
        }
        rhs(&tmp, &mut k2);
        for m in 0..n {
            tmp[m] = u_hat[m] + 0.5 * dt_sim * k2[m];
        }
        rhs(&tmp, &mut k3);
        for m in 0..n {
            tmp[m] = u_hat[m] + dt_sim * k3[m];
        }
        rhs(&tmp, &mut k4);
        for m in 0..n {
            u_hat[m] += dt_sim / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }
        if step % 1000 == 0 || step == total_steps {
            let coeff_l1 = u_hat.iter().map(|c| c.norm()).sum::<f64>();
            if !coeff_l1.is_finite() || coeff_l1 > 1e3 {
                return Err(Error::numeric(format!(
                    "KdV integration blew up at step {step}"
                )));
            }
        }
        record(step, &u_hat, &mut snapshots);
    }
    if !steps_for.is_empty() {
        return Err(Error::structural("not all output times were reached"));
    }

    let t_values: Vec<f64> = snapshots.iter().map(|(t, _)| *t).collect();
    let u = snapshots.into_iter().flat_map(|(_, row)| row).collect();
    Ok(GridSolution { t_values, x_values, u })
}

/// Trapezoid mass `∫ u dx` on the periodic grid.
pub fn periodic_mass(row: &[f64], dx: f64) -> f64 {
    row.iter().sum::<f64>() * dx
}

/// Trapezoid momentum `∫ u² dx` on the periodic grid.
pub fn periodic_momentum(row: &[f64], dx: f64) -> f64 {
    row.iter().map(|u| u * u).sum::<f64>() * dx
}
