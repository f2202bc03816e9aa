//! Gauss–Legendre implicit Runge-Kutta machinery: tableau generation for an
//! arbitrary stage count, stage-count selection, stage operators, and the
//! discrete-time training losses.
//!
//! A q-stage Gauss–Legendre method has nodes at the roots of the shifted
//! Legendre polynomial `P_q(2c−1)`, quadrature order 2q, and is A-stable at
//! every order, which is what lets a single huge step (q up to 500) span the
//! whole time domain.

mod loss;

pub use loss::{
    dt_forward_loss, dt_forward_loss_graph, dt_identify_loss, dt_identify_loss_graph,
    DtObjective, Snapshot, StageEquation,
};

use crate::error::{Error, Result};
use crate::pde::LambdaSource;

use crate::autodiff::{Graph, NodeId};

/// Coefficients `{a_ij, b_j, c_j}` of a q-stage implicit Runge-Kutta scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub q: usize,
    /// Row-major `q × q`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.q + j]
    }

    /// Plain-text export: q rows of `a`, then `b`, then `c`, one line each,
    /// 17 significant digits.
    pub fn export(&self) -> String {
        let mut out = String::new();
        let fmt_row = |row: &[f64]| {
            row.iter()
                .map(|v| format!("{v:.16e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for i in 0..self.q {
            out.push_str(&fmt_row(&self.a[i * self.q..(i + 1) * self.q]));
            out.push('\n');
        }
        out.push_str(&fmt_row(&self.b));
        out.push('\n');
        out.push_str(&fmt_row(&self.c));
        out.push('\n');
        out
    }

    /// `Σ_j b_j c_j^{k−1} − 1/k`, the order-k quadrature condition residual,
    /// accumulated in double-double.
    pub fn order_condition_residual(&self, k: usize) -> f64 {
        let mut acc = Dd::ZERO;
        for (&bj, &cj) in self.b.iter().zip(&self.c) {
            let mut p = 1.0;
            for _ in 0..k - 1 {
                p *= cj;
            }
            acc = acc.add_f64(bj * p);
        }
        acc.add_f64(-1.0 / k as f64).to_f64()
    }
}

/// Double-double accumulator (error-free transformations); used where the
/// tableau sums need more than f64 headroom.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    #[inline]
    pub(crate) fn add_f64(self, x: f64) -> Dd {
        let (s, e) = Dd::two_sum(self.hi, x);
        let lo = self.lo + e;
        let (hi, lo2) = Dd::two_sum(s, lo);
        Dd { hi, lo: lo2 }
    }

    /// Add the exact product `a·b` (two-product via fused multiply-add).
    #[inline]
    pub(crate) fn add_prod(self, a: f64, b: f64) -> Dd {
        let p = a * b;
        let err = a.mul_add(b, -p);
        self.add_f64(p).add_f64(err)
    }

    #[inline]
    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Stage count from the truncation-error balance `q = ½ log ε / log Δt`,
/// rounded up (with a snap window for exact-integer ratios), minimum 1.
pub fn choose_q(eps: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt < 1.0) {
        return Err(Error::structural(format!(
            "choose_q needs 0 < dt < 1, got {dt}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::structural(format!(
            "choose_q needs 0 < eps < 1, got {eps}"
        )));
    }
    let r = 0.5 * eps.ln() / dt.ln();
    // floating fuzz must not add a stage when the ratio is an integer
    let q = if (r - r.round()).abs() < 1e-6 {
        r.round()
    } else {
        r.ceil()
    };
    Ok((q as usize).max(1))
}

/// Legendre polynomial value and derivative at `x` via the three-term
/// recurrence.
fn legendre(q: usize, x: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 1..=q {
        let p3 = p2;
        p2 = p1;
        p1 = ((2 * j - 1) as f64 * x * p2 - (j - 1) as f64 * p3) / j as f64;
    }
    let pp = q as f64 * (x * p1 - p2) / (x * x - 1.0);
    (p1, pp)
}

/// Gauss–Legendre tableau for `1 ≤ q ≤ 500`.
///
/// Nodes come from Newton iteration on `P_q` (mirrored, so the symmetry
/// `c_j + c_{q+1−j} = 1` is exact); `b` are the Gauss weights; `a_ij` is the
/// exact quadrature `∫₀^{c_i} ℓ_j` evaluated by mapping the rule onto
/// `[0, c_i]` (the integrand has degree `q−1 < 2q`). The inner quadrature
/// sums accumulate in double-double.
pub fn gauss_legendre(q: usize) -> Result<ButcherTableau> {
    if q == 0 || q > 500 {
        return Err(Error::structural(format!(
            "stage count {q} out of range 1..=500"
        )));
    }
    // roots of P_q on (−1, 1), positive half, descending
    let mut c = vec![0.0; q];
    let mut b = vec![0.0; q];
    for k in 0..q / 2 {
        // Abramowitz & Stegun 22.16.6 initial guess
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, pp) = legendre(q, x);
            let dx = p / pp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric(format!(
                "Legendre root iteration failed to converge for q={q}"
            )));
        }
        let (_, pp) = legendre(q, x);
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        // shift to (0,1): mirrored pair, exact symmetry by construction
        let i_hi = q - 1 - k;
        c[i_hi] = (1.0 + x) / 2.0;
        c[k] = 1.0 - c[i_hi];
        b[i_hi] = w / 2.0;
        b[k] = b[i_hi];
    }
    if q % 2 == 1 {
        let mid = q / 2;
        c[mid] = 0.5;
        let (_, pp) = legendre(q, 0.0);
        b[mid] = 1.0 / (pp * pp);
    }

    // log-scaled barycentric weights for the Lagrange basis at the nodes
    let mut logw = vec![0.0; q];
    let mut sign = vec![1.0; q];
    for j in 0..q {
        let mut s = 0.0;
        let mut sg = 1.0;
        for k in 0..q {
            if k != j {
                let d = c[j] - c[k];
                s -= d.abs().ln();
                if d < 0.0 {
                    sg = -sg;
                }
            }
        }
        logw[j] = s;
        sign[j] = sg;
    }
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let wbar: Vec<f64> = logw
        .iter()
        .zip(&sign)
        .map(|(&l, &s)| s * (l - m).exp())
        .collect();

    // a_ij = c_i Σ_m b_m ℓ_j(c_i c_m)
    let mut a = vec![0.0; q * q];
    let mut acc = vec![Dd::ZERO; q];
    let mut terms = vec![0.0; q];
    for i in 0..q {
        for v in acc.iter_mut() {
            *v = Dd::ZERO;
        }
        for mth in 0..q {
            let y = c[i] * c[mth];
            // ℓ_j(y) via the true barycentric form; exact partition of unity
            let mut hit = usize::MAX;
            for j in 0..q {
                let d = y - c[j];
                if d.abs() < 1e-300 {
                    hit = j;
                    break;
                }
                terms[j] = wbar[j] / d;
            }
            if hit != usize::MAX {
                acc[hit] = acc[hit].add_f64(b[mth]);
                continue;
            }
            let mut den = 0.0;
            for &t in terms.iter() {
                den += t;
            }
            let scale = b[mth] / den;
            for j in 0..q {
                acc[j] = acc[j].add_prod(scale, terms[j]);
            }
        }
        for j in 0..q {
            a[i * q + j] = c[i] * acc[j].to_f64();
        }
    }

    Ok(ButcherTableau { q, a, b, c })
}

/// KdV stage operator `N[u; λ] = λ1·u·u_x + λ2·u_xxx` (so that
/// `u_t + N = 0`), as a graph expression. `u` must be built from an input in
/// `x_slot`.
pub fn kdv_operator(g: &mut Graph, u: NodeId, x_slot: u32, lambda: LambdaSource) -> NodeId {
    let (l1, l2) = lambda.nodes(g);
    let ux = g.derive(u, x_slot);
    let uxx = g.derive(ux, x_slot);
    let uxxx = g.derive(uxx, x_slot);
    let uux = g.mul(u, ux);
    let disp = g.mul(l2, uxxx);
    g.mul_add(l1, uux, disp)
}

/// Burgers stage operator `N[u; λ] = λ1·u·u_x − λ2·u_xx`.
pub fn burgers_operator(g: &mut Graph, u: NodeId, x_slot: u32, lambda: LambdaSource) -> NodeId {
    let (l1, l2) = lambda.nodes(g);
    let ux = g.derive(u, x_slot);
    let uxx = g.derive(ux, x_slot);
    let uux = g.mul(u, ux);
    let visc = g.mul(l2, uxx);
    let adv = g.mul(l1, uux);
    g.sub(adv, visc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MACHINE_EPS: f64 = 2.220446e-16;

    #[test]
    fn q1_is_the_implicit_midpoint_rule() {
        let t = gauss_legendre(1).unwrap();
        assert!((t.c[0] - 0.5).abs() <= 1e-15);
        assert!((t.b[0] - 1.0).abs() <= 1e-15);
        assert!((t.a[0] - 0.5).abs() <= 1e-15);
        for k in 1..=2 {
            assert!(t.order_condition_residual(k).abs() <= 1e-14);
        }
    }

    #[test]
    fn q2_matches_the_analytic_fourth_order_tableau() {
        let t = gauss_legendre(2).unwrap();
        let s6 = 3.0_f64.sqrt() / 6.0;
        let want_c = [0.5 - s6, 0.5 + s6];
        let want_b = [0.5, 0.5];
        let want_a = [0.25, 0.25 - s6, 0.25 + s6, 0.25];
        for (got, want) in t.c.iter().zip(&want_c) {
            assert!((got - want).abs() <= 1e-12, "c {got} vs {want}");
        }
        for (got, want) in t.b.iter().zip(&want_b) {
            assert!((got - want).abs() <= 1e-12);
        }
        for (got, want) in t.a.iter().zip(&want_a) {
            assert!((got - want).abs() <= 1e-12, "a {got} vs {want}");
        }
        for k in 1..=4 {
            assert!(t.order_condition_residual(k).abs() <= 1e-12);
        }
    }

    #[test]
    fn tableau_invariants_across_stage_counts() {
        for q in [1usize, 2, 4, 8, 16, 32, 64, 100, 500] {
            let t = gauss_legendre(q).unwrap();
            // Σ b = 1
            let sb: f64 = t.b.iter().sum();
            assert!((sb - 1.0).abs() <= 1e-12, "q={q} Σb={sb}");
            // row sums = c
            for i in 0..q {
                let r: f64 = (0..q).map(|j| t.a(i, j)).sum();
                assert!((r - t.c[i]).abs() <= 1e-12, "q={q} row {i}: {r} vs {}", t.c[i]);
            }
            // node symmetry, exact by construction
            for j in 0..q {
                assert_eq!(t.c[j] + t.c[q - 1 - j], 1.0, "q={q} node {j}");
            }
            // quadrature order conditions k ≤ 2q
            let tol = if q <= 32 { 1e-10 } else { 1e-8 };
            for k in 1..=2 * q {
                let r = t.order_condition_residual(k);
                assert!(r.abs() <= tol, "q={q} k={k} residual {r}");
            }
        }
    }

    #[test]
    fn stage_count_bounds_are_enforced() {
        assert!(gauss_legendre(0).is_err());
        assert!(gauss_legendre(501).is_err());
    }

    #[test]
    fn choose_q_matches_the_formula() {
        assert_eq!(choose_q(MACHINE_EPS, 0.8).unwrap(), 81);
        assert_eq!(choose_q(MACHINE_EPS, 0.5).unwrap(), 26);
        assert_eq!(choose_q(f64::EPSILON, 0.5).unwrap(), 26);
        // dt = √ε exactly → q = 1
        assert_eq!(choose_q(MACHINE_EPS, MACHINE_EPS.sqrt()).unwrap(), 1);
        assert!(choose_q(MACHINE_EPS, 1.0).is_err());
        assert!(choose_q(MACHINE_EPS, 0.0).is_err());
        assert!(choose_q(1.5, 0.5).is_err());
    }

    /// Classical one-step integration of u' = −u must hit exp(−dt) within
    /// the dt^(2q) error bound.
    #[test]
    fn scheme_integrates_linear_decay_at_design_order() {
        let dt = 0.1;
        for q in [1usize, 2, 3] {
            let t = gauss_legendre(q).unwrap();
            // stages: k = −(u_n + dt·A k)  ⇒  (I + dt A) k = −u_n · 1
            let n = q;
            let mut mat = vec![0.0; n * n];
            let mut rhs = vec![-1.0; n];
            for i in 0..n {
                for j in 0..n {
                    mat[i * n + j] = dt * t.a(i, j) + if i == j { 1.0 } else { 0.0 };
                }
            }
            // Gaussian elimination with partial pivoting
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&r1, &r2| {
                        mat[r1 * n + col]
                            .abs()
                            .total_cmp(&mat[r2 * n + col].abs())
                    })
                    .unwrap();
                if piv != col {
                    for j in 0..n {
                        mat.swap(col * n + j, piv * n + j);
                    }
                    rhs.swap(col, piv);
                }
                for r in col + 1..n {
                    let f = mat[r * n + col] / mat[col * n + col];
                    for j in col..n {
                        mat[r * n + j] -= f * mat[col * n + j];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
            let mut k = vec![0.0; n];
            for r in (0..n).rev() {
                let mut s = rhs[r];
                for j in r + 1..n {
                    s -= mat[r * n + j] * k[j];
                }
                k[r] = s / mat[r * n + r];
            }
            let u1: f64 = 1.0 + dt * t.b.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
            let err = (u1 - (-dt_f64(dt)).exp()).abs();
            let bound = dt.powi(2 * q as i32);
            assert!(err <= bound, "q={q}: err {err} > bound {bound}");
        }
    }

    fn dt_f64(dt: f64) -> f64 {
        dt
    }

    #[test]
    fn export_round_trips_at_full_precision() {
        let t = gauss_legendre(3).unwrap();
        let text = t.export();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        let parse = |line: &str| -> Vec<f64> {
            line.split_whitespace().map(|v| v.parse().unwrap()).collect()
        };
        for i in 0..3 {
            let row = parse(lines[i]);
            for j in 0..3 {
                assert_eq!(row[j], t.a(i, j));
            }
        }
        assert_eq!(parse(lines[3]), t.b);
        assert_eq!(parse(lines[4]), t.c);
    }

    #[test]
    fn kdv_operator_examples() {
        // constant u → N = 0
        {
            let mut g = Graph::new();
            let x = g.input(0);
            let c = g.constant(2.5);
            let zero_x = g.mul(x, c); // keep x in graph
            let _ = zero_x;
            let n = kdv_operator(&mut g, c, 0, LambdaSource::Fixed(1.3, 0.7));
            assert_eq!(g.eval(n, &[], &[0.4]).unwrap(), 0.0);
        }
        // u = x³, λ = (0, 1) → N = u_xxx = 6
        {
            let mut g = Graph::new();
            let x = g.input(0);
            let u = g.powi(x, 3);
            let n = kdv_operator(&mut g, u, 0, LambdaSource::Fixed(0.0, 1.0));
            for xv in [-0.7, 0.0, 1.3] {
                assert_eq!(g.eval(n, &[], &[xv]).unwrap(), 6.0);
            }
        }
        // u = cos(πx), λ = (1, 1) → N = −π cos(πx) sin(πx) + π³ sin(πx)
        {
            let pi = std::f64::consts::PI;
            let mut g = Graph::new();
            let x = g.input(0);
            let pn = g.constant(pi);
            let px = g.mul(pn, x);
            let u = g.cos(px);
            let n = kdv_operator(&mut g, u, 0, LambdaSource::Fixed(1.0, 1.0));
            for xv in [0.25, -0.4, 0.9] {
                let want = -pi * (pi * xv).cos() * (pi * xv).sin() + pi.powi(3) * (pi * xv).sin();
                let got = g.eval(n, &[], &[xv]).unwrap();
                assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn burgers_operator_matches_definition() {
        let mut g = Graph::new();
        let x = g.input(0);
        let u = g.powi(x, 2);
        // N = λ1 u u_x − λ2 u_xx = λ1 x²·2x − λ2·2
        let n = burgers_operator(&mut g, u, 0, LambdaSource::Fixed(0.5, 0.25));
        for xv in [0.3, -1.1] {
            let want = 0.5 * xv * xv * 2.0 * xv - 0.25 * 2.0;
            let got = g.eval(n, &[], &[xv]).unwrap();
            assert!((got - want).abs() <= 1e-14 * (1.0 + want.abs()));
        }
    }
}
