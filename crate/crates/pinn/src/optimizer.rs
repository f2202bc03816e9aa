//! Full-batch L-BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over a bounded history of curvature pairs, cautious
//! updates (pairs with `sᵀy ≤ 1e-10·‖s‖‖y‖` are skipped), and a
//! bracket-and-zoom line search with cubic interpolation. Every accepted
//! step satisfies both strong Wolfe conditions; when no such step can be
//! found the run ends with `Termination::LineSearchFailure` rather than an
//! error.

use std::collections::VecDeque;

use crate::autodiff::ObjectiveFn;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOptions {
    /// Curvature pairs kept for the two-loop recursion.
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when `‖g‖_∞` falls below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of the loss stalls below this.
    pub f_rel_tol: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Fixed-iteration Adam warm-up before L-BFGS (0 = off).
    pub adam_warmup: usize,
    pub adam_lr: f64,
    /// Record per-step line-search data (for Wolfe-condition assertions).
    pub record_trace: bool,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 50,
            max_iterations: 50_000,
            grad_tol: 1e-9,
            f_rel_tol: f64::EPSILON * 10.0,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            adam_warmup: 0,
            adam_lr: 1e-3,
            record_trace: false,
        }
    }
}

impl LbfgsOptions {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::structural("need 0 < c1 < c2 < 1"));
        }
        if self.memory == 0 {
            return Err(Error::structural("memory must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradTol,
    FTol,
    MaxIter,
    LineSearchFailure,
}

/// Line-search record of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub f0: f64,
    /// Directional derivative at the step start (must be negative).
    pub g0d: f64,
    pub alpha: f64,
    pub f_new: f64,
    /// Directional derivative at the accepted point.
    pub gd_new: f64,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub params: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<StepRecord>,
}

/// Per-iteration observer data (drives the optional CSV log).
#[derive(Debug, Clone, Copy)]
pub struct IterInfo {
    pub iteration: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub step_length: f64,
}

struct Eval {
    f: f64,
    g: Vec<f64>,
}

fn eval(obj: &dyn ObjectiveFn, x: &[f64]) -> Eval {
    let mut g = vec![0.0; x.len()];
    let f = obj.value_grad(x, &mut g);
    Eval { f, g }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizer of `f1` on the cubic through `(x1, f1, g1)` and `(x2, f2, g2)`,
/// clamped to `bounds`.
fn cubic_interpolate(
    x1: f64,
    f1: f64,
    g1: f64,
    x2: f64,
    f2: f64,
    g2: f64,
    bounds: (f64, f64),
) -> f64 {
    let (lo, hi) = bounds;
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2sq = d1 * d1 - g1 * g2;
    if d2sq >= 0.0 {
        let d2 = d2sq.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_finite() {
            return min_pos.clamp(lo, hi);
        }
    }
    0.5 * (lo + hi)
}

/// Strong-Wolfe line search (bracket then zoom, cubic interpolation).
/// Returns the accepted evaluation or `None` after the trial budget.
#[allow(clippy::too_many_arguments)]
fn strong_wolfe(
    obj: &dyn ObjectiveFn,
    x0: &[f64],
    d: &[f64],
    f0: f64,
    g0d: f64,
    mut alpha: f64,
    c1: f64,
    c2: f64,
) -> Option<(f64, Eval)> {
    const MAX_TRIALS: usize = 40;
    let probe = |alpha: f64| -> (Eval, f64) {
        let xt: Vec<f64> = x0.iter().zip(d).map(|(x, di)| x + alpha * di).collect();
        let e = eval(obj, &xt);
        let gd = dot(&e.g, d);
        (e, gd)
    };
    let mut trials = 0;

    // bracketing
    let (mut a_prev, mut f_prev, mut gd_prev) = (0.0, f0, g0d);
    let mut bracket: Option<((f64, f64, f64), (f64, f64, f64), Eval)> = None;
    let mut accepted: Option<(f64, Eval, f64)> = None;
    while trials < MAX_TRIALS {
        let (e, gd) = probe(alpha);
        trials += 1;
        let armijo_fail = !e.f.is_finite() || e.f > f0 + c1 * alpha * g0d || (trials > 1 && e.f >= f_prev);
        if armijo_fail {
            bracket = Some(((a_prev, f_prev, gd_prev), (alpha, e.f, gd), e));
            break;
        }
        if gd.abs() <= -c2 * g0d {
            accepted = Some((alpha, e, gd));
            break;
        }
        if gd >= 0.0 {
            bracket = Some(((a_prev, f_prev, gd_prev), (alpha, e.f, gd), e));
            break;
        }
        let next = cubic_interpolate(
            a_prev,
            f_prev,
            gd_prev,
            alpha,
            e.f,
            gd,
            (alpha + 0.01 * (alpha - a_prev), 10.0 * alpha),
        );
        a_prev = alpha;
        f_prev = e.f;
        gd_prev = gd;
        alpha = next;
    }

    if let Some((alpha, e, _)) = accepted {
        return Some((alpha, e));
    }
    let ((mut a_lo, mut f_lo, mut gd_lo), (mut a_hi, mut f_hi, mut gd_hi), _) = bracket?;
    // keep the lower end the better one
    if f_hi < f_lo && f_hi.is_finite() {
        std::mem::swap(&mut a_lo, &mut a_hi);
        std::mem::swap(&mut f_lo, &mut f_hi);
        std::mem::swap(&mut gd_lo, &mut gd_hi);
    }

    // zoom
    let mut insufficient = false;
    while trials < MAX_TRIALS {
        if (a_hi - a_lo).abs() * inf_norm(d) < 1e-16 {
            return None;
        }
        let mut at = cubic_interpolate(
            a_lo,
            f_lo,
            gd_lo,
            a_hi,
            f_hi,
            gd_hi,
            (a_lo.min(a_hi), a_lo.max(a_hi)),
        );
        // nudge trials that pile up on the bracket ends
        let span = (a_hi - a_lo).abs();
        let margin = 0.1 * span;
        if (at - a_lo.min(a_hi)).min(a_lo.max(a_hi) - at) < margin {
            if insufficient || at <= a_lo.min(a_hi) || at >= a_lo.max(a_hi) {
                at = if (at - a_hi).abs() < (at - a_lo).abs() {
                    a_hi - margin.copysign(a_hi - a_lo)
                } else {
                    a_lo + margin.copysign(a_hi - a_lo)
                };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }
        let (e, gd) = probe(at);
        trials += 1;
        if !e.f.is_finite() || e.f > f0 + c1 * at * g0d || e.f >= f_lo {
            a_hi = at;
            f_hi = e.f;
            gd_hi = gd;
        } else {
            if gd.abs() <= -c2 * g0d {
                return Some((at, e));
            }
            if gd * (a_hi - a_lo) >= 0.0 {
                a_hi = a_lo;
                f_hi = f_lo;
                gd_hi = gd_lo;
            }
            a_lo = at;
            f_lo = e.f;
            gd_lo = gd;
        }
    }
    None
}

/// Minimize `objective` from `x0`. Deterministic given the objective and
/// start point; see [`LbfgsOptions`] for the stopping rules.
pub fn minimize(
    objective: &dyn ObjectiveFn,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> Result<OptResult> {
    minimize_observed(objective, x0, opts, &mut |_| {})
}

/// [`minimize`] with a per-iteration observer.
pub fn minimize_observed(
    objective: &dyn ObjectiveFn,
    x0: &[f64],
    opts: &LbfgsOptions,
    observer: &mut dyn FnMut(&IterInfo),
) -> Result<OptResult> {
    opts.validate()?;
    if objective.dim() != x0.len() {
        return Err(Error::structural(format!(
            "objective dimension {} does not match start point {}",
            objective.dim(),
            x0.len()
        )));
    }
    let mut x = x0.to_vec();

    if opts.adam_warmup > 0 {
        adam(objective, &mut x, opts.adam_warmup, opts.adam_lr);
    }

    let mut cur = eval(objective, &x);
    if !cur.f.is_finite() {
        return Err(Error::structural(format!(
            "objective is not finite at the start point ({})",
            cur.f
        )));
    }
    let n = x.len();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new(); // (s, y, 1/sᵀy)
    let mut trace = Vec::new();
    let mut gamma = 1.0;

    for iteration in 0..opts.max_iterations {
        let gnorm = inf_norm(&cur.g);
        if gnorm <= opts.grad_tol {
            return Ok(OptResult {
                params: x,
                loss: cur.f,
                iterations: iteration,
                termination: Termination::GradTol,
                trace,
            });
        }

        // two-loop recursion
        let mut d: Vec<f64> = cur.g.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        for di in d.iter_mut() {
            *di *= gamma;
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }

        let mut g0d = dot(&cur.g, &d);
        if g0d >= 0.0 {
            // cautious updates should prevent this; restart from steepest descent
            history.clear();
            d = cur.g.iter().map(|g| -g).collect();
            g0d = dot(&cur.g, &d);
        }

        let alpha0 = if iteration == 0 {
            (1.0 / inf_norm(&cur.g)).min(1.0)
        } else {
            1.0
        };
        let Some((alpha, new)) = strong_wolfe(
            objective,
            &x,
            &d,
            cur.f,
            g0d,
            alpha0,
            opts.wolfe_c1,
            opts.wolfe_c2,
        ) else {
            return Ok(OptResult {
                params: x,
                loss: cur.f,
                iterations: iteration,
                termination: Termination::LineSearchFailure,
                trace,
            });
        };

        if opts.record_trace && trace.len() < 100_000 {
            trace.push(StepRecord {
                f0: cur.f,
                g0d,
                alpha,
                f_new: new.f,
                gd_new: dot(&new.g, &d),
            });
        }

        let mut s = vec![0.0; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            s[i] = alpha * d[i];
            y[i] = new.g[i] - cur.g[i];
        }
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            gamma = sy / dot(&y, &y);
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let df = cur.f - new.f;
        let stalled = df.abs() <= opts.f_rel_tol * cur.f.abs().max(1.0);
        for (xi, si) in x.iter_mut().zip(d.iter()) {
            *xi += alpha * si;
        }
        cur = new;
        observer(&IterInfo {
            iteration: iteration + 1,
            loss: cur.f,
            grad_norm: inf_norm(&cur.g),
            step_length: alpha,
        });
        if stalled {
            return Ok(OptResult {
                params: x,
                loss: cur.f,
                iterations: iteration + 1,
                termination: Termination::FTol,
                trace,
            });
        }
    }
    Ok(OptResult {
        params: x,
        loss: cur.f,
        iterations: opts.max_iterations,
        termination: Termination::MaxIter,
        trace,
    })
}

/// Fixed-iteration Adam (β1 = 0.9, β2 = 0.999), used only as an optional
/// warm-up for identification runs.
fn adam(obj: &dyn ObjectiveFn, x: &mut [f64], iterations: usize, lr: f64) {
    let n = x.len();
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut g = vec![0.0; n];
    for k in 1..=iterations {
        obj.value_grad(x, &mut g);
        let bc1 = 1.0 - b1.powi(k as i32);
        let bc2 = 1.0 - b2.powi(k as i32);
        for i in 0..n {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            x[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        }
    }
}
