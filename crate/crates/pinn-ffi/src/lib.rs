//! C ABI for the pinn toolkit.
//!
//! Conventions:
//! - every fallible function returns a [`PinnStatus`]; outputs go through
//!   pointers and are written only on `Ok`;
//! - the textual reason of the most recent failure on the current thread is
//!   available via [`pinn_last_error`];
//! - objects behind opaque handles (`PinnTableau`, `PinnModel`) must be
//!   released with their `_free` function; strings returned by the library
//!   with [`pinn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use pinn::error::Error;
use pinn::harness::{self, ExperimentConfig};
use pinn::network::Network;
use pinn::{autodiff, irk, oracle};

/// Result codes of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinnStatus {
    Ok = 0,
    /// Malformed input: bad shapes, invalid arguments, unparsable files.
    Structural = 1,
    /// Arithmetic failure: divergence, blow-up, non-convergence.
    Numeric = 2,
    /// Invalid experiment configuration.
    Config = 3,
    /// Filesystem failure.
    Io = 4,
    /// Null pointer or invalid UTF-8 from the caller.
    BadPointer = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn fail(err: &Error) -> PinnStatus {
    set_error(&err.to_string());
    match err {
        Error::Structural(_) => PinnStatus::Structural,
        Error::Numeric(_) => PinnStatus::Numeric,
        Error::Config(_) => PinnStatus::Config,
        Error::Io(_) => PinnStatus::Io,
    }
}

fn bad_pointer(what: &str) -> PinnStatus {
    set_error(&format!("null or invalid pointer: {what}"));
    PinnStatus::BadPointer
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes (or be null to query the length).
#[no_mangle]
pub unsafe extern "C" fn pinn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            // always NUL-terminate
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn pinn_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Exact Burgers solution via Cole–Hopf quadrature.
///
/// # Safety
/// `out` must be a valid pointer to an f64.
#[no_mangle]
pub unsafe extern "C" fn pinn_burgers_exact(
    t: f64,
    x: f64,
    nu: f64,
    out: *mut f64,
) -> PinnStatus {
    if out.is_null() {
        return bad_pointer("out");
    }
    if !(nu > 0.0) || !t.is_finite() || !x.is_finite() {
        set_error("burgers_exact needs finite t, x and nu > 0");
        return PinnStatus::Structural;
    }
    *out = oracle::burgers_exact(t, x, nu);
    PinnStatus::Ok
}

/// Stage count from the truncation-error balance `q = ½ log ε / log Δt`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pinn_choose_q(eps: f64, dt: f64, out: *mut usize) -> PinnStatus {
    if out.is_null() {
        return bad_pointer("out");
    }
    match irk::choose_q(eps, dt) {
        Ok(q) => {
            *out = q;
            PinnStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Opaque Gauss–Legendre Butcher tableau.
pub struct PinnTableau(irk::ButcherTableau);

/// Build the q-stage Gauss–Legendre tableau.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be freed with
/// [`pinn_tableau_free`].
#[no_mangle]
pub unsafe extern "C" fn pinn_tableau_new(q: usize, out: *mut *mut PinnTableau) -> PinnStatus {
    if out.is_null() {
        return bad_pointer("out");
    }
    match irk::gauss_legendre(q) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(PinnTableau(t)));
            PinnStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Stage count of the tableau (0 for a null handle).
///
/// # Safety
/// `t` must be null or a live tableau handle.
#[no_mangle]
pub unsafe extern "C" fn pinn_tableau_q(t: *const PinnTableau) -> usize {
    t.as_ref().map_or(0, |t| t.0.q)
}

/// Copy the tableau into caller-provided arrays: `a` (`q*q`, row-major),
/// `b` and `c` (`q`). Null destinations are skipped.
///
/// # Safety
/// Non-null destinations must hold the stated number of f64s.
#[no_mangle]
pub unsafe extern "C" fn pinn_tableau_coefficients(
    t: *const PinnTableau,
    a: *mut f64,
    b: *mut f64,
    c: *mut f64,
) -> PinnStatus {
    let Some(t) = t.as_ref() else {
        return bad_pointer("tableau");
    };
    let q = t.0.q;
    if !a.is_null() {
        ptr::copy_nonoverlapping(t.0.a.as_ptr(), a, q * q);
    }
    if !b.is_null() {
        ptr::copy_nonoverlapping(t.0.b.as_ptr(), b, q);
    }
    if !c.is_null() {
        ptr::copy_nonoverlapping(t.0.c.as_ptr(), c, q);
    }
    PinnStatus::Ok
}

/// Release a tableau handle.
///
/// # Safety
/// `t` must be null or a handle from [`pinn_tableau_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_tableau_free(t: *mut PinnTableau) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Opaque trained model: architecture plus parameters, as stored in a
/// checkpoint file.
pub struct PinnModel {
    network: Network,
    params: Vec<f64>,
    compiled: autodiff::Compiled,
}

fn compile_model(network: Network, params: Vec<f64>) -> PinnModel {
    let mut g = autodiff::Graph::new();
    let inputs: Vec<_> = (0..network.arch.input_dim() as u32).map(|s| g.input(s)).collect();
    let outs = network.build(&mut g, &inputs).expect("checkpoint network");
    let compiled = autodiff::Compiled::new(&g, &outs);
    PinnModel { network, params, compiled }
}

/// Load a model from a checkpoint file written by the `pinn` CLI.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` a valid pointer. The
/// handle must be freed with [`pinn_model_free`].
#[no_mangle]
pub unsafe extern "C" fn pinn_model_load(
    path: *const c_char,
    out: *mut *mut PinnModel,
) -> PinnStatus {
    if path.is_null() || out.is_null() {
        return bad_pointer("path/out");
    }
    let Ok(path) = CStr::from_ptr(path).to_str() else {
        return bad_pointer("path utf-8");
    };
    match harness::load_checkpoint(Path::new(path)) {
        Ok((network, params)) => {
            *out = Box::into_raw(Box::new(compile_model(network, params)));
            PinnStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Input dimension of the model (2 for continuous-time networks, 1 for
/// stage networks). Returns 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn pinn_model_input_dim(m: *const PinnModel) -> usize {
    m.as_ref().map_or(0, |m| m.network.arch.input_dim())
}

/// Output dimension of the model.
///
/// # Safety
/// `m` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn pinn_model_output_dim(m: *const PinnModel) -> usize {
    m.as_ref().map_or(0, |m| m.network.arch.output_dim())
}

/// Evaluate the model at one point: reads `n_inputs` coordinates, writes
/// `n_outputs` values.
///
/// # Safety
/// `inputs` and `outputs` must hold the stated counts.
#[no_mangle]
pub unsafe extern "C" fn pinn_model_eval(
    m: *const PinnModel,
    inputs: *const f64,
    n_inputs: usize,
    outputs: *mut f64,
    n_outputs: usize,
) -> PinnStatus {
    let Some(m) = m.as_ref() else {
        return bad_pointer("model");
    };
    if inputs.is_null() || outputs.is_null() {
        return bad_pointer("inputs/outputs");
    }
    if n_inputs != m.network.arch.input_dim() || n_outputs != m.network.arch.output_dim() {
        set_error(&format!(
            "model takes {} inputs and {} outputs, got {n_inputs}/{n_outputs}",
            m.network.arch.input_dim(),
            m.network.arch.output_dim()
        ));
        return PinnStatus::Structural;
    }
    let pts = std::slice::from_raw_parts(inputs, n_inputs);
    let vals = m.compiled.eval_points(&m.params, pts, n_inputs);
    ptr::copy_nonoverlapping(vals.as_ptr(), outputs, n_outputs);
    PinnStatus::Ok
}

/// Release a model handle.
///
/// # Safety
/// `m` must be null or a handle from [`pinn_model_load`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_model_free(m: *mut PinnModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Run a full experiment from a TOML configuration string and return the
/// report as a JSON string (free it with [`pinn_string_free`]). This is the
/// same path as the CLI run subcommands and may train for a long time.
///
/// # Safety
/// `config_toml` must be NUL-terminated UTF-8; `report_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pinn_run_toml(
    config_toml: *const c_char,
    report_json: *mut *mut c_char,
) -> PinnStatus {
    if config_toml.is_null() || report_json.is_null() {
        return bad_pointer("config/report");
    }
    let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
        return bad_pointer("config utf-8");
    };
    let cfg = match ExperimentConfig::from_toml_str(text) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match harness::run(&cfg) {
        Ok(out) => match serde_json::to_string_pretty(&out.report) {
            Ok(json) => {
                let sanitized: String = json.chars().filter(|&c| c != '\0').collect();
                *report_json = CString::new(sanitized).unwrap().into_raw();
                PinnStatus::Ok
            }
            Err(e) => {
                set_error(&format!("report serialization: {e}"));
                PinnStatus::Structural
            }
        },
        Err(e) => fail(&e),
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pinn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn version_is_a_c_string() {
        let v = unsafe { CStr::from_ptr(pinn_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn burgers_exact_round_trips_through_the_abi() {
        let mut out = 0.0;
        let st = unsafe { pinn_burgers_exact(0.0, 0.3, 0.01 / std::f64::consts::PI, &mut out) };
        assert_eq!(st, PinnStatus::Ok);
        assert!((out - (-(std::f64::consts::PI * 0.3).sin())).abs() <= 1e-15);
        let st = unsafe { pinn_burgers_exact(0.0, 0.3, -1.0, &mut out) };
        assert_eq!(st, PinnStatus::Structural);
        let mut buf = [0 as c_char; 128];
        let n = unsafe { pinn_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 0);
    }

    #[test]
    fn tableau_handles_expose_coefficients() {
        let mut t: *mut PinnTableau = ptr::null_mut();
        assert_eq!(unsafe { pinn_tableau_new(2, &mut t) }, PinnStatus::Ok);
        assert_eq!(unsafe { pinn_tableau_q(t) }, 2);
        let mut a = [0.0; 4];
        let mut b = [0.0; 2];
        let mut c = [0.0; 2];
        let st = unsafe {
            pinn_tableau_coefficients(t, a.as_mut_ptr(), b.as_mut_ptr(), c.as_mut_ptr())
        };
        assert_eq!(st, PinnStatus::Ok);
        assert!((a[0] - 0.25).abs() <= 1e-12);
        assert!((b[0] - 0.5).abs() <= 1e-12);
        let s6 = 3.0_f64.sqrt() / 6.0;
        assert!((c[0] - (0.5 - s6)).abs() <= 1e-12);
        unsafe { pinn_tableau_free(t) };
        // invalid stage counts surface as structural errors
        assert_eq!(unsafe { pinn_tableau_new(0, &mut t) }, PinnStatus::Structural);
    }

    #[test]
    fn choose_q_matches_the_library() {
        let mut q = 0usize;
        assert_eq!(unsafe { pinn_choose_q(2.220446e-16, 0.8, &mut q) }, PinnStatus::Ok);
        assert_eq!(q, 81);
        assert_eq!(unsafe { pinn_choose_q(2.220446e-16, 1.5, &mut q) }, PinnStatus::Structural);
    }

    #[test]
    fn model_load_eval_matches_the_checkpointed_network() {
        use pinn::network::Architecture;
        let dir = std::env::temp_dir().join("pinn-ffi-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.ckpt");
        let net = Network::new(Architecture::new(vec![2, 9, 3]).unwrap(), 0);
        let params = net.init(7);
        harness::save_checkpoint(&net, &params, &path).unwrap();

        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut m: *mut PinnModel = ptr::null_mut();
        assert_eq!(unsafe { pinn_model_load(cpath.as_ptr(), &mut m) }, PinnStatus::Ok);
        assert_eq!(unsafe { pinn_model_input_dim(m) }, 2);
        assert_eq!(unsafe { pinn_model_output_dim(m) }, 3);
        let inputs = [0.4, -0.2];
        let mut outputs = [0.0; 3];
        let st = unsafe { pinn_model_eval(m, inputs.as_ptr(), 2, outputs.as_mut_ptr(), 3) };
        assert_eq!(st, PinnStatus::Ok);

        let mut g = autodiff::Graph::new();
        let t = g.input(0);
        let x = g.input(1);
        let outs = net.build(&mut g, &[t, x]).unwrap();
        for (k, &o) in outs.iter().enumerate() {
            let want = g.eval(o, &params, &inputs).unwrap();
            assert_eq!(outputs[k].to_bits(), want.to_bits());
        }
        // arity mismatch is structural
        let st = unsafe { pinn_model_eval(m, inputs.as_ptr(), 1, outputs.as_mut_ptr(), 3) };
        assert_eq!(st, PinnStatus::Structural);
        unsafe { pinn_model_free(m) };
    }

    #[test]
    fn run_toml_produces_a_report() {
        let cfg = CString::new(
            "mode = \"solve_ct\"\n\
             [architecture]\nhidden_layers = 1\nwidth = 6\n\
             [data]\nn_u = 10\nn_f = 20\n\
             [optimizer]\nmax_iterations = 5\n\
             [eval]\nnt = 4\nnx = 8\n",
        )
        .unwrap();
        let mut json: *mut c_char = ptr::null_mut();
        let st = unsafe { pinn_run_toml(cfg.as_ptr(), &mut json) };
        assert_eq!(st, PinnStatus::Ok);
        let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
        assert!(text.contains("rel_l2"));
        assert!(text.contains("\"generator\": \"chacha8\""));
        unsafe { pinn_string_free(json) };
        // bad config maps to the config status
        let bad = CString::new("mode = \"solve_ct\"\nbogus = 1").unwrap();
        let st = unsafe { pinn_run_toml(bad.as_ptr(), &mut json) };
        assert_eq!(st, PinnStatus::Config);
    }
}
