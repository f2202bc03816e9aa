//! Report metrics.

use crate::error::{Error, Result};

/// `‖pred − exact‖₂ / ‖exact‖₂` over flattened values.
pub fn relative_l2(pred: &[f64], exact: &[f64]) -> Result<f64> {
    if pred.len() != exact.len() {
        return Err(Error::structural(format!(
            "length mismatch: {} vs {}",
            pred.len(),
            exact.len()
        )));
    }
    let den: f64 = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::structural("reference vector has zero norm"));
    }
    let num: f64 = pred
        .iter()
        .zip(exact)
        .map(|(p, e)| (p - e) * (p - e))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

/// `100·|estimate − truth| / |truth|`.
pub fn percent_error(estimate: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::structural("percent error against zero truth"));
    }
    Ok(100.0 * (estimate - truth).abs() / truth.abs())
}
