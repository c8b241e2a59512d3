use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{NodeId, Point2};

/// `sqrt(Σᵢ ‖x̂ᵢ − xᵢ‖² / n)` over a common key set.
pub fn rmse(estimates: &BTreeMap<NodeId, Point2>, truth: &BTreeMap<NodeId, Point2>) -> Result<f64> {
    if estimates.len() != truth.len() || estimates.keys().ne(truth.keys()) {
        return Err(Error::MismatchedKeys);
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = estimates.iter().map(|(id, p)| p.dist_sq(truth[id])).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

/// Sample mean and standard deviation (n − 1 denominator; 0 for one value).
pub fn mean_stdev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
