//! RBF-kernel support vector machines: SMO binary training and one-vs-one
//! multiclass voting.

mod ovo;
mod smo;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ovo::{fit_ovo, OvoSvm, PairMachine};
pub use smo::{smo_train, BinarySvm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint (penalty) on the dual multipliers.
    pub c: f64,
    /// Resolved, strictly positive kernel width; see [`resolve_gamma`].
    pub gamma: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::arg(format!(
                "SVM C must be positive, got {}",
                self.c
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::arg(format!(
                "SVM gamma must be positive, got {}",
                self.gamma
            )));
        }
        // also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tol > 0.0) {
            return Err(Error::arg("SVM tolerance must be positive"));
        }
        Ok(())
    }
}

/// Positive sampled gammas pass through; zero or negative ones become
/// `1 / n_features`.
pub fn resolve_gamma(gamma_raw: f64, n_features: usize) -> Result<f64> {
    if n_features == 0 {
        return Err(Error::arg("cannot resolve gamma for zero features"));
    }
    Ok(if gamma_raw > 0.0 {
        gamma_raw
    } else {
        1.0 / n_features as f64
    })
}

/// Gaussian kernel `exp(-gamma * |x - z|^2)`.
pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}
