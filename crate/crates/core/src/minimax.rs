//! Minimax soft-threshold risk and the contraction constants it implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::tail_bracket;
use crate::optimize::{bisect_boundary, scan_golden_min, GOLDEN_TOL, SCAN_MAX, SCAN_STEP};
use crate::state_evolution::rho_se;
use crate::thresholds::Case;

/// Largest unit-noise risk at threshold `z` over all priors with nonzero
/// fraction `epsilon`.
///
/// For the box case there is no threshold and the value is the
/// clipping analogue `(1 + epsilon) / 2`.
pub fn worst_case_mse(epsilon: f64, z: f64, case: Case) -> f64 {
    match case.kappa() {
        None => (1.0 + epsilon) / 2.0,
        Some(kappa) => epsilon * (1.0 + z * z) + (1.0 - epsilon) * kappa * tail_bracket(z),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimaxResult {
    pub epsilon: f64,
    pub case: Case,
    pub m_star: f64,
    /// Minimising threshold in sd units; absent for the box case.
    pub z_star: Option<f64>,
}

pub fn minimax_risk(epsilon: f64, case: Case) -> MinimaxResult {
    match case.kappa() {
        None => MinimaxResult { epsilon, case, m_star: worst_case_mse(epsilon, 0.0, case), z_star: None },
        Some(_) => {
            let (z, m) = scan_golden_min(|z| worst_case_mse(epsilon, z, case), 0.0, SCAN_MAX, SCAN_STEP, GOLDEN_TOL);
            MinimaxResult { epsilon, case, m_star: m, z_star: Some(z) }
        }
    }
}

/// `sup { rho : M*(rho delta) < delta }`, located by bisection.
pub fn rho_mm(delta: f64, case: Case) -> f64 {
    bisect_boundary(|rho| minimax_risk(rho * delta, case).m_star <= delta, 0.0, 1.0, 1e-13)
}

/// Per-iteration contraction factors of the worst-case MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRate {
    /// Factor at the `delta`-optimal threshold.
    pub omega_se: f64,
    /// Factor at the `rho`-specific minimax threshold.
    pub omega_mm: f64,
    /// `-ln omega_se`.
    pub b: f64,
}

/// Contraction factors `omega = M / delta` below the boundary, so that the
/// formal MSE obeys `sigma_t^2 <= omega^t E X^2`.
pub fn convergence_rate(delta: f64, rho: f64, case: Case) -> Result<ConvergenceRate> {
    let boundary = rho_se(delta, case);
    if !(rho >= 0.0 && rho < boundary.rho) {
        return Err(Error::NoContraction { rho, boundary: boundary.rho });
    }
    let eps = rho * delta;
    let m_se = worst_case_mse(eps, boundary.z_star.unwrap_or(0.0), case);
    let m_mm = minimax_risk(eps, case).m_star;
    let omega_se = m_se / delta;
    Ok(ConvergenceRate { omega_se, omega_mm: m_mm / delta, b: -omega_se.ln() })
}

/// Convert a state-unit threshold control to sd units.
pub fn sd_convert(lambda: f64, delta: f64) -> f64 {
    lambda * delta.sqrt()
}
