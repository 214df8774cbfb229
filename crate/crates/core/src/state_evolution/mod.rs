//! The scalar MSE map and the dynamics it generates.

mod prior;

pub use prior::{PriorPart, PriorShape, SignalPrior};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{self, tail_bracket};
use crate::optimize::{scan_golden_max, GOLDEN_TOL, SCAN_MAX, SCAN_STEP};
use crate::thresholds::{scalar_risk, Case};

/// Orbits below this fraction of their start count as converged.
pub const ORBIT_TOL: f64 = 1e-10;
/// Default orbit length for classification.
pub const ORBIT_STEPS: usize = 10_000;
/// Points in the log grid used by [`classify_region`].
pub const REGION_GRID: usize = 400;
/// Smallest grid point, relative to `E X^2`.
pub const REGION_GRID_FLOOR: f64 = 1e-12;

/// Everything the MSE map depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct SEParams {
    pub case: Case,
    pub delta: f64,
    pub rho: f64,
    /// Threshold control in state units; ignored for the box case.
    pub lambda: f64,
    pub prior: SignalPrior,
}

impl SEParams {
    /// Parameters with the canonical prior of nonzero fraction `rho * delta`.
    pub fn new(case: Case, delta: f64, rho: f64, lambda: f64, shape: PriorShape) -> Result<Self> {
        check_ratios(delta, rho)?;
        let prior = SignalPrior::canonical(case, (rho * delta).min(1.0), shape)?;
        Self::with_prior(delta, rho, lambda, prior)
    }

    pub fn with_prior(delta: f64, rho: f64, lambda: f64, prior: SignalPrior) -> Result<Self> {
        check_ratios(delta, rho)?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda={lambda} must be finite and >= 0")));
        }
        Ok(Self { case: prior.case(), delta, rho, lambda, prior })
    }

    /// Threshold in units of the effective noise sd.
    pub fn z(&self) -> f64 {
        self.lambda * self.delta.sqrt()
    }

    /// `E X^2`, the default starting state.
    pub fn second_moment(&self) -> f64 {
        self.prior.second_moment()
    }
}

fn check_ratios(delta: f64, rho: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta={delta} outside (0,1]")));
    }
    if !(rho >= 0.0 && rho <= 1.0 / delta) {
        return Err(Error::InvalidParameter(format!("rho={rho} outside [0, 1/delta]")));
    }
    Ok(())
}

/// The MSE map `sigma^2 -> E[eta(X + (sigma/sqrt(delta)) Z; lambda sigma) - X]^2`.
pub fn psi(sigma2: f64, params: &SEParams) -> f64 {
    if sigma2 <= 0.0 {
        return 0.0;
    }
    let tau = (sigma2 / params.delta).sqrt();
    let z = params.z();
    let theta = z * tau;
    let features = [0.0, theta, -theta, 1.0, -1.0];
    params.prior.expect(&features, tau, |x| scalar_risk(x, tau, z, params.case))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// The orbit collapses to zero.
    I,
    /// A nonzero fixed point blocks convergence.
    II,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::I => "I",
            Region::II => "II",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SEOrbit {
    /// `sigma^2_0, ..., sigma^2_T`.
    pub values: Vec<f64>,
    pub region: Region,
}

/// Iterate the MSE map `steps` times from `sigma2_0`.
pub fn se_orbit(params: &SEParams, sigma2_0: f64, steps: usize) -> SEOrbit {
    let mut values = Vec::with_capacity(steps + 1);
    values.push(sigma2_0.max(0.0));
    let mut monotone = true;
    for _ in 0..steps {
        let prev = *values.last().unwrap();
        let next = if prev > 0.0 { psi(prev, params) } else { 0.0 };
        monotone &= next <= prev;
        values.push(next);
    }
    let last = *values.last().unwrap();
    let region = if monotone && last <= ORBIT_TOL * values[0] { Region::I } else { Region::II };
    SEOrbit { values, region }
}

/// `d Psi / d sigma^2` at zero. Depends only on `(delta, rho, lambda, case)`.
pub fn dpsi_at_zero(delta: f64, rho: f64, lambda: f64, case: Case) -> f64 {
    let eps = rho * delta;
    match case.kappa() {
        None => (1.0 + eps) / (2.0 * delta),
        Some(kappa) => {
            let z = lambda * delta.sqrt();
            let a = 1.0 / delta + lambda * lambda;
            a * eps + a * (1.0 - eps) * kappa * gauss::sf(z)
                - lambda / delta.sqrt() * (1.0 - eps) * kappa * gauss::pdf(z)
        }
    }
}

/// Ratio at which the origin turns from stable to unstable, i.e.
/// `dpsi_at_zero(delta, rho, lambda) = 1`.
pub fn rho_ls(delta: f64, lambda: f64, case: Case) -> f64 {
    match case.kappa() {
        None => (2.0 - 1.0 / delta).max(0.0),
        Some(kappa) => ls_objective(lambda * delta.sqrt(), delta, kappa).max(0.0),
    }
}

fn ls_objective(z: f64, delta: f64, kappa: f64) -> f64 {
    let b = tail_bracket(z);
    let num = 1.0 - kappa / delta * b;
    let den = 1.0 + z * z - kappa * b;
    if den > 0.0 {
        return num / den;
    }
    // Only reachable at z = 0 with kappa = 2, where the ratio tends to 1
    // from above the diagonal delta = 1 and diverges downwards below it.
    if delta >= 1.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Optimally tuned boundary at one `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSe {
    pub delta: f64,
    pub rho: f64,
    /// Maximising threshold in sd units; absent for the box case.
    pub z_star: Option<f64>,
    /// `z_star / sqrt(delta)`.
    pub lambda_opt: Option<f64>,
}

/// Maximise the local-stability ratio over the threshold.
pub fn rho_se(delta: f64, case: Case) -> RhoSe {
    match case.kappa() {
        None => RhoSe { delta, rho: (2.0 - 1.0 / delta).max(0.0), z_star: None, lambda_opt: None },
        Some(kappa) => {
            let (z, rho) = scan_golden_max(|z| ls_objective(z, delta, kappa), 0.0, SCAN_MAX, SCAN_STEP, GOLDEN_TOL);
            RhoSe { delta, rho: rho.max(0.0), z_star: Some(z), lambda_opt: Some(z / delta.sqrt()) }
        }
    }
}

/// Optimal threshold control `lambda_chi(delta)`.
pub fn lambda_opt(delta: f64, case: Case) -> Option<f64> {
    rho_se(delta, case).lambda_opt
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub region: Region,
    /// First grid state with `Psi(s) >= s`.
    pub witness: Option<f64>,
    /// `Psi(s) - s` at the witness.
    pub gap: Option<f64>,
}

/// Decide whether `Psi(s) < s` on all of `(0, E X^2]`, checked on a log grid.
pub fn classify_region(params: &SEParams) -> Classification {
    let top = params.second_moment();
    if top <= 0.0 {
        return Classification { region: Region::I, witness: None, gap: None };
    }
    let lo = (REGION_GRID_FLOOR * top).ln();
    let hi = top.ln();
    for i in 0..REGION_GRID {
        let s = (lo + (hi - lo) * i as f64 / (REGION_GRID - 1) as f64).exp();
        let gap = psi(s, params) - s;
        if gap.is_nan() || gap >= 0.0 {
            return Classification { region: Region::II, witness: Some(s), gap: Some(gap) };
        }
    }
    Classification { region: Region::I, witness: None, gap: None }
}

/// Predicted per-coordinate statistics of the estimate built at state `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FormalObservables {
    pub mse: f64,
    /// Absent when the prior has no zeros.
    pub msez: Option<f64>,
    /// Absent when the prior is all zeros.
    pub msenz: Option<f64>,
    pub mdr: Option<f64>,
    pub far: Option<f64>,
}

pub fn formal_observables(sigma: f64, params: &SEParams) -> FormalObservables {
    let prior = &params.prior;
    let has_zeros = prior.zero_mass() > 0.0;
    let has_nonzeros = prior.zero_mass() < 1.0;
    let defined = |flag: bool, v: f64| if flag { Some(v) } else { None };
    if sigma <= 0.0 {
        return FormalObservables {
            mse: 0.0,
            msez: defined(has_zeros, 0.0),
            msenz: defined(has_nonzeros, 0.0),
            mdr: defined(has_nonzeros, 0.0),
            far: defined(has_zeros, 0.0),
        };
    }
    let case = params.case;
    let tau = sigma / params.delta.sqrt();
    let z = params.z();
    let theta = z * tau;
    let features = [0.0, theta, -theta, 1.0, -1.0];
    let killed = |x: f64| match case {
        Case::Signed => gauss::interval((-theta - x) / tau, (theta - x) / tau),
        Case::Plus => gauss::cdf((theta - x) / tau),
        Case::Box => 0.0,
    };
    let far = match case {
        Case::Signed => 2.0 * gauss::sf(z),
        Case::Plus => gauss::sf(z),
        Case::Box => 1.0,
    };
    FormalObservables {
        mse: psi(sigma * sigma, params),
        msez: defined(has_zeros, scalar_risk(0.0, tau, z, case)),
        msenz: prior.expect_nonzero(&features, tau, |x| scalar_risk(x, tau, z, case)),
        mdr: prior.expect_nonzero(&features, tau, killed),
        far: defined(has_zeros, far),
    }
}
