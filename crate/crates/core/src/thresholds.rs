//! Scalar threshold nonlinearities and their risk under Gaussian noise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;

/// The three canonical signal classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    /// Nonnegative sparse; positive-part soft threshold.
    #[serde(rename = "plus")]
    Plus,
    /// Signed sparse; soft threshold.
    #[serde(rename = "pm")]
    Signed,
    /// Entries in `[-1, 1]`, mostly at the corners; clipping.
    #[serde(rename = "box")]
    Box,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::Plus, Case::Signed, Case::Box];

    /// Number of tails a zero coordinate can leak through: 1 for `+`, 2 for `±`.
    /// The box case has no such constant.
    pub fn kappa(self) -> Option<f64> {
        match self {
            Case::Plus => Some(1.0),
            Case::Signed => Some(2.0),
            Case::Box => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Plus => "plus",
            Case::Signed => "pm",
            Case::Box => "box",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Case::Plus),
            "pm" | "±" | "signed" => Ok(Case::Signed),
            "box" => Ok(Case::Box),
            _ => Err(Error::InvalidParameter(format!("unknown case '{s}' (expected plus, pm or box)"))),
        }
    }
}

/// Threshold control `lambda` (state units) and RMSE state `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    pub lambda: f64,
    pub sigma: f64,
}

impl ThresholdParams {
    /// Applied threshold `lambda * sigma`.
    pub fn theta(&self) -> f64 {
        self.lambda * self.sigma
    }
}

/// Apply the nonlinearity of `case` at threshold `theta` (ignored for box).
#[inline]
pub fn eta(u: f64, theta: f64, case: Case) -> f64 {
    match case {
        Case::Plus => (u - theta).max(0.0),
        Case::Signed => {
            if u >= theta {
                u - theta
            } else if u <= -theta {
                u + theta
            } else {
                0.0
            }
        }
        Case::Box => u.clamp(-1.0, 1.0),
    }
}

/// Derivative of [`eta`] in `u`, as the indicator of the pass-through region
/// (closed at the kinks).
#[inline]
pub fn eta_prime(u: f64, theta: f64, case: Case) -> f64 {
    let pass = match case {
        Case::Plus => u >= theta,
        Case::Signed => u.abs() >= theta,
        Case::Box => (-1.0..=1.0).contains(&u),
    };
    if pass {
        1.0
    } else {
        0.0
    }
}

/// `E[(eta(x + tau Z; z tau) - x)^2]` for standard normal `Z`.
///
/// `z` is the threshold in noise standard deviations; the box case ignores it.
pub fn scalar_risk(x: f64, tau: f64, z: f64, case: Case) -> f64 {
    if tau <= 0.0 {
        let e = eta(x, 0.0, case) - x;
        return e * e;
    }
    match case {
        Case::Signed => tau * tau * soft_risk_unit(x / tau, z),
        Case::Plus => tau * tau * positive_risk_unit(x / tau, z),
        Case::Box => clip_risk(x, tau),
    }
}

/// Soft-threshold risk at signal `mu`, unit noise, threshold `z`.
fn soft_risk_unit(mu: f64, z: f64) -> f64 {
    let q = 1.0 + z * z;
    let upper = q * gauss::cdf(mu - z) - (z + mu) * gauss::pdf(z - mu);
    let lower = q * gauss::cdf(-z - mu) + (mu - z) * gauss::pdf(z + mu);
    let kill = mu * mu * gauss::interval(-z - mu, z - mu);
    (upper + lower + kill).max(0.0)
}

fn positive_risk_unit(mu: f64, z: f64) -> f64 {
    let q = 1.0 + z * z;
    let upper = q * gauss::cdf(mu - z) - (z + mu) * gauss::pdf(z - mu);
    (upper + mu * mu * gauss::cdf(z - mu)).max(0.0)
}

fn clip_risk(x: f64, tau: f64) -> f64 {
    let a = (-1.0 - x) / tau;
    let b = (1.0 - x) / tau;
    let inside = gauss::interval(a, b) + a * gauss::pdf(a) - b * gauss::pdf(b);
    let hi = (1.0 - x).powi(2) * gauss::sf(b);
    let lo = (1.0 + x).powi(2) * gauss::cdf(a);
    (tau * tau * inside + hi + lo).max(0.0)
}
