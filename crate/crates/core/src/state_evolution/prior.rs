//! Signal priors for the MSE map.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss;
use crate::operators::Amplitude;
use crate::quadrature::{gauss_legendre, graded_integral, Rule};
use crate::thresholds::Case;

const LEGENDRE_ORDER: usize = 16;
/// Gaussian parts are truncated at this many standard deviations.
const GAUSS_SPAN: f64 = 12.0;

fn legendre() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(LEGENDRE_ORDER))
}

/// Law of the nonzero (box: interior) amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorShape {
    Unit,
    Uniform,
    Gauss,
}

impl TryFrom<Amplitude> for PriorShape {
    type Error = Error;

    fn try_from(a: Amplitude) -> Result<Self> {
        match a {
            Amplitude::Unit => Ok(PriorShape::Unit),
            Amplitude::Uniform => Ok(PriorShape::Uniform),
            Amplitude::Gauss => Ok(PriorShape::Gauss),
            Amplitude::Cauchy => Err(Error::InvalidPrior("cauchy amplitudes have no second moment".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorPart {
    Atom {
        value: f64,
        mass: f64,
    },
    /// Uniform density on `[lo, hi]`.
    Uniform {
        lo: f64,
        hi: f64,
        mass: f64,
    },
    /// Centred normal with standard deviation `sd`, folded onto `[0, inf)` if `folded`.
    Gauss {
        sd: f64,
        folded: bool,
        mass: f64,
    },
}

impl PriorPart {
    pub fn mass(&self) -> f64 {
        match *self {
            PriorPart::Atom { mass, .. } | PriorPart::Uniform { mass, .. } | PriorPart::Gauss { mass, .. } => mass,
        }
    }

    fn is_zero_atom(&self) -> bool {
        matches!(*self, PriorPart::Atom { value, .. } if value == 0.0)
    }

    fn second_moment(&self) -> f64 {
        match *self {
            PriorPart::Atom { value, mass } => mass * value * value,
            PriorPart::Uniform { lo, hi, mass } => mass * (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo)),
            PriorPart::Gauss { sd, mass, .. } => mass * sd * sd,
        }
    }

    /// `mass * E f(X)` over this part.
    fn integrate(&self, features: &[f64], scale: f64, f: &impl Fn(f64) -> f64) -> f64 {
        match *self {
            PriorPart::Atom { value, mass } => mass * f(value),
            PriorPart::Uniform { lo, hi, mass } => {
                mass / (hi - lo) * graded_integral(legendre(), lo, hi, features, scale, f)
            }
            PriorPart::Gauss { sd, folded, mass } => {
                let (lo, fold) = if folded { (0.0, 2.0) } else { (-GAUSS_SPAN * sd, 1.0) };
                let mut cuts = features.to_vec();
                cuts.push(0.0);
                let density = |x: f64| fold * gauss::pdf(x / sd) / sd * f(x);
                mass * graded_integral(legendre(), lo, GAUSS_SPAN * sd, &cuts, scale.max(1e-3 * sd), density)
            }
        }
    }
}

/// Distribution of a signal entry: a mixture of atoms and smooth parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalPrior {
    case: Case,
    epsilon: f64,
    parts: Vec<PriorPart>,
}

impl SignalPrior {
    /// Standard sparse prior with nonzero fraction `epsilon`.
    ///
    /// For the box case `epsilon` is the interior mass and the rest sits
    /// evenly on `±1`.
    pub fn canonical(case: Case, epsilon: f64, shape: PriorShape) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidPrior(format!("epsilon={epsilon} outside [0,1]")));
        }
        let e = epsilon;
        let mut parts = Vec::new();
        match case {
            Case::Plus | Case::Signed => {
                parts.push(PriorPart::Atom { value: 0.0, mass: 1.0 - e });
                match (case, shape) {
                    (Case::Plus, PriorShape::Unit) => parts.push(PriorPart::Atom { value: 1.0, mass: e }),
                    (Case::Plus, PriorShape::Uniform) => parts.push(PriorPart::Uniform { lo: 0.0, hi: 1.0, mass: e }),
                    (Case::Plus, PriorShape::Gauss) => parts.push(PriorPart::Gauss { sd: 1.0, folded: true, mass: e }),
                    (_, PriorShape::Unit) => {
                        parts.push(PriorPart::Atom { value: 1.0, mass: e / 2.0 });
                        parts.push(PriorPart::Atom { value: -1.0, mass: e / 2.0 });
                    }
                    (_, PriorShape::Uniform) => parts.push(PriorPart::Uniform { lo: -1.0, hi: 1.0, mass: e }),
                    (_, PriorShape::Gauss) => parts.push(PriorPart::Gauss { sd: 1.0, folded: false, mass: e }),
                }
            }
            Case::Box => {
                parts.push(PriorPart::Atom { value: 1.0, mass: (1.0 - e) / 2.0 });
                parts.push(PriorPart::Atom { value: -1.0, mass: (1.0 - e) / 2.0 });
                match shape {
                    PriorShape::Unit => parts.push(PriorPart::Atom { value: 0.0, mass: e }),
                    PriorShape::Uniform => parts.push(PriorPart::Uniform { lo: -1.0, hi: 1.0, mass: e }),
                    PriorShape::Gauss => {
                        return Err(Error::InvalidPrior("gaussian interior is not supported on [-1,1]".into()))
                    }
                }
            }
        }
        parts.retain(|p| p.mass() > 0.0);
        Self::from_parts(case, parts)
    }

    /// Prior made of point masses `(value, probability)`.
    pub fn atomic(case: Case, atoms: &[(f64, f64)]) -> Result<Self> {
        let parts = atoms.iter().map(|&(value, mass)| PriorPart::Atom { value, mass }).collect();
        Self::from_parts(case, parts)
    }

    /// Validate and wrap arbitrary parts.
    pub fn from_parts(case: Case, parts: Vec<PriorPart>) -> Result<Self> {
        let mut total = 0.0;
        for p in &parts {
            let m = p.mass();
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidPrior(format!("bad mass {m}")));
            }
            match *p {
                PriorPart::Atom { value, .. } if !value.is_finite() => {
                    return Err(Error::InvalidPrior("non-finite atom".into()))
                }
                PriorPart::Uniform { lo, hi, .. } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return Err(Error::InvalidPrior(format!("bad uniform range [{lo},{hi}]")))
                }
                PriorPart::Gauss { sd, .. } if !(sd.is_finite() && sd > 0.0) => {
                    return Err(Error::InvalidPrior(format!("bad sd {sd}")))
                }
                _ => {}
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidPrior(format!("masses sum to {total}")));
        }
        let epsilon = match case {
            Case::Plus | Case::Signed => {
                let negative = parts.iter().any(|p| match *p {
                    PriorPart::Atom { value, .. } => value < 0.0,
                    PriorPart::Uniform { lo, .. } => lo < 0.0,
                    PriorPart::Gauss { folded, .. } => !folded,
                });
                if case == Case::Plus && negative {
                    return Err(Error::InvalidPrior("nonnegative case with negative support".into()));
                }
                parts.iter().filter(|p| !p.is_zero_atom()).map(PriorPart::mass).sum()
            }
            Case::Box => {
                let mut interior = 0.0;
                for p in &parts {
                    match *p {
                        PriorPart::Atom { value, mass } => {
                            if value.abs() > 1.0 {
                                return Err(Error::InvalidPrior(format!("atom {value} outside [-1,1]")));
                            }
                            if value.abs() < 1.0 {
                                interior += mass;
                            }
                        }
                        PriorPart::Uniform { lo, hi, mass } if lo >= -1.0 && hi <= 1.0 => interior += mass,
                        _ => return Err(Error::InvalidPrior("box prior must live on [-1,1]".into())),
                    }
                }
                interior
            }
        };
        let prior = Self { case, epsilon: epsilon.min(1.0), parts };
        if !prior.second_moment().is_finite() {
            return Err(Error::InvalidPrior("infinite second moment".into()));
        }
        Ok(prior)
    }

    pub fn case(&self) -> Case {
        self.case
    }

    /// Mass off zero (box: interior mass).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn parts(&self) -> &[PriorPart] {
        &self.parts
    }

    pub fn second_moment(&self) -> f64 {
        self.parts.iter().map(PriorPart::second_moment).sum()
    }

    /// Probability of an exact zero.
    pub fn zero_mass(&self) -> f64 {
        self.parts.iter().filter(|p| p.is_zero_atom()).map(PriorPart::mass).sum()
    }

    /// `E f(X)`. Smooth parts are integrated with panels graded towards
    /// `features` at resolution `scale`.
    pub fn expect(&self, features: &[f64], scale: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.parts.iter().map(|p| p.integrate(features, scale, &f)).sum()
    }

    /// `E[f(X) | X != 0]`, or `None` when the prior is all zeros.
    pub fn expect_nonzero(&self, features: &[f64], scale: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
        let mass: f64 = self.parts.iter().filter(|p| !p.is_zero_atom()).map(PriorPart::mass).sum();
        if mass <= 0.0 {
            return None;
        }
        let s: f64 = self.parts.iter().filter(|p| !p.is_zero_atom()).map(|p| p.integrate(features, scale, &f)).sum();
        Some(s / mass)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn canonical_moments() {
        let p = SignalPrior::canonical(Case::Signed, 0.2, PriorShape::Unit).unwrap();
        assert_relative_eq!(p.second_moment(), 0.2);
        assert_relative_eq!(p.epsilon(), 0.2);
        let p = SignalPrior::canonical(Case::Signed, 0.2, PriorShape::Uniform).unwrap();
        assert_relative_eq!(p.second_moment(), 0.2 / 3.0, max_relative = 1e-14);
        let q = p.expect(&[0.0], 1e-3, |x| x * x);
        assert_relative_eq!(q, 0.2 / 3.0, max_relative = 1e-12);
        let p = SignalPrior::canonical(Case::Plus, 0.3, PriorShape::Gauss).unwrap();
        assert_relative_eq!(p.expect(&[], 0.0, |x| x * x), 0.3, max_relative = 1e-12);
        let mean_abs = p.expect_nonzero(&[], 0.0, |x| x).unwrap();
        assert_relative_eq!(mean_abs, (2.0 / std::f64::consts::PI).sqrt(), max_relative = 1e-12);
        let b = SignalPrior::canonical(Case::Box, 0.4, PriorShape::Unit).unwrap();
        assert_relative_eq!(b.second_moment(), 0.6);
        assert_relative_eq!(b.epsilon(), 0.4);
    }

    #[test]
    fn gaussian_part_agrees_with_hermite_rule() {
        let rule = crate::quadrature::gauss_hermite(61);
        let f = |x: f64| (0.3 * x).cos() + x.powi(4);
        let want: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(2.0 * x)).sum();
        let p = SignalPrior::canonical(Case::Signed, 1.0, PriorShape::Gauss).unwrap();
        let scaled =
            SignalPrior::from_parts(Case::Signed, vec![PriorPart::Gauss { sd: 2.0, folded: false, mass: 1.0 }])
                .unwrap();
        assert_relative_eq!(scaled.expect(&[0.5], 0.01, f), want, max_relative = 1e-12);
        assert_relative_eq!(p.second_moment(), 1.0);
    }

    #[test]
    fn rejects_invalid_priors() {
        assert!(SignalPrior::atomic(Case::Signed, &[(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(SignalPrior::atomic(Case::Plus, &[(0.0, 0.5), (-1.0, 0.5)]).is_err());
        assert!(SignalPrior::atomic(Case::Box, &[(2.0, 1.0)]).is_err());
        assert!(SignalPrior::atomic(Case::Signed, &[(f64::INFINITY, 1.0)]).is_err());
        assert!(SignalPrior::canonical(Case::Box, 0.1, PriorShape::Gauss).is_err());
        assert!(matches!(PriorShape::try_from(Amplitude::Cauchy), Err(Error::InvalidPrior(_))));
    }
}
