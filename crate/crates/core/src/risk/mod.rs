//! Expectile, UBSR and OCE risks of samples and finite-support laws.
//!
//! For a cost `X`:
//!
//! * the ν-expectile is the root `k` of `E[l_ν(X − k)] = 0`;
//! * the UBSR is `inf { k : E[l(X − k)] ≤ λ }`;
//! * the OCE is `inf_k k + E[l(X − k)]`, computed as `k* + E[l(X − k*)]`
//!   with `k*` the UBSR of `l'` at level 1.
//!
//! Empirical versions use the sample mean in place of the expectation.

mod root;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::loss::{parse_params, LossFn, LossKind};

pub(crate) use root::shortfall_root;
pub use root::MAX_BISECT_ITERS;

/// Default absolute tolerance on roots.
pub const DEFAULT_TOL: f64 = 1e-10;

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("tolerance {tol} must be positive")))
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("nu = {nu} must lie in (0, 1)")))
    }
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Argument("sample set is empty".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Argument(format!("non-finite sample {x}")));
    }
    Ok(())
}

fn min_max(samples: &[f64]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn sample_mean(samples: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    samples.iter().map(|&x| f(x)).sum::<f64>() / samples.len() as f64
}

/// Empirical ν-expectile of `samples`.
///
/// The residual is piecewise linear between order statistics, so the root
/// is solved exactly; its error is rounding only, well inside `tol`.
pub fn empirical_expectile(samples: &[f64], nu: f64, tol: f64) -> Result<f64> {
    check_samples(samples)?;
    exact_expectile(&DiscreteDist::empirical(samples)?, nu, tol)
}

/// ν-expectile of a finite-support law.
pub fn exact_expectile(dist: &DiscreteDist, nu: f64, tol: f64) -> Result<f64> {
    check_nu(nu)?;
    check_tol(tol)?;
    Ok(root::expectile_root(dist.atoms(), nu))
}

fn check_ubsr(loss: &LossFn, lambda: f64) -> Result<()> {
    if !loss.ubsr_eligible() {
        return Err(Error::Argument(format!(
            "loss {loss} is not usable for UBSR (needs a continuous nondecreasing loss)"
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::Argument(format!("lambda = {lambda} must be finite")));
    }
    Ok(())
}

/// Empirical UBSR `inf { k : (1/m) Σ l(xⱼ − k) ≤ λ }`.
///
/// Bisection returns the left end of the feasible set to within `tol`.
pub fn empirical_ubsr(samples: &[f64], loss: &LossFn, lambda: f64, tol: f64) -> Result<f64> {
    check_samples(samples)?;
    check_tol(tol)?;
    check_ubsr(loss, lambda)?;
    let (lo, hi) = min_max(samples);
    shortfall_root(lo - 1.0, hi + 1.0, lambda, tol, |k| {
        sample_mean(samples, |x| loss.eval(x - k))
    })
}

/// UBSR of a finite-support law.
pub fn exact_ubsr(dist: &DiscreteDist, loss: &LossFn, lambda: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    check_ubsr(loss, lambda)?;
    shortfall_root(dist.min() - 1.0, dist.max() + 1.0, lambda, tol, |k| {
        dist.expect(|x| loss.eval(x - k))
    })
}

fn check_oce(loss: &LossFn) -> Result<()> {
    if loss.oce_eligible() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "loss {loss} is not usable for OCE (needs convex, nondecreasing, l' crossing 1)"
        )))
    }
}

/// Empirical OCE; returns `(oce, k*)`.
pub fn empirical_oce(samples: &[f64], loss: &LossFn, tol: f64) -> Result<(f64, f64)> {
    check_samples(samples)?;
    check_tol(tol)?;
    check_oce(loss)?;
    let (lo, hi) = min_max(samples);
    let kstar = shortfall_root(lo - 1.0, hi + 1.0, 1.0, tol, |k| {
        sample_mean(samples, |x| loss.deriv(x - k))
    })?;
    Ok((
        kstar + sample_mean(samples, |x| loss.eval(x - kstar)),
        kstar,
    ))
}

/// OCE of a finite-support law; returns `(oce, k*)`.
pub fn exact_oce(dist: &DiscreteDist, loss: &LossFn, tol: f64) -> Result<(f64, f64)> {
    check_tol(tol)?;
    check_oce(loss)?;
    let kstar = shortfall_root(dist.min() - 1.0, dist.max() + 1.0, 1.0, tol, |k| {
        dist.expect(|x| loss.deriv(x - k))
    })?;
    Ok((kstar + dist.expect(|x| loss.eval(x - kstar)), kstar))
}

/// A risk measure with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    Expectile { nu: f64 },
    Ubsr { loss: LossFn, lambda: f64 },
    Oce { loss: LossFn },
}

/// A risk value with root diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub value: f64,
    /// Optimal split for OCE.
    pub kstar: Option<f64>,
    /// Identification residual at the root: `E l_ν(X − ξ)`, `E l(X − SR) − λ`
    /// or `E l'(X − k*) − 1`.
    pub residual: f64,
}

impl RiskSpec {
    pub fn expectile(nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Ok(Self::Expectile { nu })
    }

    /// UBSR with `loss` and threshold `lambda`.
    ///
    /// `lambda` must lie in the closure of the loss's range, otherwise no
    /// offset can satisfy (or violate) the constraint.
    pub fn ubsr(loss: LossFn, lambda: f64) -> Result<Self> {
        check_ubsr(&loss, lambda)?;
        let (inf, inf_attained) = loss.infimum();
        let (sup, sup_attained) = loss.supremum();
        let above = lambda > inf || (inf_attained && lambda == inf);
        let below = lambda < sup || (sup_attained && lambda == sup);
        if !(above && below) {
            return Err(Error::Argument(format!(
                "lambda = {lambda} lies outside the range of {loss}"
            )));
        }
        Ok(Self::Ubsr { loss, lambda })
    }

    pub fn oce(loss: LossFn) -> Result<Self> {
        check_oce(&loss)?;
        Ok(Self::Oce { loss })
    }

    /// Re-checks the invariants of a spec built from its public variants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Expectile { nu } => Self::expectile(nu).map(drop),
            Self::Ubsr { loss, lambda } => Self::ubsr(loss, lambda).map(drop),
            Self::Oce { loss } => Self::oce(loss).map(drop),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Expectile { .. } => "expectile",
            Self::Ubsr { .. } => "ubsr",
            Self::Oce { .. } => "oce",
        }
    }

    /// Entropic UBSR at λ = 1, which has a single-batch gradient estimator.
    pub fn entropic_beta(&self) -> Option<f64> {
        match *self {
            Self::Ubsr { loss, lambda: 1.0 } => match loss.kind() {
                LossKind::Entropic { beta } => Some(beta),
                _ => None,
            },
            _ => None,
        }
    }

    /// Whether the gradient estimator for this risk needs a second batch.
    pub fn is_double_sampled(&self) -> bool {
        !matches!(self, Self::Expectile { .. }) && self.entropic_beta().is_none()
    }

    /// Risk of the empirical measure of `samples`.
    pub fn empirical(&self, samples: &[f64], tol: f64) -> Result<f64> {
        match *self {
            Self::Expectile { nu } => empirical_expectile(samples, nu, tol),
            Self::Ubsr { loss, lambda } => empirical_ubsr(samples, &loss, lambda, tol),
            Self::Oce { loss } => empirical_oce(samples, &loss, tol).map(|r| r.0),
        }
    }

    /// Risk of a finite-support law.
    pub fn exact(&self, dist: &DiscreteDist, tol: f64) -> Result<f64> {
        match *self {
            Self::Expectile { nu } => exact_expectile(dist, nu, tol),
            Self::Ubsr { loss, lambda } => exact_ubsr(dist, &loss, lambda, tol),
            Self::Oce { loss } => exact_oce(dist, &loss, tol).map(|r| r.0),
        }
    }

    /// Risk of a finite-support law with its identification residual.
    pub fn evaluate(&self, dist: &DiscreteDist, tol: f64) -> Result<RiskValue> {
        Ok(match *self {
            Self::Expectile { nu } => {
                let value = exact_expectile(dist, nu, tol)?;
                let l = crate::loss::expectile_l(nu)?;
                RiskValue {
                    value,
                    kstar: None,
                    residual: dist.expect(|x| l.eval(x - value)),
                }
            }
            Self::Ubsr { loss, lambda } => {
                let value = exact_ubsr(dist, &loss, lambda, tol)?;
                RiskValue {
                    value,
                    kstar: None,
                    residual: dist.expect(|x| loss.eval(x - value)) - lambda,
                }
            }
            Self::Oce { loss } => {
                let (value, kstar) = exact_oce(dist, &loss, tol)?;
                RiskValue {
                    value,
                    kstar: Some(kstar),
                    residual: dist.expect(|x| loss.deriv(x - kstar)) - 1.0,
                }
            }
        })
    }
}

impl FromStr for RiskSpec {
    type Err = Error;

    /// Grammar: `expectile:nu=<v>`, `ubsr:loss=<loss>[:<params>],lambda=<v>`
    /// and `oce:loss=<loss>[:<params>]`, where loss parameters and `lambda`
    /// share one comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("risk spec '{s}' has no parameters")))?;
        match family {
            "expectile" => {
                let params = parse_params(rest)?;
                match params.as_slice() {
                    [(k, nu)] if k == "nu" => Self::expectile(*nu),
                    _ => Err(Error::Parse(format!(
                        "expectile takes exactly 'nu', found '{rest}'"
                    ))),
                }
            }
            "ubsr" | "oce" => {
                let body = rest.strip_prefix("loss=").ok_or_else(|| {
                    Error::Parse(format!(
                        "expected 'loss=' after '{family}:', found '{rest}'"
                    ))
                })?;
                let name_end = body.find([':', ',']).unwrap_or(body.len());
                let name = &body[..name_end];
                let params = parse_params(body.get(name_end + 1..).unwrap_or(""))?;
                let (lambda, loss_params): (Vec<_>, Vec<_>) =
                    params.into_iter().partition(|(k, _)| k == "lambda");
                let loss = LossFn::from_parts(name, &loss_params)?;
                match (family, lambda.as_slice()) {
                    ("ubsr", [(_, l)]) => Self::ubsr(loss, *l),
                    ("ubsr", []) => Err(Error::Parse("ubsr needs 'lambda'".into())),
                    ("ubsr", _) => Err(Error::Parse("'lambda' given more than once".into())),
                    (_, []) => Self::oce(loss),
                    _ => Err(Error::Parse("oce takes no 'lambda'".into())),
                }
            }
            other => Err(Error::Parse(format!("unknown risk family '{other}'"))),
        }
    }
}

impl fmt::Display for RiskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expectile { nu } => write!(f, "expectile:nu={nu}"),
            Self::Ubsr { loss, lambda } => write!(f, "ubsr:loss={loss},lambda={lambda}"),
            Self::Oce { loss } => write!(f, "oce:loss={loss}"),
        }
    }
}
