//! Loss functions for expectile, UBSR and OCE risks.
//!
//! Conventions: `x⁺ = max(x, 0)`, `x⁻ = max(−x, 0)`. At kinks the derivative
//! takes the left limit, i.e. the `x ≤ 0` branch (`x ≤ −1` for the
//! mean-variance and quartic losses).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent argument the entropic loss will evaluate.
pub const MAX_EXP_ARG: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LossKind {
    Identity,
    Entropic { beta: f64 },
    Quadratic { b: f64 },
    Polynomial { a: f64 },
    Cvar { alpha: f64 },
    Onpv { a: f64, b: f64 },
    MeanVariance { a: f64 },
    Quartic,
    ExpectileE { nu: f64 },
    ExpectileL { nu: f64 },
    ExpectileLPrime { nu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossFlags {
    pub convex: bool,
    pub increasing: bool,
    pub strictly_increasing: bool,
    pub continuous: bool,
    pub continuously_differentiable: bool,
    pub lipschitz_bound: Option<f64>,
}

/// A loss `l` with its derivative `l'` and analytic metadata.
///
/// Serializes as its [`LossKind`]; flags are recomputed on load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossKind", into = "LossKind")]
pub struct LossFn {
    kind: LossKind,
    flags: LossFlags,
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}

fn check_nu(nu: f64) -> Result<()> {
    check(nu > 0.0 && nu < 1.0, || {
        format!("nu = {nu} must lie in (0, 1)")
    })
}

/// l(x) = e^{βx}.
pub fn make_entropic(beta: f64) -> Result<LossFn> {
    check(beta > 0.0 && beta.is_finite(), || {
        format!("entropic beta = {beta} must be positive")
    })?;
    LossFn::build(LossKind::Entropic { beta })
}

/// l(x) = x.
pub fn make_identity() -> Result<LossFn> {
    LossFn::build(LossKind::Identity)
}

/// l(x) = [x⁺]² − b·x⁻.
pub fn make_quadratic(b: f64) -> Result<LossFn> {
    check(b >= 0.0 && b.is_finite(), || {
        format!("quadratic b = {b} must be nonnegative")
    })?;
    LossFn::build(LossKind::Quadratic { b })
}

/// l(x) = a⁻¹[x⁺]^a.
pub fn make_polynomial(a: f64) -> Result<LossFn> {
    check(a >= 1.0 && a.is_finite(), || {
        format!("polynomial a = {a} must be >= 1")
    })?;
    LossFn::build(LossKind::Polynomial { a })
}

/// l(x) = (1−α)⁻¹ x⁺.
pub fn make_cvar(alpha: f64) -> Result<LossFn> {
    check(alpha > 0.0 && alpha < 1.0, || {
        format!("cvar alpha = {alpha} must lie in (0, 1)")
    })?;
    LossFn::build(LossKind::Cvar { alpha })
}

/// l(x) = a·x⁺ − b·x⁻ with a > 1 > b > 0.
pub fn make_onpv(a: f64, b: f64) -> Result<LossFn> {
    check(a > 1.0 && a.is_finite(), || {
        format!("onpv a = {a} must exceed 1")
    })?;
    check(b > 0.0 && b < 1.0, || {
        format!("onpv b = {b} must lie in (0, 1)")
    })?;
    LossFn::build(LossKind::Onpv { a, b })
}

/// l(x) = a⁻¹([1+x]⁺)^a − a⁻¹.
pub fn make_mean_variance(a: f64) -> Result<LossFn> {
    check(a > 1.0 && a.is_finite(), || {
        format!("mean-variance a = {a} must exceed 1")
    })?;
    LossFn::build(LossKind::MeanVariance { a })
}

/// l(x) = (1+x)⁴·[1+x]⁺ − 1.
pub fn make_quartic() -> Result<LossFn> {
    LossFn::build(LossKind::Quartic)
}

/// e_ν(x) = x²·|ν − 1{x ≤ 0}|.
pub fn expectile_e(nu: f64) -> Result<LossFn> {
    check_nu(nu)?;
    LossFn::build(LossKind::ExpectileE { nu })
}

/// l_ν(x) = νx·1{x > 0} + (1−ν)x·1{x ≤ 0}.
pub fn expectile_l(nu: f64) -> Result<LossFn> {
    check_nu(nu)?;
    LossFn::build(LossKind::ExpectileL { nu })
}

/// l'_ν(x) = ν·1{x > 0} + (1−ν)·1{x ≤ 0}.
pub fn expectile_lprime(nu: f64) -> Result<LossFn> {
    check_nu(nu)?;
    LossFn::build(LossKind::ExpectileLPrime { nu })
}

impl LossFn {
    fn build(kind: LossKind) -> Result<Self> {
        use LossKind::*;
        let flags = match kind {
            Identity => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: true,
                continuous: true,
                continuously_differentiable: true,
                lipschitz_bound: Some(1.0),
            },
            Entropic { .. } => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: true,
                continuous: true,
                continuously_differentiable: true,
                lipschitz_bound: None,
            },
            // b > 0 puts a concave kink at 0: slope b on the left, 0⁺ on the right.
            Quadratic { b } => LossFlags {
                convex: b == 0.0,
                increasing: true,
                strictly_increasing: b > 0.0,
                continuous: true,
                continuously_differentiable: b == 0.0,
                lipschitz_bound: None,
            },
            Polynomial { a } => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: false,
                continuous: true,
                continuously_differentiable: a > 1.0,
                lipschitz_bound: (a == 1.0).then_some(1.0),
            },
            Cvar { alpha } => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: false,
                continuous: true,
                continuously_differentiable: false,
                lipschitz_bound: Some(1.0 / (1.0 - alpha)),
            },
            Onpv { a, .. } => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: true,
                continuous: true,
                continuously_differentiable: false,
                lipschitz_bound: Some(a),
            },
            MeanVariance { .. } | Quartic => LossFlags {
                convex: true,
                increasing: true,
                strictly_increasing: false,
                continuous: true,
                continuously_differentiable: true,
                lipschitz_bound: None,
            },
            ExpectileE { .. } => LossFlags {
                convex: true,
                increasing: false,
                strictly_increasing: false,
                continuous: true,
                continuously_differentiable: true,
                lipschitz_bound: None,
            },
            ExpectileL { nu } => LossFlags {
                convex: nu >= 0.5,
                increasing: true,
                strictly_increasing: true,
                continuous: true,
                continuously_differentiable: nu == 0.5,
                lipschitz_bound: Some(nu.max(1.0 - nu)),
            },
            ExpectileLPrime { nu } => LossFlags {
                convex: nu == 0.5,
                increasing: nu >= 0.5,
                strictly_increasing: false,
                continuous: nu == 0.5,
                continuously_differentiable: nu == 0.5,
                lipschitz_bound: (nu == 0.5).then_some(0.0),
            },
        };
        Ok(Self { kind, flags })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn flags(&self) -> LossFlags {
        self.flags
    }

    pub fn name(&self) -> &'static str {
        use LossKind::*;
        match self.kind {
            Identity => "identity",
            Entropic { .. } => "entropic",
            Quadratic { .. } => "quadratic",
            Polynomial { .. } => "polynomial",
            Cvar { .. } => "cvar",
            Onpv { .. } => "onpv",
            MeanVariance { .. } => "meanvar",
            Quartic => "quartic",
            ExpectileE { .. } => "expectile_e",
            ExpectileL { .. } => "expectile_l",
            ExpectileLPrime { .. } => "expectile_lprime",
        }
    }

    /// l(x). The entropic loss returns +∞ past the overflow guard; use
    /// [`try_eval`](Self::try_eval) where that must be an error.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        use LossKind::*;
        match self.kind {
            Identity => x,
            Entropic { beta } => {
                let arg = beta * x;
                if arg > MAX_EXP_ARG {
                    f64::INFINITY
                } else {
                    arg.exp()
                }
            }
            Quadratic { b } => {
                if x > 0.0 {
                    x * x
                } else {
                    b * x
                }
            }
            Polynomial { a } => pos(x).powf(a) / a,
            Cvar { alpha } => pos(x) / (1.0 - alpha),
            Onpv { a, b } => {
                if x > 0.0 {
                    a * x
                } else {
                    b * x
                }
            }
            MeanVariance { a } => (pos(1.0 + x).powf(a) - 1.0) / a,
            Quartic => {
                let y = 1.0 + x;
                y.powi(4) * pos(y) - 1.0
            }
            ExpectileE { nu } => {
                if x > 0.0 {
                    nu * x * x
                } else {
                    (1.0 - nu) * x * x
                }
            }
            ExpectileL { nu } => {
                if x > 0.0 {
                    nu * x
                } else {
                    (1.0 - nu) * x
                }
            }
            ExpectileLPrime { nu } => {
                if x > 0.0 {
                    nu
                } else {
                    1.0 - nu
                }
            }
        }
    }

    /// l(x), with a range error when the entropic exponent exceeds the guard.
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        if let LossKind::Entropic { beta } = self.kind {
            if beta * x > MAX_EXP_ARG {
                return Err(Error::Range(format!(
                    "entropic exponent {} exceeds {MAX_EXP_ARG}",
                    beta * x
                )));
            }
        }
        Ok(self.eval(x))
    }

    /// l'(x), left limit at kinks.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        use LossKind::*;
        match self.kind {
            Identity => 1.0,
            Entropic { beta } => beta * self.eval(x),
            Quadratic { b } => {
                if x > 0.0 {
                    2.0 * x
                } else {
                    b
                }
            }
            Polynomial { a } => pos(x).powf(a - 1.0) * if x > 0.0 { 1.0 } else { 0.0 },
            Cvar { alpha } => {
                if x > 0.0 {
                    1.0 / (1.0 - alpha)
                } else {
                    0.0
                }
            }
            Onpv { a, b } => {
                if x > 0.0 {
                    a
                } else {
                    b
                }
            }
            MeanVariance { a } => {
                let y = 1.0 + x;
                if y > 0.0 {
                    y.powf(a - 1.0)
                } else {
                    0.0
                }
            }
            Quartic => {
                let y = 1.0 + x;
                if y > 0.0 {
                    5.0 * y.powi(4)
                } else {
                    0.0
                }
            }
            ExpectileE { nu } => {
                if x > 0.0 {
                    2.0 * nu * x
                } else {
                    2.0 * (1.0 - nu) * x
                }
            }
            ExpectileL { nu } => {
                if x > 0.0 {
                    nu
                } else {
                    1.0 - nu
                }
            }
            ExpectileLPrime { .. } => 0.0,
        }
    }

    /// Points where `l` or `l'` is not smooth.
    pub fn kinks(&self) -> &'static [f64] {
        use LossKind::*;
        match self.kind {
            Identity | Entropic { .. } => &[],
            MeanVariance { .. } | Quartic => &[-1.0],
            _ => &[0.0],
        }
    }

    /// Infimum of `l` over ℝ and whether it is attained.
    pub fn infimum(&self) -> (f64, bool) {
        use LossKind::*;
        match self.kind {
            Identity | Onpv { .. } | ExpectileL { .. } => (f64::NEG_INFINITY, false),
            Quadratic { b } if b > 0.0 => (f64::NEG_INFINITY, false),
            Entropic { .. } => (0.0, false),
            Quadratic { .. } | Polynomial { .. } | Cvar { .. } | ExpectileE { .. } => (0.0, true),
            MeanVariance { a } => (-1.0 / a, true),
            Quartic => (-1.0, true),
            ExpectileLPrime { nu } => (nu.min(1.0 - nu), true),
        }
    }

    /// Supremum of `l` over ℝ and whether it is attained.
    pub fn supremum(&self) -> (f64, bool) {
        match self.kind {
            LossKind::ExpectileLPrime { nu } => (nu.max(1.0 - nu), true),
            _ => (f64::INFINITY, false),
        }
    }

    /// (inf, sup) of `l'` over ℝ.
    fn deriv_range(&self) -> (f64, f64) {
        use LossKind::*;
        let inf = f64::INFINITY;
        match self.kind {
            Identity => (1.0, 1.0),
            Entropic { .. } | MeanVariance { .. } | Quartic => (0.0, inf),
            Quadratic { .. } => (0.0, inf),
            Polynomial { a } if a > 1.0 => (0.0, inf),
            Polynomial { .. } => (0.0, 1.0),
            Cvar { alpha } => (0.0, 1.0 / (1.0 - alpha)),
            Onpv { a, b } => (b, a),
            ExpectileE { .. } => (-inf, inf),
            ExpectileL { nu } => (nu.min(1.0 - nu), nu.max(1.0 - nu)),
            ExpectileLPrime { .. } => (0.0, 0.0),
        }
    }

    /// Usable as a UBSR loss: nondecreasing and continuous, so the mean loss
    /// is a continuous nonincreasing function of the offset.
    pub fn ubsr_eligible(&self) -> bool {
        self.flags.increasing && self.flags.continuous
    }

    /// Usable as an OCE loss: convex, nondecreasing, and `l' − 1` changes
    /// sign, so the optimal split `k*` is finite.
    pub fn oce_eligible(&self) -> bool {
        let (lo, hi) = self.deriv_range();
        self.flags.convex && self.flags.increasing && lo < 1.0 && hi > 1.0
    }

    /// Parameters as `(key, value)` pairs, in canonical order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        use LossKind::*;
        match self.kind {
            Identity | Quartic => vec![],
            Entropic { beta } => vec![("beta", beta)],
            Quadratic { b } => vec![("b", b)],
            Polynomial { a } | MeanVariance { a } => vec![("a", a)],
            Cvar { alpha } => vec![("alpha", alpha)],
            Onpv { a, b } => vec![("a", a), ("b", b)],
            ExpectileE { nu } | ExpectileL { nu } | ExpectileLPrime { nu } => vec![("nu", nu)],
        }
    }

    /// Builds a loss from its constructor name and `key=value` parameters.
    pub fn from_parts(name: &str, params: &[(String, f64)]) -> Result<Self> {
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse(format!("loss '{name}' needs parameter '{key}'")))
        };
        let allowed: &[&str] = match name {
            "identity" | "quartic" => &[],
            "entropic" => &["beta"],
            "quadratic" => &["b"],
            "polynomial" | "meanvar" | "mean_variance" => &["a"],
            "cvar" => &["alpha"],
            "onpv" => &["a", "b"],
            "expectile_e" | "expectile_l" | "expectile_lprime" => &["nu"],
            other => return Err(Error::Parse(format!("unknown loss '{other}'"))),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parse(format!(
                "loss '{name}' has no parameter '{k}'"
            )));
        }
        match name {
            "identity" => make_identity(),
            "quartic" => make_quartic(),
            "entropic" => make_entropic(get("beta")?),
            "quadratic" => make_quadratic(get("b")?),
            "polynomial" => make_polynomial(get("a")?),
            "meanvar" | "mean_variance" => make_mean_variance(get("a")?),
            "cvar" => make_cvar(get("alpha")?),
            "onpv" => make_onpv(get("a")?, get("b")?),
            "expectile_e" => expectile_e(get("nu")?),
            "expectile_l" => expectile_l(get("nu")?),
            _ => expectile_lprime(get("nu")?),
        }
    }
}

/// Parses `key=value` lists separated by commas.
pub(crate) fn parse_params(text: &str) -> Result<Vec<(String, f64)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, found '{tok}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("'{}' is not a number", v.trim())))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

impl TryFrom<LossKind> for LossFn {
    type Error = Error;

    fn try_from(kind: LossKind) -> Result<Self> {
        use LossKind::*;
        match kind {
            Identity => make_identity(),
            Entropic { beta } => make_entropic(beta),
            Quadratic { b } => make_quadratic(b),
            Polynomial { a } => make_polynomial(a),
            Cvar { alpha } => make_cvar(alpha),
            Onpv { a, b } => make_onpv(a, b),
            MeanVariance { a } => make_mean_variance(a),
            Quartic => make_quartic(),
            ExpectileE { nu } => expectile_e(nu),
            ExpectileL { nu } => expectile_l(nu),
            ExpectileLPrime { nu } => expectile_lprime(nu),
        }
    }
}

impl From<LossFn> for LossKind {
    fn from(loss: LossFn) -> Self {
        loss.kind
    }
}

impl FromStr for LossFn {
    type Err = Error;

    /// `name` or `name:key=value[,key=value]`, e.g. `entropic:beta=0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        Self::from_parts(name.trim(), &parse_params(rest)?)
    }
}

impl fmt::Display for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        for (i, (k, v)) in self.params().into_iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn catalogue() -> Vec<LossFn> {
        vec![
            make_identity().unwrap(),
            make_entropic(0.5).unwrap(),
            make_entropic(2.0).unwrap(),
            make_quadratic(0.0).unwrap(),
            make_quadratic(1e-2).unwrap(),
            make_polynomial(1.0).unwrap(),
            make_polynomial(3.0).unwrap(),
            make_cvar(0.75).unwrap(),
            make_onpv(2.0, 0.5).unwrap(),
            make_mean_variance(2.0).unwrap(),
            make_mean_variance(3.5).unwrap(),
            make_quartic().unwrap(),
            expectile_e(0.65).unwrap(),
            expectile_l(0.65).unwrap(),
            expectile_l(0.35).unwrap(),
            expectile_lprime(0.65).unwrap(),
        ]
    }

    #[test]
    fn spot_values() {
        assert_eq!(make_entropic(0.5).unwrap().eval(0.0), 1.0);
        assert_eq!(make_cvar(0.75).unwrap().eval(2.0), 8.0);
        let l = expectile_l(0.65).unwrap();
        assert!((l.eval(2.0) - 1.3).abs() < 1e-15);
        assert!((l.eval(-2.0) + 0.7).abs() < 1e-15);
        assert_eq!(make_mean_variance(2.0).unwrap().eval(0.0), 0.0);
        assert_eq!(make_quadratic(0.01).unwrap().eval(-2.0), -0.02);
        assert_eq!(make_quartic().unwrap().eval(0.0), 0.0);
        assert_eq!(make_quartic().unwrap().eval(-3.0), -1.0);
        assert_eq!(make_onpv(2.0, 0.5).unwrap().eval(-1.0), -0.5);
    }

    #[test]
    fn constructors_reject_out_of_range() {
        assert!(make_entropic(0.0).is_err());
        assert!(make_quadratic(-1.0).is_err());
        assert!(make_polynomial(0.5).is_err());
        assert!(make_cvar(1.0).is_err());
        assert!(make_onpv(1.0, 0.5).is_err());
        assert!(make_onpv(2.0, 1.0).is_err());
        assert!(make_mean_variance(1.0).is_err());
        assert!(expectile_l(1.5).is_err());
        assert!(expectile_e(0.0).is_err());
    }

    #[test]
    fn entropic_overflow_guard() {
        let l = make_entropic(1.0).unwrap();
        assert!(l.try_eval(699.0).is_ok());
        assert!(matches!(l.try_eval(701.0), Err(Error::Range(_))));
    }

    #[test]
    fn expectile_loss_identities() {
        for nu in [0.1, 0.35, 0.5, 0.65, 0.9] {
            let e = expectile_e(nu).unwrap();
            let l = expectile_l(nu).unwrap();
            let lp = expectile_lprime(nu).unwrap();
            assert_eq!(e.eval(0.0), 0.0);
            assert!(e.eval(1e-9).abs() < 1e-17 && e.eval(-1e-9).abs() < 1e-17);
            assert_eq!(l.eval(0.0), 0.0);
            assert_eq!(lp.eval(0.0), 1.0 - nu);
            assert_eq!(lp.eval(1e-300), nu);
            // e_ν' = 2 l_ν
            for x in [-2.0, -0.3, 0.4, 3.0] {
                assert!((e.deriv(x) - 2.0 * l.eval(x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = 1e-6;
        for loss in catalogue() {
            let mut checked = 0;
            while checked < 1000 {
                let x: f64 = rng.gen_range(-4.0..4.0);
                if loss.kinks().iter().any(|k| (x - k).abs() < 1e-4) {
                    continue;
                }
                let fd = (loss.eval(x + h) - loss.eval(x - h)) / (2.0 * h);
                let tol = 1e-5 * (1.0 + loss.deriv(x).abs());
                assert!(
                    (fd - loss.deriv(x)).abs() <= tol,
                    "{loss} at {x}: fd {fd} vs {}",
                    loss.deriv(x)
                );
                checked += 1;
            }
        }
    }

    #[test]
    fn monotone_and_convex_flags_hold_on_grid() {
        let grid: Vec<f64> = (0..10_000)
            .map(|i| -5.0 + 10.0 * i as f64 / 9_999.0)
            .collect();
        for loss in catalogue() {
            let f = loss.flags();
            if f.increasing {
                for w in grid.windows(2) {
                    assert!(loss.eval(w[0]) <= loss.eval(w[1]), "{loss} not increasing");
                }
            }
            if f.strictly_increasing {
                for w in grid.windows(2) {
                    assert!(loss.eval(w[0]) < loss.eval(w[1]), "{loss} not strict");
                }
            }
            if f.convex {
                for w in grid.windows(3).step_by(7) {
                    let mid = loss.eval(w[1]);
                    let chord = 0.5 * (loss.eval(w[0]) + loss.eval(w[2]));
                    assert!(
                        mid <= chord + 1e-12 * (1.0 + chord.abs()),
                        "{loss} not convex"
                    );
                }
            }
        }
        // the quadratic variant with b > 0 must fail midpoint convexity at 0
        let q = make_quadratic(1e-2).unwrap();
        assert!(q.eval(0.0) > 0.5 * (q.eval(-0.001) + q.eval(0.001)));
    }

    #[test]
    fn oce_losses_cross_one() {
        let grid: Vec<f64> = (0..20_001).map(|i| -50.0 + i as f64 * 0.005).collect();
        for loss in catalogue() {
            let below = grid.iter().any(|&x| loss.deriv(x) < 1.0);
            let above = grid.iter().any(|&x| loss.deriv(x) > 1.0);
            if loss.oce_eligible() {
                assert!(
                    below && above,
                    "{loss} flagged OCE-eligible without crossing"
                );
            }
        }
        assert!(make_cvar(0.9).unwrap().oce_eligible());
        assert!(make_mean_variance(2.0).unwrap().oce_eligible());
        assert!(make_entropic(0.5).unwrap().oce_eligible());
        assert!(!make_identity().unwrap().oce_eligible());
        assert!(!make_quadratic(0.01).unwrap().oce_eligible());
    }

    #[test]
    fn ubsr_eligibility() {
        assert!(make_entropic(0.5).unwrap().ubsr_eligible());
        assert!(make_quadratic(0.01).unwrap().ubsr_eligible());
        assert!(make_identity().unwrap().ubsr_eligible());
        assert!(!expectile_e(0.65).unwrap().ubsr_eligible());
        assert!(!expectile_lprime(0.65).unwrap().ubsr_eligible());
    }

    #[test]
    fn parse_and_display() {
        let l: LossFn = "entropic:beta=0.5".parse().unwrap();
        assert_eq!(l, make_entropic(0.5).unwrap());
        let l: LossFn = "onpv:a=2,b=0.25".parse().unwrap();
        assert_eq!(l.to_string(), "onpv:a=2,b=0.25");
        assert_eq!(
            "quartic".parse::<LossFn>().unwrap(),
            make_quartic().unwrap()
        );
        assert!("meanvar:a=2".parse::<LossFn>().is_ok());
        assert!("bogus:a=1".parse::<LossFn>().is_err());
        assert!("cvar:beta=0.5".parse::<LossFn>().is_err());
        assert!("cvar:alpha=x".parse::<LossFn>().is_err());
        assert!(matches!(
            "cvar:alpha=1.5".parse::<LossFn>(),
            Err(Error::Argument(_))
        ));
    }
}
