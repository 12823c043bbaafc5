use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`DiscreteDist`].
pub const MASS_TOL: f64 = 1e-9;

/// Finite-support distribution over real values.
///
/// Atoms are kept sorted by value with duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct DiscreteDist {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteDist {
    /// Builds a distribution from `(value, probability)` pairs.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<_> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::Invalid("distribution has no atoms".into()));
        }
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::Invalid(format!("non-finite atom value {v}")));
            }
            if !(p > 0.0 && p <= 1.0 + MASS_TOL) {
                return Err(Error::Invalid(format!(
                    "atom probability {p} outside (0, 1]"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Invalid(format!(
                "atom probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::merged(atoms))
    }

    /// Builds a distribution from nonnegative weights, normalizing them and
    /// dropping zero-weight atoms.
    pub fn from_weights(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<_> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Invalid(
                "weights have no positive finite mass".into(),
            ));
        }
        if atoms.iter().any(|a| !a.0.is_finite()) {
            return Err(Error::Invalid("non-finite atom value".into()));
        }
        Ok(Self::merged(atoms.into_iter().map(|(v, w)| (v, w / total))))
    }

    /// Empirical measure of a sample set.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        Self::from_weights(samples.iter().map(|&x| (x, 1.0)))
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::new([(value, 1.0)])
    }

    fn merged(atoms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<_> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        Self { atoms: out }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|&(v, p)| p * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.expect(|x| (x - mu) * (x - mu))
    }

    /// Shifts every atom by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(v, p)| (v + c, p)).collect(),
        }
    }

    /// Draws one value given a uniform variate `u` in [0, 1).
    pub fn quantile_draw(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.max()
    }
}

impl TryFrom<Vec<(f64, f64)>> for DiscreteDist {
    type Error = Error;

    fn try_from(atoms: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<DiscreteDist> for Vec<(f64, f64)> {
    fn from(d: DiscreteDist) -> Self {
        d.atoms
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_sorts_atoms() {
        let d = DiscreteDist::new([(2.0, 0.25), (1.0, 0.5), (2.0, 0.25)]).unwrap();
        assert_eq!(d.atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
        assert_eq!(d.mean(), 1.5);
        assert_eq!(d.variance(), 0.25);
    }

    #[test]
    fn rejects_bad_mass_and_values() {
        assert!(DiscreteDist::new([(0.0, 0.5)]).is_err());
        assert!(DiscreteDist::new([(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteDist::new([(0.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(DiscreteDist::new(Vec::new()).is_err());
    }

    #[test]
    fn empirical_weights_are_uniform() {
        let d = DiscreteDist::empirical(&[3.0, 1.0, 3.0, 5.0]).unwrap();
        assert_eq!(d.atoms(), &[(1.0, 0.25), (3.0, 0.5), (5.0, 0.25)]);
    }

    #[test]
    fn quantile_draw_covers_support() {
        let d = DiscreteDist::new([(0.0, 0.9), (12.0, 0.1)]).unwrap();
        assert_eq!(d.quantile_draw(0.0), 0.0);
        assert_eq!(d.quantile_draw(0.899), 0.0);
        assert_eq!(d.quantile_draw(0.95), 12.0);
        assert_eq!(d.quantile_draw(0.999_999_999), 12.0);
    }
}
