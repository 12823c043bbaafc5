//! Independent numerical oracles: finite differences, grid minimization of
//! the OCE objective, and Monte Carlo MSE and tail-frequency harnesses.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::loss::LossFn;
use crate::rng::RandomStream;

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;
pub const DEFAULT_REPLICATIONS: usize = 2000;
pub const MIN_REPLICATIONS: usize = 100;
pub const DEFAULT_M_LIST: [usize; 3] = [100, 1000, 10_000];

/// Central differences `(f(θ + hᵢeᵢ) − f(θ − hᵢeᵢ)) / 2hᵢ` with
/// `hᵢ = step · max(1, |θᵢ|)`.
pub fn finite_difference_gradient(
    f: impl Fn(&[f64]) -> Result<f64>,
    theta: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Argument(format!("step {step} must be positive")));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let h = step * theta[i].abs().max(1.0);
        point[i] = theta[i] + h;
        let up = f(&point)?;
        point[i] = theta[i] - h;
        let down = f(&point)?;
        point[i] = theta[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Oracle(format!(
                "non-finite function value near coordinate {i}: {up}, {down}"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Minimizes `k + E[l(X − k)]` over `n` evenly spaced points of `[lo, hi]`;
/// returns `(min value, argmin)`.
pub fn brute_force_oce(
    dist: &DiscreteDist,
    loss: &LossFn,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if !(lo < hi) || n < 3 {
        return Err(Error::Argument(format!(
            "grid ({lo}, {hi}, {n}) is degenerate"
        )));
    }
    let pitch = (hi - lo) / (n - 1) as f64;
    let objective = |k: f64| k + dist.expect(|x| loss.eval(x - k));
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..n {
        let v = objective(lo + pitch * i as f64);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    if best_i == 0 || best_i == n - 1 {
        return Err(Error::Oracle(format!(
            "grid minimum sits on the boundary of [{lo}, {hi}]; widen the grid"
        )));
    }
    Ok((best, lo + pitch * best_i as f64))
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub m: usize,
    pub mse: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted {
        value: f64,
    },
    /// Every MSE was exactly zero.
    FlatZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub target: String,
    pub points: Vec<MsePoint>,
    pub slope: SlopeFit,
}

impl MseCurve {
    pub fn slope_value(&self) -> Option<f64> {
        match self.slope {
            SlopeFit::Fitted { value } => Some(value),
            SlopeFit::FlatZero => None,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,mse,replications")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.m, p.mse, p.replications)?;
        }
        Ok(())
    }
}

fn check_m_list(m_list: &[usize], replications: usize) -> Result<()> {
    if m_list.is_empty() || m_list[0] == 0 || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(format!(
            "m list {m_list:?} must be positive and strictly increasing"
        )));
    }
    if replications < MIN_REPLICATIONS {
        return Err(Error::Argument(format!(
            "{replications} replications is below the minimum of {MIN_REPLICATIONS}"
        )));
    }
    Ok(())
}

/// Runs `replications` independent estimates at every `m` and records the
/// mean squared error `‖estimate − truth‖²` against `truth`.
///
/// Replication `r` at size `m` draws from `stream.derive(m).substream(r)`,
/// so the result does not depend on scheduling.
pub fn mse_curve<E>(
    target: &str,
    estimator: E,
    truth: &[f64],
    m_list: &[usize],
    replications: usize,
    stream: &RandomStream,
) -> Result<MseCurve>
where
    E: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<f64>> + Sync,
{
    check_m_list(m_list, replications)?;
    let mut points = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let family = stream.derive(m as u64);
        let errs = (0..replications)
            .into_par_iter()
            .map(|r| {
                let est = estimator(m, &mut family.substream(r as u64))?;
                if est.len() != truth.len() {
                    return Err(Error::Argument(format!(
                        "estimate has {} entries, truth has {}",
                        est.len(),
                        truth.len()
                    )));
                }
                Ok(est
                    .iter()
                    .zip(truth)
                    .map(|(e, t)| (e - t) * (e - t))
                    .sum::<f64>())
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(MsePoint {
            m,
            mse: errs.iter().sum::<f64>() / replications as f64,
            replications,
        });
    }
    let slope = if points.iter().all(|p| p.mse == 0.0) {
        SlopeFit::FlatZero
    } else if points.iter().any(|p| p.mse == 0.0) {
        return Err(Error::Oracle(
            "some but not all MSE values are zero; no log-log fit".into(),
        ));
    } else if points.len() < 2 {
        return Err(Error::Oracle("a slope needs at least two m values".into()));
    } else {
        let xs: Vec<f64> = points.iter().map(|p| (p.m as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.mse.ln()).collect();
        SlopeFit::Fitted {
            value: least_squares_slope(&xs, &ys),
        }
    };
    Ok(MseCurve {
        target: target.to_string(),
        points,
        slope,
    })
}

/// Frequency of `|estimate − truth| ≥ ε` over `replications` estimates at
/// sample size `m`, for each ε.
pub fn tail_frequency<E>(
    estimator: E,
    truth: f64,
    m: usize,
    epsilons: &[f64],
    replications: usize,
    stream: &RandomStream,
) -> Result<Vec<(f64, f64)>>
where
    E: Fn(usize, &mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if replications == 0 || m == 0 {
        return Err(Error::Argument(
            "m and replications must be positive".into(),
        ));
    }
    let family = stream.derive(m as u64);
    let devs = (0..replications)
        .into_par_iter()
        .map(|r| estimator(m, &mut family.substream(r as u64)).map(|e| (e - truth).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let hits = devs.iter().filter(|&&d| d >= eps).count();
            (eps, hits as f64 / replications as f64)
        })
        .collect())
}

/// ν-expectile of the standard normal and `E[(X − ξ_ν)²] = 1 + ξ_ν²`.
///
/// Solves `ν E(X − k)⁺ = (1 − ν) E(k − X)⁺` with the closed forms
/// `E(X − k)⁺ = φ(k) − k(1 − Φ(k))` and `E(k − X)⁺ = kΦ(k) + φ(k)`.
pub fn normal_expectile(nu: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Argument(format!("nu = {nu} must lie in (0, 1)")));
    }
    let gap = |k: f64| {
        let (pdf, cdf) = (normal_pdf(k), normal_cdf(k));
        nu * (pdf - k * (1.0 - cdf)) - (1.0 - nu) * (k * cdf + pdf)
    };
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    while hi - lo > 1e-15 * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xi = 0.5 * (lo + hi);
    Ok((xi, 1.0 + xi * xi))
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `(L_ν² / (m μ_ν²)) · E[(X − ξ_ν)²]` with `μ_ν = 2 min(ν, 1−ν)` and
/// `L_ν = 2 max(ν, 1−ν)`.
pub fn expectile_mse_bound(nu: f64, m: usize, centred_second_moment: f64) -> f64 {
    let mu = 2.0 * nu.min(1.0 - nu);
    let l = 2.0 * nu.max(1.0 - nu);
    l * l / (m as f64 * mu * mu) * centred_second_moment
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{make_cvar, make_mean_variance};
    use crate::risk::exact_oce;
    use rand::Rng;

    #[test]
    fn finite_differences_of_simple_functions() {
        let c = [1.5, -2.0, 0.25];
        let g = finite_difference_gradient(
            |t| Ok(t.iter().zip(&c).map(|(a, b)| a * b).sum()),
            &[0.3, 10.0, -4.0],
            FD_STEP,
        )
        .unwrap();
        for (a, b) in g.iter().zip(&c) {
            assert!((a - b).abs() < 1e-10);
        }
        let g =
            finite_difference_gradient(|t| Ok(t.iter().map(|x| x * x).sum()), &[0.0; 4], FD_STEP)
                .unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(
            finite_difference_gradient(|_| Ok(f64::NAN), &[0.0], FD_STEP),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn brute_force_oce_examples() {
        let cvar = make_cvar(0.75).unwrap();
        let d = DiscreteDist::new([(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)]).unwrap();
        let (v, _) = brute_force_oce(&d, &cvar, -2.0, 7.0, 9001).unwrap();
        assert!((v - 4.0).abs() < 1e-3);
        let p = DiscreteDist::point(2.5).unwrap();
        let (v, _) = brute_force_oce(&p, &cvar, 0.0, 5.0, 5001).unwrap();
        assert!((v - 2.5).abs() < 1e-3);
        assert!(matches!(
            brute_force_oce(&d, &cvar, 5.0, 9.0, 101),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn brute_force_agrees_with_root_formula() {
        let d = DiscreteDist::new([(-1.0, 0.2), (0.5, 0.5), (3.0, 0.3)]).unwrap();
        for loss in [make_cvar(0.6).unwrap(), make_mean_variance(2.0).unwrap()] {
            let (lo, hi, n) = (-5.0, 6.0, 110_001);
            let pitch = (hi - lo) / (n - 1) as f64;
            let (bf, _) = brute_force_oce(&d, &loss, lo, hi, n).unwrap();
            let (oce, _) = exact_oce(&d, &loss, 1e-12).unwrap();
            assert!(
                (bf - oce).abs() <= pitch * (1.0 + oce.abs()),
                "{loss}: {bf} vs {oce}"
            );
        }
    }

    #[test]
    fn slope_fit_recovers_inverse_m() {
        let ms = [100.0f64, 1000.0, 10_000.0];
        let xs: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
        let ys: Vec<f64> = ms.iter().map(|m| (3.7 / m).ln()).collect();
        assert!((least_squares_slope(&xs, &ys) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_estimator_is_flat_zero() {
        let curve = mse_curve(
            "exact",
            |_, _| Ok(vec![1.0]),
            &[1.0],
            &[10, 100],
            100,
            &RandomStream::new(1),
        )
        .unwrap();
        assert_eq!(curve.slope, SlopeFit::FlatZero);
        assert!(mse_curve(
            "x",
            |_, _| Ok(vec![1.0]),
            &[1.0],
            &[10, 10],
            100,
            &RandomStream::new(1)
        )
        .is_err());
        assert!(mse_curve(
            "x",
            |_, _| Ok(vec![1.0]),
            &[1.0],
            &[10],
            99,
            &RandomStream::new(1)
        )
        .is_err());
    }

    #[test]
    fn sample_mean_mse_is_variance_over_m() {
        let d = DiscreteDist::new([(0.0, 0.5), (1.0, 0.3), (4.0, 0.2)]).unwrap();
        let var = d.variance();
        let curve = mse_curve(
            "mean",
            |m, rng| {
                let s: f64 = (0..m).map(|_| d.quantile_draw(rng.gen())).sum();
                Ok(vec![s / m as f64])
            },
            &[d.mean()],
            &[50, 200, 800],
            2000,
            &RandomStream::new(3),
        )
        .unwrap();
        let slope = curve.slope_value().unwrap();
        assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
        for p in &curve.points {
            let ratio = p.mse / (var / p.m as f64);
            assert!((ratio - 1.0).abs() < 0.3, "m = {}: ratio {ratio}", p.m);
        }
    }

    #[test]
    fn tail_frequency_beyond_support_is_zero() {
        let est = |m: usize, rng: &mut ChaCha8Rng| -> Result<f64> {
            Ok((0..m).map(|_| rng.gen::<f64>()).sum::<f64>() / m as f64)
        };
        let f = tail_frequency(est, 0.5, 10, &[0.6, 0.1], 500, &RandomStream::new(2)).unwrap();
        assert_eq!(f[0], (0.6, 0.0));
        assert!(f[1].1 > 0.0);
    }

    #[test]
    fn normal_expectile_values() {
        let (xi, second) = normal_expectile(0.5).unwrap();
        assert!(xi.abs() < 1e-12 && (second - 1.0).abs() < 1e-12);
        let (a, _) = normal_expectile(0.65).unwrap();
        let (b, _) = normal_expectile(0.35).unwrap();
        assert!(a > 0.0 && (a + b).abs() < 1e-12);
        // cross-check on a fine discretisation of N(0, 1)
        let n = 40_001;
        let atoms = (0..n).map(|i| {
            let x = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
            (x, normal_pdf(x))
        });
        let d = DiscreteDist::from_weights(atoms).unwrap();
        let k = crate::risk::exact_expectile(&d, 0.65, 1e-12).unwrap();
        assert!((k - a).abs() < 1e-6, "{k} vs {a}");
    }

    #[test]
    fn mse_bound_at_half_is_variance_over_m() {
        assert!((expectile_mse_bound(0.5, 100, 1.0) - 0.01).abs() < 1e-15);
        assert!(expectile_mse_bound(0.9, 100, 1.0) > 0.01);
    }
}
