//! Policy-gradient estimators for expectile, UBSR and OCE risks, and their
//! exact counterparts computed by trajectory enumeration.
//!
//! With `F = c(τ)` the discounted cost and `G = g(θ, τ)` the score:
//!
//! * expectile: `∇ξ = E[l_ν(F − ξ) G] / E[l'_ν(F − ξ)]`
//! * UBSR: `∇SR = E[l(F − SR) G] / E[l'(F − SR)]`
//! * entropic UBSR at λ = 1: `∇SR = β⁻¹ E[e^{β(F − SR)} G]`
//! * OCE: `∇OCE = E[l(F − k*) G]`, with `k*` the UBSR of `l'` at level 1.
//!
//! The UBSR and OCE estimators are double-sampled: the risk level (and the
//! UBSR denominator) come from `batch`, while the score-weighted numerator
//! averages over `hat_batch`. Each hat trajectory's loss weight uses its own
//! cost, since the weight and the score must be correlated for the numerator
//! to estimate `E[l(F − SR) G]`; pairing weights from one batch with scores
//! from an independent one would have mean zero.

use serde::{Deserialize, Serialize};

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::loss::{expectile_l, make_entropic, LossFn, MAX_EXP_ARG};
use crate::mdp::{enumerate_trajectories, MdpSpec, Trajectory};
use crate::policy::{PolicyParams, PolicySpec};
use crate::risk::{self, RiskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradDiagnostics {
    /// Sum of `l'` weights for ratio estimators, batch size otherwise.
    pub denominator_value: f64,
    pub used_double_sampling: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradEstimate {
    pub gradient: Vec<f64>,
    pub risk_estimate: f64,
    pub batch_size: usize,
    pub diagnostics: GradDiagnostics,
}

impl GradEstimate {
    pub fn norm_sq(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum()
    }
}

/// Costs and scores of a batch, validated against the model.
struct Scored {
    costs: Vec<f64>,
    scores: Vec<Vec<f64>>,
}

fn score_batch(
    batch: &[Trajectory],
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
) -> Result<Scored> {
    if batch.is_empty() {
        return Err(Error::Argument("trajectory batch is empty".into()));
    }
    policy.check_mdp(spec)?;
    policy.check_params(theta)?;
    for traj in batch {
        if traj.len() != spec.horizon()
            || traj
                .steps()
                .iter()
                .any(|s| s.state >= spec.num_states() || s.action >= spec.num_actions())
        {
            return Err(Error::Argument(
                "trajectory does not belong to the MDP (length or index out of range)".into(),
            ));
        }
    }
    let table = policy.prob_table(theta);
    Ok(Scored {
        costs: batch
            .iter()
            .map(|t| t.discounted_cost(spec.gamma()))
            .collect(),
        scores: batch
            .iter()
            .map(|t| policy.score_with_table(&table, t))
            .collect(),
    })
}

/// Σⱼ wⱼ gⱼ
fn weighted_sum(weights: &[f64], scores: &[Vec<f64>], dims: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dims];
    for (w, g) in weights.iter().zip(scores) {
        for (a, gi) in acc.iter_mut().zip(g) {
            *a += w * gi;
        }
    }
    acc
}

fn check_pair(batch: &[Trajectory], hat_batch: &[Trajectory]) -> Result<()> {
    if batch.len() != hat_batch.len() {
        return Err(Error::Argument(format!(
            "batch sizes differ: {} vs {}",
            batch.len(),
            hat_batch.len()
        )));
    }
    Ok(())
}

fn finish(
    gradient: Vec<f64>,
    risk_estimate: f64,
    batch_size: usize,
    denominator_value: f64,
    used_double_sampling: bool,
) -> Result<GradEstimate> {
    if gradient.iter().any(|g| !g.is_finite()) {
        return Err(Error::Range("gradient estimate is not finite".into()));
    }
    Ok(GradEstimate {
        gradient,
        risk_estimate,
        batch_size,
        diagnostics: GradDiagnostics {
            denominator_value,
            used_double_sampling,
        },
    })
}

/// Ratio estimator of the expectile gradient on one batch.
pub fn expectile_policy_gradient(
    batch: &[Trajectory],
    nu: f64,
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
    tol: f64,
) -> Result<GradEstimate> {
    let scored = score_batch(batch, theta, policy, spec)?;
    let xi = risk::empirical_expectile(&scored.costs, nu, tol)?;
    let l = expectile_l(nu)?;
    let weights: Vec<f64> = scored.costs.iter().map(|c| l.eval(c - xi)).collect();
    let denom: f64 = scored.costs.iter().map(|c| l.deriv(c - xi)).sum();
    let mut grad = weighted_sum(&weights, &scored.scores, policy.dims());
    grad.iter_mut().for_each(|g| *g /= denom);
    finish(grad, xi, batch.len(), denom, false)
}

/// Double-sampled estimator of the UBSR gradient.
#[allow(clippy::too_many_arguments)]
pub fn ubsr_policy_gradient(
    batch: &[Trajectory],
    hat_batch: &[Trajectory],
    loss: &LossFn,
    lambda: f64,
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
    tol: f64,
) -> Result<GradEstimate> {
    check_pair(batch, hat_batch)?;
    RiskSpec::ubsr(*loss, lambda)?;
    let z = score_batch(batch, theta, policy, spec)?;
    let zhat = score_batch(hat_batch, theta, policy, spec)?;
    let sr = risk::empirical_ubsr(&z.costs, loss, lambda, tol)?;
    let denom: f64 = z.costs.iter().map(|c| loss.deriv(c - sr)).sum();
    if !(denom > 0.0) {
        return Err(Error::Range(format!(
            "UBSR denominator {denom} is not positive at SR = {sr}"
        )));
    }
    let weights: Vec<f64> = zhat.costs.iter().map(|c| loss.eval(c - sr)).collect();
    let mut grad = weighted_sum(&weights, &zhat.scores, policy.dims());
    grad.iter_mut().for_each(|g| *g /= denom);
    finish(grad, sr, batch.len(), denom, true)
}

/// Single-batch estimator of the entropic (λ = 1) UBSR gradient.
pub fn entropic_policy_gradient(
    batch: &[Trajectory],
    beta: f64,
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
    tol: f64,
) -> Result<GradEstimate> {
    make_entropic(beta)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance {tol} must be positive")));
    }
    let scored = score_batch(batch, theta, policy, spec)?;
    let m = batch.len() as f64;
    let sr = log_mean_exp(&scored.costs, beta) / beta;
    let mut weights = Vec::with_capacity(batch.len());
    for c in &scored.costs {
        let arg = beta * (c - sr);
        if arg > MAX_EXP_ARG {
            return Err(Error::Range(format!(
                "entropic exponent {arg} exceeds {MAX_EXP_ARG}"
            )));
        }
        weights.push(arg.exp() / (beta * m));
    }
    let grad = weighted_sum(&weights, &scored.scores, policy.dims());
    finish(grad, sr, batch.len(), m, false)
}

/// log((1/m) Σ e^{β xⱼ}) without overflow.
fn log_mean_exp(xs: &[f64], beta: f64) -> f64 {
    let max = xs.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(beta * x));
    let sum: f64 = xs.iter().map(|&x| (beta * x - max).exp()).sum();
    max + (sum / xs.len() as f64).ln()
}

/// Double-sampled estimator of the OCE gradient.
pub fn oce_policy_gradient(
    batch: &[Trajectory],
    hat_batch: &[Trajectory],
    loss: &LossFn,
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
    tol: f64,
) -> Result<GradEstimate> {
    check_pair(batch, hat_batch)?;
    let z = score_batch(batch, theta, policy, spec)?;
    let zhat = score_batch(hat_batch, theta, policy, spec)?;
    let (oce, kstar) = risk::empirical_oce(&z.costs, loss, tol)?;
    let m = batch.len() as f64;
    let weights: Vec<f64> = zhat
        .costs
        .iter()
        .map(|c| loss.eval(c - kstar) / m)
        .collect();
    let grad = weighted_sum(&weights, &zhat.scores, policy.dims());
    finish(grad, oce, batch.len(), m, true)
}

/// Dispatches to the estimator for `risk`. `hat_batch` is required exactly
/// when [`RiskSpec::is_double_sampled`] holds.
pub fn estimate_gradient(
    risk: &RiskSpec,
    batch: &[Trajectory],
    hat_batch: Option<&[Trajectory]>,
    theta: &PolicyParams,
    policy: &PolicySpec,
    spec: &MdpSpec,
    tol: f64,
) -> Result<GradEstimate> {
    let need_hat = || {
        hat_batch.ok_or_else(|| {
            Error::Argument(format!("risk {risk} needs an independent second batch"))
        })
    };
    if let Some(beta) = risk.entropic_beta() {
        return entropic_policy_gradient(batch, beta, theta, policy, spec, tol);
    }
    match risk {
        RiskSpec::Expectile { nu } => {
            expectile_policy_gradient(batch, *nu, theta, policy, spec, tol)
        }
        RiskSpec::Ubsr { loss, lambda } => {
            ubsr_policy_gradient(batch, need_hat()?, loss, *lambda, theta, policy, spec, tol)
        }
        RiskSpec::Oce { loss } => {
            oce_policy_gradient(batch, need_hat()?, loss, theta, policy, spec, tol)
        }
    }
}

/// Enumerated trajectory law: probabilities, discounted costs and scores.
struct Enumerated {
    probs: Vec<f64>,
    costs: Vec<f64>,
    scores: Vec<Vec<f64>>,
}

impl Enumerated {
    fn new(spec: &MdpSpec, policy: &PolicySpec, theta: &PolicyParams) -> Result<Self> {
        let trajs = enumerate_trajectories(spec, policy, theta)?;
        let table = policy.prob_table(theta);
        Ok(Self {
            probs: trajs.iter().map(|w| w.probability).collect(),
            costs: trajs
                .iter()
                .map(|w| w.trajectory.discounted_cost(spec.gamma()))
                .collect(),
            scores: trajs
                .iter()
                .map(|w| policy.score_with_table(&table, &w.trajectory))
                .collect(),
        })
    }

    fn dist(&self) -> Result<DiscreteDist> {
        DiscreteDist::from_weights(self.costs.iter().copied().zip(self.probs.iter().copied()))
    }

    fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.probs
            .iter()
            .zip(&self.costs)
            .map(|(p, &c)| p * f(c))
            .sum()
    }

    /// E[f(F) G]
    fn expect_score(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let weights: Vec<f64> = self
            .probs
            .iter()
            .zip(&self.costs)
            .map(|(p, &c)| p * f(c))
            .collect();
        weighted_sum(&weights, &self.scores, self.scores[0].len())
    }
}

/// Exact risk of the discounted cost under π_θ.
pub fn exact_risk(
    risk: &RiskSpec,
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    tol: f64,
) -> Result<f64> {
    let law = crate::mdp::return_distribution(spec, policy, theta)?;
    risk.exact(&law, tol)
}

/// ∇ξ_ν(θ) by enumeration.
pub fn exact_expectile_gradient(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    nu: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let e = Enumerated::new(spec, policy, theta)?;
    let xi = risk::exact_expectile(&e.dist()?, nu, tol)?;
    let l = expectile_l(nu)?;
    let denom = e.expect(|c| l.deriv(c - xi));
    Ok(e.expect_score(|c| l.eval(c - xi) / denom))
}

/// ∇SR(θ) by enumeration.
pub fn exact_ubsr_gradient(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    loss: &LossFn,
    lambda: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    RiskSpec::ubsr(*loss, lambda)?;
    let e = Enumerated::new(spec, policy, theta)?;
    let sr = risk::exact_ubsr(&e.dist()?, loss, lambda, tol)?;
    let denom = e.expect(|c| loss.deriv(c - sr));
    if !(denom > 0.0) {
        return Err(Error::Range(format!(
            "UBSR denominator {denom} is not positive"
        )));
    }
    Ok(e.expect_score(|c| loss.eval(c - sr) / denom))
}

/// ∇OCE(θ) by enumeration.
pub fn exact_oce_gradient(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    loss: &LossFn,
    tol: f64,
) -> Result<Vec<f64>> {
    let e = Enumerated::new(spec, policy, theta)?;
    let (_, kstar) = risk::exact_oce(&e.dist()?, loss, tol)?;
    Ok(e.expect_score(|c| loss.eval(c - kstar)))
}

/// Exact gradient of `risk` at θ.
pub fn exact_gradient(
    risk: &RiskSpec,
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    tol: f64,
) -> Result<Vec<f64>> {
    match risk {
        RiskSpec::Expectile { nu } => exact_expectile_gradient(spec, policy, theta, *nu, tol),
        RiskSpec::Ubsr { loss, lambda } => {
            exact_ubsr_gradient(spec, policy, theta, loss, *lambda, tol)
        }
        RiskSpec::Oce { loss } => exact_oce_gradient(spec, policy, theta, loss, tol),
    }
}

/// ∇J(θ) = E[F G], the risk-neutral policy gradient.
pub fn exact_mean_gradient(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
) -> Result<Vec<f64>> {
    Ok(Enumerated::new(spec, policy, theta)?.expect_score(|c| c))
}
