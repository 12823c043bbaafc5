//! Softmax policies with closed-form score functions.
//!
//! Two parameterizations are supported:
//!
//! * tabular softmax, one logit `θ[s, a]` per state-action pair, stored
//!   row-major (`s * num_actions + a`);
//! * linear-feature softmax, logits `⟨θ, φ(s, a)⟩` for a fixed feature map.
//!
//! Logits are max-shifted before exponentiation. The score of a trajectory is
//! the sum over its steps of `∇θ log π(a|s)`, which for both parameterizations
//! has a closed form, so no numerical differentiation is ever needed on the
//! estimator path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    TabularSoftmax {
        num_states: usize,
        num_actions: usize,
    },
    FeatureSoftmax {
        num_states: usize,
        num_actions: usize,
        dim: usize,
        /// `features[s * num_actions + a]` is φ(s, a).
        features: Vec<Vec<f64>>,
    },
}

/// Policy parameter vector θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyParams(pub Vec<f64>);

/// ∇θ log-probability of one step or a whole trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(pub Vec<f64>);

impl PolicyParams {
    pub fn zeros(dims: usize) -> Self {
        Self(vec![0.0; dims])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for PolicyParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl ScoreVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl PolicySpec {
    pub fn tabular(num_states: usize, num_actions: usize) -> Self {
        PolicySpec::TabularSoftmax {
            num_states,
            num_actions,
        }
    }

    /// Tabular softmax sized for `mdp`.
    pub fn tabular_for(mdp: &MdpSpec) -> Self {
        Self::tabular(mdp.num_states(), mdp.num_actions())
    }

    pub fn feature(
        num_states: usize,
        num_actions: usize,
        dim: usize,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if features.len() != num_states * num_actions {
            return Err(Error::Config(format!(
                "feature map has {} rows, expected {}",
                features.len(),
                num_states * num_actions
            )));
        }
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        for (i, phi) in features.iter().enumerate() {
            if phi.len() != dim {
                return Err(Error::Config(format!(
                    "feature vector for (s={}, a={}) has length {}, expected {dim}",
                    i / num_actions,
                    i % num_actions,
                    phi.len()
                )));
            }
            if phi.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("non-finite feature entry".into()));
            }
        }
        Ok(PolicySpec::FeatureSoftmax {
            num_states,
            num_actions,
            dim,
            features,
        })
    }

    pub fn num_states(&self) -> usize {
        match self {
            PolicySpec::TabularSoftmax { num_states, .. }
            | PolicySpec::FeatureSoftmax { num_states, .. } => *num_states,
        }
    }

    pub fn num_actions(&self) -> usize {
        match self {
            PolicySpec::TabularSoftmax { num_actions, .. }
            | PolicySpec::FeatureSoftmax { num_actions, .. } => *num_actions,
        }
    }

    /// Parameter dimension.
    pub fn dims(&self) -> usize {
        match self {
            PolicySpec::TabularSoftmax {
                num_states,
                num_actions,
            } => num_states * num_actions,
            PolicySpec::FeatureSoftmax { dim, .. } => *dim,
        }
    }

    pub fn check_mdp(&self, mdp: &MdpSpec) -> Result<()> {
        if self.num_states() != mdp.num_states() || self.num_actions() != mdp.num_actions() {
            return Err(Error::Config(format!(
                "policy is sized for {}x{} but the MDP has {} states and {} actions",
                self.num_states(),
                self.num_actions(),
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(())
    }

    pub fn check_params(&self, theta: &PolicyParams) -> Result<()> {
        if theta.len() != self.dims() {
            return Err(Error::Config(format!(
                "theta has dimension {}, policy expects {}",
                theta.len(),
                self.dims()
            )));
        }
        if !theta.is_finite() {
            return Err(Error::Config("theta has non-finite entries".into()));
        }
        Ok(())
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s >= self.num_states() {
            return Err(Error::Argument(format!(
                "state {s} out of range (num_states = {})",
                self.num_states()
            )));
        }
        Ok(())
    }

    fn logit(&self, theta: &[f64], s: usize, a: usize) -> f64 {
        match self {
            PolicySpec::TabularSoftmax { num_actions, .. } => theta[s * num_actions + a],
            PolicySpec::FeatureSoftmax {
                num_actions,
                features,
                ..
            } => dot(theta, &features[s * num_actions + a]),
        }
    }

    /// Writes π(·|s) into `out` without validation.
    pub(crate) fn fill_probs(&self, theta: &[f64], s: usize, out: &mut [f64]) {
        let na = self.num_actions();
        let mut max = f64::NEG_INFINITY;
        for (a, o) in out.iter_mut().enumerate().take(na) {
            *o = self.logit(theta, s, a);
            max = max.max(*o);
        }
        let mut total = 0.0;
        for o in out.iter_mut().take(na) {
            *o = (*o - max).exp();
            total += *o;
        }
        for o in out.iter_mut().take(na) {
            *o /= total;
        }
    }

    /// π(·|s) for every state, row-major.
    pub fn prob_table(&self, theta: &PolicyParams) -> Vec<f64> {
        let na = self.num_actions();
        let mut table = vec![0.0; self.num_states() * na];
        for (s, row) in table.chunks_mut(na).enumerate() {
            self.fill_probs(&theta.0, s, row);
        }
        table
    }

    /// Softmax action distribution π_θ(·|s).
    pub fn action_probs(&self, theta: &PolicyParams, s: usize) -> Result<Vec<f64>> {
        self.check_params(theta)?;
        self.check_state(s)?;
        let mut out = vec![0.0; self.num_actions()];
        self.fill_probs(&theta.0, s, &mut out);
        Ok(out)
    }

    /// Adds `∇θ log π(a|s)` into `acc`, given π(·|s) in `probs`.
    pub(crate) fn add_log_prob_grad(&self, probs: &[f64], s: usize, a: usize, acc: &mut [f64]) {
        match self {
            PolicySpec::TabularSoftmax { num_actions, .. } => {
                let block = &mut acc[s * num_actions..(s + 1) * num_actions];
                for (b, slot) in block.iter_mut().enumerate() {
                    *slot -= probs[b];
                }
                block[a] += 1.0;
            }
            PolicySpec::FeatureSoftmax {
                num_actions,
                features,
                ..
            } => {
                let base = s * num_actions;
                for (i, slot) in acc.iter_mut().enumerate() {
                    let expected: f64 = (0..*num_actions)
                        .map(|b| probs[b] * features[base + b][i])
                        .sum();
                    *slot += features[base + a][i] - expected;
                }
            }
        }
    }

    /// `∇θ log π_θ(a|s)`.
    pub fn log_prob_grad(&self, theta: &PolicyParams, s: usize, a: usize) -> Result<ScoreVector> {
        let probs = self.action_probs(theta, s)?;
        if a >= self.num_actions() {
            return Err(Error::Argument(format!("action {a} out of range")));
        }
        let mut acc = vec![0.0; self.dims()];
        self.add_log_prob_grad(&probs, s, a, &mut acc);
        Ok(ScoreVector(acc))
    }

    /// Trajectory score g(θ, τ) = Σₜ ∇θ log π_θ(aₜ|sₜ).
    pub fn score(&self, theta: &PolicyParams, traj: &Trajectory) -> Result<ScoreVector> {
        self.check_params(theta)?;
        for step in traj.steps() {
            self.check_state(step.state)?;
            if step.action >= self.num_actions() {
                return Err(Error::Argument(format!(
                    "action {} out of range",
                    step.action
                )));
            }
        }
        let table = self.prob_table(theta);
        Ok(ScoreVector(self.score_with_table(&table, traj)))
    }

    /// Score using a precomputed [`prob_table`](Self::prob_table).
    pub(crate) fn score_with_table(&self, table: &[f64], traj: &Trajectory) -> Vec<f64> {
        let na = self.num_actions();
        let mut acc = vec![0.0; self.dims()];
        for step in traj.steps() {
            let probs = &table[step.state * na..(step.state + 1) * na];
            self.add_log_prob_grad(probs, step.state, step.action, &mut acc);
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
