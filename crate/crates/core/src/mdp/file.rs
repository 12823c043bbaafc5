//! MDP spec files.
//!
//! Specs are TOML documents:
//!
//! ```toml
//! num_states = 1
//! num_actions = 2
//! gamma = 1.0
//! horizon = 1
//! initial = [1.0]
//! feature_dim = 2          # optional, only for feature-softmax policies
//!
//! [[transition]]           # one row per (state, action)
//! state = 0
//! action = 0
//! probs = [1.0]
//!
//! [[cost]]                 # cost law on (state, action, next)
//! state = 0
//! action = 1
//! next = 0                 # optional: omitted means every next state
//! atoms = [[0.0, 0.9], [9.0, 0.1]]
//!
//! [[feature]]              # φ(state, action), length feature_dim
//! state = 0
//! action = 0
//! phi = [1.0, 0.0]
//! ```
//!
//! Every `(state, action)` needs a transition row. Every transition with
//! positive probability needs a cost law; an entry with `next` overrides one
//! without it.

use serde::{Deserialize, Serialize};

use super::MdpSpec;
use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::policy::PolicySpec;

pub const TRAJECTORY_CSV_HEADER: &str = "t,s,a,cost";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    pub transition: Vec<TransitionRow>,
    pub cost: Vec<CostEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature: Vec<FeatureEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRow {
    pub state: usize,
    pub action: usize,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub state: usize,
    pub action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<usize>,
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEntry {
    pub state: usize,
    pub action: usize,
    pub phi: Vec<f64>,
}

impl MdpFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("MDP file: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("MDP file: {e}")))
    }

    fn check_sa(&self, s: usize, a: usize, what: &str) -> Result<()> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(Error::Parse(format!(
                "{what} entry ({s}, {a}) out of range"
            )));
        }
        Ok(())
    }

    pub fn to_spec(&self) -> Result<MdpSpec> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return Err(Error::Parse(
                "num_states and num_actions must be positive".into(),
            ));
        }
        let mut transition: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; na]; ns];
        for row in &self.transition {
            self.check_sa(row.state, row.action, "transition")?;
            let slot = &mut transition[row.state][row.action];
            if slot.is_some() {
                return Err(Error::Parse(format!(
                    "duplicate transition row ({}, {})",
                    row.state, row.action
                )));
            }
            *slot = Some(row.probs.clone());
        }
        let transition: Vec<Vec<Vec<f64>>> = transition
            .into_iter()
            .enumerate()
            .map(|(s, rows)| {
                rows.into_iter()
                    .enumerate()
                    .map(|(a, r)| {
                        r.ok_or_else(|| Error::Parse(format!("missing transition row ({s}, {a})")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;

        let mut cost: Vec<Vec<Vec<Option<DiscreteDist>>>> = vec![vec![vec![None; ns]; na]; ns];
        // generic entries first so that `next`-specific ones override them
        let ordered = self
            .cost
            .iter()
            .filter(|c| c.next.is_none())
            .chain(self.cost.iter().filter(|c| c.next.is_some()));
        for entry in ordered {
            self.check_sa(entry.state, entry.action, "cost")?;
            let dist = DiscreteDist::new(entry.atoms.iter().copied()).map_err(|e| {
                Error::Parse(format!(
                    "cost entry ({}, {}): {e}",
                    entry.state, entry.action
                ))
            })?;
            match entry.next {
                Some(n) if n >= ns => {
                    return Err(Error::Parse(format!(
                        "cost entry next state {n} out of range"
                    )))
                }
                Some(n) => cost[entry.state][entry.action][n] = Some(dist),
                None => {
                    for slot in &mut cost[entry.state][entry.action] {
                        *slot = Some(dist.clone());
                    }
                }
            }
        }
        let mut filled = Vec::with_capacity(ns);
        for (s, per_a) in cost.into_iter().enumerate() {
            let mut row_a = Vec::with_capacity(na);
            for (a, per_next) in per_a.into_iter().enumerate() {
                let mut row_n = Vec::with_capacity(ns);
                for (n, d) in per_next.into_iter().enumerate() {
                    let reachable = transition[s][a].get(n).copied().unwrap_or(0.0) > 0.0;
                    row_n.push(match d {
                        Some(d) => d,
                        None if reachable => {
                            return Err(Error::Parse(format!(
                                "missing cost law for ({s}, {a}, {n})"
                            )))
                        }
                        None => DiscreteDist::point(0.0)?,
                    });
                }
                row_a.push(row_n);
            }
            filled.push(row_a);
        }
        MdpSpec::new(
            transition,
            filled,
            self.initial.clone(),
            self.gamma,
            self.horizon,
        )
    }

    /// Feature-softmax policy built from the file's feature map, if any.
    pub fn feature_policy(&self) -> Result<Option<PolicySpec>> {
        let Some(dim) = self.feature_dim else {
            if !self.feature.is_empty() {
                return Err(Error::Parse("feature entries require feature_dim".into()));
            }
            return Ok(None);
        };
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; self.num_states * self.num_actions];
        for f in &self.feature {
            self.check_sa(f.state, f.action, "feature")?;
            rows[f.state * self.num_actions + f.action] = Some(f.phi.clone());
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| {
                    Error::Parse(format!(
                        "missing feature vector for ({}, {})",
                        i / self.num_actions,
                        i % self.num_actions
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PolicySpec::feature(self.num_states, self.num_actions, dim, rows).map(Some)
    }

    /// File representation of `spec`, optionally carrying a feature map.
    pub fn from_spec(spec: &MdpSpec, features: Option<&PolicySpec>) -> Self {
        let (ns, na) = (spec.num_states(), spec.num_actions());
        let mut transition = Vec::with_capacity(ns * na);
        let mut cost = Vec::new();
        for s in 0..ns {
            for a in 0..na {
                let probs = spec.transition(s, a).to_vec();
                for (n, &p) in probs.iter().enumerate() {
                    if p > 0.0 {
                        cost.push(CostEntry {
                            state: s,
                            action: a,
                            next: Some(n),
                            atoms: spec.cost_dist(s, a, n).atoms().to_vec(),
                        });
                    }
                }
                transition.push(TransitionRow {
                    state: s,
                    action: a,
                    probs,
                });
            }
        }
        let (feature_dim, feature) = match features {
            Some(PolicySpec::FeatureSoftmax {
                num_actions,
                dim,
                features,
                ..
            }) => (
                Some(*dim),
                features
                    .iter()
                    .enumerate()
                    .map(|(i, phi)| FeatureEntry {
                        state: i / num_actions,
                        action: i % num_actions,
                        phi: phi.clone(),
                    })
                    .collect(),
            ),
            _ => (None, Vec::new()),
        };
        Self {
            num_states: ns,
            num_actions: na,
            gamma: spec.gamma(),
            horizon: spec.horizon(),
            initial: spec.initial().to_vec(),
            feature_dim,
            transition,
            cost,
            feature,
        }
    }
}
