//! Small synthetic MDPs with known risk structure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::mdp::{return_distribution_deterministic, MdpSpec, DEFAULT_ENUMERATION_CAP};
use crate::risk::RiskSpec;

/// Tolerance used when verifying documented orderings.
const VERIFY_TOL: f64 = 1e-12;

/// One state, two actions, horizon 1. Action 0 costs `safe_cost`, action 1
/// draws from `risky_costs`.
pub fn make_two_arm_bandit(safe_cost: f64, risky_costs: DiscreteDist) -> Result<MdpSpec> {
    if !safe_cost.is_finite() {
        return Err(Error::Invalid(format!(
            "safe cost {safe_cost} is not finite"
        )));
    }
    MdpSpec::new(
        vec![vec![vec![1.0], vec![1.0]]],
        vec![vec![
            vec![DiscreteDist::point(safe_cost)?],
            vec![risky_costs],
        ]],
        vec![1.0],
        1.0,
        1,
    )
}

/// Branching chain with horizon `length`.
///
/// States: 0 = start, 1 = low-variance branch, 2 = high-variance branch.
/// From the start, action 0 enters branch 1 and action 1 enters branch 2,
/// both at cost 1. Branches are absorbing; every later step costs 1 on the
/// low branch and `1 ± spread/2` with equal odds on the high branch, so
/// both branches have the same mean. Actions inside a branch have no effect.
pub fn make_risky_chain(length: usize, branch_cost_spread: f64, gamma: f64) -> Result<MdpSpec> {
    if length < 2 {
        return Err(Error::Argument(format!(
            "chain length {length} must be at least 2"
        )));
    }
    if !(branch_cost_spread >= 0.0 && branch_cost_spread.is_finite()) {
        return Err(Error::Argument(format!(
            "branch cost spread {branch_cost_spread} must be nonnegative"
        )));
    }
    let one = DiscreteDist::point(1.0)?;
    let noisy = if branch_cost_spread == 0.0 {
        one.clone()
    } else {
        let h = branch_cost_spread / 2.0;
        DiscreteDist::new([(1.0 - h, 0.5), (1.0 + h, 0.5)])?
    };
    let to = |s: usize| {
        let mut row = vec![0.0; 3];
        row[s] = 1.0;
        row
    };
    let costs = |d: &DiscreteDist| vec![d.clone(), d.clone(), d.clone()];
    MdpSpec::new(
        vec![vec![to(1), to(2)], vec![to(1), to(1)], vec![to(2), to(2)]],
        vec![
            vec![costs(&one), costs(&one)],
            vec![costs(&one), costs(&one)],
            vec![costs(&noisy), costs(&noisy)],
        ],
        vec![1.0, 0.0, 0.0],
        gamma,
        length,
    )
}

/// Three-state, one-action Markov cost process with discount 0.9 and
/// horizon 5. Each state has its own two-point cost law.
pub fn markov_cost_process() -> Result<MdpSpec> {
    let p = [[0.5, 0.3, 0.2], [0.2, 0.6, 0.2], [0.3, 0.3, 0.4]];
    let laws = [
        DiscreteDist::new([(0.0, 0.5), (1.0, 0.5)])?,
        DiscreteDist::new([(1.0, 0.7), (3.0, 0.3)])?,
        DiscreteDist::new([(-1.0, 0.4), (2.0, 0.6)])?,
    ];
    MdpSpec::new(
        p.iter().map(|row| vec![row.to_vec()]).collect(),
        laws.iter().map(|d| vec![vec![d.clone(); 3]]).collect(),
        vec![1.0, 0.0, 0.0],
        0.9,
        5,
    )
}

/// Random MDP with two-point cost laws on every `(s, a, s')`.
pub fn make_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    gamma: f64,
) -> Result<MdpSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut simplex = |n: usize| {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let initial = simplex(num_states);
    let transition: Vec<Vec<Vec<f64>>> = (0..num_states)
        .map(|_| (0..num_actions).map(|_| simplex(num_states)).collect())
        .collect();
    let mut cost = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut per_a = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            let mut per_n = Vec::with_capacity(num_states);
            for _ in 0..num_states {
                let a: f64 = rng.gen_range(-2.0..3.0);
                let b: f64 = a + rng.gen_range(0.5..3.0);
                let p: f64 = rng.gen_range(0.2..0.8);
                per_n.push(DiscreteDist::new([(a, p), (b, 1.0 - p)])?);
            }
            per_a.push(per_n);
        }
        cost.push(per_a);
    }
    MdpSpec::new(transition, cost, initial, gamma, horizon)
}

/// A documented preference: under `risk`, committing to `preferred_action`
/// in state 0 (action 0 elsewhere) gives strictly lower exact risk than any
/// other action in state 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preference {
    pub risk: RiskSpec,
    pub preferred_action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvCatalogEntry {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub spec: MdpSpec,
    pub preferences: Vec<Preference>,
}

impl EnvCatalogEntry {
    /// Exact risk of each deterministic choice in state 0.
    pub fn risk_by_first_action(&self, risk: &RiskSpec) -> Result<Vec<f64>> {
        (0..self.spec.num_actions())
            .map(|a| {
                let law =
                    return_distribution_deterministic(&self.spec, |s| if s == 0 { a } else { 0 })?;
                risk.exact(&law, VERIFY_TOL)
            })
            .collect()
    }

    /// Checks every documented preference with the exact oracles.
    pub fn verify(&self) -> Result<()> {
        if self.spec.trajectory_count() > DEFAULT_ENUMERATION_CAP {
            return Err(Error::Invalid(format!("{} is not enumerable", self.name)));
        }
        for pref in &self.preferences {
            let risks = self.risk_by_first_action(&pref.risk)?;
            let best = risks[pref.preferred_action];
            let holds = risks
                .iter()
                .enumerate()
                .all(|(a, &r)| a == pref.preferred_action || best < r);
            if !holds {
                return Err(Error::Invalid(format!(
                    "{}: {} does not prefer action {} (risks {risks:?})",
                    self.name, pref.risk, pref.preferred_action
                )));
            }
        }
        Ok(())
    }
}

fn prefs(list: &[(&str, usize)]) -> Result<Vec<Preference>> {
    list.iter()
        .map(|(r, a)| {
            Ok(Preference {
                risk: r.parse()?,
                preferred_action: *a,
            })
        })
        .collect()
}

/// Safe arm 1.0; risky arm 0 w.p. 0.9, 9 w.p. 0.1. The risky arm has the
/// lower mean (0.9) but a heavy upper tail.
pub fn risky_safe_bandit() -> Result<MdpSpec> {
    make_two_arm_bandit(1.0, DiscreteDist::new([(0.0, 0.9), (9.0, 0.1)])?)
}

/// All named environments with their verified preferences.
pub fn catalog() -> Result<Vec<EnvCatalogEntry>> {
    let entries = vec![
        EnvCatalogEntry {
            name: "risky_safe_bandit",
            params: vec![
                ("safe_cost", 1.0),
                ("risky_low", 0.0),
                ("risky_high", 9.0),
                ("p_high", 0.1),
            ],
            spec: risky_safe_bandit()?,
            preferences: prefs(&[
                ("ubsr:loss=identity,lambda=0", 1),
                ("expectile:nu=0.35", 1),
                ("expectile:nu=0.65", 0),
                ("ubsr:loss=entropic:beta=0.5,lambda=1", 0),
                ("ubsr:loss=quadratic:b=0.01,lambda=0.5", 0),
                ("oce:loss=cvar:alpha=0.9", 0),
                ("oce:loss=meanvar:a=2", 0),
            ])?,
        },
        EnvCatalogEntry {
            name: "heavy_tail_bandit",
            params: vec![
                ("safe_cost", 1.0),
                ("risky_low", 0.0),
                ("risky_high", 12.0),
                ("p_high", 0.1),
            ],
            spec: make_two_arm_bandit(1.0, DiscreteDist::new([(0.0, 0.9), (12.0, 0.1)])?)?,
            preferences: prefs(&[
                ("ubsr:loss=identity,lambda=0", 0),
                ("expectile:nu=0.35", 1),
                ("expectile:nu=0.5", 0),
                ("expectile:nu=0.65", 0),
                ("ubsr:loss=entropic:beta=0.5,lambda=1", 0),
            ])?,
        },
        EnvCatalogEntry {
            name: "risky_chain",
            params: vec![("length", 3.0), ("branch_cost_spread", 2.0), ("gamma", 1.0)],
            spec: make_risky_chain(3, 2.0, 1.0)?,
            preferences: prefs(&[
                ("expectile:nu=0.35", 1),
                ("expectile:nu=0.65", 0),
                ("ubsr:loss=entropic:beta=0.5,lambda=1", 0),
                ("oce:loss=cvar:alpha=0.75", 0),
            ])?,
        },
        EnvCatalogEntry {
            name: "markov_cost_process",
            params: vec![("gamma", 0.9), ("horizon", 5.0)],
            spec: markov_cost_process()?,
            preferences: Vec::new(),
        },
    ];
    for e in &entries {
        e.verify()?;
    }
    Ok(entries)
}

/// Looks up a catalog entry by name.
pub fn catalog_entry(name: &str) -> Result<EnvCatalogEntry> {
    catalog()?
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Argument(format!("no environment named '{name}'")))
}
