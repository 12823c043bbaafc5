//! Finite-horizon MDPs with discrete cost distributions.
//!
//! Costs are minimized throughout. Environments that pay rewards are handled
//! by negating the cost atoms on ingestion ([`MdpSpec::negated`]).

mod file;

pub use file::{MdpFile, TRAJECTORY_CSV_HEADER};

use rand::Rng;
use rayon::prelude::*;

use crate::dist::DiscreteDist;
use crate::error::{Error, Result};
use crate::policy::{PolicyParams, PolicySpec};
use crate::rng::RandomStream;

/// Tolerance on probability vectors inside an [`MdpSpec`].
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the number of enumerated trajectories.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Batches at least this large are sampled on the rayon pool.
const PAR_BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    num_states: usize,
    num_actions: usize,
    /// `transition[s * A + a]` is P(·|s, a).
    transition: Vec<Vec<f64>>,
    /// `cost[(s * A + a) * S + s']` is the cost law on (s, a, s').
    cost: Vec<DiscreteDist>,
    initial: Vec<f64>,
    gamma: f64,
    horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    steps: Vec<Step>,
    terminal_state: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTrajectory {
    pub trajectory: Trajectory,
    pub probability: f64,
}

fn check_prob_vector(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Invalid(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Invalid(format!(
            "{what} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

impl MdpSpec {
    /// Validating constructor.
    ///
    /// `transition[s][a]` is a distribution over next states and
    /// `cost[s][a][s']` the cost law on that transition.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        cost: Vec<Vec<Vec<DiscreteDist>>>,
        initial: Vec<f64>,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self> {
        let num_states = transition.len();
        if num_states == 0 {
            return Err(Error::Invalid("MDP needs at least one state".into()));
        }
        let num_actions = transition[0].len();
        if num_actions == 0 {
            return Err(Error::Invalid("MDP needs at least one action".into()));
        }
        if horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Invalid(format!("gamma {gamma} outside [0, 1]")));
        }
        if initial.len() != num_states {
            return Err(Error::Invalid(format!(
                "initial distribution has {} entries, expected {num_states}",
                initial.len()
            )));
        }
        check_prob_vector(&initial, "initial distribution")?;
        if cost.len() != num_states {
            return Err(Error::Invalid(
                "cost table has wrong number of states".into(),
            ));
        }
        let mut flat_t = Vec::with_capacity(num_states * num_actions);
        let mut flat_c = Vec::with_capacity(num_states * num_actions * num_states);
        for (s, (rows, crows)) in transition.into_iter().zip(cost).enumerate() {
            if rows.len() != num_actions || crows.len() != num_actions {
                return Err(Error::Invalid(format!(
                    "state {s} does not list exactly {num_actions} actions"
                )));
            }
            for (a, (row, cdists)) in rows.into_iter().zip(crows).enumerate() {
                if row.len() != num_states {
                    return Err(Error::Invalid(format!(
                        "transition row ({s}, {a}) has {} entries, expected {num_states}",
                        row.len()
                    )));
                }
                check_prob_vector(&row, &format!("transition row ({s}, {a})"))?;
                if cdists.len() != num_states {
                    return Err(Error::Invalid(format!(
                        "cost row ({s}, {a}) has {} entries, expected {num_states}",
                        cdists.len()
                    )));
                }
                for (sn, d) in cdists.iter().enumerate() {
                    let mass: f64 = d.atoms().iter().map(|x| x.1).sum();
                    if (mass - 1.0).abs() > PROB_TOL {
                        return Err(Error::Invalid(format!(
                            "cost law on ({s}, {a}, {sn}) has mass {mass}"
                        )));
                    }
                }
                flat_t.push(row);
                flat_c.extend(cdists);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            transition: flat_t,
            cost: flat_c,
            initial,
            gamma,
            horizon,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[s * self.num_actions + a]
    }

    pub fn cost_dist(&self, s: usize, a: usize, next: usize) -> &DiscreteDist {
        &self.cost[(s * self.num_actions + a) * self.num_states + next]
    }

    /// Copy with every cost atom negated (reward environments).
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.cost {
            *d = DiscreteDist::new(d.atoms().iter().map(|&(v, p)| (-v, p)))
                .expect("negation preserves validity");
        }
        out
    }

    /// Largest possible |c(τ)| over all trajectories.
    pub fn max_abs_return(&self) -> f64 {
        let worst = self
            .cost
            .iter()
            .map(|d| d.min().abs().max(d.max().abs()))
            .fold(0.0, f64::max);
        (0..self.horizon)
            .map(|t| self.gamma.powi(t as i32) * worst)
            .sum()
    }

    /// Number of positive-probability trajectories under any softmax policy
    /// (softmax never assigns zero probability, so this does not depend on θ).
    pub fn trajectory_count(&self) -> u128 {
        // paths[s] = number of continuations from s with `remaining` steps left
        let mut paths = vec![1u128; self.num_states];
        for _ in 0..self.horizon {
            let mut next = vec![0u128; self.num_states];
            for (s, slot) in next.iter_mut().enumerate() {
                let mut total = 0u128;
                for a in 0..self.num_actions {
                    for (sn, &p) in self.transition(s, a).iter().enumerate() {
                        if p > 0.0 {
                            let atoms = self.cost_dist(s, a, sn).len() as u128;
                            total = total.saturating_add(atoms.saturating_mul(paths[sn]));
                        }
                    }
                }
                *slot = total;
            }
            paths = next;
        }
        self.initial
            .iter()
            .zip(&paths)
            .filter(|(p, _)| **p > 0.0)
            .fold(0u128, |acc, (_, n)| acc.saturating_add(*n))
    }
}

impl Trajectory {
    pub fn new(steps: Vec<Step>, terminal_state: usize) -> Self {
        Self {
            steps,
            terminal_state,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn terminal_state(&self) -> usize {
        self.terminal_state
    }

    pub fn costs(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.cost)
    }

    pub fn discounted_cost(&self, gamma: f64) -> f64 {
        discounted_cost(self, gamma)
    }

    /// Writes `t,s,a,cost` rows (with header).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for (t, step) in self.steps.iter().enumerate() {
            writeln!(w, "{t},{},{},{}", step.state, step.action, step.cost)?;
        }
        Ok(())
    }
}

/// Σₜ γᵗ costₜ.
pub fn discounted_cost(traj: &Trajectory, gamma: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for step in &traj.steps {
        total += weight * step.cost;
        weight *= gamma;
    }
    total
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

fn sample_with_table<R: Rng + ?Sized>(spec: &MdpSpec, table: &[f64], rng: &mut R) -> Trajectory {
    let na = spec.num_actions;
    let mut s = draw_index(&spec.initial, rng.gen());
    let mut steps = Vec::with_capacity(spec.horizon);
    for _ in 0..spec.horizon {
        let a = draw_index(&table[s * na..(s + 1) * na], rng.gen());
        let next = draw_index(spec.transition(s, a), rng.gen());
        let cost = spec.cost_dist(s, a, next).quantile_draw(rng.gen());
        steps.push(Step {
            state: s,
            action: a,
            cost,
        });
        s = next;
    }
    Trajectory {
        steps,
        terminal_state: s,
    }
}

/// Samples one trajectory: s₀ ~ P₀, aₜ ~ π_θ(·|sₜ), sₜ₊₁ ~ P(·|sₜ, aₜ), cost
/// from the law on (sₜ, aₜ, sₜ₊₁).
pub fn sample_trajectory<R: Rng + ?Sized>(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    rng: &mut R,
) -> Result<Trajectory> {
    policy.check_mdp(spec)?;
    policy.check_params(theta)?;
    let table = policy.prob_table(theta);
    Ok(sample_with_table(spec, &table, rng))
}

/// `m` independent trajectories using sub-streams `0..m` of `stream`.
pub fn sample_batch(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    m: usize,
    stream: &RandomStream,
) -> Result<Vec<Trajectory>> {
    sample_batch_from(spec, policy, theta, m, stream, 0)
}

/// `m` trajectories using sub-streams `first..first + m` of `stream`.
pub fn sample_batch_from(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    m: usize,
    stream: &RandomStream,
    first: u64,
) -> Result<Vec<Trajectory>> {
    if m == 0 {
        return Err(Error::Argument("batch size must be at least 1".into()));
    }
    policy.check_mdp(spec)?;
    policy.check_params(theta)?;
    let table = policy.prob_table(theta);
    let one = |j: usize| sample_with_table(spec, &table, &mut stream.substream(first + j as u64));
    Ok(if m >= PAR_BATCH {
        (0..m).into_par_iter().map(one).collect()
    } else {
        (0..m).map(one).collect()
    })
}

/// Every positive-probability trajectory with its exact probability
/// P₀(s₀) Πₜ π(aₜ|sₜ) P(sₜ₊₁|sₜ,aₜ) Pr(costₜ|sₜ,aₜ,sₜ₊₁).
pub fn enumerate_trajectories(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
) -> Result<Vec<WeightedTrajectory>> {
    enumerate_trajectories_capped(spec, policy, theta, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trajectories_capped(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
    cap: u128,
) -> Result<Vec<WeightedTrajectory>> {
    policy.check_mdp(spec)?;
    policy.check_params(theta)?;
    let count = spec.trajectory_count();
    if count > cap {
        return Err(Error::Capacity { count, cap });
    }
    let table = policy.prob_table(theta);
    let na = spec.num_actions;
    let mut out = Vec::with_capacity(count as usize);
    let mut stack = Vec::with_capacity(spec.horizon);
    for (s0, &p0) in spec.initial.iter().enumerate() {
        if p0 > 0.0 {
            expand(
                spec,
                &|s, a| table[s * na + a],
                s0,
                p0,
                &mut stack,
                &mut out,
            );
        }
    }
    Ok(out)
}

fn expand(
    spec: &MdpSpec,
    action_prob: &dyn Fn(usize, usize) -> f64,
    s: usize,
    prob: f64,
    stack: &mut Vec<Step>,
    out: &mut Vec<WeightedTrajectory>,
) {
    if stack.len() == spec.horizon {
        out.push(WeightedTrajectory {
            trajectory: Trajectory {
                steps: stack.clone(),
                terminal_state: s,
            },
            probability: prob,
        });
        return;
    }
    for a in 0..spec.num_actions {
        let pa = action_prob(s, a);
        if pa <= 0.0 {
            continue;
        }
        for (next, &pn) in spec.transition(s, a).iter().enumerate() {
            if pn <= 0.0 {
                continue;
            }
            for &(cost, pc) in spec.cost_dist(s, a, next).atoms() {
                stack.push(Step {
                    state: s,
                    action: a,
                    cost,
                });
                expand(spec, action_prob, next, prob * pa * pn * pc, stack, out);
                stack.pop();
            }
        }
    }
}

/// Exact law of the discounted cost under a softmax policy.
pub fn return_distribution(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta: &PolicyParams,
) -> Result<DiscreteDist> {
    let trajs = enumerate_trajectories(spec, policy, theta)?;
    DiscreteDist::from_weights(
        trajs
            .iter()
            .map(|w| (w.trajectory.discounted_cost(spec.gamma), w.probability)),
    )
}

/// Exact law of the discounted cost under the deterministic Markov policy
/// `choose(state)`.
pub fn return_distribution_deterministic(
    spec: &MdpSpec,
    choose: impl Fn(usize) -> usize,
) -> Result<DiscreteDist> {
    let count = spec.trajectory_count();
    if count > DEFAULT_ENUMERATION_CAP {
        return Err(Error::Capacity {
            count,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    for s in 0..spec.num_states {
        if choose(s) >= spec.num_actions {
            return Err(Error::Argument(format!(
                "action {} out of range",
                choose(s)
            )));
        }
    }
    let action_prob = |s: usize, a: usize| if choose(s) == a { 1.0 } else { 0.0 };
    let mut out = Vec::new();
    let mut stack = Vec::with_capacity(spec.horizon);
    for (s0, &p0) in spec.initial.iter().enumerate() {
        if p0 > 0.0 {
            expand(spec, &action_prob, s0, p0, &mut stack, &mut out);
        }
    }
    DiscreteDist::from_weights(
        out.iter()
            .map(|w| (w.trajectory.discounted_cost(spec.gamma), w.probability)),
    )
}
