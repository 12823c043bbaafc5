//! Risk-aware policy gradient: `θᵢ₊₁ = θᵢ − ηᵢ ∇̂h(θᵢ)` with batch gradient
//! estimates, returning an iterate chosen uniformly at random.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{estimate_gradient, exact_gradient, GradDiagnostics, GradEstimate};
use crate::mdp::{sample_batch_from, MdpSpec};
use crate::policy::{PolicyParams, PolicySpec};
use crate::risk::{RiskSpec, DEFAULT_TOL};
use crate::rng::RandomStream;

/// `‖θ‖∞` above which a run logs a warning.
pub const LARGE_THETA: f64 = 50.0;

/// Stream tag for the final uniform draw of `R`.
const SELECT_TAG: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// ηᵢ = scale · i^(−exponent), i ≥ 1.
    PowerLaw {
        scale: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BatchSchedule {
    Constant {
        m: usize,
    },
    /// mᵢ = ⌈scale · i^exponent⌉, i ≥ 1.
    PowerLaw {
        scale: f64,
        exponent: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapgConfig {
    pub num_iterations: usize,
    /// Defaults to the constant 1/√N.
    pub step_size: Option<StepSchedule>,
    /// Defaults to the constant ⌈√N⌉.
    pub batch_size: Option<BatchSchedule>,
    /// Coordinate box `[lo, hi]` applied after every update.
    pub projection_box: Option<(f64, f64)>,
    pub seed: u64,
    pub risk: RiskSpec,
    pub tol: f64,
}

impl RapgConfig {
    pub fn new(risk: RiskSpec, num_iterations: usize, seed: u64) -> Self {
        Self {
            num_iterations,
            step_size: None,
            batch_size: None,
            projection_box: None,
            seed,
            risk,
            tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_iterations == 0 {
            return bad("num_iterations must be at least 1".into());
        }
        match self.step_size {
            Some(StepSchedule::Constant { eta }) if !(eta > 0.0 && eta.is_finite()) => {
                return bad(format!("step size {eta} must be positive"))
            }
            Some(StepSchedule::PowerLaw { scale, exponent })
                if !(scale > 0.0 && scale.is_finite() && exponent.is_finite()) =>
            {
                return bad(format!("step schedule ({scale}, {exponent}) is invalid"))
            }
            _ => {}
        }
        match self.batch_size {
            Some(BatchSchedule::Constant { m: 0 }) => {
                return bad("batch size must be at least 1".into())
            }
            Some(BatchSchedule::PowerLaw { scale, exponent })
                if !(scale > 0.0 && scale.is_finite() && exponent.is_finite()) =>
            {
                return bad(format!("batch schedule ({scale}, {exponent}) is invalid"))
            }
            _ => {}
        }
        if let Some((lo, hi)) = self.projection_box {
            if !(lo < hi) {
                return bad(format!("projection box [{lo}, {hi}] is empty"));
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tol));
        }
        self.risk
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// ηᵢ for iteration `i` (1-based).
    pub fn step_at(&self, i: usize) -> f64 {
        match self.step_size {
            None => 1.0 / (self.num_iterations as f64).sqrt(),
            Some(StepSchedule::Constant { eta }) => eta,
            Some(StepSchedule::PowerLaw { scale, exponent }) => scale * (i as f64).powf(-exponent),
        }
    }

    /// mᵢ for iteration `i` (1-based).
    pub fn batch_at(&self, i: usize) -> usize {
        match self.batch_size {
            None => (self.num_iterations as f64).sqrt().ceil() as usize,
            Some(BatchSchedule::Constant { m }) => m,
            Some(BatchSchedule::PowerLaw { scale, exponent }) => {
                ((scale * (i as f64).powf(exponent)).ceil() as usize).max(1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// θ₀, θ₁, …, θ_N.
    pub iterates: Vec<Vec<f64>>,
    /// ‖∇̂h(θᵢ)‖² of the estimate used at each update.
    pub grad_norm_sq: Vec<f64>,
    pub risk_estimates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    /// `R` in `1..=N`, indexing `iterates`; 0 for an aborted run.
    pub selected_index: usize,
    pub config: RapgConfig,
    pub seed: u64,
    pub total_trajectories: u64,
    pub wall_time_secs: f64,
}

impl RunRecord {
    /// θ_R.
    pub fn selected(&self) -> PolicyParams {
        PolicyParams(self.iterates[self.selected_index].clone())
    }

    pub fn num_iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Re-draws `R` uniformly from `1..=N` with a fresh stream.
pub fn select_uniform_iterate(record: &RunRecord, stream: &RandomStream) -> PolicyParams {
    let n = record.num_iterations();
    let r = stream.substream(0).gen_range(1..=n);
    PolicyParams(record.iterates[r].clone())
}

/// What one RAPG iteration needs to produce a gradient.
pub struct IterationContext<'a> {
    pub spec: &'a MdpSpec,
    pub policy: &'a PolicySpec,
    pub risk: &'a RiskSpec,
    pub batch_size: usize,
    pub stream: RandomStream,
    pub tol: f64,
}

/// Gradient oracle used by [`run_rapg_with`].
pub trait GradientSource {
    /// Returns the gradient at θ and the number of trajectories consumed.
    fn gradient(
        &mut self,
        ctx: &IterationContext,
        theta: &PolicyParams,
    ) -> Result<(GradEstimate, u64)>;
}

/// Batch estimators: sub-streams `0..m` for the batch and `m..2m` for the
/// independent hat batch when the risk needs one.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampledGradient;

impl GradientSource for SampledGradient {
    fn gradient(
        &mut self,
        ctx: &IterationContext,
        theta: &PolicyParams,
    ) -> Result<(GradEstimate, u64)> {
        let m = ctx.batch_size;
        let batch = sample_batch_from(ctx.spec, ctx.policy, theta, m, &ctx.stream, 0)?;
        let hat = if ctx.risk.is_double_sampled() {
            Some(sample_batch_from(
                ctx.spec,
                ctx.policy,
                theta,
                m,
                &ctx.stream,
                m as u64,
            )?)
        } else {
            None
        };
        let used = if hat.is_some() { 2 * m } else { m } as u64;
        let est = estimate_gradient(
            ctx.risk,
            &batch,
            hat.as_deref(),
            theta,
            ctx.policy,
            ctx.spec,
            ctx.tol,
        )?;
        Ok((est, used))
    }
}

/// Exact gradients by enumeration; consumes no trajectories.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactGradient;

impl GradientSource for ExactGradient {
    fn gradient(
        &mut self,
        ctx: &IterationContext,
        theta: &PolicyParams,
    ) -> Result<(GradEstimate, u64)> {
        let gradient = exact_gradient(ctx.risk, ctx.spec, ctx.policy, theta, ctx.tol)?;
        let risk_estimate =
            crate::grad::exact_risk(ctx.risk, ctx.spec, ctx.policy, theta, ctx.tol)?;
        Ok((
            GradEstimate {
                gradient,
                risk_estimate,
                batch_size: ctx.batch_size,
                diagnostics: GradDiagnostics {
                    denominator_value: f64::NAN,
                    used_double_sampling: false,
                },
            },
            0,
        ))
    }
}

/// Always returns the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroGradient;

impl GradientSource for ZeroGradient {
    fn gradient(
        &mut self,
        ctx: &IterationContext,
        _theta: &PolicyParams,
    ) -> Result<(GradEstimate, u64)> {
        Ok((
            GradEstimate {
                gradient: vec![0.0; ctx.policy.dims()],
                risk_estimate: f64::NAN,
                batch_size: ctx.batch_size,
                diagnostics: GradDiagnostics {
                    denominator_value: ctx.batch_size as f64,
                    used_double_sampling: false,
                },
            },
            0,
        ))
    }
}

/// RAPG with the sampled batch estimators.
pub fn run_rapg(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta0: &PolicyParams,
    config: &RapgConfig,
) -> Result<RunRecord> {
    run_rapg_with(spec, policy, theta0, config, &mut SampledGradient)
}

/// RAPG with an arbitrary gradient source.
pub fn run_rapg_with<S: GradientSource + ?Sized>(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta0: &PolicyParams,
    config: &RapgConfig,
    source: &mut S,
) -> Result<RunRecord> {
    config.validate()?;
    policy.check_mdp(spec)?;
    policy.check_params(theta0)?;
    let start = Instant::now();
    let n = config.num_iterations;
    let root = RandomStream::new(config.seed);
    let mut record = RunRecord {
        iterates: Vec::with_capacity(n + 1),
        grad_norm_sq: Vec::with_capacity(n),
        risk_estimates: Vec::with_capacity(n),
        batch_sizes: Vec::with_capacity(n),
        selected_index: 0,
        config: config.clone(),
        seed: config.seed,
        total_trajectories: 0,
        wall_time_secs: 0.0,
    };
    let mut theta = theta0.clone();
    if let Some((lo, hi)) = config.projection_box {
        theta.0.iter_mut().for_each(|t| *t = t.clamp(lo, hi));
    }
    record.iterates.push(theta.0.clone());
    let mut warned = false;

    for i in 1..=n {
        let ctx = IterationContext {
            spec,
            policy,
            risk: &config.risk,
            batch_size: config.batch_at(i),
            stream: root.derive(i as u64),
            tol: config.tol,
        };
        let (est, used) = source
            .gradient(&ctx, &theta)
            .map_err(|e| e.at_iteration(i))?;
        if est.gradient.iter().any(|g| !g.is_finite()) {
            record.wall_time_secs = start.elapsed().as_secs_f64();
            return Err(Error::NonFiniteGradient {
                iteration: i,
                record: Box::new(record),
            });
        }
        let eta = config.step_at(i);
        for (t, g) in theta.0.iter_mut().zip(&est.gradient) {
            *t -= eta * g;
        }
        if let Some((lo, hi)) = config.projection_box {
            theta.0.iter_mut().for_each(|t| *t = t.clamp(lo, hi));
        }
        if !warned && theta.0.iter().any(|t| t.abs() > LARGE_THETA) {
            log::warn!("iteration {i}: ‖θ‖∞ exceeds {LARGE_THETA}; consider a projection box");
            warned = true;
        }
        record.grad_norm_sq.push(est.norm_sq());
        record.risk_estimates.push(est.risk_estimate);
        record.batch_sizes.push(ctx.batch_size);
        record.total_trajectories += used;
        record.iterates.push(theta.0.clone());
    }
    record.selected_index = root.derive(SELECT_TAG).substream(0).gen_range(1..=n);
    record.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityPoint {
    pub num_iterations: usize,
    /// Mean over seeds of the exact ‖∇h(θ_R)‖².
    pub mean_grad_norm_sq: f64,
    /// Half-width of the normal 95% interval of the mean.
    pub ci_half_width: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub risk: RiskSpec,
    pub num_seeds: usize,
    pub points: Vec<StationarityPoint>,
    /// Least-squares slope of log mean ‖∇h(θ_R)‖² against log N; `None`
    /// with fewer than two grid points or a zero mean.
    pub slope: Option<f64>,
}

/// Runs RAPG for every `N` in `n_grid` and every seed, and summarises the
/// exact squared gradient norm at the selected iterates.
///
/// Seeds are derived from `config.seed`; step and batch schedules left at
/// their defaults follow each `N`.
pub fn stationarity_report(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta0: &PolicyParams,
    config: &RapgConfig,
    num_seeds: usize,
    n_grid: &[usize],
) -> Result<StationarityReport> {
    stationarity_report_with(spec, policy, theta0, config, num_seeds, n_grid, || {
        SampledGradient
    })
}

pub fn stationarity_report_with<S, F>(
    spec: &MdpSpec,
    policy: &PolicySpec,
    theta0: &PolicyParams,
    config: &RapgConfig,
    num_seeds: usize,
    n_grid: &[usize],
    make_source: F,
) -> Result<StationarityReport>
where
    S: GradientSource,
    F: Fn() -> S + Sync,
{
    if num_seeds == 0 || n_grid.is_empty() {
        return Err(Error::Argument("need at least one seed and one N".into()));
    }
    let base = RandomStream::new(config.seed);
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let per_seed = (0..num_seeds)
            .into_par_iter()
            .map(|k| {
                let mut cfg = config.clone();
                cfg.num_iterations = n;
                cfg.seed = base.derive(k as u64).key();
                let rec = run_rapg_with(spec, policy, theta0, &cfg, &mut make_source())?;
                let g = exact_gradient(&cfg.risk, spec, policy, &rec.selected(), cfg.tol)?;
                Ok(g.iter().map(|x| x * x).sum::<f64>())
            })
            .collect::<Result<Vec<f64>>>()?;
        let k = per_seed.len() as f64;
        let mean = per_seed.iter().sum::<f64>() / k;
        let var = if per_seed.len() > 1 {
            per_seed.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        points.push(StationarityPoint {
            num_iterations: n,
            mean_grad_norm_sq: mean,
            ci_half_width: 1.96 * (var / k).sqrt(),
            per_seed,
        });
    }
    let slope =
        (points.len() >= 2 && points.iter().all(|p| p.mean_grad_norm_sq > 0.0)).then(|| {
            let xs: Vec<f64> = points
                .iter()
                .map(|p| (p.num_iterations as f64).ln())
                .collect();
            let ys: Vec<f64> = points.iter().map(|p| p.mean_grad_norm_sq.ln()).collect();
            crate::oracle::least_squares_slope(&xs, &ys)
        });
    Ok(StationarityReport {
        risk: config.risk,
        num_seeds,
        points,
        slope,
    })
}
