use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::Serialize;

use riskpg::envs::catalog;
use riskpg::grad::{estimate_gradient, exact_gradient, exact_risk};
use riskpg::mdp::{
    return_distribution, sample_batch, sample_batch_from, sample_trajectory, MdpFile,
};
use riskpg::oracle::{finite_difference_gradient, mse_curve, MseCurve};
use riskpg::rapg::{run_rapg, stationarity_report, BatchSchedule, StepSchedule};
use riskpg::{DiscreteDist, PolicyParams, RandomStream, RapgConfig, RiskSpec, RunRecord};

use crate::args::{
    Command, EnvCommand, EstimateArgs, EstimatorKind, GradCheckArgs, MseBenchArgs, ReportArgs,
    ScheduleArgs, TrainArgs,
};
use crate::error::{CliError, CliResult};
use crate::input::{
    create_out_dir, load_model, load_model_from, make_theta, parse_risk_spec, read_dist,
    read_samples, write_new, Model,
};

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Domain(riskpg::Error::Invalid(format!("JSON encoding: {e}"))))
}

fn emit<T: Serialize>(value: &T) -> CliResult<()> {
    print!("{}", to_json(value)?);
    Ok(())
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Estimate(a) => estimate(a),
        Command::GradCheck(a) => grad_check(a),
        Command::MseBench(a) => mse_bench(a),
        Command::Train(a) => train(a),
        Command::Report(a) => report(a),
        Command::Env(EnvCommand::List) => env_list(),
        Command::Env(EnvCommand::Export { name, out }) => env_export(&name, &out),
    }
}

#[derive(Debug, Serialize)]
pub struct EstimateRecord {
    pub risk: String,
    pub spec: RiskSpec,
    pub source: &'static str,
    pub num_samples: Option<usize>,
    pub num_atoms: usize,
    pub mean: f64,
    pub value: f64,
    pub kstar: Option<f64>,
    pub residual: f64,
    pub tol: f64,
}

fn estimate(a: EstimateArgs) -> CliResult<()> {
    let risk = parse_risk_spec(&a.risk)?;
    let (source, num_samples, dist) = match (&a.data.samples, &a.data.dist) {
        (Some(path), None) => {
            let xs = read_samples(path, a.reward_mode)?;
            ("samples", Some(xs.len()), DiscreteDist::empirical(&xs)?)
        }
        (None, Some(path)) => ("dist", None, read_dist(path, a.reward_mode)?),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --samples and --dist".into(),
            ))
        }
    };
    let v = risk.evaluate(&dist, a.tol)?;
    emit(&EstimateRecord {
        risk: risk.to_string(),
        spec: risk,
        source,
        num_samples,
        num_atoms: dist.len(),
        mean: dist.mean(),
        value: v.value,
        kstar: v.kstar,
        residual: v.residual,
        tol: a.tol,
    })
}

#[derive(Debug, Serialize)]
pub struct EstimatorSummary {
    pub m: usize,
    pub replications: usize,
    pub seed: u64,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// 1.96 standard errors.
    pub ci95_half_width: Vec<f64>,
    pub max_abs_deviation: f64,
    /// Largest |mean − exact| / standard error over coordinates.
    pub max_abs_z: f64,
}

#[derive(Debug, Serialize)]
pub struct GradCheckRecord {
    pub risk: String,
    pub spec: RiskSpec,
    pub theta: Vec<f64>,
    pub exact_risk: f64,
    pub exact_gradient: Vec<f64>,
    pub fd_gradient: Vec<f64>,
    pub fd_step: f64,
    pub max_abs_fd_deviation: f64,
    pub estimator: EstimatorSummary,
}

/// One gradient estimate from `stream`, with a second batch for the
/// double-sampled families.
fn sampled_gradient(
    model: &Model,
    risk: &RiskSpec,
    theta: &PolicyParams,
    m: usize,
    stream: &RandomStream,
    tol: f64,
) -> CliResult<Vec<f64>> {
    let batch = sample_batch(&model.spec, &model.policy, theta, m, stream)?;
    let hat = if risk.is_double_sampled() {
        Some(sample_batch_from(
            &model.spec,
            &model.policy,
            theta,
            m,
            stream,
            m as u64,
        )?)
    } else {
        None
    };
    let est = estimate_gradient(
        risk,
        &batch,
        hat.as_deref(),
        theta,
        &model.policy,
        &model.spec,
        tol,
    )?;
    Ok(est.gradient)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

fn grad_check(a: GradCheckArgs) -> CliResult<()> {
    let risk = parse_risk_spec(&a.risk)?;
    let model = load_model(&a.model)?;
    if a.replications < 2 {
        return Err(CliError::Usage("--replications must be at least 2".into()));
    }
    let theta = make_theta(&model.policy, a.theta_seed);
    let h = exact_risk(&risk, &model.spec, &model.policy, &theta, a.tol)?;
    let exact = exact_gradient(&risk, &model.spec, &model.policy, &theta, a.tol)?;
    let fd = finite_difference_gradient(
        |t| {
            exact_risk(
                &risk,
                &model.spec,
                &model.policy,
                &PolicyParams(t.to_vec()),
                a.tol,
            )
        },
        &theta.0,
        a.fd_step,
    )?;

    let base = RandomStream::new(a.seed);
    let draws = (0..a.replications)
        .map(|r| sampled_gradient(&model, &risk, &theta, a.m, &base.derive(r as u64), a.tol))
        .collect::<CliResult<Vec<_>>>()?;
    let n = a.replications as f64;
    let d = exact.len();
    let mean: Vec<f64> = (0..d)
        .map(|c| draws.iter().map(|g| g[c]).sum::<f64>() / n)
        .collect();
    let std_error: Vec<f64> = (0..d)
        .map(|c| {
            let var = draws.iter().map(|g| (g[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    let max_abs_z = (0..d)
        .map(|c| {
            let dev = (mean[c] - exact[c]).abs();
            if std_error[c] > 0.0 {
                dev / std_error[c]
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);

    emit(&GradCheckRecord {
        risk: risk.to_string(),
        spec: risk,
        theta: theta.0.clone(),
        exact_risk: h,
        max_abs_fd_deviation: max_abs_diff(&exact, &fd),
        fd_gradient: fd,
        fd_step: a.fd_step,
        estimator: EstimatorSummary {
            m: a.m,
            replications: a.replications,
            seed: a.seed,
            max_abs_deviation: max_abs_diff(&mean, &exact),
            ci95_half_width: std_error.iter().map(|s| 1.96 * s).collect(),
            mean,
            std_error,
            max_abs_z,
        },
        exact_gradient: exact,
    })
}

#[derive(Debug, Serialize)]
pub struct MseSummary {
    pub estimator: &'static str,
    pub risk: String,
    pub spec: RiskSpec,
    pub seed: u64,
    pub truth: Vec<f64>,
    pub curve: MseCurve,
}

fn mse_bench(a: MseBenchArgs) -> CliResult<()> {
    let risk = parse_risk_spec(&a.risk)?;
    let stream = RandomStream::new(a.seed);
    let tol = a.tol;
    let (name, truth, curve) = match (a.estimator, &a.dist) {
        (EstimatorKind::Risk, Some(path)) => {
            let dist = read_dist(path, a.reward_mode)?;
            let truth = vec![risk.exact(&dist, tol)?];
            let curve = mse_curve(
                "risk",
                |m, rng| {
                    let xs: Vec<f64> = (0..m).map(|_| dist.quantile_draw(rng.gen())).collect();
                    Ok(vec![risk.empirical(&xs, tol)?])
                },
                &truth,
                &a.m_list,
                a.replications,
                &stream,
            )?;
            ("risk", truth, curve)
        }
        (EstimatorKind::Gradient, Some(_)) => {
            return Err(CliError::Usage(
                "the gradient estimator needs --mdp or --env".into(),
            ))
        }
        (kind, None) => {
            let model =
                load_model_from(a.mdp.as_deref(), a.env.as_deref(), a.policy, a.reward_mode)?;
            let theta = make_theta(&model.policy, a.theta_seed);
            match kind {
                EstimatorKind::Risk => {
                    let law = return_distribution(&model.spec, &model.policy, &theta)?;
                    let truth = vec![risk.exact(&law, tol)?];
                    let gamma = model.spec.gamma();
                    let curve = mse_curve(
                        "risk",
                        |m, rng| {
                            let xs = (0..m)
                                .map(|_| {
                                    sample_trajectory(&model.spec, &model.policy, &theta, rng)
                                        .map(|t| t.discounted_cost(gamma))
                                })
                                .collect::<riskpg::Result<Vec<f64>>>()?;
                            Ok(vec![risk.empirical(&xs, tol)?])
                        },
                        &truth,
                        &a.m_list,
                        a.replications,
                        &stream,
                    )?;
                    ("risk", truth, curve)
                }
                EstimatorKind::Gradient => {
                    let truth = exact_gradient(&risk, &model.spec, &model.policy, &theta, tol)?;
                    let curve = mse_curve(
                        "gradient",
                        |m, rng| {
                            sampled_gradient(
                                &model,
                                &risk,
                                &theta,
                                m,
                                &RandomStream::new(rng.gen()),
                                tol,
                            )
                            .map_err(|e| riskpg::Error::Oracle(e.to_string()))
                        },
                        &truth,
                        &a.m_list,
                        a.replications,
                        &stream,
                    )?;
                    ("gradient", truth, curve)
                }
            }
        }
    };

    create_out_dir(&a.out_dir)?;
    let mut csv = Vec::new();
    curve
        .write_csv(&mut csv)
        .map_err(|e| CliError::io(&a.out_dir, e))?;
    write_new(&a.out_dir.join("mse.csv"), &String::from_utf8_lossy(&csv))?;
    let summary = MseSummary {
        estimator: name,
        risk: risk.to_string(),
        spec: risk,
        seed: a.seed,
        truth,
        curve,
    };
    write_new(&a.out_dir.join("summary.json"), &to_json(&summary)?)?;
    emit(&summary)
}

fn apply_schedule(cfg: &mut RapgConfig, s: &ScheduleArgs) {
    if let Some(eta) = s.eta {
        cfg.step_size = Some(StepSchedule::Constant { eta });
    }
    if let (Some(scale), Some(exponent)) = (s.eta_scale, s.eta_exponent) {
        cfg.step_size = Some(StepSchedule::PowerLaw { scale, exponent });
    }
    if let Some(m) = s.batch {
        cfg.batch_size = Some(BatchSchedule::Constant { m });
    }
    if s.project.is_some() {
        cfg.projection_box = s.project;
    }
    cfg.tol = s.tol;
}

fn trace_csv(record: &RunRecord) -> String {
    let mut out = String::from("iteration,risk_estimate,grad_norm_sq,batch_size\n");
    for (i, ((r, g), m)) in record
        .risk_estimates
        .iter()
        .zip(&record.grad_norm_sq)
        .zip(&record.batch_sizes)
        .enumerate()
    {
        out.push_str(&format!("{i},{r},{g},{m}\n"));
    }
    out
}

fn write_run(dir: &Path, record: &RunRecord) -> CliResult<()> {
    write_new(&dir.join("run_record.json"), &to_json(record)?)?;
    write_new(&dir.join("trace.csv"), &trace_csv(record))
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub out_dir: String,
    pub risk: String,
    pub num_iterations: usize,
    pub selected_index: usize,
    pub selected_theta: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub total_trajectories: u64,
}

fn train(a: TrainArgs) -> CliResult<()> {
    let risk = parse_risk_spec(&a.risk)?;
    let model = load_model(&a.model)?;
    let mut cfg = RapgConfig::new(risk, a.iterations, a.seed);
    apply_schedule(&mut cfg, &a.schedule);
    cfg.validate()?;
    let theta0 = PolicyParams::zeros(model.policy.dims());
    create_out_dir(&a.out_dir)?;
    let record = match run_rapg(&model.spec, &model.policy, &theta0, &cfg) {
        Ok(r) => r,
        Err(riskpg::Error::NonFiniteGradient { iteration, record }) => {
            write_run(&a.out_dir, &record)?;
            return Err(riskpg::Error::NonFiniteGradient { iteration, record }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_run(&a.out_dir, &record)?;
    emit(&TrainSummary {
        out_dir: a.out_dir.display().to_string(),
        risk: risk.to_string(),
        num_iterations: record.num_iterations(),
        selected_index: record.selected_index,
        selected_theta: record.selected().0,
        final_theta: record.iterates.last().cloned().unwrap_or_default(),
        total_trajectories: record.total_trajectories,
    })
}

fn report(a: ReportArgs) -> CliResult<()> {
    let risk = parse_risk_spec(&a.risk)?;
    let model = load_model(&a.model)?;
    let first = *a
        .n_grid
        .first()
        .ok_or_else(|| CliError::Usage("--n-grid is empty".into()))?;
    let mut cfg = RapgConfig::new(risk, first, a.seed);
    cfg.tol = a.tol;
    let theta0 = PolicyParams::zeros(model.policy.dims());
    let rep = stationarity_report(
        &model.spec,
        &model.policy,
        &theta0,
        &cfg,
        a.seeds,
        &a.n_grid,
    )?;
    create_out_dir(&a.out_dir)?;
    let mut csv = String::from("num_iterations,mean_grad_norm_sq,ci_half_width\n");
    for p in &rep.points {
        csv.push_str(&format!(
            "{},{},{}\n",
            p.num_iterations, p.mean_grad_norm_sq, p.ci_half_width
        ));
    }
    write_new(&a.out_dir.join("stationarity.csv"), &csv)?;
    write_new(&a.out_dir.join("report.json"), &to_json(&rep)?)?;
    emit(&rep)
}

#[derive(Debug, Serialize)]
pub struct PreferenceRecord {
    pub risk: String,
    pub preferred_action: usize,
}

#[derive(Debug, Serialize)]
pub struct EnvRecord {
    pub name: &'static str,
    pub params: BTreeMap<&'static str, f64>,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub preferences: Vec<PreferenceRecord>,
}

fn env_list() -> CliResult<()> {
    let list: Vec<EnvRecord> = catalog()?
        .into_iter()
        .map(|e| EnvRecord {
            name: e.name,
            params: e.params.iter().copied().collect(),
            num_states: e.spec.num_states(),
            num_actions: e.spec.num_actions(),
            horizon: e.spec.horizon(),
            gamma: e.spec.gamma(),
            preferences: e
                .preferences
                .iter()
                .map(|p| PreferenceRecord {
                    risk: p.risk.to_string(),
                    preferred_action: p.preferred_action,
                })
                .collect(),
        })
        .collect();
    emit(&list)
}

fn env_export(name: &str, out: &Path) -> CliResult<()> {
    let entry = riskpg::envs::catalog_entry(name)?;
    let text = MdpFile::from_spec(&entry.spec, None).to_toml_string()?;
    write_new(out, &text)
}
