//! Acceptance suite. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.
//!
//! Seeds are fixed constants chosen before any run.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use riskpg::envs::{self, catalog_entry};
use riskpg::grad::{
    entropic_policy_gradient, exact_gradient, exact_risk, expectile_policy_gradient,
    oce_policy_gradient, ubsr_policy_gradient,
};
use riskpg::loss::{
    make_cvar, make_entropic, make_identity, make_mean_variance, make_quadratic, LossFn,
};
use riskpg::mdp::{return_distribution, sample_batch, sample_batch_from, sample_trajectory};
use riskpg::oracle::{
    brute_force_oce, expectile_mse_bound, finite_difference_gradient, mse_curve, normal_expectile,
    tail_frequency, FD_STEP,
};
use riskpg::rapg::{run_rapg, stationarity_report};
use riskpg::risk::{
    empirical_expectile, empirical_oce, empirical_ubsr, exact_expectile, exact_oce,
};
use riskpg::{
    DiscreteDist, MdpSpec, PolicyParams, PolicySpec, RandomStream, RapgConfig, Result, RiskSpec,
};

const SEED: u64 = 20_240_601;
const EXACT_TOL: f64 = 1e-13;
const TOL: f64 = 1e-10;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn risk(text: &str) -> RiskSpec {
    text.parse().unwrap()
}

/// Criterion 1: exact gradient formulas against finite differences of the
/// exact risk map.
fn exact_gradient_formulas() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let random_a = envs::make_random_mdp(SEED + 1, 2, 2, 3, 0.9)?;
    let random_b = envs::make_random_mdp(SEED + 2, 3, 2, 2, 1.0)?;
    let features: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let cases: Vec<(&str, MdpSpec, PolicySpec)> = vec![
        (
            "random_a",
            random_a.clone(),
            PolicySpec::tabular_for(&random_a),
        ),
        (
            "random_b",
            random_b.clone(),
            PolicySpec::tabular_for(&random_b),
        ),
        (
            "random_b_features",
            random_b.clone(),
            PolicySpec::feature(3, 2, 3, features)?,
        ),
        (
            "risky_chain",
            envs::make_risky_chain(3, 2.0, 0.9)?,
            PolicySpec::tabular(3, 2),
        ),
        (
            "heavy_tail_bandit",
            catalog_entry("heavy_tail_bandit")?.spec,
            PolicySpec::tabular(1, 2),
        ),
    ];
    let risks = [
        risk("expectile:nu=0.65"),
        risk("expectile:nu=0.35"),
        risk("ubsr:loss=entropic:beta=0.5,lambda=1"),
        risk("ubsr:loss=quadratic:b=0.01,lambda=0.5"),
        risk("ubsr:loss=identity,lambda=0"),
        risk("oce:loss=cvar:alpha=0.75"),
        risk("oce:loss=meanvar:a=2"),
    ];
    let mut worst = (0.0f64, String::new());
    let mut checks = 0;
    for (name, spec, policy) in &cases {
        for _ in 0..10 {
            let theta = PolicyParams(
                (0..policy.dims())
                    .map(|_| rng.gen_range(-1.5..1.5))
                    .collect(),
            );
            for r in &risks {
                let exact = exact_gradient(r, spec, policy, &theta, EXACT_TOL)?;
                let fd = finite_difference_gradient(
                    |t| exact_risk(r, spec, policy, &PolicyParams(t.to_vec()), EXACT_TOL),
                    &theta.0,
                    FD_STEP,
                )?;
                let scale = 1.0 + exact.iter().fold(0.0f64, |a, g| a.max(g.abs()));
                let dev = exact
                    .iter()
                    .zip(&fd)
                    .fold(0.0f64, |a, (e, f)| a.max((e - f).abs()));
                let rel = dev / scale;
                if rel > worst.0 {
                    worst = (rel, format!("{name} / {r}"));
                }
                checks += 1;
            }
        }
    }
    Ok(outcome(
        worst.0 <= 1e-4,
        format!(
            "{checks} (mdp, theta, risk) checks; worst relative error {:.2e} at {}",
            worst.0, worst.1
        ),
    ))
}

type Estimator = dyn Fn(&RandomStream, usize) -> Result<Vec<f64>> + Sync;
type NamedEstimator = (String, RiskSpec, Box<Estimator>);

/// The four gradient estimators on the catalog bandit at a fixed θ.
fn bandit_estimators() -> Result<(MdpSpec, PolicySpec, PolicyParams, Vec<NamedEstimator>)> {
    let spec = envs::risky_safe_bandit()?;
    let policy = PolicySpec::tabular_for(&spec);
    let theta = PolicyParams(vec![0.3, 0.0]);
    let mk = |r: &str| -> (String, RiskSpec) { (r.to_string(), risk(r)) };
    let mut out: Vec<NamedEstimator> = Vec::new();

    let (name, r) = mk("expectile:nu=0.65");
    let (s, p, t) = (spec.clone(), policy.clone(), theta.clone());
    out.push((
        name,
        r,
        Box::new(move |stream, m| {
            let z = sample_batch(&s, &p, &t, m, stream)?;
            Ok(expectile_policy_gradient(&z, 0.65, &t, &p, &s, TOL)?.gradient)
        }),
    ));

    let (name, r) = mk("ubsr:loss=quadratic:b=0.01,lambda=0.5");
    let (s, p, t) = (spec.clone(), policy.clone(), theta.clone());
    let q = make_quadratic(0.01)?;
    out.push((
        name,
        r,
        Box::new(move |stream, m| {
            let z = sample_batch(&s, &p, &t, m, stream)?;
            let zh = sample_batch_from(&s, &p, &t, m, stream, m as u64)?;
            Ok(ubsr_policy_gradient(&z, &zh, &q, 0.5, &t, &p, &s, TOL)?.gradient)
        }),
    ));

    let (name, r) = mk("ubsr:loss=entropic:beta=0.5,lambda=1");
    let (s, p, t) = (spec.clone(), policy.clone(), theta.clone());
    out.push((
        name,
        r,
        Box::new(move |stream, m| {
            let z = sample_batch(&s, &p, &t, m, stream)?;
            Ok(entropic_policy_gradient(&z, 0.5, &t, &p, &s, TOL)?.gradient)
        }),
    ));

    let (name, r) = mk("oce:loss=meanvar:a=2");
    let (s, p, t) = (spec.clone(), policy.clone(), theta.clone());
    let mv = make_mean_variance(2.0)?;
    out.push((
        name,
        r,
        Box::new(move |stream, m| {
            let z = sample_batch(&s, &p, &t, m, stream)?;
            let zh = sample_batch_from(&s, &p, &t, m, stream, m as u64)?;
            Ok(oce_policy_gradient(&z, &zh, &mv, &t, &p, &s, TOL)?.gradient)
        }),
    ));
    Ok((spec, policy, theta, out))
}

/// Criterion 2: mean of 5000 estimates at m = 1000 within 4σ of the exact
/// gradient, per coordinate.
fn estimator_consistency() -> Result<Outcome> {
    let (spec, policy, theta, estimators) = bandit_estimators()?;
    let reps = 5000;
    let m = 1000;
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, (name, r, est)) in estimators.iter().enumerate() {
        let exact = exact_gradient(r, &spec, &policy, &theta, EXACT_TOL)?;
        let base = RandomStream::new(SEED).derive(100 + k as u64);
        let draws = (0..reps)
            .into_par_iter()
            .map(|i| est(&base.derive(i as u64), m))
            .collect::<Result<Vec<_>>>()?;
        let mut worst_z = 0.0f64;
        for c in 0..exact.len() {
            let xs: Vec<f64> = draws.iter().map(|g| g[c]).collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
            let z = (mean - exact[c]).abs() / (var / reps as f64).sqrt();
            worst_z = worst_z.max(z);
        }
        passed &= worst_z <= 4.0;
        parts.push(format!("{name}: max |z| = {worst_z:.2}"));
    }
    Ok(outcome(passed, parts.join("; ")))
}

fn slope_ok(s: Option<f64>) -> bool {
    s.is_some_and(|s| (s + 1.0).abs() <= 0.15)
}

fn normal_samples(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| rng.sample(StandardNormal)).collect()
}

/// Criterion 3: log-log MSE slopes.
fn mse_rates() -> Result<Outcome> {
    let m_list = [100, 1000, 10_000];
    let reps = 2000;
    let mut passed = true;
    let mut parts = Vec::new();

    let nu = 0.65;
    let (xi, _) = normal_expectile(nu)?;
    let curve = mse_curve(
        "expectile/gaussian",
        |m, rng| Ok(vec![empirical_expectile(&normal_samples(rng, m), nu, TOL)?]),
        &[xi],
        &m_list,
        reps,
        &RandomStream::new(SEED).derive(1),
    )?;
    passed &= slope_ok(curve.slope_value());
    parts.push(format!(
        "(a) gaussian expectile {:.3}",
        curve.slope_value().unwrap_or(f64::NAN)
    ));

    let chain = envs::markov_cost_process()?;
    let one = PolicySpec::tabular_for(&chain);
    let theta0 = PolicyParams::zeros(one.dims());
    let truth = exact_expectile(&return_distribution(&chain, &one, &theta0)?, nu, EXACT_TOL)?;
    let curve = mse_curve(
        "expectile/markov",
        |m, rng| {
            let returns = (0..m)
                .map(|_| {
                    Ok(sample_trajectory(&chain, &one, &theta0, rng)?
                        .discounted_cost(chain.gamma()))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(vec![empirical_expectile(&returns, nu, TOL)?])
        },
        &[truth],
        &m_list,
        reps,
        &RandomStream::new(SEED).derive(2),
    )?;
    passed &= slope_ok(curve.slope_value());
    parts.push(format!(
        "(b) markov expectile {:.3}",
        curve.slope_value().unwrap_or(f64::NAN)
    ));

    let (spec, policy, theta, estimators) = bandit_estimators()?;
    for (k, (name, r, est)) in estimators.iter().enumerate() {
        let exact = exact_gradient(r, &spec, &policy, &theta, EXACT_TOL)?;
        let curve = mse_curve(
            name,
            |m, rng| est(&RandomStream::new(rng.gen()), m),
            &exact,
            &m_list,
            reps,
            &RandomStream::new(SEED).derive(10 + k as u64),
        )?;
        passed &= slope_ok(curve.slope_value());
        parts.push(format!(
            "(c) {name} {:.3}",
            curve.slope_value().unwrap_or(f64::NAN)
        ));
    }
    Ok(outcome(passed, format!("slopes: {}", parts.join(", "))))
}

/// Criterion 4: empirical expectile MSE on standard normal samples below
/// the explicit bound at every m.
fn expectile_constant() -> Result<Outcome> {
    let m_list = [100, 1000, 10_000];
    let mut passed = true;
    let mut parts = Vec::new();
    for (k, nu) in [0.35, 0.5, 0.65, 0.9].into_iter().enumerate() {
        let (xi, second) = normal_expectile(nu)?;
        let curve = mse_curve(
            "expectile/gaussian",
            |m, rng| Ok(vec![empirical_expectile(&normal_samples(rng, m), nu, TOL)?]),
            &[xi],
            &m_list,
            2000,
            &RandomStream::new(SEED).derive(40 + k as u64),
        )?;
        for p in &curve.points {
            let bound = expectile_mse_bound(nu, p.m, second);
            let ok = p.mse < bound;
            passed &= ok;
            parts.push(format!(
                "nu={nu} m={}: mse/bound = {:.3}{}",
                p.m,
                p.mse / bound,
                if ok { "" } else { " (above)" }
            ));
        }
    }
    Ok(outcome(passed, parts.join("; ")))
}

/// Criterion 5: risk-measure identities.
fn risk_identities() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut failures = Vec::new();

    // CVaR OCE against grid minimization, exact and empirical
    let (lo, hi, n) = (-15.0, 25.0, 400_001);
    let pitch = (hi - lo) / (n - 1) as f64;
    let mut worst_grid = 0.0f64;
    for _ in 0..20 {
        let alpha = rng.gen_range(0.1..0.95);
        let cvar = make_cvar(alpha)?;
        let atoms: Vec<(f64, f64)> = (0..6)
            .map(|_| (rng.gen_range(-8.0..8.0), rng.gen_range(0.1..1.0)))
            .collect();
        let d = DiscreteDist::from_weights(atoms)?;
        let (bf, _) = brute_force_oce(&d, &cvar, lo, hi, n)?;
        let (ex, _) = exact_oce(&d, &cvar, TOL)?;
        let samples: Vec<f64> = (0..40).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let emp_dist = DiscreteDist::empirical(&samples)?;
        let (bf_e, _) = brute_force_oce(&emp_dist, &cvar, lo, hi, n)?;
        let (em, _) = empirical_oce(&samples, &cvar, TOL)?;
        for (a, b) in [(bf, ex), (bf_e, em)] {
            let dev = (a - b).abs() / (1.0 + b.abs());
            worst_grid = worst_grid.max(dev);
            if dev > pitch {
                failures.push(format!("cvar oce grid {a} vs root {b}"));
            }
        }
    }

    // cash additivity and expectile translation / homogeneity
    let losses: Vec<(LossFn, f64)> = vec![
        (make_entropic(0.5)?, 1.0),
        (make_entropic(2.0)?, 3.0),
        (make_quadratic(0.01)?, 0.5),
        (make_identity()?, 0.0),
        (make_mean_variance(2.0)?, 0.2),
    ];
    let mut worst_cash = 0.0f64;
    let mut worst_exp = 0.0f64;
    for i in 0..200 {
        let m = rng.gen_range(1..60);
        let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c = rng.gen_range(-20.0..20.0);
        let a = rng.gen_range(0.05..20.0);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| a * x).collect();
        let (loss, lambda) = &losses[i % losses.len()];
        let base = empirical_ubsr(&xs, loss, *lambda, TOL)?;
        let moved = empirical_ubsr(&shifted, loss, *lambda, TOL)?;
        worst_cash = worst_cash.max((moved - base - c).abs());
        let nu = rng.gen_range(0.02..0.98);
        let e = empirical_expectile(&xs, nu, TOL)?;
        let e_shift = empirical_expectile(&shifted, nu, TOL)?;
        let e_scale = empirical_expectile(&scaled, nu, TOL)?;
        worst_exp = worst_exp
            .max((e_shift - e - c).abs())
            .max((e_scale - a * e).abs());
    }
    if worst_cash > 2.0 * TOL {
        failures.push(format!("ubsr cash additivity off by {worst_cash:.2e}"));
    }
    if worst_exp > 2.0 * TOL {
        failures.push(format!(
            "expectile translation/homogeneity off by {worst_exp:.2e}"
        ));
    }

    // ν = 0.5 expectile is the sample mean
    let mut worst_mean = 0.0f64;
    for _ in 0..200 {
        let m = rng.gen_range(1..500);
        let xs: Vec<f64> = (0..m).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let mean = xs.iter().sum::<f64>() / m as f64;
        worst_mean = worst_mean.max((empirical_expectile(&xs, 0.5, TOL)? - mean).abs());
    }
    if worst_mean > 1e-10 {
        failures.push(format!(
            "nu = 0.5 expectile differs from mean by {worst_mean:.2e}"
        ));
    }
    Ok(outcome(
        failures.is_empty(),
        format!(
            "oce grid rel dev {worst_grid:.2e} (pitch {pitch:.1e}); cash {worst_cash:.1e}; \
             translation/homogeneity {worst_exp:.1e}; mean {worst_mean:.1e}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; FAILURES: {}", failures.join(", "))
            }
        ),
    ))
}

/// Criterion 6: RAPG end-to-end on the risky/safe bandit.
fn rapg_end_to_end() -> Result<Outcome> {
    let entry = catalog_entry("risky_safe_bandit")?;
    let policy = PolicySpec::tabular_for(&entry.spec);
    let mut passed = true;
    let mut parts = Vec::new();
    for nu in [0.65, 0.35] {
        let r = RiskSpec::expectile(nu)?;
        let arm_risks = entry.risk_by_first_action(&r)?;
        let preferred = if arm_risks[0] < arm_risks[1] { 0 } else { 1 };
        let mut hits = 0;
        let mut probs = Vec::new();
        for k in 0..5u64 {
            let cfg = RapgConfig::new(r, 10_000, SEED + k);
            let rec = run_rapg(&entry.spec, &policy, &PolicyParams::zeros(2), &cfg)?;
            let last = PolicyParams(rec.iterates.last().unwrap().clone());
            let p = policy.action_probs(&last, 0)?[preferred];
            let p_r = policy.action_probs(&rec.selected(), 0)?[preferred];
            if p >= 0.9 {
                hits += 1;
            }
            probs.push(format!("{p:.3}/{p_r:.3}"));
        }
        passed &= hits >= 4;
        parts.push(format!(
            "nu={nu}: oracle arm {preferred} (risks {:.3} vs {:.3}), {hits}/5 seeds >= 0.9 [final/theta_R: {}]",
            arm_risks[0],
            arm_risks[1],
            probs.join(" ")
        ));
    }
    Ok(outcome(passed, parts.join("; ")))
}

/// Criterion 7: mean exact ‖∇h(θ_R)‖² drops by a factor ≥ 2 from N = 100
/// to N = 1600.
fn stationarity_decay() -> Result<Outcome> {
    let entry = catalog_entry("risky_safe_bandit")?;
    let policy = PolicySpec::tabular_for(&entry.spec);
    let mut passed = true;
    let mut parts = Vec::new();
    for r in [
        risk("expectile:nu=0.65"),
        risk("ubsr:loss=entropic:beta=0.5,lambda=1"),
        risk("oce:loss=meanvar:a=2"),
    ] {
        let cfg = RapgConfig::new(r, 100, SEED);
        let report = stationarity_report(
            &entry.spec,
            &policy,
            &PolicyParams::zeros(2),
            &cfg,
            20,
            &[100, 400, 1600],
        )?;
        let first = report.points[0].mean_grad_norm_sq;
        let last = report.points[2].mean_grad_norm_sq;
        let ratio = first / last;
        passed &= ratio >= 2.0;
        parts.push(format!(
            "{}: {first:.3e} -> {:.3e} -> {last:.3e} (x{ratio:.1})",
            r.family(),
            report.points[1].mean_grad_norm_sq
        ));
    }
    Ok(outcome(passed, parts.join("; ")))
}

/// Criterion 8: tail frequencies of the expectile estimator on a doubling
/// ε grid. Nonincreasing in m at each ε; at each m strictly decreasing in ε,
/// convex in ε (secant slopes nondecreasing), and with successive doubling
/// ratios below 1 and decreasing.
fn concentration_shape() -> Result<Outcome> {
    let nu = 0.65;
    let (xi, second) = normal_expectile(nu)?;
    let eps0 = 0.25 * expectile_mse_bound(nu, 100, second).sqrt();
    let eps: Vec<f64> = (0..4).map(|k| eps0 * 2f64.powi(k)).collect();
    let reps = 20_000;
    let stream = RandomStream::new(SEED).derive(8);
    let mut table = Vec::new();
    for m in [100, 400, 1600] {
        let freq = tail_frequency(
            |m, rng| empirical_expectile(&normal_samples(rng, m), nu, TOL),
            xi,
            m,
            &eps,
            reps,
            &stream,
        )?;
        table.push((m, freq.into_iter().map(|f| f.1).collect::<Vec<f64>>()));
    }
    let mut failures = Vec::new();
    for k in 0..eps.len() {
        for w in table.windows(2) {
            if w[1].1[k] > w[0].1[k] {
                failures.push(format!(
                    "eps {:.3}: m {} -> {} increases",
                    eps[k], w[0].0, w[1].0
                ));
            }
        }
    }
    // shape checks need a resolved tail; use the smallest m
    let f = &table[0].1;
    if f.windows(2).any(|w| w[1] >= w[0]) {
        failures.push("not strictly decreasing in eps".into());
    }
    let slopes: Vec<f64> = (1..eps.len())
        .map(|k| (f[k] - f[k - 1]) / (eps[k] - eps[k - 1]))
        .collect();
    if slopes.windows(2).any(|w| w[1] < w[0]) {
        failures.push(format!("secant slopes {slopes:?} not nondecreasing"));
    }
    let ratios: Vec<f64> = (1..eps.len()).map(|k| f[k] / f[k - 1]).collect();
    if ratios.iter().any(|r| !(*r < 1.0)) || ratios.windows(2).any(|w| w[1] >= w[0]) {
        failures.push(format!(
            "doubling ratios {ratios:?} not below 1 and decreasing"
        ));
    }
    let rows: Vec<String> = table
        .iter()
        .map(|(m, f)| {
            format!(
                "m={m}: {}",
                f.iter()
                    .map(|x| format!("{x:.4}"))
                    .collect::<Vec<_>>()
                    .join(",")
            )
        })
        .collect();
    Ok(outcome(
        failures.is_empty(),
        format!(
            "eps = {}; {}{}",
            eps.iter()
                .map(|e| format!("{e:.3}"))
                .collect::<Vec<_>>()
                .join(","),
            rows.join("; "),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; FAILURES: {}", failures.join(", "))
            }
        ),
    ))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Result<Outcome>); 8] = [
        (
            "exact gradient formulas vs finite differences",
            exact_gradient_formulas,
        ),
        (
            "estimator consistency (5000 reps, m=1000, 4 sigma)",
            estimator_consistency,
        ),
        ("MSE rates (slope -1 +- 0.15)", mse_rates),
        ("expectile MSE below explicit constant", expectile_constant),
        ("risk-measure identities", risk_identities),
        ("RAPG end-to-end on risky/safe bandit", rapg_end_to_end),
        ("stationarity decay N=100 -> 1600", stationarity_decay),
        (
            "concentration shape of expectile estimator",
            concentration_shape,
        ),
    ];
    let mut failed = Vec::new();
    println!();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = run();
        let secs = start.elapsed().as_secs_f64();
        let (passed, detail) = match res {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "{} [{}] {name} ({secs:.1}s): {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
        if !passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
