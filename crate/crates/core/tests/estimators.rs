//! Monte Carlo checks of the batch gradient estimators against exact
//! oracles on the risky/safe bandit.

use rayon::prelude::*;

use riskpg::envs::risky_safe_bandit;
use riskpg::grad::{estimate_gradient, exact_gradient, exact_mean_gradient};
use riskpg::mdp::{sample_batch, sample_batch_from};
use riskpg::{MdpSpec, PolicyParams, PolicySpec, RandomStream, RiskSpec};

const REPS: usize = 5000;

fn setup() -> (MdpSpec, PolicySpec, PolicyParams) {
    let spec = risky_safe_bandit().unwrap();
    let policy = PolicySpec::tabular_for(&spec);
    (spec, policy, PolicyParams(vec![0.3, 0.0]))
}

/// Per-coordinate mean and standard error over `REPS` estimates at `m`.
fn monte_carlo(risk: &RiskSpec, m: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let (spec, policy, theta) = setup();
    let base = RandomStream::new(seed);
    let draws: Vec<Vec<f64>> = (0..REPS)
        .into_par_iter()
        .map(|r| {
            let s = base.derive(r as u64);
            let z = sample_batch(&spec, &policy, &theta, m, &s).unwrap();
            let hat = risk
                .is_double_sampled()
                .then(|| sample_batch_from(&spec, &policy, &theta, m, &s, m as u64).unwrap());
            estimate_gradient(risk, &z, hat.as_deref(), &theta, &policy, &spec, 1e-10)
                .unwrap()
                .gradient
        })
        .collect();
    let n = REPS as f64;
    let d = draws[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|c| draws.iter().map(|g| g[c]).sum::<f64>() / n)
        .collect();
    let se = (0..d)
        .map(|c| {
            (draws.iter().map(|g| (g[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        })
        .collect();
    (mean, se)
}

fn assert_within(mean: &[f64], se: &[f64], target: &[f64], slack: f64) {
    for c in 0..mean.len() {
        let dev = (mean[c] - target[c]).abs();
        assert!(
            dev <= 4.0 * se[c] + slack,
            "coordinate {c}: mean {} vs {} (se {}, slack {slack})",
            mean[c],
            target[c],
            se[c]
        );
    }
}

#[test]
fn identity_ubsr_matches_vanilla_gradient() {
    let (spec, policy, theta) = setup();
    let risk: RiskSpec = "ubsr:loss=identity,lambda=0".parse().unwrap();
    let vanilla = exact_mean_gradient(&spec, &policy, &theta).unwrap();
    let (mean, se) = monte_carlo(&risk, 200, 1);
    assert_within(&mean, &se, &vanilla, 0.0);
}

#[test]
fn cvar_oce_matches_exact_gradient() {
    let (spec, policy, theta) = setup();
    let risk: RiskSpec = "oce:loss=cvar:alpha=0.5".parse().unwrap();
    let exact = exact_gradient(&risk, &spec, &policy, &theta, 1e-13).unwrap();
    let (mean, se) = monte_carlo(&risk, 200, 2);
    assert_within(&mean, &se, &exact, 0.0);
}

#[test]
fn small_beta_entropic_approaches_vanilla_gradient() {
    let (spec, policy, theta) = setup();
    let risk: RiskSpec = "ubsr:loss=entropic:beta=0.01,lambda=1".parse().unwrap();
    let vanilla = exact_mean_gradient(&spec, &policy, &theta).unwrap();
    let exact = exact_gradient(&risk, &spec, &policy, &theta, 1e-13).unwrap();
    let gap = vanilla
        .iter()
        .zip(&exact)
        .fold(0.0f64, |a, (v, e)| a.max((v - e).abs()));
    assert!(
        gap < 0.1,
        "exact entropic gradient is {gap} from the mean gradient"
    );
    let (mean, se) = monte_carlo(&risk, 200, 3);
    assert_within(&mean, &se, &vanilla, gap);
}

#[test]
fn symmetric_bandit_has_antisymmetric_expectile_gradient() {
    let spec = riskpg::envs::make_two_arm_bandit(
        1.0,
        riskpg::DiscreteDist::new([(0.0, 0.5), (2.0, 0.5)]).unwrap(),
    )
    .unwrap();
    let policy = PolicySpec::tabular_for(&spec);
    let theta = PolicyParams::zeros(2);
    let risk = RiskSpec::expectile(0.5).unwrap();
    let g = exact_gradient(&risk, &spec, &policy, &theta, 1e-13).unwrap();
    assert!((g[0] + g[1]).abs() < 1e-12, "{g:?}");
}
