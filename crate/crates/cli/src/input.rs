use std::fs;
use std::path::Path;

use rand::Rng;
use riskpg::envs::catalog_entry;
use riskpg::mdp::MdpFile;
use riskpg::{DiscreteDist, MdpSpec, PolicyParams, PolicySpec, RandomStream, RiskSpec};

use crate::args::{ModelArgs, PolicyKind};
use crate::error::{CliError, CliResult};

pub fn parse_risk_spec(text: &str) -> CliResult<RiskSpec> {
    text.parse::<RiskSpec>().map_err(|e| match e {
        riskpg::Error::Parse(msg) => CliError::Parse(format!("risk spec '{text}': {msg}")),
        other => CliError::Parse(format!("risk spec '{text}': {other}")),
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Non-empty lines with comments stripped, paired with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_real(token: &str, path: &Path, line: usize) -> CliResult<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| {
            CliError::Parse(format!(
                "{}:{line}: '{token}' is not a finite real",
                path.display()
            ))
        })
}

pub fn read_samples(path: &Path, negate: bool) -> CliResult<Vec<f64>> {
    let text = read_text(path)?;
    let sign = if negate { -1.0 } else { 1.0 };
    let samples = data_lines(&text)
        .map(|(n, line)| parse_real(line, path, n).map(|x| sign * x))
        .collect::<CliResult<Vec<f64>>>()?;
    if samples.is_empty() {
        return Err(CliError::Parse(format!("{}: no samples", path.display())));
    }
    Ok(samples)
}

pub fn read_dist(path: &Path, negate: bool) -> CliResult<DiscreteDist> {
    let text = read_text(path)?;
    let sign = if negate { -1.0 } else { 1.0 };
    let atoms = data_lines(&text)
        .map(|(n, line)| {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(CliError::Parse(format!(
                    "{}:{n}: expected 'value probability'",
                    path.display()
                )));
            }
            Ok((
                sign * parse_real(fields[0], path, n)?,
                parse_real(fields[1], path, n)?,
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(DiscreteDist::new(atoms)?)
}

pub struct Model {
    pub spec: MdpSpec,
    pub policy: PolicySpec,
}

pub fn load_model_from(
    mdp: Option<&Path>,
    env: Option<&str>,
    policy: PolicyKind,
    reward_mode: bool,
) -> CliResult<Model> {
    let (spec, features) = match (mdp, env) {
        (Some(path), None) => {
            let file = MdpFile::parse(&read_text(path)?)?;
            (file.to_spec()?, file.feature_policy()?)
        }
        (None, Some(name)) => (catalog_entry(name)?.spec, None),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --mdp and --env".into(),
            ))
        }
    };
    let policy = match policy {
        PolicyKind::Tabular => PolicySpec::tabular_for(&spec),
        PolicyKind::Feature => features.ok_or_else(|| {
            CliError::Usage("--policy feature needs an MDP file with a feature map".into())
        })?,
    };
    let spec = if reward_mode { spec.negated() } else { spec };
    Ok(Model { spec, policy })
}

pub fn load_model(args: &ModelArgs) -> CliResult<Model> {
    load_model_from(
        args.source.mdp.as_deref(),
        args.source.env.as_deref(),
        args.policy,
        args.reward_mode,
    )
}

/// θ uniform on [-1, 1]^d from `seed`, or zero.
pub fn make_theta(policy: &PolicySpec, seed: Option<u64>) -> PolicyParams {
    match seed {
        None => PolicyParams::zeros(policy.dims()),
        Some(seed) => {
            let mut rng = RandomStream::new(seed).substream(0);
            PolicyParams(
                (0..policy.dims())
                    .map(|_| rng.gen_range(-1.0..=1.0))
                    .collect(),
            )
        }
    }
}

/// Creates `dir`, failing if it already exists.
pub fn create_out_dir(dir: &Path) -> CliResult<()> {
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::create_dir(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a new file, failing if it already exists.
pub fn write_new(path: &Path, contents: &str) -> CliResult<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::io(path, e))
}
