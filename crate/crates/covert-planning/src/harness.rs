//! Train / evaluate / cross-eval entry points shared by the CLI binary and
//! the examples: they load configs, run the trainer, sample evaluations, and
//! write the CSV/JSON artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    load_json, save_json, write_trace_csv, ExperimentConfig, PolicyFile,
    PolicyMeta,
};
use crate::detection::estimate_detection_probability;
use crate::gridworld::{build_gridworld, build_nominal_gridworld, build_sensor_obs_model};
use crate::hmm::build_hmm;
use crate::mdp::{
    discounted_return, sample_trajectory, soft_value_iteration, Mdp, PolicyParams, PolicyTable,
};
use crate::obs::{sample_observation, ObsModel};
use crate::trainer::{run_covert_pg, TraceRow};
use crate::{Error, Result};

/// Monte Carlo evaluation of one policy: discounted-return mean ± standard
/// error and detection probability ± binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct EvalSummary {
    pub value_mean: f64,
    pub value_se: f64,
    pub detection_mean: f64,
    pub detection_se: f64,
    pub n_samples: usize,
}

/// Samples `n_samples` trajectories under softmax(θ) and reports value and
/// detection statistics against the nominal model.
pub fn evaluate_policy(
    mdp: &Mdp,
    obs: &ObsModel,
    theta: &PolicyParams,
    nominal: &PolicyTable,
    epsilon: f64,
    horizon: usize,
    n_samples: usize,
    seed: u64,
) -> Result<EvalSummary> {
    if theta.n_states() != mdp.n_states || theta.n_actions() != mdp.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, environment is {}x{}",
            theta.n_states(),
            theta.n_actions(),
            mdp.n_states,
            mdp.n_actions
        )));
    }
    if n_samples == 0 {
        return Err(Error::EmptySamples);
    }
    let hmm_theta = build_hmm(mdp, &theta.to_table(), obs)?;
    let hmm_0 = build_hmm(mdp, nominal, obs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut returns = Vec::with_capacity(n_samples);
    let mut observations = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let run = sample_trajectory(mdp, theta, horizon, &mut rng);
        returns.push(discounted_return(&run, mdp));
        observations.push(sample_observation(obs, &run, &mut rng));
    }
    let n = n_samples as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let (detection_mean, detection_se) =
        estimate_detection_probability(&observations, &hmm_theta, &hmm_0, epsilon)?;
    Ok(EvalSummary {
        value_mean: mean,
        value_se: (var / n).sqrt(),
        detection_mean,
        detection_se,
        n_samples,
    })
}

/// Artifacts of one training run.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub first_row: TraceRow,
    pub final_row: TraceRow,
    pub final_lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub eval: EvalSummary,
    pub trace_path: PathBuf,
    pub policy_path: PathBuf,
}

/// Runs the trainer on a loaded config and writes `trace.csv` and
/// `policy.json` into `out_dir`.
pub fn cmd_train(
    config: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
    preset_name: Option<&str>,
) -> Result<TrainSummary> {
    let loaded = config.load(base_dir)?;
    let outcome = run_covert_pg(
        &loaded.mdp,
        &loaded.obs,
        &loaded.nominal_theta.to_table(),
        &config.detection,
        &config.hyper,
        &loaded.initial_theta,
        config.seed,
    )?;
    fs::create_dir_all(out_dir)?;
    let trace_path = out_dir.join("trace.csv");
    write_trace_csv(&trace_path, &outcome.trace)?;
    let policy_path = out_dir.join("policy.json");
    let slip_beta = loaded.grid.as_ref().map(|(spec, _)| spec.slip_beta);
    save_json(
        &policy_path,
        &PolicyFile::from_params(
            &outcome.theta,
            PolicyMeta {
                preset: preset_name.map(String::from),
                slip_beta,
                seed: Some(config.seed),
            },
        ),
    )?;

    let eval = evaluate_policy(
        &loaded.mdp,
        &loaded.obs,
        &outcome.theta,
        &loaded.nominal_theta.to_table(),
        config.detection.epsilon,
        config.hyper.horizon,
        4000,
        config.seed.wrapping_add(0x5eed),
    )?;
    let first_row = *outcome
        .trace
        .first()
        .expect("trainer always records at least one iteration");
    let final_row = *outcome.trace.last().unwrap();
    Ok(TrainSummary {
        first_row,
        final_row,
        final_lambda: outcome.lambda,
        converged: outcome.converged,
        iterations: outcome.trace.len(),
        eval,
        trace_path,
        policy_path,
    })
}

/// Loads a policy file and evaluates it in the configured environment,
/// optionally overriding the grid's slip β (cross-dynamics evaluation).
pub fn cmd_evaluate(
    policy_path: &Path,
    config: &ExperimentConfig,
    base_dir: &Path,
    n_samples: usize,
    seed: u64,
    slip_beta: Option<f64>,
) -> Result<EvalSummary> {
    let theta = load_json::<PolicyFile>(policy_path)?.to_params()?;
    let loaded = config.load(base_dir)?;
    let (mdp, obs, nominal_theta) = match slip_beta {
        None => (loaded.mdp, loaded.obs, loaded.nominal_theta),
        Some(beta) => {
            let (spec, sensors) = loaded.grid.as_ref().ok_or_else(|| {
                Error::InvalidConfig(
                    "slip-beta override needs a grid environment".into(),
                )
            })?;
            rebuild_with_slip(spec, sensors, beta, config.nominal_temperature)?
        }
    };
    evaluate_policy(
        &mdp,
        &obs,
        &theta,
        &nominal_theta.to_table(),
        config.detection.epsilon,
        config.hyper.horizon,
        n_samples,
        seed,
    )
}

fn rebuild_with_slip(
    spec: &crate::gridworld::GridSpec,
    sensors: &[crate::gridworld::Sensor],
    slip_beta: f64,
    temperature: f64,
) -> Result<(Mdp, ObsModel, PolicyParams)> {
    let mut spec = spec.clone();
    spec.slip_beta = slip_beta;
    spec.validate()?;
    let mdp = build_gridworld(&spec)?;
    let obs = build_sensor_obs_model(sensors, &spec)?;
    let user_mdp = build_nominal_gridworld(&spec)?;
    let nominal_theta = soft_value_iteration(&user_mdp, temperature)?;
    Ok((mdp, obs, nominal_theta))
}

/// One cross-evaluation cell: a policy (labeled by its training β) evaluated
/// under dynamics with slip β′.
#[derive(Debug, Clone)]
pub struct CrossEvalRow {
    pub policy_label: String,
    pub eval_beta: f64,
    pub summary: EvalSummary,
}

/// Evaluates each policy file under each slip β′, Table-1 style. Returns the
/// rows in (policy, β′) order and writes `cross_eval.csv` when `out_csv` is
/// given.
pub fn cmd_cross_eval(
    policy_paths: &[PathBuf],
    betas: &[f64],
    config: &ExperimentConfig,
    base_dir: &Path,
    n_samples: usize,
    seed: u64,
    out_csv: Option<&Path>,
) -> Result<Vec<CrossEvalRow>> {
    if policy_paths.is_empty() || betas.is_empty() {
        return Err(Error::InvalidConfig(
            "cross-eval needs at least one policy and one beta".into(),
        ));
    }
    let loaded = config.load(base_dir)?;
    let (spec, sensors) = loaded.grid.as_ref().ok_or_else(|| {
        Error::InvalidConfig("cross-eval needs a grid environment".into())
    })?;
    let policies: Vec<(String, PolicyParams)> = policy_paths
        .iter()
        .map(|path| -> Result<_> {
            let file = load_json::<PolicyFile>(path)?;
            let label = file
                .meta
                .slip_beta
                .map(|b| format!("{b}"))
                .unwrap_or_else(|| path.display().to_string());
            Ok((label, file.to_params()?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(policies.len() * betas.len());
    for (label, theta) in &policies {
        for &beta in betas {
            let (mdp, obs, nominal_theta) =
                rebuild_with_slip(spec, sensors, beta, config.nominal_temperature)?;
            let summary = evaluate_policy(
                &mdp,
                &obs,
                theta,
                &nominal_theta.to_table(),
                config.detection.epsilon,
                config.hyper.horizon,
                n_samples,
                seed,
            )?;
            rows.push(CrossEvalRow {
                policy_label: label.clone(),
                eval_beta: beta,
                summary,
            });
        }
    }

    if let Some(path) = out_csv {
        let mut text =
            String::from("policy_beta,eval_beta,detection,detection_se,value,value_se\n");
        for row in &rows {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.policy_label,
                row.eval_beta,
                row.summary.detection_mean,
                row.summary.detection_se,
                row.summary.value_mean,
                row.summary.value_se
            ));
        }
        fs::write(path, text)?;
    }
    Ok(rows)
}
