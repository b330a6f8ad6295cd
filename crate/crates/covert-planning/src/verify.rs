//! Verification suites behind the `verify` CLI subcommand and the
//! acceptance tests: forward-algorithm oracle equivalence, gradient
//! estimators against finite differences of exact objectives, and the
//! coin-MDP gap check.

use ndarray::{array, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hmm::{build_hmm, log_likelihood};
use crate::mdp::{sample_trajectory, Mdp, PolicyParams, PolicyTable};
use crate::obs::{sample_observation, ObsModel, ObsSequence};
use crate::oracle::{
    brute_force_observation_probability, coin_mdp_check, enumerate_runs, exact_detection_probability,
    exact_kl, exact_value, expected_constraint_gradient, expected_kl_gradient,
    expected_value_gradient, finite_difference_gradient, observation_mass,
};
use crate::{Error, Result};

/// One named check with a human-readable measurement.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Runs one of the named suites: `oracle`, `gradients`, `theorem1`, `all`.
pub fn verify_suite(suite: &str) -> Result<Vec<CheckResult>> {
    match suite {
        "oracle" => Ok(oracle_checks()),
        "gradients" => Ok(gradient_checks()),
        "theorem1" => Ok(theorem1_checks()),
        "all" => {
            let mut out = oracle_checks();
            out.extend(gradient_checks());
            out.extend(theorem1_checks());
            Ok(out)
        }
        other => Err(Error::UnknownSuite(other.to_string())),
    }
}

/// A random small MDP / policy / observation model for oracle equivalence.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Mdp, ObsModel, PolicyParams) {
    let n_states = rng.gen_range(2..=4usize);
    let n_actions = 2usize;
    let n_obs = rng.gen_range(2..=3usize);

    let mut transitions = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let support = rng.gen_range(1..=n_states.min(3));
        let mut picked = Vec::new();
        while picked.len() < support {
            let s = rng.gen_range(0..n_states);
            if !picked.contains(&s) {
                picked.push(s);
            }
        }
        let weights: Vec<f64> = (0..support).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        transitions.push(
            picked
                .into_iter()
                .zip(weights.into_iter().map(|w| w / total))
                .collect::<Vec<_>>(),
        );
    }
    let mdp = Mdp::new(
        n_states,
        n_actions,
        transitions,
        rng.gen_range(0..n_states),
        Array2::zeros((n_states, n_actions)),
        0.9,
        vec![],
    )
    .expect("random MDP is valid");

    let random_emission = |rng: &mut ChaCha8Rng, rows: usize| {
        let mut table = Array2::zeros((rows, n_obs));
        for r in 0..rows {
            loop {
                let mut sum = 0.0;
                for o in 0..n_obs {
                    // Occasional zeros exercise the out-of-support paths.
                    let v = if rng.gen_bool(0.25) {
                        0.0
                    } else {
                        rng.gen_range(0.05..1.0)
                    };
                    table[(r, o)] = v;
                    sum += v;
                }
                if sum > 0.0 {
                    for o in 0..n_obs {
                        table[(r, o)] /= sum;
                    }
                    break;
                }
            }
        }
        table
    };
    let state_emission = random_emission(rng, n_states);
    let action_emission = random_emission(rng, n_states * n_actions);
    let obs = ObsModel::new(
        n_states,
        n_actions,
        (0..n_obs).map(|o| format!("o{o}")).collect(),
        state_emission,
        action_emission,
    )
    .expect("random observation model is valid");

    let theta = Array2::from_shape_fn((n_states, n_actions), |_| rng.gen_range(-1.0..1.0));
    (mdp, obs, PolicyParams::from_table(theta).unwrap())
}

/// Forward algorithm vs exhaustive path summation on random instances, plus
/// enumeration mass checks.
fn oracle_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0bac1e);
    let mut max_err: f64 = 0.0;
    let mut compared = 0usize;
    let mut support_mismatch = 0usize;
    for _ in 0..20 {
        let (mdp, obs, theta) = random_instance(&mut rng);
        let hmm = build_hmm(&mdp, &theta.to_table(), &obs).unwrap();
        for case in 0..5 {
            let y = if case < 3 {
                let horizon = rng.gen_range(1..=3usize);
                let run = sample_trajectory(&mdp, &theta, horizon, &mut rng);
                sample_observation(&obs, &run, &mut rng)
            } else {
                let len = rng.gen_range(1..=7usize);
                ObsSequence::new(
                    (0..len)
                        .map(|_| rng.gen_range(0..obs.n_symbols()))
                        .collect(),
                )
            };
            let forward = log_likelihood(&hmm, &y);
            let brute = brute_force_observation_probability(&hmm, &y);
            compared += 1;
            if brute == 0.0 {
                if forward != f64::NEG_INFINITY {
                    support_mismatch += 1;
                }
            } else if forward == f64::NEG_INFINITY {
                support_mismatch += 1;
            } else {
                max_err = max_err.max((forward - brute.ln()).abs());
            }
        }
    }
    let forward_ok = support_mismatch == 0 && max_err <= 1e-10;
    let mut results = vec![CheckResult::new(
        "forward log-likelihood vs path-sum enumeration",
        forward_ok,
        format!(
            "{compared} sequences over 20 random models, max |err| = {max_err:.3e}, \
             support mismatches = {support_mismatch}"
        ),
    )];

    // Total observation mass over full joint enumeration equals one.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mdp, obs, theta) = random_instance(&mut rng);
    let mass = observation_mass(&mdp, &theta.to_table(), &obs, 3).unwrap();
    let total: f64 = mass.values().sum();
    results.push(CheckResult::new(
        "joint run/observation mass sums to one",
        (total - 1.0).abs() < 1e-9,
        format!("|sum - 1| = {:.3e}", (total - 1.0).abs()),
    ));

    let ensemble = enumerate_runs(&mdp, &theta.to_table(), 5).unwrap();
    let total = ensemble.total_probability();
    results.push(CheckResult::new(
        "enumerated run probabilities sum to one",
        (total - 1.0).abs() < 1e-9,
        format!("|sum - 1| = {:.3e}", (total - 1.0).abs()),
    ));

    results
}

/// Fixed 3-state / 2-action instance with enumerable observations used by
/// the gradient checks.
pub struct GradientFixture {
    pub mdp: Mdp,
    pub obs: ObsModel,
    pub theta: PolicyParams,
    pub theta_t: PolicyParams,
    pub nominal: PolicyTable,
    pub epsilon: f64,
    pub horizon: usize,
}

pub fn gradient_fixture() -> GradientFixture {
    let mdp = Mdp::new(
        3,
        2,
        vec![
            vec![(0, 0.4), (1, 0.6)],
            vec![(2, 1.0)],
            vec![(1, 0.5), (2, 0.5)],
            vec![(0, 1.0)],
            vec![(2, 0.7), (0, 0.3)],
            vec![(1, 1.0)],
        ],
        0,
        array![[0.2, -0.1], [1.0, 0.0], [0.0, 0.5]],
        0.9,
        vec![],
    )
    .unwrap();
    let obs = ObsModel::with_null_actions(
        3,
        2,
        vec!["ping".into(), "quiet".into()],
        array![[0.8, 0.2], [0.3, 0.7], [0.55, 0.45]],
    )
    .unwrap();
    let theta =
        PolicyParams::from_table(array![[0.5, -0.3], [0.2, 0.4], [-0.1, 0.3]]).unwrap();
    let theta_t =
        PolicyParams::from_table(array![[0.6, -0.35], [0.1, 0.5], [-0.05, 0.2]]).unwrap();
    let nominal = PolicyParams::from_table(array![[-0.2, 0.1], [0.3, 0.0], [0.0, -0.3]])
        .unwrap()
        .to_table();
    let horizon = 4;

    // Place epsilon in the widest gap between adjacent realized ratios near
    // the middle of the detection mass, so finite-difference perturbations
    // cannot move any sequence across the boundary.
    let epsilon = {
        let hmm_theta = build_hmm(&mdp, &theta.to_table(), &obs).unwrap();
        let hmm_0 = build_hmm(&mdp, &nominal, &obs).unwrap();
        let mass = observation_mass(&mdp, &theta.to_table(), &obs, horizon).unwrap();
        let mut pairs: Vec<(f64, f64)> = mass
            .into_iter()
            .map(|(symbols, p)| {
                let y = ObsSequence::new(symbols);
                let llr = crate::detection::log_likelihood_ratio(&y, &hmm_theta, &hmm_0)
                    .expect("fixture sequences are in both supports");
                (llr, p)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|(_, p)| p).sum();
        let mut best = (0.0, f64::NEG_INFINITY); // (gap, midpoint)
        let mut above = total;
        for window in pairs.windows(2) {
            let (llr_low, p_low) = window[0];
            let (llr_high, _) = window[1];
            above -= p_low;
            let gap = llr_high - llr_low;
            let detected_fraction = above / total;
            if (0.1..=0.9).contains(&detected_fraction) && gap > best.0 {
                best = (gap, (llr_low + llr_high) / 2.0);
            }
        }
        assert!(
            best.0 > 0.01,
            "fixture margin too small: widest usable gap {}",
            best.0
        );
        best.1
    };

    GradientFixture {
        mdp,
        obs,
        theta,
        theta_t,
        nominal,
        epsilon,
        horizon,
    }
}

fn compare_gradients(
    name: &str,
    estimator_expectation: &Array2<f64>,
    finite_difference: &Array2<f64>,
) -> CheckResult {
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut passed = true;
    for (a, b) in estimator_expectation.iter().zip(finite_difference.iter()) {
        let abs = (a - b).abs();
        max_abs = max_abs.max(abs);
        if b.abs() > 1e-6 {
            max_rel = max_rel.max(abs / b.abs());
        }
        if abs > (1e-3 * b.abs()).max(1e-6) {
            passed = false;
        }
    }
    CheckResult::new(
        name,
        passed,
        format!("max rel err = {max_rel:.3e}, max abs err = {max_abs:.3e}"),
    )
}

/// Exact estimator expectations vs central finite differences of the exact
/// objectives, on the fixed 3-state instance.
fn gradient_checks() -> Vec<CheckResult> {
    let f = gradient_fixture();
    let step = 1e-4;
    let mut results = Vec::new();

    let expectation =
        expected_value_gradient(&f.mdp, &f.theta, &f.theta_t, f.horizon).unwrap();
    let fd = finite_difference_gradient(
        |th| exact_value(&f.mdp, &th.to_table(), f.horizon),
        &f.theta,
        step,
    )
    .unwrap();
    results.push(compare_gradients(
        "value gradient vs d/dθ exact value",
        &expectation,
        &fd,
    ));

    let expectation = expected_kl_gradient(&f.mdp, &f.theta, &f.theta_t, f.horizon).unwrap();
    let fd = finite_difference_gradient(
        |th| exact_kl(&f.mdp, &f.theta_t, th, f.horizon),
        &f.theta,
        step,
    )
    .unwrap();
    results.push(compare_gradients(
        "KL gradient vs d/dθ exact KL divergence",
        &expectation,
        &fd,
    ));

    let expectation = expected_constraint_gradient(
        &f.mdp, &f.theta, &f.theta_t, &f.obs, &f.nominal, f.epsilon, f.horizon,
    )
    .unwrap();
    // The estimator targets the negated detection term.
    let fd = finite_difference_gradient(
        |th| {
            exact_detection_probability(
                &f.mdp,
                &th.to_table(),
                &f.obs,
                &f.nominal,
                f.epsilon,
                f.horizon,
            )
            .map(|v| -v)
        },
        &f.theta,
        step,
    )
    .unwrap();
    results.push(compare_gradients(
        "constraint gradient vs -d/dθ exact detection probability",
        &expectation,
        &fd,
    ));

    results
}

/// The Markov-vs-finite-memory gap on the coin MDP for three thresholds.
fn theorem1_checks() -> Vec<CheckResult> {
    let mut results = Vec::new();
    for rho in [0.04, 0.25, 0.49] {
        match coin_mdp_check(rho) {
            Ok(check) => {
                let gap_ok = check.gap() >= check.bound - 1e-12;
                let argmax_ok = (check.grid_argmax.0 - rho.sqrt()).abs() <= 1e-3 + 1e-12
                    && (check.grid_argmax.1 - 1.0).abs() <= 1e-3 + 1e-12;
                results.push(CheckResult::new(
                    format!("coin MDP gap at rho = {rho}"),
                    gap_ok && argmax_ok,
                    format!(
                        "gap = {:.6} >= bound = {:.6}; grid argmax ({:.4}, {:.4}) vs (√rho, 1) = ({:.4}, 1)",
                        check.gap(),
                        check.bound,
                        check.grid_argmax.0,
                        check.grid_argmax.1,
                        rho.sqrt()
                    ),
                ));
            }
            Err(e) => results.push(CheckResult::new(
                format!("coin MDP gap at rho = {rho}"),
                false,
                format!("error: {e}"),
            )),
        }
    }
    results
}
