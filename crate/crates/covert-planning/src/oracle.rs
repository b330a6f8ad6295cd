//! Exact brute-force references for small instances: run enumeration, exact
//! value / KL / detection probability, exact estimator expectations, central
//! finite differences, and the two-state coin-MDP gap check.
//!
//! Everything here is exact up to f64 rounding; blow-up guards are hard
//! errors rather than silent truncation. These routines exist to check the
//! sampling estimators, so they deliberately use straightforward summation
//! over the full run/observation space instead of sharing the estimators'
//! code paths.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::hmm::{build_hmm, Hmm, HmmState};
use crate::mdp::{Mdp, PolicyParams, PolicyTable, Run};
use crate::obs::{ObsModel, ObsSequence};
use crate::trainer::{importance_weight, score_function};
use crate::{Error, Result};

/// Hard cap on enumerated entries.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// All runs up to a horizon with their exact probabilities under a policy.
///
/// Runs that enter an absorbing state before the horizon end there, so the
/// ensemble is a proper distribution: probabilities sum to one.
#[derive(Debug, Clone)]
pub struct EnumeratedEnsemble {
    pub entries: Vec<(Run, f64)>,
}

impl EnumeratedEnsemble {
    pub fn total_probability(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Enumerates every positive-probability run of the policy-induced chain up
/// to `horizon` actions. Errors if the ensemble would exceed
/// [`ENUMERATION_LIMIT`] entries.
pub fn enumerate_runs(
    mdp: &Mdp,
    policy: &PolicyTable,
    horizon: usize,
) -> Result<EnumeratedEnsemble> {
    let mut entries = Vec::new();
    let mut states = vec![mdp.initial_state];
    let mut actions = Vec::new();
    dfs_runs(mdp, policy, horizon, 1.0, &mut states, &mut actions, &mut entries)?;
    Ok(EnumeratedEnsemble { entries })
}

fn dfs_runs(
    mdp: &Mdp,
    policy: &PolicyTable,
    horizon: usize,
    prob: f64,
    states: &mut Vec<usize>,
    actions: &mut Vec<usize>,
    entries: &mut Vec<(Run, f64)>,
) -> Result<()> {
    let current = *states.last().unwrap();
    if actions.len() == horizon || mdp.is_absorbing(current) {
        if entries.len() >= ENUMERATION_LIMIT {
            return Err(Error::EnumerationLimit {
                limit: ENUMERATION_LIMIT,
            });
        }
        entries.push((Run::new(states.clone(), actions.clone()), prob));
        return Ok(());
    }
    for a in 0..mdp.n_actions {
        let pa = policy.action_prob(current, a);
        if pa <= 0.0 {
            continue;
        }
        for &(s2, ps) in mdp.successors(current, a) {
            if ps <= 0.0 {
                continue;
            }
            states.push(s2);
            actions.push(a);
            dfs_runs(mdp, policy, horizon, prob * pa * ps, states, actions, entries)?;
            states.pop();
            actions.pop();
        }
    }
    Ok(())
}

/// Exact finite-horizon value: Σ over runs of probability × discounted return.
pub fn exact_value(mdp: &Mdp, policy: &PolicyTable, horizon: usize) -> Result<f64> {
    let ensemble = enumerate_runs(mdp, policy, horizon)?;
    Ok(ensemble
        .entries
        .iter()
        .map(|(run, p)| p * crate::mdp::discounted_return(run, mdp))
        .sum())
}

/// Exact KL divergence between the run distributions of the anchor policy
/// softmax(θ_t) and softmax(θ): Σ_x P_{θ_t}(x) ln(P_{θ_t}(x)/P_θ(x)).
/// Transition factors cancel, leaving the policy log-ratios.
pub fn exact_kl(
    mdp: &Mdp,
    theta_t: &PolicyParams,
    theta: &PolicyParams,
    horizon: usize,
) -> Result<f64> {
    let ensemble = enumerate_runs(mdp, &theta_t.to_table(), horizon)?;
    Ok(ensemble
        .entries
        .iter()
        .map(|(run, p)| p * (theta_t.log_prob_of_run(run) - theta.log_prob_of_run(run)))
        .sum())
}

/// All observation sequences a run can emit, with P(y | x).
pub fn observation_distribution(obs: &ObsModel, run: &Run) -> Vec<(ObsSequence, f64)> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * run.len() + 1);
    for t in 0..run.states.len() {
        rows.push(obs.state_emission.row(run.states[t]).to_vec());
        if t < run.actions.len() {
            rows.push(
                obs.action_emission
                    .row(obs.sa_index(run.states[t], run.actions[t]))
                    .to_vec(),
            );
        }
    }
    let mut out = Vec::new();
    let mut symbols = Vec::with_capacity(rows.len());
    dfs_observations(&rows, 1.0, &mut symbols, &mut out);
    out
}

fn dfs_observations(
    rows: &[Vec<f64>],
    prob: f64,
    symbols: &mut Vec<usize>,
    out: &mut Vec<(ObsSequence, f64)>,
) {
    if symbols.len() == rows.len() {
        out.push((ObsSequence::new(symbols.clone()), prob));
        return;
    }
    let row = &rows[symbols.len()];
    for (o, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        symbols.push(o);
        dfs_observations(rows, prob * p, symbols, out);
        symbols.pop();
    }
}

/// The exact observation distribution under a policy: y ↦ Σ_x P(x) P(y|x),
/// keyed by symbol sequence. Guarded by [`ENUMERATION_LIMIT`].
pub fn observation_mass(
    mdp: &Mdp,
    policy: &PolicyTable,
    obs: &ObsModel,
    horizon: usize,
) -> Result<BTreeMap<Vec<usize>, f64>> {
    let ensemble = enumerate_runs(mdp, policy, horizon)?;
    let mut mass: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut pairs = 0usize;
    for (run, p_run) in &ensemble.entries {
        for (y, p_obs) in observation_distribution(obs, run) {
            pairs += 1;
            if pairs > ENUMERATION_LIMIT {
                return Err(Error::EnumerationLimit {
                    limit: ENUMERATION_LIMIT,
                });
            }
            *mass.entry(y.symbols).or_insert(0.0) += p_run * p_obs;
        }
    }
    Ok(mass)
}

/// Exact detection probability: the probability mass of observation
/// sequences whose log-likelihood ratio against the nominal model strictly
/// exceeds ε, when the agent plays `agent`.
pub fn exact_detection_probability(
    mdp: &Mdp,
    agent: &PolicyTable,
    obs: &ObsModel,
    nominal: &PolicyTable,
    epsilon: f64,
    horizon: usize,
) -> Result<f64> {
    let hmm_theta = build_hmm(mdp, agent, obs)?;
    let hmm_0 = build_hmm(mdp, nominal, obs)?;
    let mass = observation_mass(mdp, agent, obs, horizon)?;
    let mut detected = 0.0;
    for (symbols, p) in mass {
        let y = ObsSequence::new(symbols);
        if crate::detection::is_detected(&y, &hmm_theta, &hmm_0, epsilon)? {
            detected += p;
        }
    }
    Ok(detected)
}

/// Exact expectation of the sampled value-gradient estimator:
/// Σ_x P_{θ_t}(x) · w(x) · score(x, θ) · R(x).
pub fn expected_value_gradient(
    mdp: &Mdp,
    theta: &PolicyParams,
    theta_t: &PolicyParams,
    horizon: usize,
) -> Result<Array2<f64>> {
    let ensemble = enumerate_runs(mdp, &theta_t.to_table(), horizon)?;
    let mut grad = Array2::zeros(theta.theta.dim());
    for (run, p) in &ensemble.entries {
        let w = importance_weight(run, theta, theta_t);
        let r = crate::mdp::discounted_return(run, mdp);
        grad.scaled_add(p * w * r, &score_function(run, theta));
    }
    Ok(grad)
}

/// Exact expectation of the sampled KL-gradient estimator:
/// −Σ_x P_{θ_t}(x) · score(x, θ) = ∇_θ D_KL(P_{θ_t} ‖ P_θ).
pub fn expected_kl_gradient(
    mdp: &Mdp,
    theta: &PolicyParams,
    theta_t: &PolicyParams,
    horizon: usize,
) -> Result<Array2<f64>> {
    let ensemble = enumerate_runs(mdp, &theta_t.to_table(), horizon)?;
    let mut grad = Array2::zeros(theta.theta.dim());
    for (run, p) in &ensemble.entries {
        grad.scaled_add(-p, &score_function(run, theta));
    }
    Ok(grad)
}

/// Exact expectation of the sampled constraint-gradient estimator:
/// −Σ_{x,y} P_{θ_t}(x) P(y|x) · 1{llr_θ(y) > ε} · w(x) · score(x, θ).
/// Detection membership is evaluated with the HMM of the current θ.
pub fn expected_constraint_gradient(
    mdp: &Mdp,
    theta: &PolicyParams,
    theta_t: &PolicyParams,
    obs: &ObsModel,
    nominal: &PolicyTable,
    epsilon: f64,
    horizon: usize,
) -> Result<Array2<f64>> {
    let hmm_theta = build_hmm(mdp, &theta.to_table(), obs)?;
    let hmm_0 = build_hmm(mdp, nominal, obs)?;
    let ensemble = enumerate_runs(mdp, &theta_t.to_table(), horizon)?;
    let mut detected_cache: BTreeMap<Vec<usize>, bool> = BTreeMap::new();
    let mut grad = Array2::zeros(theta.theta.dim());
    for (run, p_run) in &ensemble.entries {
        let w = importance_weight(run, theta, theta_t);
        let score = score_function(run, theta);
        for (y, p_obs) in observation_distribution(obs, run) {
            let hit = match detected_cache.get(&y.symbols) {
                Some(&hit) => hit,
                None => {
                    let hit = crate::detection::is_detected(&y, &hmm_theta, &hmm_0, epsilon)?;
                    detected_cache.insert(y.symbols.clone(), hit);
                    hit
                }
            };
            if hit {
                grad.scaled_add(-(p_run * p_obs * w), &score);
            }
        }
    }
    Ok(grad)
}

/// Central finite differences of an objective over θ, one coordinate at a
/// time. Step defaults in callers to 1e-4.
pub fn finite_difference_gradient<F>(
    mut objective: F,
    theta: &PolicyParams,
    step: f64,
) -> Result<Array2<f64>>
where
    F: FnMut(&PolicyParams) -> Result<f64>,
{
    let dim = theta.theta.dim();
    let mut grad = Array2::zeros(dim);
    for s in 0..dim.0 {
        for a in 0..dim.1 {
            let mut plus = theta.clone();
            plus.theta[(s, a)] += step;
            let mut minus = theta.clone();
            minus.theta[(s, a)] -= step;
            grad[(s, a)] = (objective(&plus)? - objective(&minus)?) / (2.0 * step);
        }
    }
    Ok(grad)
}

/// The probability of an observation sequence by exhaustive path summation
/// over the HMM state union, in plain probability space.
///
/// This is the independent oracle for the log-space forward algorithm. It
/// walks every positive-probability state path of length |y| starting at the
/// initial state and sums Π transition · Π emission.
pub fn brute_force_observation_probability(hmm: &Hmm, y: &ObsSequence) -> f64 {
    if y.is_empty() {
        return 1.0;
    }
    let states = hmm.states();
    fn recurse(hmm: &Hmm, states: &[HmmState], y: &[usize], current: HmmState, k: usize) -> f64 {
        let emit = hmm.emission_prob(current, y[k]);
        if emit == 0.0 {
            return 0.0;
        }
        if k + 1 == y.len() {
            return emit;
        }
        let mut total = 0.0;
        for &next in states {
            let p = hmm.transition_prob(current, next);
            if p > 0.0 {
                total += p * recurse(hmm, states, y, next, k + 1);
            }
        }
        emit * total
    }
    recurse(hmm, &states, &y.symbols, hmm.initial(), 0)
}

/// Result of the coin-MDP check behind the Markov-vs-finite-memory gap.
#[derive(Debug, Clone)]
pub struct CoinCheck {
    pub rho: f64,
    /// max over α ∈ [0, √ρ], β ∈ [0, 1] of α² + α + (1−α)β/2.
    pub best_markov_value: f64,
    /// Value 1 + ρ of the two-step memory policy.
    pub finite_memory_value: f64,
    /// The guaranteed gap ½(1 − √ρ).
    pub bound: f64,
    /// Grid-search maximizer over (α, β) at 1e-3 resolution.
    pub grid_argmax: (f64, f64),
    pub grid_value: f64,
}

impl CoinCheck {
    pub fn gap(&self) -> f64 {
        self.finite_memory_value - self.best_markov_value
    }
}

/// The two-state coin MDP: state 1 self-loops on heads and moves to state 2
/// on tails; state 2 returns to 1 on heads only half the time. Heads landing
/// in state 1 pays one unit, so R(s, a) holds the successor-expected reward.
pub fn coin_mdp() -> Mdp {
    // Indices: state 0 = "1", state 1 = "2"; action 0 = heads, 1 = tails.
    Mdp::new(
        2,
        2,
        vec![
            vec![(0, 1.0)],
            vec![(1, 1.0)],
            vec![(0, 0.5), (1, 0.5)],
            vec![(1, 1.0)],
        ],
        0,
        ndarray::array![[1.0, 0.0], [0.5, 0.0]],
        0.95,
        vec![],
    )
    .expect("coin MDP is valid")
}

/// Two-step undiscounted expected reward of the (α, β) Markov policy on the
/// coin MDP, by exact enumeration.
fn coin_two_step_value(alpha: f64, beta: f64) -> Result<f64> {
    let mdp = coin_mdp();
    let policy = PolicyTable::new(ndarray::array![
        [alpha, 1.0 - alpha],
        [beta, 1.0 - beta]
    ])?;
    let ensemble = enumerate_runs(&mdp, &policy, 2)?;
    Ok(ensemble
        .entries
        .iter()
        .map(|(run, p)| {
            let reward: f64 = run.steps().map(|(s, a)| mdp.rewards[(s, a)]).sum();
            p * reward
        })
        .sum())
}

fn coin_formula(alpha: f64, beta: f64) -> f64 {
    alpha * alpha + alpha + (1.0 - alpha) * beta / 2.0
}

/// Verifies the Markov-vs-finite-memory value gap on the coin MDP.
///
/// The best covert Markov policy obeys α² ≤ ρ, so α ranges over [0, √ρ];
/// the closed-form optimum sits at α = √ρ, β = 1. A 1e-3 grid search over
/// (α, β) confirms the maximizer, and a two-step enumeration over the
/// constructed MDP cross-checks the value formula itself.
pub fn coin_mdp_check(rho: f64) -> Result<CoinCheck> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidConfig(format!("rho {rho} outside (0, 1)")));
    }
    let sqrt_rho = rho.sqrt();
    let best_markov_value = coin_formula(sqrt_rho, 1.0);
    let finite_memory_value = 1.0 + rho;
    let bound = 0.5 * (1.0 - sqrt_rho);

    let n_alpha = (sqrt_rho / 1e-3).ceil() as usize;
    let n_beta = 1000usize;
    let mut grid_value = f64::NEG_INFINITY;
    let mut grid_argmax = (0.0, 0.0);
    for i in 0..=n_alpha {
        let alpha = sqrt_rho * i as f64 / n_alpha as f64;
        for j in 0..=n_beta {
            let beta = j as f64 / n_beta as f64;
            let v = coin_formula(alpha, beta);
            if v > grid_value {
                grid_value = v;
                grid_argmax = (alpha, beta);
            }
        }
    }

    // Cross-check the formula against the enumerated two-step value at the
    // maximizer and at a few interior points.
    for &(a, b) in &[grid_argmax, (0.0, 0.0), (sqrt_rho / 2.0, 0.5), (sqrt_rho, 0.25)] {
        let enumerated = coin_two_step_value(a, b)?;
        let formula = coin_formula(a, b);
        if (enumerated - formula).abs() > 1e-12 {
            return Err(Error::NonFinite(format!(
                "coin value mismatch at ({a}, {b}): enumerated {enumerated}, formula {formula}"
            )));
        }
    }

    Ok(CoinCheck {
        rho,
        best_markov_value,
        finite_memory_value,
        bound,
        grid_argmax,
        grid_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{discounted_return, sample_trajectory, PolicyParams};
    use crate::obs::sample_observation;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn three_state_mdp() -> Mdp {
        Mdp::new(
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
        .unwrap()
    }

    #[test]
    fn single_run_enumeration() {
        let mdp = Mdp::new(
            1,
            1,
            vec![vec![(0, 1.0)]],
            0,
            Array2::zeros((1, 1)),
            0.9,
            vec![],
        )
        .unwrap();
        let ensemble = enumerate_runs(&mdp, &PolicyTable::uniform(1, 1), 2).unwrap();
        assert_eq!(ensemble.entries.len(), 1);
        assert_eq!(ensemble.entries[0].1, 1.0);
    }

    #[test]
    fn uniform_two_action_runs_split_evenly() {
        let mdp = Mdp::new(
            2,
            2,
            vec![
                vec![(1, 1.0)],
                vec![(0, 1.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
            ],
            0,
            Array2::zeros((2, 2)),
            0.9,
            vec![],
        )
        .unwrap();
        let ensemble = enumerate_runs(&mdp, &PolicyTable::uniform(2, 2), 3).unwrap();
        assert_eq!(ensemble.entries.len(), 8);
        for (_, p) in &ensemble.entries {
            assert!((p - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn run_probabilities_sum_to_one() {
        let mdp = three_state_mdp();
        let theta = PolicyParams::from_table(array![
            [0.3, -0.2],
            [0.0, 0.8],
            [-0.5, 0.5]
        ])
        .unwrap();
        let ensemble = enumerate_runs(&mdp, &theta.to_table(), 5).unwrap();
        assert!((ensemble.total_probability() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ensemble_sums_to_one_with_absorbing_states() {
        let mut mdp = three_state_mdp();
        mdp.absorbing[2] = true;
        let ensemble = enumerate_runs(&mdp, &PolicyTable::uniform(3, 2), 6).unwrap();
        assert!((ensemble.total_probability() - 1.0).abs() < 1e-9);
        for (run, _) in &ensemble.entries {
            // Absorbing states only appear as final states.
            for &s in &run.states[..run.states.len() - 1] {
                assert_ne!(s, 2);
            }
        }
    }

    #[test]
    fn exact_value_geometric_case() {
        let mdp = Mdp::new(
            1,
            1,
            vec![vec![(0, 1.0)]],
            0,
            array![[1.0]],
            0.5,
            vec![],
        )
        .unwrap();
        let v = exact_value(&mdp, &PolicyTable::uniform(1, 1), 3).unwrap();
        assert!((v - 1.75).abs() < 1e-15);

        let mut zero = mdp.clone();
        zero.rewards.fill(0.0);
        assert_eq!(exact_value(&zero, &PolicyTable::uniform(1, 1), 3).unwrap(), 0.0);
    }

    #[test]
    fn exact_value_matches_monte_carlo() {
        let mdp = three_state_mdp();
        let theta = PolicyParams::from_table(array![
            [0.1, -0.4],
            [0.6, 0.0],
            [0.0, 0.3]
        ])
        .unwrap();
        let horizon = 4;
        let exact = exact_value(&mdp, &theta.to_table(), horizon).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let run = sample_trajectory(&mdp, &theta, horizon, &mut rng);
            let r = discounted_return(&run, &mdp);
            sum += r;
            sum_sq += r * r;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "MC {mean} vs exact {exact} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn enumeration_guard_trips() {
        // 4 actions, 4 successors each, horizon 12 blows past the cap.
        let n = 4;
        let transitions: Vec<Vec<(usize, f64)>> = (0..n * n)
            .map(|_| (0..n).map(|s| (s, 1.0 / n as f64)).collect())
            .collect();
        let mdp = Mdp::new(n, n, transitions, 0, Array2::zeros((n, n)), 0.9, vec![]).unwrap();
        let result = enumerate_runs(&mdp, &PolicyTable::uniform(n, n), 12);
        assert!(matches!(result, Err(Error::EnumerationLimit { .. })));
    }

    fn detection_fixture() -> (Mdp, ObsModel, PolicyParams, PolicyTable) {
        let mdp = Mdp::new(
            2,
            2,
            vec![
                vec![(0, 0.7), (1, 0.3)],
                vec![(1, 1.0)],
                vec![(0, 0.5), (1, 0.5)],
                vec![(0, 1.0)],
            ],
            0,
            array![[1.0, 0.0], [0.0, 0.2]],
            0.9,
            vec![],
        )
        .unwrap();
        let obs = ObsModel::with_null_actions(
            2,
            2,
            vec!["ping".into(), "quiet".into()],
            array![[0.8, 0.2], [0.1, 0.9]],
        )
        .unwrap();
        let theta = PolicyParams::from_table(array![[1.2, -0.8], [0.4, 0.1]]).unwrap();
        let nominal = PolicyTable::uniform(2, 2);
        (mdp, obs, theta, nominal)
    }

    #[test]
    fn exact_detection_identical_policies() {
        let (mdp, obs, _, nominal) = detection_fixture();
        let p = exact_detection_probability(&mdp, &nominal, &obs, &nominal, 1.0, 3).unwrap();
        assert_eq!(p, 0.0);
        // With a negative threshold every sequence is detected: ratio 0 > -1.
        let p = exact_detection_probability(&mdp, &nominal, &obs, &nominal, -1.0, 3).unwrap();
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_detection_monotone_in_epsilon() {
        let (mdp, obs, theta, nominal) = detection_fixture();
        let agent = theta.to_table();
        let mut last = f64::INFINITY;
        for eps in [-1.0, 0.0, 0.1, 0.5, 2.0] {
            let p = exact_detection_probability(&mdp, &agent, &obs, &nominal, eps, 3).unwrap();
            assert!(p <= last + 1e-15, "eps {eps}: {p} > {last}");
            last = p;
        }
    }

    #[test]
    fn exact_detection_matches_monte_carlo() {
        let (mdp, obs, theta, nominal) = detection_fixture();
        let agent = theta.to_table();
        let horizon = 3;
        let epsilon = 0.2;
        let exact =
            exact_detection_probability(&mdp, &agent, &obs, &nominal, epsilon, horizon).unwrap();
        let hmm_theta = build_hmm(&mdp, &agent, &obs).unwrap();
        let hmm_0 = build_hmm(&mdp, &nominal, &obs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(191);
        let n = 100_000;
        let samples: Vec<_> = (0..n)
            .map(|_| {
                let run = sample_trajectory(&mdp, &theta, horizon, &mut rng);
                sample_observation(&obs, &run, &mut rng)
            })
            .collect();
        let (est, se) =
            crate::detection::estimate_detection_probability(&samples, &hmm_theta, &hmm_0, epsilon)
                .unwrap();
        assert!(exact > 0.01 && exact < 0.99, "degenerate fixture: {exact}");
        assert!(
            (est - exact).abs() < 3.0 * se.max(1e-6),
            "MC {est} vs exact {exact} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn finite_difference_on_known_functions() {
        let theta = PolicyParams::from_table(array![[0.3, -0.5], [0.1, 0.9]]).unwrap();
        let grad = finite_difference_gradient(|_| Ok(4.2), &theta, 1e-4).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-9));

        let grad = finite_difference_gradient(
            |th| Ok(th.theta.iter().map(|v| v * v).sum()),
            &theta,
            1e-4,
        )
        .unwrap();
        for (g, v) in grad.iter().zip(theta.theta.iter()) {
            assert!((g - 2.0 * v).abs() < 1e-7);
        }
    }

    #[test]
    fn score_expectation_vanishes_under_own_policy() {
        let mdp = three_state_mdp();
        let theta = PolicyParams::from_table(array![
            [0.2, -0.3],
            [0.5, 0.0],
            [-0.1, 0.4]
        ])
        .unwrap();
        let ensemble = enumerate_runs(&mdp, &theta.to_table(), 4).unwrap();
        let mut mean = Array2::zeros((3, 2));
        for (run, p) in &ensemble.entries {
            mean.scaled_add(*p, &score_function(run, &theta));
        }
        for v in mean.iter() {
            assert!(v.abs() < 1e-12, "score expectation entry {v}");
        }
    }

    #[test]
    fn coin_check_reference_points() {
        let c = coin_mdp_check(0.25).unwrap();
        assert!((c.best_markov_value - 1.0).abs() < 1e-12);
        assert!((c.finite_memory_value - 1.25).abs() < 1e-12);
        assert!((c.gap() - 0.25).abs() < 1e-12);
        assert!((c.bound - 0.25).abs() < 1e-12);
        assert!(c.gap() >= c.bound - 1e-12);
        assert!((c.grid_argmax.0 - 0.5).abs() <= 1e-3);
        assert!((c.grid_argmax.1 - 1.0).abs() <= 1e-3);

        let c = coin_mdp_check(0.04).unwrap();
        assert!((c.best_markov_value - 0.64).abs() < 1e-12);
        assert!((c.finite_memory_value - 1.04).abs() < 1e-12);
        assert!((c.gap() - 0.40).abs() < 1e-12);

        // The bound collapses as rho approaches one.
        let c = coin_mdp_check(0.999999).unwrap();
        assert!(c.bound < 1e-6);
        assert!(coin_mdp_check(0.0).is_err());
        assert!(coin_mdp_check(1.0).is_err());
    }

    #[test]
    fn coin_gap_meets_bound_across_rho() {
        for rho in [0.04, 0.1, 0.25, 0.49, 0.81] {
            let c = coin_mdp_check(rho).unwrap();
            assert!(
                c.gap() >= c.bound - 1e-12,
                "rho {rho}: gap {} < bound {}",
                c.gap(),
                c.bound
            );
            assert!((c.grid_argmax.0 - rho.sqrt()).abs() <= 1e-3);
            assert!((c.grid_argmax.1 - 1.0).abs() <= 1e-3);
        }
    }
}
