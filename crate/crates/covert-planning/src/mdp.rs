//! Finite-MDP data model, softmax policies, trajectory sampling, discounted
//! returns, and entropy-regularized (soft) value iteration.
//!
//! States and actions are dense indices; display names live in side lookups
//! so tables stay O(1). Transitions are stored as successor lists per
//! (state, action) pair since the environments here are sparse.

use ndarray::Array2;
use rand::Rng;

use crate::{Error, Result};

/// Row-sum tolerance for stochastic tables.
pub const ROW_SUM_TOL: f64 = 1e-12;

const VALUE_ITERATION_TOL: f64 = 1e-9;
const VALUE_ITERATION_MAX_SWEEPS: usize = 100_000;

/// A finite Markov decision process with a single initial state.
///
/// Episodes terminate on entering a state in `absorbing` (no further reward).
#[derive(Debug, Clone)]
pub struct Mdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Successor lists indexed by `s * n_actions + a`.
    pub transitions: Vec<Vec<(usize, f64)>>,
    pub initial_state: usize,
    /// Reward table R(s, a).
    pub rewards: Array2<f64>,
    /// Discount factor, strictly inside (0, 1).
    pub gamma: f64,
    pub absorbing: Vec<bool>,
    pub state_names: Vec<String>,
    pub action_names: Vec<String>,
}

impl Mdp {
    /// Builds an MDP from dense parts and rejects it if validation fails.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        initial_state: usize,
        rewards: Array2<f64>,
        gamma: f64,
        absorbing: Vec<usize>,
    ) -> Result<Self> {
        let mut absorbing_mask = vec![false; n_states];
        for &s in &absorbing {
            if s >= n_states {
                return Err(Error::InvalidModel(format!(
                    "absorbing state {s} out of range (|S| = {n_states})"
                )));
            }
            absorbing_mask[s] = true;
        }
        let mdp = Mdp {
            n_states,
            n_actions,
            transitions,
            initial_state,
            rewards,
            gamma,
            absorbing: absorbing_mask,
            state_names: (0..n_states).map(|s| format!("s{s}")).collect(),
            action_names: (0..n_actions).map(|a| format!("a{a}")).collect(),
        };
        let report = validate_mdp(&mdp);
        if !report.is_ok() {
            return Err(Error::InvalidModel(report.violations.join("; ")));
        }
        Ok(mdp)
    }

    #[inline]
    pub fn sa_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[self.sa_index(s, a)]
    }

    /// P(s2 | s, a); zero when s2 is not in the successor list.
    pub fn transition_prob(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.successors(s, a)
            .iter()
            .find(|(succ, _)| *succ == s2)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    #[inline]
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.absorbing[s]
    }
}

/// Outcome of [`validate_mdp`]: empty means the model is well formed.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks stochasticity of every transition row, index ranges, and the
/// discount factor. Reports all violations instead of stopping at the first.
pub fn validate_mdp(mdp: &Mdp) -> ValidationReport {
    let mut violations = Vec::new();
    if mdp.transitions.len() != mdp.n_states * mdp.n_actions {
        violations.push(format!(
            "transition table has {} rows, expected {}",
            mdp.transitions.len(),
            mdp.n_states * mdp.n_actions
        ));
        return ValidationReport { violations };
    }
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let row = mdp.successors(s, a);
            let mut sum = 0.0;
            for &(succ, p) in row {
                if succ >= mdp.n_states {
                    violations.push(format!("successor {succ} out of range at ({s}, {a})"));
                }
                if p < 0.0 {
                    violations.push(format!("negative probability {p} at ({s}, {a}, {succ})"));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                violations.push(format!("row ({s}, {a}) sums to {sum}"));
            }
        }
    }
    if mdp.initial_state >= mdp.n_states {
        violations.push(format!("initial state {} out of range", mdp.initial_state));
    }
    if !(mdp.gamma > 0.0 && mdp.gamma < 1.0) {
        violations.push(format!("gamma {} outside (0, 1)", mdp.gamma));
    }
    if mdp.rewards.dim() != (mdp.n_states, mdp.n_actions) {
        violations.push(format!(
            "reward table shape {:?}, expected ({}, {})",
            mdp.rewards.dim(),
            mdp.n_states,
            mdp.n_actions
        ));
    }
    for (i, r) in mdp.rewards.iter().enumerate() {
        if !r.is_finite() {
            violations.push(format!("non-finite reward at flat index {i}"));
        }
    }
    ValidationReport { violations }
}

/// Softmax policy parameters: an unconstrained real table indexed (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub theta: Array2<f64>,
}

impl PolicyParams {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        PolicyParams {
            theta: Array2::zeros((n_states, n_actions)),
        }
    }

    /// Wraps a table, rejecting NaN/infinite entries.
    pub fn from_table(theta: Array2<f64>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy parameter table".into()));
        }
        Ok(PolicyParams { theta })
    }

    pub fn n_states(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.theta.ncols()
    }

    /// π(·|s): softmax of the θ row, computed with max-subtraction.
    pub fn probabilities(&self, s: usize) -> Vec<f64> {
        let row: Vec<f64> = self.theta.row(s).to_vec();
        softmax(&row)
    }

    /// ln π(·|s), max-subtracted.
    pub fn log_probabilities(&self, s: usize) -> Vec<f64> {
        let row: Vec<f64> = self.theta.row(s).to_vec();
        log_softmax(&row)
    }

    pub fn action_prob(&self, s: usize, a: usize) -> f64 {
        self.probabilities(s)[a]
    }

    /// Σ_t ln π(a_t | s_t): the policy factor of ln P(run).
    pub fn log_prob_of_run(&self, run: &Run) -> f64 {
        run.steps()
            .map(|(s, a)| self.log_probabilities(s)[a])
            .sum()
    }

    pub fn to_table(&self) -> PolicyTable {
        let n_s = self.n_states();
        let n_a = self.n_actions();
        let mut probs = Array2::zeros((n_s, n_a));
        for s in 0..n_s {
            let row = self.probabilities(s);
            for a in 0..n_a {
                probs[(s, a)] = row[a];
            }
        }
        PolicyTable { probs }
    }
}

/// An explicit row-stochastic policy table π(a|s).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub probs: Array2<f64>,
}

impl PolicyTable {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (s, row) in probs.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("policy row {s} sums to {sum}")));
            }
            if row.iter().any(|p| *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "negative probability in policy row {s}"
                )));
            }
        }
        Ok(PolicyTable { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        PolicyTable {
            probs: Array2::from_elem((n_states, n_actions), 1.0 / n_actions as f64),
        }
    }

    pub fn n_states(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.ncols()
    }

    #[inline]
    pub fn action_prob(&self, s: usize, a: usize) -> f64 {
        self.probs[(s, a)]
    }
}

/// A sampled run x = s₀a₀s₁a₁…s_T. Length is the number of actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Run {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Run {
    pub fn new(states: Vec<usize>, actions: Vec<usize>) -> Self {
        assert_eq!(states.len(), actions.len() + 1, "run shape");
        Run { states, actions }
    }

    /// Number of actions taken.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Iterates (s_t, a_t) pairs.
    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.states
            .iter()
            .copied()
            .zip(self.actions.iter().copied())
    }

    /// Checks the run starts at the MDP's initial state and uses only
    /// positive-probability transitions.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 {
            return Err(Error::InvalidModel("run shape mismatch".into()));
        }
        if self.states[0] != mdp.initial_state {
            return Err(Error::InvalidModel(format!(
                "run starts at {} instead of the initial state {}",
                self.states[0], mdp.initial_state
            )));
        }
        for t in 0..self.len() {
            let (s, a, s2) = (self.states[t], self.actions[t], self.states[t + 1]);
            if mdp.transition_prob(s, a, s2) <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "impossible transition ({s}, {a}, {s2}) at step {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Samples one run: actions from softmax(θ), successors from P. Stops at the
/// horizon or on entering an absorbing state, whichever comes first. An
/// absorbing initial state yields a length-0 run.
pub fn sample_trajectory(
    mdp: &Mdp,
    theta: &PolicyParams,
    horizon: usize,
    rng: &mut impl Rng,
) -> Run {
    let mut states = vec![mdp.initial_state];
    let mut actions = Vec::new();
    let mut current = mdp.initial_state;
    for _ in 0..horizon {
        if mdp.is_absorbing(current) {
            break;
        }
        let probs = theta.probabilities(current);
        let a = sample_categorical(&probs, rng);
        let next = sample_weighted(mdp.successors(current, a), rng);
        actions.push(a);
        states.push(next);
        current = next;
    }
    Run { states, actions }
}

/// Σ_{t=0}^{T−1} γ^t R(s_t, a_t).
pub fn discounted_return(run: &Run, mdp: &Mdp) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    for (s, a) in run.steps() {
        total += discount * mdp.rewards[(s, a)];
        discount *= mdp.gamma;
    }
    total
}

/// Entropy-regularized value iteration.
///
/// Iterates the soft Bellman operator on the temperature-scaled value
/// W = V/τ, i.e. W(s) = logsumexp_a [R(s,a)/τ + γ Σ_{s'} P(s'|s,a) W(s')],
/// until the sup-norm change drops below 1e-9 (capped at 1e5 sweeps).
/// Returns θ with θ_{s,a} = Q(s,a)/τ so that softmax(θ) is the
/// entropy-regularized optimum. Absorbing states get V = 0 (uniform rows).
pub fn soft_value_iteration(mdp: &Mdp, temperature: f64) -> Result<PolicyParams> {
    if temperature <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n_s = mdp.n_states;
    let n_a = mdp.n_actions;
    let mut w = vec![0.0; n_s];
    let mut next = vec![0.0; n_s];
    let mut q_row = vec![0.0; n_a];
    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while change >= VALUE_ITERATION_TOL {
        if sweeps >= VALUE_ITERATION_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, change });
        }
        change = 0.0;
        for s in 0..n_s {
            if mdp.is_absorbing(s) {
                next[s] = 0.0;
            } else {
                for (a, q) in q_row.iter_mut().enumerate() {
                    let mut expected = 0.0;
                    for &(s2, p) in mdp.successors(s, a) {
                        expected += p * w[s2];
                    }
                    *q = mdp.rewards[(s, a)] / temperature + mdp.gamma * expected;
                }
                next[s] = log_sum_exp(&q_row);
            }
            change = change.max((next[s] - w[s]).abs());
        }
        std::mem::swap(&mut w, &mut next);
        sweeps += 1;
    }
    let mut theta = Array2::zeros((n_s, n_a));
    for s in 0..n_s {
        if mdp.is_absorbing(s) {
            continue;
        }
        for a in 0..n_a {
            let mut expected = 0.0;
            for &(s2, p) in mdp.successors(s, a) {
                expected += p * w[s2];
            }
            theta[(s, a)] = mdp.rewards[(s, a)] / temperature + mdp.gamma * expected;
        }
    }
    PolicyParams::from_table(theta)
}

/// Plain (hard-max) value iteration; used as a reference for the
/// low-temperature limit of [`soft_value_iteration`].
pub fn hard_value_iteration(mdp: &Mdp) -> Result<Vec<usize>> {
    let n_s = mdp.n_states;
    let n_a = mdp.n_actions;
    let mut v = vec![0.0; n_s];
    let mut change = f64::INFINITY;
    let mut sweeps = 0;
    while change >= VALUE_ITERATION_TOL {
        if sweeps >= VALUE_ITERATION_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, change });
        }
        change = 0.0;
        for s in 0..n_s {
            if mdp.is_absorbing(s) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_a {
                let mut q = mdp.rewards[(s, a)];
                for &(s2, p) in mdp.successors(s, a) {
                    q += mdp.gamma * p * v[s2];
                }
                best = best.max(q);
            }
            change = change.max((best - v[s]).abs());
            v[s] = best;
        }
        sweeps += 1;
    }
    let mut policy = vec![0; n_s];
    for s in 0..n_s {
        let mut best = f64::NEG_INFINITY;
        for a in 0..n_a {
            let mut q = mdp.rewards[(s, a)];
            for &(s2, p) in mdp.successors(s, a) {
                q += mdp.gamma * p * v[s2];
            }
            if q > best {
                best = q;
                policy[s] = a;
            }
        }
    }
    Ok(policy)
}

/// Max-subtracted softmax.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Max-subtracted log-softmax.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - max - log_sum).collect()
}

/// logsumexp with an empty/-∞ guard.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub(crate) fn sample_weighted(pairs: &[(usize, f64)], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(idx, p) in pairs {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    pairs.last().expect("empty successor list").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-state chain: action 0 stays, action 1 moves to the other state.
    fn two_state_deterministic() -> Mdp {
        Mdp::new(
            2,
            2,
            vec![
                vec![(0, 1.0)],
                vec![(1, 1.0)],
                vec![(1, 1.0)],
                vec![(0, 1.0)],
            ],
            0,
            array![[1.0, 0.0], [0.0, 0.0]],
            0.9,
            vec![],
        )
        .unwrap()
    }

    fn self_loop(n_actions: usize, rewards: Vec<f64>, gamma: f64) -> Mdp {
        Mdp::new(
            1,
            n_actions,
            vec![vec![(0, 1.0)]; n_actions],
            0,
            Array2::from_shape_vec((1, n_actions), rewards).unwrap(),
            gamma,
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_stochastic_rows() {
        let mdp = Mdp::new(
            2,
            1,
            vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.5), (1, 0.5)]],
            0,
            Array2::zeros((2, 1)),
            0.9,
            vec![],
        )
        .unwrap();
        assert!(validate_mdp(&mdp).is_ok());
    }

    #[test]
    fn validate_flags_bad_row_sum() {
        let mut mdp = two_state_deterministic();
        mdp.transitions[0] = vec![(0, 0.9)];
        let report = validate_mdp(&mdp);
        assert!(!report.is_ok());
        assert!(report.violations[0].contains("row (0, 0) sums to 0.9"));
    }

    #[test]
    fn validate_flags_negative_probability() {
        let mut mdp = two_state_deterministic();
        mdp.transitions[0] = vec![(0, 1.1), (1, -0.1)];
        let report = validate_mdp(&mdp);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("negative probability")));
    }

    #[test]
    fn validate_flags_bad_indices_and_gamma() {
        let mut mdp = two_state_deterministic();
        mdp.initial_state = 7;
        mdp.gamma = 1.0;
        let report = validate_mdp(&mdp);
        assert!(report
            .violations
            .iter()
            .any(|v| v.contains("initial state")));
        assert!(report.violations.iter().any(|v| v.contains("gamma")));
    }

    #[test]
    fn softmax_symmetric_and_simple_values() {
        let theta = PolicyParams::from_table(array![[0.0, 0.0]]).unwrap();
        assert_eq!(theta.probabilities(0), vec![0.5, 0.5]);

        let theta = PolicyParams::from_table(array![[1.0, 0.0]]).unwrap();
        let p = theta.probabilities(0);
        assert!((p[0] - 0.73106).abs() < 1e-5);
        assert!((p[1] - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn softmax_survives_large_parameters() {
        let theta = PolicyParams::from_table(array![[1000.0, 0.0]]).unwrap();
        let p = theta.probabilities(0);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1].abs() < 1e-12);
    }

    #[test]
    fn from_table_rejects_non_finite() {
        assert!(PolicyParams::from_table(array![[f64::NAN, 0.0]]).is_err());
        assert!(PolicyParams::from_table(array![[f64::INFINITY, 0.0]]).is_err());
    }

    #[test]
    fn sample_trajectory_self_loop() {
        let mdp = self_loop(1, vec![0.0], 0.5);
        let theta = PolicyParams::zeros(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = sample_trajectory(&mdp, &theta, 3, &mut rng);
        assert_eq!(run.states, vec![0, 0, 0, 0]);
        assert_eq!(run.actions, vec![0, 0, 0]);
        run.validate(&mdp).unwrap();
    }

    #[test]
    fn sample_trajectory_absorbing_initial() {
        let mdp = Mdp::new(
            1,
            1,
            vec![vec![(0, 1.0)]],
            0,
            Array2::zeros((1, 1)),
            0.5,
            vec![0],
        )
        .unwrap();
        let theta = PolicyParams::zeros(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = sample_trajectory(&mdp, &theta, 5, &mut rng);
        assert_eq!(run.len(), 0);
        assert_eq!(run.states, vec![0]);
    }

    #[test]
    fn sampled_action_frequencies_match_softmax() {
        let mdp = two_state_deterministic();
        let theta = PolicyParams::from_table(array![[0.7, -0.3], [0.0, 0.4]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000usize;
        let mut count_a0_s0 = 0usize;
        for _ in 0..n {
            let run = sample_trajectory(&mdp, &theta, 1, &mut rng);
            if run.actions[0] == 0 {
                count_a0_s0 += 1;
            }
        }
        let p = theta.action_prob(0, 0);
        let freq = count_a0_s0 as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (freq - p).abs() < 3.0 * se,
            "freq {freq} vs p {p} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn discounted_return_cases() {
        let mdp = self_loop(1, vec![1.0], 0.5);
        let empty = Run::new(vec![0], vec![]);
        assert_eq!(discounted_return(&empty, &mdp), 0.0);

        let run = Run::new(vec![0, 0, 0, 0], vec![0, 0, 0]);
        assert!((discounted_return(&run, &mdp) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn discounted_return_goal_run() {
        // Corridor of 5 states; three step costs of 0.2 then a goal entry
        // worth 20 - 0.2, all under gamma = 0.95.
        let n = 5;
        let mut transitions = Vec::new();
        for s in 0..n {
            transitions.push(vec![((s + 1).min(n - 1), 1.0)]);
        }
        let mut rewards = Array2::from_elem((n, 1), -0.2);
        rewards[(3, 0)] = 20.0 - 0.2;
        let mdp = Mdp::new(n, 1, transitions, 0, rewards, 0.95, vec![4]).unwrap();
        let run = Run::new(vec![0, 1, 2, 3, 4], vec![0, 0, 0, 0]);
        let expected = -0.2 * (1.0 + 0.95 + 0.95f64.powi(2)) + 0.95f64.powi(3) * 19.8;
        assert!((discounted_return(&run, &mdp) - expected).abs() < 1e-12);
    }

    #[test]
    fn soft_value_iteration_one_state_closed_form() {
        // With a single self-looping state, gamma * V is a constant shift, so
        // the policy is softmax(R / tau) for any gamma.
        let mdp = self_loop(2, vec![1.0, 0.0], 0.3);
        let theta = soft_value_iteration(&mdp, 1.0).unwrap();
        let p = theta.probabilities(0);
        let e = 1.0f64.exp();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-9);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn soft_value_iteration_high_temperature_is_uniform() {
        let mdp = two_state_deterministic();
        let theta = soft_value_iteration(&mdp, 1e6).unwrap();
        for s in 0..2 {
            for p in theta.probabilities(s) {
                assert!((p - 0.5).abs() < 1e-4, "p = {p}");
            }
        }
    }

    #[test]
    fn soft_value_iteration_low_temperature_matches_hard_argmax() {
        // Deterministic 3-state chain with distinct action values.
        let mdp = Mdp::new(
            3,
            2,
            vec![
                vec![(1, 1.0)],
                vec![(0, 1.0)],
                vec![(2, 1.0)],
                vec![(1, 1.0)],
                vec![(2, 1.0)],
                vec![(2, 1.0)],
            ],
            0,
            array![[0.5, 0.0], [0.0, 1.0], [0.0, 0.0]],
            0.9,
            vec![2],
        )
        .unwrap();
        let soft = soft_value_iteration(&mdp, 0.01).unwrap();
        let hard = hard_value_iteration(&mdp).unwrap();
        for s in 0..2 {
            let p = soft.probabilities(s);
            assert!(
                p[hard[s]] >= 0.99,
                "state {s}: prob on argmax {} is {}",
                hard[s],
                p[hard[s]]
            );
        }
    }

    #[test]
    fn soft_value_iteration_equal_rewards_is_uniform() {
        let mdp = self_loop(3, vec![0.7, 0.7, 0.7], 0.9);
        let theta = soft_value_iteration(&mdp, 1.0).unwrap();
        for p in theta.probabilities(0) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_value_iteration_rejects_bad_temperature() {
        let mdp = two_state_deterministic();
        assert!(soft_value_iteration(&mdp, 0.0).is_err());
        assert!(soft_value_iteration(&mdp, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(values in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let p = softmax(&values);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| *v > 0.0));
        }

        #[test]
        fn softmax_is_shift_invariant(
            values in proptest::collection::vec(-20.0f64..20.0, 2..5),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&values);
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(q.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn sampled_runs_have_positive_probability(seed in 0u64..1000) {
            let mdp = Mdp::new(
                2,
                2,
                vec![
                    vec![(0, 0.3), (1, 0.7)],
                    vec![(1, 1.0)],
                    vec![(0, 0.5), (1, 0.5)],
                    vec![(0, 1.0)],
                ],
                0,
                Array2::zeros((2, 2)),
                0.9,
                vec![],
            ).unwrap();
            let theta = PolicyParams::from_table(ndarray::array![[0.3, -0.1], [0.0, 0.9]]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = sample_trajectory(&mdp, &theta, 6, &mut rng);
            prop_assert!(run.validate(&mdp).is_ok());
        }

        #[test]
        fn discounted_return_is_linear_in_rewards(scale in -4.0f64..4.0) {
            let mdp = self_loop(1, vec![1.3], 0.8);
            let mut scaled = mdp.clone();
            scaled.rewards *= scale;
            let run = Run::new(vec![0, 0, 0], vec![0, 0]);
            let base = discounted_return(&run, &mdp);
            let result = discounted_return(&run, &scaled);
            prop_assert!((result - scale * base).abs() < 1e-12);
        }
    }
}
