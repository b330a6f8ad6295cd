//! The policy-induced hidden Markov model over decision and nature states,
//! and log-space forward-algorithm likelihood evaluation.
//!
//! The HMM has one decision state per MDP state s (where an action is drawn)
//! and one nature state per pair (s, a) (where the successor is drawn):
//! P(s, (s,a)) = π(a|s), P((s,a), s') = P(s'|s,a), all other transitions are
//! zero. Emissions come straight from the observation model. Because the
//! chain strictly alternates decision → nature → decision, the forward pass
//! keeps one vector per layer instead of one over the full state union.

use ndarray::Array2;

use crate::mdp::{log_sum_exp, Mdp, PolicyTable, ROW_SUM_TOL};
use crate::obs::{ObsModel, ObsSequence};
use crate::{Error, Result};

/// A state of the induced HMM: either an MDP state or a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HmmState {
    Decision(usize),
    Nature(usize, usize),
}

/// The observation process induced by a policy on an MDP.
#[derive(Debug, Clone)]
pub struct Hmm {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_symbols: usize,
    pub initial_state: usize,
    /// π(a|s): transition probabilities from decision to nature states.
    policy: Array2<f64>,
    log_policy: Array2<f64>,
    /// MDP successor lists per (s, a): transitions from nature to decision states.
    transitions: Vec<Vec<(usize, f64)>>,
    state_emission: Array2<f64>,
    action_emission: Array2<f64>,
    log_state_emission: Array2<f64>,
    log_action_emission: Array2<f64>,
    /// Reverse adjacency: for each decision state s', the incoming
    /// (sa-index, ln P(s'|s,a)) edges. Precomputed for the forward pass.
    incoming: Vec<Vec<(usize, f64)>>,
}

/// Builds the HMM induced by `policy` on `mdp` with observation model `obs`.
/// The nominal model M₀ uses the nominal policy; Mθ uses softmax(θ).
pub fn build_hmm(mdp: &Mdp, policy: &PolicyTable, obs: &ObsModel) -> Result<Hmm> {
    if policy.n_states() != mdp.n_states || policy.n_actions() != mdp.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "policy is {}x{}, mdp is {}x{}",
            policy.n_states(),
            policy.n_actions(),
            mdp.n_states,
            mdp.n_actions
        )));
    }
    if obs.n_states != mdp.n_states || obs.n_actions != mdp.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "observation model is {}x{}, mdp is {}x{}",
            obs.n_states, obs.n_actions, mdp.n_states, mdp.n_actions
        )));
    }
    obs.validate()?;
    for (s, row) in policy.probs.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
            return Err(Error::InvalidModel(format!(
                "policy row {s} is not a distribution (sum {sum})"
            )));
        }
    }

    let log_policy = policy.probs.mapv(f64::ln);
    let log_state_emission = obs.state_emission.mapv(f64::ln);
    let log_action_emission = obs.action_emission.mapv(f64::ln);
    let mut incoming = vec![Vec::new(); mdp.n_states];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let sa = mdp.sa_index(s, a);
            for &(s2, p) in &mdp.transitions[sa] {
                if p > 0.0 {
                    incoming[s2].push((sa, p.ln()));
                }
            }
        }
    }
    Ok(Hmm {
        n_states: mdp.n_states,
        n_actions: mdp.n_actions,
        n_symbols: obs.n_symbols(),
        initial_state: mdp.initial_state,
        policy: policy.probs.clone(),
        log_policy,
        transitions: mdp.transitions.clone(),
        state_emission: obs.state_emission.clone(),
        action_emission: obs.action_emission.clone(),
        log_state_emission,
        log_action_emission,
        incoming,
    })
}

impl Hmm {
    pub fn n_hmm_states(&self) -> usize {
        self.n_states + self.n_states * self.n_actions
    }

    pub fn initial(&self) -> HmmState {
        HmmState::Decision(self.initial_state)
    }

    /// All HMM states, decision states first.
    pub fn states(&self) -> Vec<HmmState> {
        let mut out = Vec::with_capacity(self.n_hmm_states());
        for s in 0..self.n_states {
            out.push(HmmState::Decision(s));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.push(HmmState::Nature(s, a));
            }
        }
        out
    }

    /// P(to | from) over the full HMM state union.
    pub fn transition_prob(&self, from: HmmState, to: HmmState) -> f64 {
        match (from, to) {
            (HmmState::Decision(s), HmmState::Nature(s2, a)) if s == s2 => self.policy[(s, a)],
            (HmmState::Nature(s, a), HmmState::Decision(s2)) => self.transitions
                [s * self.n_actions + a]
                .iter()
                .find(|(succ, _)| *succ == s2)
                .map(|(_, p)| *p)
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// E(o | state).
    pub fn emission_prob(&self, state: HmmState, o: usize) -> f64 {
        match state {
            HmmState::Decision(s) => self.state_emission[(s, o)],
            HmmState::Nature(s, a) => self.action_emission[(s * self.n_actions + a, o)],
        }
    }

    /// Checks every transition and emission row sums to one.
    pub fn validate(&self) -> Result<()> {
        for (s, row) in self.policy.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "decision row {s} sums to {sum}"
                )));
            }
        }
        for (sa, row) in self.transitions.iter().enumerate() {
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "nature row {sa} sums to {sum}"
                )));
            }
        }
        Ok(())
    }
}

/// ln P(y; hmm) by the forward recursion in log space.
///
/// Position 2k is emitted by a decision state and position 2k+1 by a nature
/// state, starting from the initial decision state. Returns −∞ when y has
/// zero probability and 0 for the empty sequence.
pub fn log_likelihood(hmm: &Hmm, y: &ObsSequence) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let n_s = hmm.n_states;
    let n_a = hmm.n_actions;
    debug_assert!(y.symbols.iter().all(|&o| o < hmm.n_symbols));

    // Layer 0: all mass on the initial decision state.
    let mut dec = vec![f64::NEG_INFINITY; n_s];
    dec[hmm.initial_state] = hmm.log_state_emission[(hmm.initial_state, y.symbols[0])];

    let mut nat = vec![f64::NEG_INFINITY; n_s * n_a];
    let mut scratch: Vec<f64> = Vec::new();
    for (k, &o) in y.symbols.iter().enumerate().skip(1) {
        if k % 2 == 1 {
            // decision -> nature
            for s in 0..n_s {
                let base = dec[s];
                for a in 0..n_a {
                    let sa = s * n_a + a;
                    nat[sa] = if base == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        base + hmm.log_policy[(s, a)] + hmm.log_action_emission[(sa, o)]
                    };
                }
            }
        } else {
            // nature -> decision
            for s2 in 0..n_s {
                scratch.clear();
                for &(sa, log_p) in &hmm.incoming[s2] {
                    let v = nat[sa];
                    if v != f64::NEG_INFINITY {
                        scratch.push(v + log_p);
                    }
                }
                dec[s2] = log_sum_exp(&scratch) + hmm.log_state_emission[(s2, o)];
            }
        }
    }
    if y.len() % 2 == 1 {
        log_sum_exp(&dec)
    } else {
        log_sum_exp(&nat)
    }
}
