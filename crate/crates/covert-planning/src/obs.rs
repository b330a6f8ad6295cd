//! Observation models and observation sampling along runs.
//!
//! The observer sees one symbol per decision state and one per nature state
//! (state-action pair), so a run of T actions yields a sequence of 2T + 1
//! symbols. Environments whose sensors only report positions use a dedicated
//! "null" symbol emitted deterministically at every nature state; that keeps
//! sequence lengths uniform without leaking action information.

use ndarray::Array2;
use rand::Rng;

use crate::mdp::{sample_categorical, Run, ROW_SUM_TOL};
use crate::{Error, Result};

/// Emission tables over a finite observation alphabet.
#[derive(Debug, Clone)]
pub struct ObsModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// Symbol names, index-aligned with emission columns.
    pub symbols: Vec<String>,
    /// Obs(o | s), shape (n_states, |O|).
    pub state_emission: Array2<f64>,
    /// Obs(o | s, a), shape (n_states * n_actions, |O|), row-major in (s, a).
    pub action_emission: Array2<f64>,
}

impl ObsModel {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        symbols: Vec<String>,
        state_emission: Array2<f64>,
        action_emission: Array2<f64>,
    ) -> Result<Self> {
        let model = ObsModel {
            n_states,
            n_actions,
            symbols,
            state_emission,
            action_emission,
        };
        model.validate()?;
        Ok(model)
    }

    /// State-only observations: appends a "null" symbol that every nature
    /// state emits with probability one. `state_emission` columns must align
    /// with `symbols` (without the null symbol).
    pub fn with_null_actions(
        n_states: usize,
        n_actions: usize,
        mut symbols: Vec<String>,
        state_emission: Array2<f64>,
    ) -> Result<Self> {
        let n_obs = symbols.len();
        symbols.push("null".to_string());
        let mut state_rows = Array2::zeros((n_states, n_obs + 1));
        for s in 0..n_states {
            for o in 0..n_obs {
                state_rows[(s, o)] = state_emission[(s, o)];
            }
        }
        let mut action_rows = Array2::zeros((n_states * n_actions, n_obs + 1));
        for row in 0..n_states * n_actions {
            action_rows[(row, n_obs)] = 1.0;
        }
        ObsModel::new(n_states, n_actions, symbols, state_rows, action_rows)
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn sa_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn validate(&self) -> Result<()> {
        let n_obs = self.symbols.len();
        if self.state_emission.dim() != (self.n_states, n_obs) {
            return Err(Error::DimensionMismatch(format!(
                "state emission shape {:?}, expected ({}, {})",
                self.state_emission.dim(),
                self.n_states,
                n_obs
            )));
        }
        if self.action_emission.dim() != (self.n_states * self.n_actions, n_obs) {
            return Err(Error::DimensionMismatch(format!(
                "action emission shape {:?}, expected ({}, {})",
                self.action_emission.dim(),
                self.n_states * self.n_actions,
                n_obs
            )));
        }
        for (name, table) in [
            ("state", &self.state_emission),
            ("action", &self.action_emission),
        ] {
            for (i, row) in table.rows().into_iter().enumerate() {
                let sum: f64 = row.sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(Error::InvalidModel(format!(
                        "{name} emission row {i} sums to {sum}"
                    )));
                }
                if row.iter().any(|p| *p < 0.0) {
                    return Err(Error::InvalidModel(format!(
                        "negative probability in {name} emission row {i}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A finite observation sequence y = o₀o₁…, alternating decision-state and
/// nature-state emissions along a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObsSequence {
    pub symbols: Vec<usize>,
}

impl ObsSequence {
    pub fn new(symbols: Vec<usize>) -> Self {
        ObsSequence { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Emits one symbol per decision state and one per nature state along the
/// run: |y| = 2T + 1 for a run of T actions.
pub fn sample_observation(obs: &ObsModel, run: &Run, rng: &mut impl Rng) -> ObsSequence {
    let mut symbols = Vec::with_capacity(2 * run.len() + 1);
    for t in 0..run.states.len() {
        let s = run.states[t];
        let row = obs.state_emission.row(s);
        symbols.push(sample_categorical(row.as_slice().unwrap(), rng));
        if t < run.actions.len() {
            let row = obs.action_emission.row(obs.sa_index(s, run.actions[t]));
            symbols.push(sample_categorical(row.as_slice().unwrap(), rng));
        }
    }
    ObsSequence { symbols }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Identity observations: state s emits symbol s, pair (s, a) emits the
    /// offset symbol n_states + s * n_actions + a.
    pub(crate) fn identity_obs(n_states: usize, n_actions: usize) -> ObsModel {
        let n_obs = n_states + n_states * n_actions;
        let symbols = (0..n_obs).map(|o| format!("o{o}")).collect();
        let mut state_emission = Array2::zeros((n_states, n_obs));
        for s in 0..n_states {
            state_emission[(s, s)] = 1.0;
        }
        let mut action_emission = Array2::zeros((n_states * n_actions, n_obs));
        for row in 0..n_states * n_actions {
            action_emission[(row, n_states + row)] = 1.0;
        }
        ObsModel::new(n_states, n_actions, symbols, state_emission, action_emission).unwrap()
    }

    #[test]
    fn deterministic_emissions_reproduce_run_labels() {
        let obs = identity_obs(2, 2);
        let run = Run::new(vec![0, 1, 0], vec![1, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = sample_observation(&obs, &run, &mut rng);
        // s0, (s0,a1), s1, (s1,a0), s0
        assert_eq!(y.symbols, vec![0, 2 + 1, 1, 2 + 2, 0]);
    }

    #[test]
    fn empty_run_emits_single_symbol() {
        let obs = identity_obs(2, 2);
        let run = Run::new(vec![1], vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = sample_observation(&obs, &run, &mut rng);
        assert_eq!(y.symbols, vec![1]);
    }

    #[test]
    fn null_action_convention() {
        let state_emission = array![[0.55, 0.45], [0.0, 1.0]];
        let obs = ObsModel::with_null_actions(
            2,
            2,
            vec!["hit".into(), "miss".into()],
            state_emission,
        )
        .unwrap();
        assert_eq!(obs.symbols, vec!["hit", "miss", "null"]);
        // Nature states emit the null symbol with probability one.
        for row in obs.action_emission.rows() {
            assert_eq!(row.to_vec(), vec![0.0, 0.0, 1.0]);
        }
        // A run of one action yields hit/miss, null, hit/miss.
        let run = Run::new(vec![0, 1], vec![0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = sample_observation(&obs, &run, &mut rng);
        assert_eq!(y.len(), 3);
        assert_eq!(y.symbols[1], 2);
        assert_eq!(y.symbols[2], 1);
    }

    #[test]
    fn validate_rejects_bad_rows() {
        let bad = ObsModel::new(
            1,
            1,
            vec!["a".into(), "b".into()],
            array![[0.6, 0.3]],
            array![[0.5, 0.5]],
        );
        assert!(bad.is_err());
    }
}
