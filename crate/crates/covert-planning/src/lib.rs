//! Covert planning in finite Markov decision processes.
//!
//! An agent plans in a stochastic environment watched by a passive observer
//! with imperfect (sensor-based) observations. The observer runs a
//! likelihood-ratio test of the observation stream against the hidden Markov
//! model induced by a known nominal policy. The agent wants to maximize its
//! own discounted reward while keeping the probability that the test fires
//! below a chosen level.
//!
//! The crate provides:
//!
//! - [`mdp`]: tabular MDPs, softmax policies, trajectory sampling, discounted
//!   returns, and entropy-regularized value iteration;
//! - [`obs`] / [`hmm`]: observation models, the policy-induced HMM over
//!   decision and nature states, and a log-space forward algorithm;
//! - [`detection`]: log-likelihood ratios, the SPRT decision rule, and Monte
//!   Carlo detection-probability estimates;
//! - [`trainer`]: score-function and importance-weighted gradient estimators
//!   and the two-time-scale primal-dual trainer with an adaptive KL penalty;
//! - [`gridworld`]: the stochastic gridworld environment with slip dynamics,
//!   walls, terrain, and multi-sensor observation models;
//! - [`oracle`]: exact brute-force references (run enumeration, exact value /
//!   KL / detection probability, finite differences, the coin-MDP gap check);
//! - [`config`] / [`harness`] / [`verify`]: JSON file formats, presets, and
//!   the train / evaluate / cross-eval / verify entry points behind the CLI.
//!
//! Start with the runnable programs under `examples/` for end-to-end usage.

pub mod config;
pub mod detection;
pub mod gridworld;
pub mod harness;
pub mod hmm;
pub mod mdp;
pub mod obs;
pub mod oracle;
pub mod trainer;
pub mod verify;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no convergence after {sweeps} sweeps (last change {change:e})")]
    NoConvergence { sweeps: usize, change: f64 },
    #[error("enumeration limit exceeded ({limit} entries)")]
    EnumerationLimit { limit: usize },
    #[error("observation outside both supports")]
    OutsideBothSupports,
    #[error("empty sample set")]
    EmptySamples,
    #[error("non-finite quantity: {0}")]
    NonFinite(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown suite '{0}' (expected oracle, gradients, theorem1, or all)")]
    UnknownSuite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 1 for validation
    /// problems in user input, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::DimensionMismatch(_)
            | Error::InvalidConfig(_)
            | Error::UnknownSuite(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
