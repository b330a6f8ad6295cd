//! Log-likelihood ratios, the SPRT decision rule, the detection condition,
//! and Monte Carlo estimation of the detection probability.
//!
//! The observer compares the observation stream against two hypotheses: the
//! nominal model M₀ and the agent model Mθ. A sequence counts as detected
//! when ln P(y; Mθ) − ln P(y; M₀) exceeds the threshold ε strictly; ties sit
//! with the null. Support leakage (P₀ = 0 < Pθ) gives a +∞ ratio and always
//! detects.

use crate::hmm::{log_likelihood, Hmm};
use crate::obs::ObsSequence;
use crate::{Error, Result};

/// Thresholds for the sequential test and the tolerated detection level α.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionParams {
    /// Lower SPRT threshold; also the detection-condition threshold.
    pub epsilon: f64,
    /// Upper SPRT threshold. The planner never uses it; kept for the full
    /// test. Defaults to +∞ (omitted in JSON, where infinity has no literal).
    #[serde(
        default = "default_beta_threshold",
        skip_serializing_if = "is_infinite"
    )]
    pub beta_threshold: f64,
    /// Tolerated detection probability in [0, 1].
    pub alpha: f64,
}

fn default_beta_threshold() -> f64 {
    f64::INFINITY
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_infinite(v: &f64) -> bool {
    v.is_infinite()
}

impl DetectionParams {
    pub fn new(epsilon: f64, alpha: f64) -> Result<Self> {
        let params = DetectionParams {
            epsilon,
            beta_threshold: f64::INFINITY,
            alpha,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon < self.beta_threshold) {
            return Err(Error::InvalidConfig(format!(
                "epsilon ({}) must be below beta_threshold ({})",
                self.epsilon, self.beta_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha ({}) outside [0, 1]",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Outcome of one SPRT step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SprtDecision {
    AcceptNull,
    AcceptAlternative,
    Continue,
}

/// ln P(y; Mθ) − ln P(y; M₀). May be ±∞ when exactly one model assigns zero
/// probability; errors when both do.
pub fn log_likelihood_ratio(y: &ObsSequence, hmm_theta: &Hmm, hmm_0: &Hmm) -> Result<f64> {
    let ll_theta = log_likelihood(hmm_theta, y);
    let ll_0 = log_likelihood(hmm_0, y);
    if ll_theta == f64::NEG_INFINITY && ll_0 == f64::NEG_INFINITY {
        return Err(Error::OutsideBothSupports);
    }
    if ll_theta == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if ll_0 == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(ll_theta - ll_0)
}

/// Accepts the null when llr ≤ ε, the alternative when llr ≥ the upper
/// threshold, and continues in between (both boundaries inclusive).
pub fn sprt_decision(llr: f64, params: &DetectionParams) -> SprtDecision {
    if llr <= params.epsilon {
        SprtDecision::AcceptNull
    } else if llr >= params.beta_threshold {
        SprtDecision::AcceptAlternative
    } else {
        SprtDecision::Continue
    }
}

/// The detection condition: true iff ln P(y; Mθ) − ln P(y; M₀) > ε (strict).
pub fn is_detected(y: &ObsSequence, hmm_theta: &Hmm, hmm_0: &Hmm, epsilon: f64) -> Result<bool> {
    Ok(log_likelihood_ratio(y, hmm_theta, hmm_0)? > epsilon)
}

/// Fraction of detected samples with its binomial standard error
/// √(p̂(1−p̂)/N). Samples must be drawn under Mθ.
pub fn estimate_detection_probability(
    samples: &[ObsSequence],
    hmm_theta: &Hmm,
    hmm_0: &Hmm,
    epsilon: f64,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut detected = 0usize;
    for y in samples {
        if is_detected(y, hmm_theta, hmm_0, epsilon)? {
            detected += 1;
        }
    }
    let n = samples.len() as f64;
    let p = detected as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    Ok((p, se))
}
