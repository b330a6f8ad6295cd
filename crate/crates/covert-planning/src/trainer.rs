//! Gradient estimators and the two-time-scale primal-dual trainer.
//!
//! One outer iteration anchors the sampling policy at θ_t, runs m inner
//! batches that each sample fresh trajectories under θ_t and ascend θ on the
//! KL-penalized Lagrangian
//!
//!   L^β(θ, λ) = V(θ) + λ(α − Pr[detect]) − β·D_KL(P_{θ_t} ‖ P_θ),
//!
//! then takes one dual step on λ, adapts β toward the KL target distance d,
//! and re-anchors. Samples drawn under θ_t are importance-weighted by
//! P_θ(x)/P_{θ_t}(x); transition factors cancel, so the weight is a product
//! of policy ratios. Detection membership is always evaluated with the HMM
//! of the current θ.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::DetectionParams;
use crate::hmm::{build_hmm, log_likelihood, Hmm};
use crate::mdp::{discounted_return, sample_trajectory, Mdp, PolicyParams, PolicyTable, Run};
use crate::obs::{sample_observation, ObsModel, ObsSequence};
use crate::{Error, Result};

/// Trainer hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct HyperParams {
    /// Primal (θ) learning rate.
    pub eta: f64,
    /// Dual (λ) learning rate.
    pub kappa: f64,
    pub lambda_init: f64,
    /// Initial KL-penalty coefficient.
    pub beta_init: f64,
    /// KL target distance for the β adaptation band.
    pub d: f64,
    /// Stop once |ΔL^β| drops below this between outer iterations.
    pub delta0: f64,
    pub batches_m: usize,
    pub trajectories_per_batch: usize,
    pub horizon: usize,
    pub max_outer_iterations: usize,
    /// Importance-weight cap; set to infinity to disable.
    pub weight_clip: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            eta: 0.005,
            kappa: 0.01,
            lambda_init: 10.0,
            beta_init: 1.0,
            d: 0.01,
            delta0: 1e-3,
            batches_m: 20,
            trajectories_per_batch: 40,
            horizon: 100,
            max_outer_iterations: 400,
            weight_clip: 1e3,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("beta_init", self.beta_init),
            ("d", self.d),
            ("delta0", self.delta0),
            ("weight_clip", self.weight_clip),
        ];
        for (name, value) in positives {
            if !(value > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if self.lambda_init < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda_init must be nonnegative, got {}",
                self.lambda_init
            )));
        }
        let counts = [
            ("batches_m", self.batches_m),
            ("trajectories_per_batch", self.trajectories_per_batch),
            ("horizon", self.horizon),
            ("max_outer_iterations", self.max_outer_iterations),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// A batch of (run, observation) pairs drawn under the anchor policy θ_t,
/// with cached per-run statistics that every estimator reuses.
#[derive(Debug, Clone)]
pub struct BatchSample {
    pub pairs: Vec<(Run, ObsSequence)>,
    /// Σ_t ln π_{θ_t}(a_t|s_t) per run, under the anchor that drew the batch.
    pub anchor_log_probs: Vec<f64>,
    /// ln P(y; M₀) per observation; the nominal model never changes.
    pub nominal_log_liks: Vec<f64>,
    /// Discounted return per run.
    pub returns: Vec<f64>,
}

impl BatchSample {
    /// Draws `n` trajectory-observation pairs under softmax(θ_t).
    pub fn draw(
        mdp: &Mdp,
        theta_t: &PolicyParams,
        obs: &ObsModel,
        hmm_0: &Hmm,
        n: usize,
        horizon: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut pairs = Vec::with_capacity(n);
        let mut anchor_log_probs = Vec::with_capacity(n);
        let mut returns = Vec::with_capacity(n);
        for _ in 0..n {
            let run = sample_trajectory(mdp, theta_t, horizon, rng);
            let y = sample_observation(obs, &run, rng);
            anchor_log_probs.push(theta_t.log_prob_of_run(&run));
            returns.push(discounted_return(&run, mdp));
            pairs.push((run, y));
        }
        let nominal_log_liks = pairs
            .par_iter()
            .map(|(_, y)| log_likelihood(hmm_0, y))
            .collect();
        BatchSample {
            pairs,
            anchor_log_probs,
            nominal_log_liks,
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Σ_t ∇_θ ln π_θ(a_t|s_t). For softmax rows the (s, a) entry accumulates
/// 1{a = a_t} − π_θ(a|s_t) at every visit of s_t.
pub fn score_function(run: &Run, theta: &PolicyParams) -> Array2<f64> {
    let mut grad = Array2::zeros(theta.theta.dim());
    for (s, taken) in run.steps() {
        let probs = theta.probabilities(s);
        for (a, p) in probs.iter().enumerate() {
            let indicator = if a == taken { 1.0 } else { 0.0 };
            grad[(s, a)] += indicator - p;
        }
    }
    grad
}

/// P_θ(x)/P_{θ_t}(x): transition factors cancel, leaving the product of
/// per-step policy ratios, computed in log space then exponentiated.
pub fn importance_weight(run: &Run, theta: &PolicyParams, theta_t: &PolicyParams) -> f64 {
    (theta.log_prob_of_run(run) - theta_t.log_prob_of_run(run)).exp()
}

fn clipped_weight(batch: &BatchSample, i: usize, theta: &PolicyParams, clip: f64) -> f64 {
    let log_w = theta.log_prob_of_run(&batch.pairs[i].0) - batch.anchor_log_probs[i];
    log_w.exp().min(clip)
}

/// (1/N) Σ_i w_i · score(x_i, θ) · R(x_i): the importance-weighted value
/// gradient. `weight_clip` caps each w_i (infinity disables).
pub fn value_gradient(
    batch: &BatchSample,
    theta: &PolicyParams,
    mdp: &Mdp,
    weight_clip: f64,
) -> Array2<f64> {
    debug_assert_eq!(mdp.n_states, theta.n_states());
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(theta.theta.dim());
    for i in 0..batch.len() {
        let w = clipped_weight(batch, i, theta, weight_clip);
        let coeff = w * batch.returns[i] / n;
        if coeff != 0.0 {
            grad.scaled_add(coeff, &score_function(&batch.pairs[i].0, theta));
        }
    }
    grad
}

/// −(1/N) Σ_i score(x_i, θ) = ∇_θ D_KL(P_{θ_t} ‖ P_θ) for batches drawn
/// under θ_t. No importance weights appear: the outer expectation is already
/// under the anchor.
pub fn kl_gradient(batch: &BatchSample, theta: &PolicyParams) -> Array2<f64> {
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(theta.theta.dim());
    for (run, _) in &batch.pairs {
        grad.scaled_add(-1.0 / n, &score_function(run, theta));
    }
    grad
}

/// −(1/N) Σ_i 1{y_i detected} · w_i · score(x_i, θ): the gradient of the
/// negated detection probability. Membership uses the current θ's HMM.
pub fn constraint_gradient(
    batch: &BatchSample,
    theta: &PolicyParams,
    hmm_theta: &Hmm,
    epsilon: f64,
    weight_clip: f64,
) -> Result<Array2<f64>> {
    let llrs = batch_llrs(batch, hmm_theta)?;
    let n = batch.len() as f64;
    let mut grad = Array2::zeros(theta.theta.dim());
    for (i, llr) in llrs.iter().enumerate() {
        if *llr > epsilon {
            let w = clipped_weight(batch, i, theta, weight_clip);
            grad.scaled_add(-w / n, &score_function(&batch.pairs[i].0, theta));
        }
    }
    Ok(grad)
}

/// Log-likelihood ratios of the batch observations under `hmm_theta` against
/// the cached nominal likelihoods.
fn batch_llrs(batch: &BatchSample, hmm_theta: &Hmm) -> Result<Vec<f64>> {
    let theta_lls: Vec<f64> = batch
        .pairs
        .par_iter()
        .map(|(_, y)| log_likelihood(hmm_theta, y))
        .collect();
    theta_lls
        .iter()
        .zip(batch.nominal_log_liks.iter())
        .map(|(&lt, &l0)| {
            if lt == f64::NEG_INFINITY && l0 == f64::NEG_INFINITY {
                Err(Error::OutsideBothSupports)
            } else if lt == f64::NEG_INFINITY {
                Ok(f64::NEG_INFINITY)
            } else if l0 == f64::NEG_INFINITY {
                Ok(f64::INFINITY)
            } else {
                Ok(lt - l0)
            }
        })
        .collect()
}

/// L^β = value + λ(α − detection) − β·kl.
pub fn lagrangian_value(
    value_est: f64,
    detection_est: f64,
    kl_est: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    value_est + lambda * (alpha - detection_est) - beta * kl_est
}

/// ∇_λ L^β = α − detection.
pub fn dual_gradient(detection_est: f64, alpha: f64) -> f64 {
    alpha - detection_est
}

/// λ ← (λ − κ·grad)⁺. Descending against α − detection grows λ while the
/// constraint is violated.
pub fn update_lambda(lambda: f64, kappa: f64, grad: f64) -> f64 {
    (lambda - kappa * grad).max(0.0)
}

/// Halve β when the KL estimate sits well under the target distance d,
/// double it when well over; inside the band β is left alone.
pub fn update_beta(beta: f64, kl_est: f64, d: f64) -> f64 {
    if kl_est <= d / 1.5 {
        beta / 2.0
    } else if kl_est >= 1.5 * d {
        beta * 2.0
    } else {
        beta
    }
}

/// (1/N) Σ_i [ln P_{θ_t}(x_i) − ln P_θ(x_i)], policy factors only: the Monte
/// Carlo estimate of D_KL(P_{θ_t} ‖ P_θ). The raw value can dip below zero
/// from sampling noise; reports clamp it at zero.
pub fn kl_estimate(batch: &BatchSample, theta: &PolicyParams) -> f64 {
    let n = batch.len() as f64;
    batch
        .pairs
        .iter()
        .zip(batch.anchor_log_probs.iter())
        .map(|((run, _), anchor)| anchor - theta.log_prob_of_run(run))
        .sum::<f64>()
        / n
}

/// ∇_θ L^β(θ, λ) = value_gradient + λ·constraint_gradient − β·kl_gradient.
///
/// With λ = 0 the detection term (and the HMM rebuild it needs) is skipped
/// entirely; with β = 0 the KL term is skipped. At λ = β = 0 this is exactly
/// an importance-weighted policy-gradient step.
pub fn covert_gradient(
    batch: &BatchSample,
    theta: &PolicyParams,
    mdp: &Mdp,
    obs: &ObsModel,
    epsilon: f64,
    lambda: f64,
    beta: f64,
    weight_clip: f64,
) -> Result<Array2<f64>> {
    let mut grad = value_gradient(batch, theta, mdp, weight_clip);
    if lambda != 0.0 {
        let hmm_theta = build_hmm(mdp, &theta.to_table(), obs)?;
        let constraint = constraint_gradient(batch, theta, &hmm_theta, epsilon, weight_clip)?;
        grad.scaled_add(lambda, &constraint);
    }
    if beta != 0.0 {
        grad.scaled_add(-beta, &kl_gradient(batch, theta));
    }
    Ok(grad)
}

/// One row of the training trace, recorded per completed outer iteration
/// with the λ and β that were in force during the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub lagrangian: f64,
    pub value: f64,
    pub detection: f64,
    pub kl: f64,
    pub lambda: f64,
    pub beta: f64,
}

/// Final trainer state plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct TrainerOutcome {
    pub theta: PolicyParams,
    pub lambda: f64,
    pub beta: f64,
    pub trace: Vec<TraceRow>,
    /// True when |ΔL^β| < δ₀ stopped the loop (as opposed to the iteration cap).
    pub converged: bool,
}

struct IterationStats {
    value: f64,
    detection: f64,
    kl_raw: f64,
}

fn iteration_statistics(
    batches: &[BatchSample],
    theta: &PolicyParams,
    hmm_theta: &Hmm,
    epsilon: f64,
    weight_clip: f64,
) -> Result<IterationStats> {
    let mut total = 0usize;
    let mut value = 0.0;
    let mut detected = 0usize;
    let mut kl = 0.0;
    for batch in batches {
        let llrs = batch_llrs(batch, hmm_theta)?;
        for i in 0..batch.len() {
            let w = clipped_weight(batch, i, theta, weight_clip);
            value += w * batch.returns[i];
            if llrs[i] > epsilon {
                detected += 1;
            }
            kl += batch.anchor_log_probs[i] - theta.log_prob_of_run(&batch.pairs[i].0);
        }
        total += batch.len();
    }
    let n = total as f64;
    Ok(IterationStats {
        value: value / n,
        detection: detected as f64 / n,
        kl_raw: kl / n,
    })
}

/// Runs the primal-dual proximal policy gradient loop.
///
/// Per outer iteration t: for each of m batches, sample N trajectories under
/// the anchor θ_t and ascend θ ← θ + η∇_θ L^β(θ, λ_t); then evaluate L^β,
/// value, detection, and KL estimates on all m·N pairs, update λ by a
/// projected dual step, adapt β, and re-anchor θ_{t+1} ← θ. Stops when the
/// Lagrangian change |ΔL^β| falls below δ₀ or after `max_outer_iterations`.
///
/// Per-batch random streams are derived from `seed` plus a global batch
/// index, so identical inputs replay identically regardless of thread count.
pub fn run_covert_pg(
    mdp: &Mdp,
    obs: &ObsModel,
    nominal: &PolicyTable,
    det: &DetectionParams,
    hyper: &HyperParams,
    theta_init: &PolicyParams,
    seed: u64,
) -> Result<TrainerOutcome> {
    hyper.validate()?;
    det.validate()?;
    if theta_init.n_states() != mdp.n_states || theta_init.n_actions() != mdp.n_actions {
        return Err(Error::DimensionMismatch(format!(
            "initial theta is {}x{}, mdp is {}x{}",
            theta_init.n_states(),
            theta_init.n_actions(),
            mdp.n_states,
            mdp.n_actions
        )));
    }
    let hmm_0 = build_hmm(mdp, nominal, obs)?;

    let mut theta_t = theta_init.clone();
    let mut lambda = hyper.lambda_init;
    let mut beta = hyper.beta_init;
    let mut l_prev = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;

    for t in 1..=hyper.max_outer_iterations {
        let mut theta = theta_t.clone();
        let mut batches = Vec::with_capacity(hyper.batches_m);
        for b in 0..hyper.batches_m {
            let global_batch = ((t - 1) * hyper.batches_m + b) as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(global_batch));
            let batch = BatchSample::draw(
                mdp,
                &theta_t,
                obs,
                &hmm_0,
                hyper.trajectories_per_batch,
                hyper.horizon,
                &mut rng,
            );
            let grad = covert_gradient(
                &batch,
                &theta,
                mdp,
                obs,
                det.epsilon,
                lambda,
                beta,
                hyper.weight_clip,
            )?;
            theta.theta.scaled_add(hyper.eta, &grad);
            if theta.theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "policy parameters diverged at iteration {t}, batch {b} \
                     (lambda {lambda}, beta {beta})"
                )));
            }
            batches.push(batch);
        }

        let hmm_theta = build_hmm(mdp, &theta.to_table(), obs)?;
        let stats =
            iteration_statistics(&batches, &theta, &hmm_theta, det.epsilon, hyper.weight_clip)?;
        let kl_report = stats.kl_raw.max(0.0);
        let l_now = lagrangian_value(
            stats.value,
            stats.detection,
            kl_report,
            lambda,
            det.alpha,
            beta,
        );
        if !l_now.is_finite() {
            return Err(Error::NonFinite(format!(
                "Lagrangian became {l_now} at iteration {t} \
                 (value {}, detection {}, kl {kl_report}, lambda {lambda})",
                stats.value, stats.detection
            )));
        }
        trace.push(TraceRow {
            iter: t,
            lagrangian: l_now,
            value: stats.value,
            detection: stats.detection,
            kl: kl_report,
            lambda,
            beta,
        });

        lambda = update_lambda(lambda, hyper.kappa, dual_gradient(stats.detection, det.alpha));
        beta = update_beta(beta, kl_report, hyper.d);
        theta_t = theta;

        let delta = (l_now - l_prev).abs();
        l_prev = l_now;
        if delta < hyper.delta0 {
            converged = true;
            break;
        }
    }

    Ok(TrainerOutcome {
        theta: theta_t,
        lambda,
        beta,
        trace,
        converged,
    })
}
