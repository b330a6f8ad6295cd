//! Build the observation HMMs induced by two policies on a toy MDP, score
//! observation sequences with the log-space forward algorithm, and run the
//! sequential probability ratio test on the log-likelihood ratio.
//!
//! Run with: cargo run --example forward_likelihood

use covert_planning::detection::{
    log_likelihood_ratio, sprt_decision, DetectionParams, SprtDecision,
};
use covert_planning::hmm::{build_hmm, log_likelihood};
use covert_planning::mdp::{sample_trajectory, Mdp, PolicyParams};
use covert_planning::obs::{sample_observation, ObsModel};
use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> covert_planning::Result<()> {
    // Two rooms; action 0 lingers, action 1 moves on. A noisy presence
    // sensor pings more often in room 1.
    let mdp = Mdp::new(
        2,
        2,
        vec![
            vec![(0, 0.8), (1, 0.2)],
            vec![(1, 1.0)],
            vec![(1, 0.8), (0, 0.2)],
            vec![(0, 1.0)],
        ],
        0,
        array![[0.0, 0.0], [0.0, 0.0]],
        0.95,
        vec![],
    )?;
    let obs = ObsModel::with_null_actions(
        2,
        2,
        vec!["ping".into(), "quiet".into()],
        array![[0.15, 0.85], [0.7, 0.3]],
    )?;

    // The nominal occupant stays near room 0 and heads back when it drifts;
    // the deviant rushes to room 1 and camps there.
    let nominal = PolicyParams::from_table(array![[1.5, -1.5], [-1.5, 1.5]])?;
    let deviant = PolicyParams::from_table(array![[-2.0, 2.0], [2.0, -2.0]])?;
    let hmm_0 = build_hmm(&mdp, &nominal.to_table(), &obs)?;
    let hmm_theta = build_hmm(&mdp, &deviant.to_table(), &obs)?;

    let params = DetectionParams {
        epsilon: 1.5,
        beta_threshold: 4.0,
        alpha: 0.2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    println!("observer thresholds: accept null at llr <= {}, alternative at llr >= {}",
        params.epsilon, params.beta_threshold);
    for (label, policy) in [("nominal", &nominal), ("deviant", &deviant)] {
        println!("{label} behavior:");
        for _ in 0..4 {
            let run = sample_trajectory(&mdp, policy, 8, &mut rng);
            let y = sample_observation(&obs, &run, &mut rng);
            let ll_theta = log_likelihood(&hmm_theta, &y);
            let ll_0 = log_likelihood(&hmm_0, &y);
            let llr = log_likelihood_ratio(&y, &hmm_theta, &hmm_0)?;
            let decision = match sprt_decision(llr, &params) {
                SprtDecision::AcceptNull => "accept null",
                SprtDecision::AcceptAlternative => "accept alternative",
                SprtDecision::Continue => "continue sampling",
            };
            let symbols: Vec<&str> = y.symbols.iter().map(|&o| obs.symbols[o].as_str()).collect();
            println!(
                "  y = {:<50} lnP(y;Mθ) = {ll_theta:7.3}  lnP(y;M0) = {ll_0:7.3}  llr = {llr:6.3}  -> {decision}",
                symbols.join(" ")
            );
        }
    }
    Ok(())
}
