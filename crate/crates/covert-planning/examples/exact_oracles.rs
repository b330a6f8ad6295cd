//! Exact enumeration oracles against Monte Carlo estimates on a toy model:
//! run probabilities, value, detection probability, and KL divergence.
//!
//! Run with: cargo run --release --example exact_oracles

use covert_planning::detection::estimate_detection_probability;
use covert_planning::hmm::build_hmm;
use covert_planning::mdp::{discounted_return, sample_trajectory, Mdp, PolicyParams, PolicyTable};
use covert_planning::obs::{sample_observation, ObsModel};
use covert_planning::oracle::{
    enumerate_runs, exact_detection_probability, exact_kl, exact_value,
};
use covert_planning::trainer::{kl_estimate, BatchSample};
use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> covert_planning::Result<()> {
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
    )?;
    let obs = ObsModel::with_null_actions(
        2,
        2,
        vec!["ping".into(), "quiet".into()],
        array![[0.8, 0.2], [0.1, 0.9]],
    )?;
    let theta = PolicyParams::from_table(array![[1.2, -0.8], [0.4, 0.1]])?;
    let anchor = PolicyParams::from_table(array![[0.8, -0.4], [0.6, -0.1]])?;
    let nominal = PolicyTable::uniform(2, 2);
    let horizon = 4;
    let epsilon = 0.2;
    let n = 200_000;

    let ensemble = enumerate_runs(&mdp, &theta.to_table(), horizon)?;
    println!(
        "{} enumerable runs at horizon {horizon}; total probability {:.12}",
        ensemble.entries.len(),
        ensemble.total_probability()
    );

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut returns = 0.0;
    let mut observations = Vec::with_capacity(n);
    for _ in 0..n {
        let run = sample_trajectory(&mdp, &theta, horizon, &mut rng);
        returns += discounted_return(&run, &mdp);
        observations.push(sample_observation(&obs, &run, &mut rng));
    }
    let value = exact_value(&mdp, &theta.to_table(), horizon)?;
    println!(
        "value:     exact {value:.6}   Monte Carlo {:.6}   (N = {n})",
        returns / n as f64
    );

    let hmm_theta = build_hmm(&mdp, &theta.to_table(), &obs)?;
    let hmm_0 = build_hmm(&mdp, &nominal, &obs)?;
    let exact_det =
        exact_detection_probability(&mdp, &theta.to_table(), &obs, &nominal, epsilon, horizon)?;
    let (mc_det, se) = estimate_detection_probability(&observations, &hmm_theta, &hmm_0, epsilon)?;
    println!("detection: exact {exact_det:.6}   Monte Carlo {mc_det:.6} ± {se:.6}   (ε = {epsilon})");

    let exact_divergence = exact_kl(&mdp, &anchor, &theta, horizon)?;
    let batch = BatchSample::draw(&mdp, &anchor, &obs, &hmm_0, n, horizon, &mut rng);
    println!(
        "KL:        exact {exact_divergence:.6}   Monte Carlo {:.6}",
        kl_estimate(&batch, &theta)
    );
    Ok(())
}
