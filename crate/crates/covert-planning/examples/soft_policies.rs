//! Entropy-regularized value iteration on the mini gridworld at several
//! temperatures: greedy-arrow maps and Monte Carlo values.
//!
//! Run with: cargo run --release --example soft_policies

use std::path::Path;

use covert_planning::config::preset;
use covert_planning::gridworld::build_gridworld;
use covert_planning::harness::evaluate_policy;
use covert_planning::mdp::soft_value_iteration;

fn main() -> covert_planning::Result<()> {
    let config = preset("mini-5x5")?;
    let loaded = config.load(Path::new("."))?;
    let (spec, _) = loaded.grid.clone().expect("mini preset is a grid");
    let agent_mdp = build_gridworld(&spec)?;

    for temperature in [2.0, 0.5, 0.1] {
        let theta = soft_value_iteration(&agent_mdp, temperature)?;
        let eval = evaluate_policy(
            &loaded.mdp,
            &loaded.obs,
            &theta,
            &loaded.nominal_theta.to_table(),
            config.detection.epsilon,
            config.hyper.horizon,
            3000,
            1,
        )?;
        println!(
            "temperature {temperature}: value {:.2} ± {:.2}, detection {:.3}",
            eval.value_mean, eval.value_se, eval.detection_mean
        );
        let arrows = ['^', '>', 'v', '<'];
        for r in 0..spec.rows {
            let mut line = String::from("  ");
            for c in 0..spec.cols {
                if spec.walls.contains(&(r, c)) {
                    line.push('#');
                    continue;
                }
                if (r, c) == spec.agent_goal {
                    line.push('A');
                    continue;
                }
                let p = theta.probabilities(spec.cell_index((r, c)));
                let best = p
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                line.push(arrows[best]);
            }
            println!("{line}");
        }
        println!();
    }
    println!("Hotter policies wander (low value, low detection); colder ones beeline");
    println!("through the sensor field and get caught.");
    Ok(())
}
