//! Train a covert policy on the mini 5×5 preset and report how value and
//! detection probability evolve.
//!
//! Run with: cargo run --release --example train_covert_policy

use std::path::Path;

use covert_planning::config::preset;
use covert_planning::harness::cmd_train;

fn main() -> covert_planning::Result<()> {
    let mut config = preset("mini-5x5")?;
    // A shorter run than the preset default keeps the example snappy; the
    // detection probability has already collapsed by then.
    config.hyper.max_outer_iterations = 60;

    let out = std::env::temp_dir().join("covert-planning-example");
    let summary = cmd_train(&config, Path::new("."), &out, Some("mini-5x5"))?;

    println!("mini-5x5, seed {}:", config.seed);
    println!(
        "  stopped after {} iterations ({})",
        summary.iterations,
        if summary.converged {
            "Lagrangian settled"
        } else {
            "iteration cap"
        }
    );
    println!(
        "  trace detection {:.3} -> {:.3}, trace value {:.2} -> {:.2}",
        summary.first_row.detection,
        summary.final_row.detection,
        summary.first_row.value,
        summary.final_row.value
    );
    println!(
        "  fresh evaluation: value {:.3} ± {:.3}, detection {:.3} ± {:.3}",
        summary.eval.value_mean,
        summary.eval.value_se,
        summary.eval.detection_mean,
        summary.eval.detection_se
    );
    println!("  trace:  {}", summary.trace_path.display());
    println!("  policy: {}", summary.policy_path.display());
    Ok(())
}
