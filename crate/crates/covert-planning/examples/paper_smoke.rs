use covert_planning::config::preset;
use covert_planning::harness::cmd_train;
use std::path::Path;
fn main() {
    for name in ["paper-10x10-b005", "paper-10x10-b010", "paper-10x10-b015"] {
        let config = preset(name).unwrap();
        let started = std::time::Instant::now();
        let out = format!("/tmp/paper_v3_{name}");
        let s = cmd_train(&config, Path::new("."), Path::new(&out), Some(name)).unwrap();
        println!("{name}: {} iterations in {:?} ({})", s.iterations, started.elapsed(),
            if s.converged { "converged" } else { "cap" });
        println!("  trace detection {:.3} -> {:.3}; fresh eval value {:.3} ± {:.3}, detection {:.3} ± {:.3}, lambda {:.2}",
            s.first_row.detection, s.final_row.detection,
            s.eval.value_mean, s.eval.value_se, s.eval.detection_mean, s.eval.detection_se, s.final_lambda);
    }
}
