//! Per-cell detection probability of the reconstructed 10×10 sensor field:
//! terrain and distance shade the map.
//!
//! Run with: cargo run --example sensor_coverage

use std::path::Path;

use covert_planning::config::preset;
use covert_planning::gridworld::sensor_state_probability;

fn main() -> covert_planning::Result<()> {
    let config = preset("paper-10x10-b005")?;
    let loaded = config.load(Path::new("."))?;
    let (spec, sensors) = loaded.grid.as_ref().expect("preset is a grid");

    println!("probability that at least one sensor fires, per cell (x100):\n");
    for r in 0..spec.rows {
        let mut line = String::new();
        for c in 0..spec.cols {
            if spec.walls.contains(&(r, c)) {
                line.push_str("  ##");
                continue;
            }
            let mut miss = 1.0;
            for sensor in sensors {
                miss *= 1.0 - sensor_state_probability(sensor, (r, c), spec);
            }
            let fire = 1.0 - miss;
            if fire == 0.0 {
                line.push_str("   .");
            } else {
                line.push_str(&format!(" {:3.0}", fire * 100.0));
            }
        }
        println!("{line}");
    }
    println!();
    for (i, sensor) in sensors.iter().enumerate() {
        println!(
            "sensor {} at {:?}: base probability {}, {} covered cells",
            i + 1,
            sensor.location,
            sensor.base_probability,
            sensor.range_cells.len()
        );
    }
    println!(
        "\nworked spot check: agent at (6,3) on dark green, one step from sensor 2 -> {}",
        sensor_state_probability(&sensors[1], (6, 3), spec)
    );
    Ok(())
}
