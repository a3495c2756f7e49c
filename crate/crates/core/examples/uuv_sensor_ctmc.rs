//! Expected accurate measurements and energy of one sensor over a 10 m leg,
//! against the closed-form occupancy of its ready state.

use dynassure::uuv::{build_sensor_template, default_sensors, COMPLETION_RATE};
use dynassure::verifier::ctmc_cumulative_reward;
use std::collections::BTreeMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = &default_sensors()[0];
    let t = build_sensor_template(spec);
    for speed in [1.0, 2.0, 3.2, 5.0] {
        let horizon = 10.0 / speed;
        let m = t.bind(&BTreeMap::from([("r".to_string(), spec.rate), ("sp".to_string(), speed)]))?;
        let measure = ctmc_cumulative_reward(&m, "measure", horizon)?;
        let energy = ctmc_cumulative_reward(&m, "energy", horizon)?;
        let (r, c) = (spec.rate, COMPLETION_RATE);
        let s = r + c;
        let ready = c * horizon / s + r / (s * s) * (1.0 - (-s * horizon).exp());
        println!(
            "sp={speed:<4} p={:.3}  measurements={measure:8.4} (closed form {:8.4})  energy={energy:8.4} J",
            spec.accuracy(speed),
            r * spec.accuracy(speed) * ready
        );
    }
    Ok(())
}
