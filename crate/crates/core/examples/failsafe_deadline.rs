//! Injects verification latency beyond the analysis deadline and shows the
//! loop falling back to the failsafe configuration in time.

use std::time::{Duration, Instant};

use dynassure::deadline::Deadline;
use dynassure::fx::Fx;
use dynassure::gsn::load_pattern;
use dynassure::mape::{analyze, monitor_step, Knowledge};
use dynassure::uuv::Uuv;
use dynassure::verifier::LatencyInjection;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let budget = Duration::from_millis(200);
    let stall = LatencyInjection::before(40, Duration::from_secs(1));

    let uuv = Uuv::calibrated();
    let mut k = Knowledge::new(uuv.initial_config(), (1.0, 200.0), load_pattern());
    for (p, v) in uuv.nominal_observations() {
        monitor_step(&uuv, &mut k, &p, v, 0.0)?;
    }
    let t = Instant::now();
    let a = analyze(&uuv, &k, &Deadline::after(budget), Some(&stall));
    println!("uuv: {} -> {:?} after {:?}", a.decision.kind(), a.decision.target().map(|c| c.to_string()), t.elapsed());

    let fx = Fx::calibrated();
    let mut k = Knowledge::new(fx.configs[5].clone(), (1.0, 2.0), load_pattern());
    for (p, v) in fx.registry.observations() {
        monitor_step(&fx, &mut k, &p, v, 0.0)?;
    }
    let t = Instant::now();
    let a = analyze(&fx, &k, &Deadline::after(budget), Some(&stall));
    println!("fx:  {} -> {:?} after {:?}", a.decision.kind(), a.decision.target().map(|c| c.to_string()), t.elapsed());
    Ok(())
}
