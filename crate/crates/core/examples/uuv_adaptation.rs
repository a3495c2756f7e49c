//! One analysis step for the vehicle: verify all 147 configurations under
//! nominal rates, then again after sensor 3 degrades.

use dynassure::automata::{verify_generic_suite, AutomatonNetwork};
use dynassure::deadline::Deadline;
use dynassure::harness::design_time_argument;
use dynassure::mape::{analyze, monitor_step, Application, Decision, Knowledge};
use dynassure::uuv::{Uuv, CONTROLLER_NETWORK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = Uuv::calibrated();
    let net = AutomatonNetwork::from_toml(CONTROLLER_NETWORK)?;
    let report = verify_generic_suite(&net, &net.properties)?;
    let partial = design_time_argument(&app, &report, &app.initial_config().to_string())?;
    let mut k = Knowledge::new(app.initial_config(), (1.0, 200.0), partial);
    for (p, v) in app.nominal_observations() {
        monitor_step(&app, &mut k, &p, v, 0.0)?;
    }
    for (label, change) in [("nominal", None), ("r3 = 1", Some(("r3", 1.0)))] {
        if let Some((p, v)) = change {
            println!("monitor {p} -> {v}: {:?}", monitor_step(&app, &mut k, p, v, 1.0)?);
        }
        let a = analyze(&app, &k, &Deadline::from_secs(2.0), None);
        println!(
            "{label}: {} of {} configurations feasible, verified in {:.1} ms",
            a.feasible_count(),
            a.outcome.entries.len(),
            a.outcome.elapsed.as_secs_f64() * 1e3
        );
        let mut ranked: Vec<(f64, usize)> = a.costs.iter().enumerate().filter_map(|(i, c)| c.map(|c| (c, i))).collect();
        ranked.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (cost, i) in ranked.iter().take(3) {
            let e = &a.outcome.entries[*i];
            println!("  {} cost {cost:.2}  R1 {:.2}  R2 {:.2} J", e.config, e.value(0).unwrap(), e.value(1).unwrap());
        }
        if let Decision::Adapt { target } = &a.decision {
            println!("  plan: {:?}", app.plan(&k.current, target)?.iter().map(|s| s.to_string()).collect::<Vec<_>>());
            k.current = target.clone();
        }
    }
    Ok(())
}
