//! Service selection for the trading workflow under the registered service
//! characteristics: feasible set, cheapest selection and its plan. Analysis
//! does not touch the argument, so the bare pattern stands in for it.

use dynassure::deadline::Deadline;
use dynassure::fx::Fx;
use dynassure::gsn::load_pattern;
use dynassure::mape::{analyze, monitor_step, Application, Decision, Knowledge};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let app = Fx::calibrated();
    let mut k = Knowledge::new(app.initial_config(), (1.0, 2.0), load_pattern());
    for (p, v) in app.registry.observations() {
        monitor_step(&app, &mut k, &p, v, 0.0)?;
    }
    let a = analyze(&app, &k, &Deadline::from_secs(2.0), None);
    println!("{} of {} selections feasible", a.feasible_count(), a.outcome.entries.len());
    for (i, e) in a.outcome.entries.iter().enumerate() {
        if let Some(cost) = a.costs[i] {
            println!(
                "  #{:<2} {}  success {:.4}  time {:.3} s  price {:.2}  cost {cost:.2}",
                e.index,
                e.config,
                e.value(0).unwrap(),
                e.value(1).unwrap(),
                e.value(2).unwrap()
            );
        }
    }
    if let Decision::Adapt { target } = &a.decision {
        println!("selected {target}");
        for step in app.plan(&k.current, target)? {
            println!("  {step}");
        }
    }
    Ok(())
}
