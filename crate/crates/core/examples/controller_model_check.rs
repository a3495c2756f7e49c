//! Model-checks the shipped controller networks and a mutant whose
//! executor skips the failsafe, printing the counterexample.

use dynassure::automata::{verify_generic_suite, AutomatonNetwork};
use dynassure::{fx, uuv};

const MUTANT: &str = include_str!("../data/uuv_controller_mutant.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, text) in [("uuv", uuv::CONTROLLER_NETWORK), ("fx", fx::CONTROLLER_NETWORK), ("uuv mutant", MUTANT)] {
        let net = AutomatonNetwork::from_toml(text)?;
        let report = verify_generic_suite(&net, &net.properties)?;
        println!(
            "== {name}: {} states, {} transitions, {:.2} s",
            report.states,
            report.transitions,
            report.elapsed.as_secs_f64()
        );
        for v in &report.verdicts {
            println!("  {:<3} {:<8} {}", v.id, if v.holds { "holds" } else { "VIOLATED" }, v.description);
            if let Some(t) = &v.trace_text {
                print!("{t}");
                println!("  counterexample replays: {:?}", v.replayed);
            }
        }
    }
    Ok(())
}
