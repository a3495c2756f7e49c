//! Pattern, partial and full instantiation of the assurance argument for the
//! vehicle. Pass `dot` to print Graphviz instead of the text outline.

use dynassure::automata::{verify_generic_suite, AutomatonNetwork};
use dynassure::gsn::{instantiate_full, render, EvidenceItem, Format, RuntimeBinding};
use dynassure::harness::design_time_argument;
use dynassure::uuv::{Uuv, UuvConfig, CONTROLLER_NETWORK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let format: Format = std::env::args().nth(1).as_deref().unwrap_or("text").parse()?;
    let app = Uuv::calibrated();
    let net = AutomatonNetwork::from_toml(CONTROLLER_NETWORK)?;
    let report = verify_generic_suite(&net, &net.properties)?;
    let partial = design_time_argument(&app, &report, &app.initial_config().to_string())?;
    let open: Vec<&str> = partial.uninstantiated().iter().map(|n| n.id.as_str()).collect();
    println!("partial argument: uninstantiated {open:?}");

    let target = UuvConfig::new(&[1, 1, 0], 3.2);
    let evidence = ["R1", "R2", "R3"]
        .iter()
        .map(|r| EvidenceItem {
            requirement: r.to_string(),
            digest: format!("sha256:{}", "0".repeat(64)),
            summary: format!("{r} verified for {target}"),
        })
        .collect();
    let full = instantiate_full(&partial, &RuntimeBinding { config: target.to_string(), evidence, timestamp: 110.0 })?;
    let check = full.validate();
    println!("full argument valid: {}", check.is_valid());
    print!("{}", render(&full, format));
    Ok(())
}
