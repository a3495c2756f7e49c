//! Prints the parametric sensor CTMC and workflow DTMC in the model file
//! format. `cargo run --example model_files -- <dir>` writes them to files.

use dynassure::fx::{build_fx_template, WorkflowParams};
use dynassure::uuv::generic_sensor_template;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let files = [
        ("uuv_sensor.toml", generic_sensor_template().to_toml()?),
        ("fx_workflow.toml", build_fx_template(&WorkflowParams::default())?.to_toml()?),
    ];
    match std::env::args().nth(1) {
        Some(dir) => {
            for (name, text) in &files {
                let path = std::path::Path::new(&dir).join(name);
                std::fs::write(&path, text)?;
                println!("wrote {}", path.display());
            }
        }
        None => {
            for (name, text) in &files {
                println!("# {name}\n{text}");
            }
        }
    }
    Ok(())
}
