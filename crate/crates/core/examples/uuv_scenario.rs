//! Runs the shipped vehicle scenario end to end and writes the archive to
//! the directory given as the first argument (default `uuv-archive`).

use std::path::PathBuf;

use dynassure::harness::{cmd_report, cmd_run_scenario, AppKind, RunManifest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "uuv-archive".into()));
    let m = RunManifest { out: Some(out.clone()), ..RunManifest::new(AppKind::Uuv) };
    cmd_run_scenario(&m)?;
    print!("{}", cmd_report(&out)?);
    Ok(())
}
