//! Load a scenario file with overrides, run it and export the trace.
//!
//! `cargo run --example scenario_file -- scenarios/push_f30.toml out/ mu=0.35`

use std::path::PathBuf;

use footstep::sim::{export_trace, load_scenario, run};

fn main() -> footstep::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "scenarios/push_f30.toml".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let overrides: Vec<String> = args.collect();
    let cfg = load_scenario(&path, &overrides)?;
    let trace = run(&cfg)?;
    export_trace(&trace, &out)?;
    println!("{}: {} after {} steps, written to {}", cfg.name, trace.outcome, trace.records.len(), out.display());
    Ok(())
}
