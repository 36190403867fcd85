//! Split one friction coefficient between the sagittal and lateral
//! directions and see how the sagittal share limits recovery.

use footstep::control::friction_budget_split;
use footstep::lip::GaitParams;
use footstep::sim::{run, Event, ScenarioConfig};

fn main() -> footstep::Result<()> {
    let mu = 0.4;
    for c in [0.5, 0.75, 0.9] {
        let (lon, lat) = friction_budget_split(mu, c)?;
        let params = GaitParams::new(9.8, 1.0, lon, 50.0, 0.4, 0.4)?;
        let cfg = ScenarioConfig::new("push", params, 30).with_event(Event::Push { at_step: 4, impulse: 30.0 });
        let trace = run(&cfg)?;
        println!("c = {c}: sagittal {lon:.4}, lateral {lat:.4}, outcome {}", trace.outcome);
    }
    Ok(())
}
