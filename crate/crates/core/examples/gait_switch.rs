//! Reverse walking direction on floors of different friction and count the
//! steps the length controller needs to settle on the new gait.

use footstep::lip::GaitParams;
use footstep::sim::{adjusted_step_count, run, transient_step_count, Event, ScenarioConfig};

fn main() -> footstep::Result<()> {
    println!("mu     transient  adjusted  peak mu_r");
    for mu in [0.21, 0.4, 1.5] {
        let params = GaitParams::new(9.8, 1.0, mu, 50.0, 0.4, 0.4)?;
        let cfg = ScenarioConfig::new(format!("switch_{mu}"), params, 60).with_event(Event::SwitchGait {
            at_step: 4,
            step_length: -0.4,
            step_time: 0.4,
        });
        let trace = run(&cfg)?;
        println!(
            "{mu:<6} {:>9}  {:>8}  {:.4}",
            transient_step_count(&trace, 1e-6)?,
            adjusted_step_count(&trace, 1e-6),
            trace.peak_mu_r()
        );
    }
    Ok(())
}
