//! The same gait reversal at two CoM heights: the taller walker needs less
//! friction for the same steps.

use footstep::lip::GaitParams;
use footstep::sim::{run, Event, ScenarioConfig};

fn main() -> footstep::Result<()> {
    for h in [1.0, 1.3] {
        let params = GaitParams::new(9.8, h, 0.21, 50.0, 0.4, 0.4)?;
        let cfg = ScenarioConfig::new("reverse", params, 60).with_event(Event::SwitchGait {
            at_step: 4,
            step_length: -0.4,
            step_time: 0.4,
        });
        let trace = run(&cfg)?;
        println!("h = {h}: peak mu_r {:.4} of mu = {}", trace.peak_mu_r(), params.mu);
    }
    Ok(())
}
