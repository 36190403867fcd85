//! Push the walker from behind and print what the supervisor did each step.

use footstep::lip::GaitParams;
use footstep::sim::{run, Event, ScenarioConfig};

fn main() -> footstep::Result<()> {
    let impulse: f64 = std::env::args().nth(1).map_or(Ok(45.0), |a| a.parse()).expect("impulse in kg m/s");
    let params = GaitParams::new(9.8, 1.0, 0.3, 50.0, 0.4, 0.4)?;
    let cfg = ScenarioConfig::new("push", params, 20).with_event(Event::Push { at_step: 4, impulse });
    let trace = run(&cfg)?;
    println!("step  x0       xdot0    mode           L        T        mu_r peak");
    for r in &trace.records {
        let s = r.state_after_events;
        let c = r.command;
        println!(
            "{:>4}  {:+.4}  {:+.4}  {:<13}  {:+.4}  {:.4}  {:.4}",
            r.index, s.x0, s.xdot0, c.mode, c.step_length, c.step_time, r.mu_r_peak
        );
    }
    println!("outcome: {}, friction margin {:.4}", trace.outcome, trace.min_friction_margin());
    Ok(())
}
