//! Walk the six-joint planar biped under the footstep supervisor, with an
//! optional push, and report contact feasibility.

use footstep::biped::{run_full_scenario, Biped, BipedRunConfig};
use footstep::control::TriggerPolicy;
use footstep::lip::GaitParams;
use footstep::sim::{Event, ScenarioConfig};

fn main() -> footstep::Result<()> {
    let impulse: f64 = std::env::args().nth(1).map_or(Ok(0.3), |a| a.parse()).expect("impulse in kg m/s");
    let biped = Biped::nao_like();
    let params = GaitParams::new(9.8, 0.22, 0.15, biped.total_mass(), 0.05, 0.6)?;
    let mut cfg = ScenarioConfig::new("biped", params, 12).with_event(Event::Push { at_step: 4, impulse });
    cfg.supervisor.trigger = TriggerPolicy::MovingBorderOnly;
    let run = run_full_scenario(&biped, &cfg, &BipedRunConfig::default())?;
    for (r, plan) in run.trace.records.iter().zip(&run.plans) {
        println!(
            "{:>2} {:<13} L {:+.4} T {:.3}  planner iterations {:>2}, LIP defect {:.3e}",
            r.index, r.command.mode, r.command.step_length, r.command.step_time, plan.iterations, plan.lip_defect
        );
    }
    let f = &run.report;
    println!(
        "min normal force {:.2} N, peak mu_r {:.4}, CoP [{:+.4}, {:+.4}] m, touchdown speed {:.2e} m/s",
        f.min_normal_force, f.peak_mu_r, f.cop_range[0], f.cop_range[1], f.max_touchdown_speed
    );
    Ok(())
}
