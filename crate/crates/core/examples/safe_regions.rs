//! Classify a few initial states against the safe and recoverable regions
//! and write the region borders as CSV to stdout.

use footstep::lip::{GaitParams, StepState};
use footstep::safety::{classify_state, region_boundaries, safe_length_range, write_boundaries_csv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = GaitParams::new(9.8, 1.0, 0.3, 50.0, 0.4, 0.4)?;
    let fp = p.fixed_point();
    for s in [fp, StepState::new(-0.2, 1.7274), StepState::new(-0.2, 2.0274)] {
        let r = classify_state(s, p.step_time, &p)?;
        let range = safe_length_range(s, p.step_time, &p)?;
        eprintln!(
            "({:+.4}, {:+.4}): S {} D {} A {}, safe lengths {:?}..{:?}",
            s.x0, s.xdot0, r.in_s, r.in_d, r.in_a, range.lower(), range.upper()
        );
    }
    let points = region_boundaries(&p, p.step_time, 100)?;
    write_boundaries_csv(&points, std::io::stdout().lock())?;
    Ok(())
}
