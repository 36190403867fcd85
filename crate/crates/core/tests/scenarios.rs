use std::fs;

use footstep::acceptance::{PUSH_F09, PUSH_F30, PUSH_F45, SWITCH_MU021, SWITCH_MU040, SWITCH_MU150};
use footstep::biped::parse_full_scenario;
use footstep::control::ControlMode;
use footstep::lip::GaitParams;
use footstep::sim::{
    export_trace, parse_scenario, read_trace_summary, run, scenario_to_toml, transient_step_count, Event, Outcome,
    ScenarioConfig, TraceSummary, SAMPLES_FILE, SUMMARY_FILE, TRACE_FILE,
};

const ALL: [&str; 6] = [SWITCH_MU021, SWITCH_MU040, SWITCH_MU150, PUSH_F09, PUSH_F30, PUSH_F45];

#[test]
fn every_sample_keeps_a_friction_margin() {
    for text in ALL {
        let cfg = parse_scenario(text, &[]).unwrap();
        let tr = run(&cfg).unwrap();
        assert!(tr.outcome.is_success(), "{}: {}", cfg.name, tr.outcome);
        assert!(tr.min_friction_margin() >= 1e-6, "{}", cfg.name);
        for s in &tr.samples {
            assert!(s.mu_r < cfg.params.mu - 1e-6, "{} at t = {}", cfg.name, s.t);
            assert!((s.mu_r - s.x.abs() / cfg.params.h).abs() < 1e-15);
        }
        for r in &tr.records {
            let step_peak = tr
                .samples
                .iter()
                .filter(|s| s.step == r.index)
                .map(|s| s.mu_r)
                .fold(0.0, f64::max);
            assert!(r.mu_r_peak >= step_peak);
        }
    }
}

#[test]
fn every_initial_state_is_safe_in_the_reversal() {
    let cfg = parse_scenario(SWITCH_MU040, &[]).unwrap();
    let tr = run(&cfg).unwrap();
    for r in &tr.records {
        let p = GaitParams::new(9.8, 1.0, 0.4, 50.0, r.nominal_length, r.nominal_time).unwrap();
        let rep = footstep::safety::classify_state(r.state_after_events, r.command.step_time, &p).unwrap();
        assert!(rep.in_s, "step {}", r.index);
    }
    assert_eq!(tr.outcome, Outcome::Converged);
    assert!((tr.final_state - tr.final_params.fixed_point()).norm() < 1e-6);
    assert!(tr.final_params.step_length < 0.0);
}

#[test]
fn more_friction_means_fewer_transient_steps() {
    let counts: Vec<usize> = [SWITCH_MU021, SWITCH_MU040, SWITCH_MU150]
        .iter()
        .map(|t| {
            let cfg = parse_scenario(t, &[]).unwrap();
            transient_step_count(&run(&cfg).unwrap(), 1e-6).unwrap()
        })
        .collect();
    assert!(counts[0] > counts[1] && counts[1] >= counts[2], "{counts:?}");
}

#[test]
fn taller_walker_needs_less_friction() {
    let low = run(&parse_scenario(SWITCH_MU021, &[]).unwrap()).unwrap();
    let tall = run(&parse_scenario(SWITCH_MU021, &["h=1.3".into()]).unwrap()).unwrap();
    assert!(tall.peak_mu_r() < low.peak_mu_r());
}

#[test]
fn hard_push_speeds_up_before_settling() {
    let cfg = parse_scenario(PUSH_F45, &[]).unwrap();
    let tr = run(&cfg).unwrap();
    let nominal = cfg.params.step_length / cfg.params.step_time;
    let speeds: Vec<f64> = tr.records.iter().map(|r| r.command.step_length / r.command.step_time).collect();
    let push = 3;
    let fastest = speeds[push..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(fastest > nominal * 1.05, "{fastest} vs {nominal}");
    assert!((speeds.last().unwrap() - nominal).abs() < 1e-6);
    assert!(speeds[..push].iter().all(|v| (v - nominal).abs() < 1e-9));
}

#[test]
fn push_modes() {
    let modes = |t: &str| run(&parse_scenario(t, &[]).unwrap()).unwrap().modes();
    assert!(modes(PUSH_F09).iter().all(|m| *m == ControlMode::Nominal));
    let m30 = modes(PUSH_F30);
    assert_eq!(m30.iter().filter(|m| **m == ControlMode::FixedBorder).count(), 1);
    assert_eq!(m30[3], ControlMode::FixedBorder);
    let m45 = modes(PUSH_F45);
    assert!(m45[3..].iter().take_while(|m| **m == ControlMode::MovingBorder).count() >= 2);
    assert_eq!(*m45.last().unwrap(), ControlMode::Nominal);
}

#[test]
fn runs_are_deterministic_to_the_byte() {
    let cfg = parse_scenario(PUSH_F45, &[]).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    export_trace(&run(&cfg).unwrap(), a.path()).unwrap();
    export_trace(&run(&cfg).unwrap(), b.path()).unwrap();
    for f in [SAMPLES_FILE, SUMMARY_FILE, TRACE_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exported_summary_round_trips() {
    let cfg = parse_scenario(PUSH_F30, &[]).unwrap();
    let tr = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    export_trace(&tr, dir.path()).unwrap();
    let back = read_trace_summary(&dir.path().join(TRACE_FILE)).unwrap();
    assert_eq!(back, TraceSummary::from(&tr));

    // the CSV summary carries the same commands
    let csv = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,L,T,mode,mu_r_peak"));
    for (line, r) in lines.zip(&tr.records) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0].parse::<usize>().unwrap(), r.index);
        assert_eq!(f[1].parse::<f64>().unwrap(), r.command.step_length);
        assert_eq!(f[2].parse::<f64>().unwrap(), r.command.step_time);
        assert_eq!(f[3].parse::<ControlMode>().unwrap(), r.command.mode);
        assert_eq!(f[4].parse::<f64>().unwrap(), r.mu_r_peak);
    }
    let samples = fs::read_to_string(dir.path().join(SAMPLES_FILE)).unwrap();
    assert_eq!(samples.lines().next(), Some("step,t,x,xdot,mu_r"));
    assert_eq!(samples.lines().count(), tr.samples.len() + 1);
}

#[test]
fn scenario_text_round_trips() {
    for text in ALL {
        let cfg = parse_scenario(text, &[]).unwrap();
        let again = parse_scenario(&scenario_to_toml(&cfg).unwrap(), &[]).unwrap();
        assert_eq!(cfg, again);
    }
}

#[test]
fn fixed_point_start_is_periodic() {
    let p = GaitParams::new(9.8, 1.0, 0.3, 50.0, 0.4, 0.4).unwrap();
    let tr = run(&ScenarioConfig::new("still", p, 30)).unwrap();
    assert_eq!(transient_step_count(&tr, 1e-6).unwrap(), 0);
    for r in &tr.records {
        assert!((r.command.step_length - 0.4).abs() < 1e-9 && r.command.step_time == 0.4);
    }
}

#[test]
fn bad_scenarios_are_rejected() {
    let base = "n_steps = 5\n[params]\nh = 1.0\nmu = 0.3\nmass = 50.0\nstep_length = 0.4\nstep_time = 0.4\n";
    assert!(parse_scenario(base, &[]).is_ok());
    for bad in [
        format!("{base}[[events]]\nkind = \"push\"\nat_step = 0\nimpulse = 1.0\n"),
        format!("{base}[[events]]\nkind = \"shove\"\nat_step = 2\n"),
        format!("{base}colour = 3\n"),
        base.replace("n_steps = 5", "n_steps = 0"),
        base.replace("mu = 0.3", "mu = -0.3"),
        format!("sample_dt = 0.0\n{base}"),
        base.replace("h = 1.0\n", ""),
    ] {
        assert!(parse_scenario(&bad, &[]).is_err(), "{bad}");
    }
    assert!(parse_scenario(base, &["mu".into()]).is_err());
    assert!(parse_scenario(base, &["params.colour=1".into()]).is_err());
    let cfg = parse_scenario(base, &["mu=0.5".into(), "supervisor.kappa=0.7".into()]).unwrap();
    assert_eq!((cfg.params.mu, cfg.supervisor.kappa), (0.5, 0.7));
}

#[test]
fn full_scenario_splits_off_the_biped_table() {
    let text = footstep::acceptance::BIPED_PUSH;
    let (cfg, run_cfg) = parse_full_scenario(text, &["biped.planner.rho=50".into()]).unwrap();
    assert_eq!(run_cfg.planner.rho, 50.0);
    assert_eq!(run_cfg.dt, 1e-3);
    assert!(matches!(cfg.events[0], Event::Push { at_step: 4, .. }));
    // the gait part alone is an ordinary scenario once the table is dropped
    assert!(parse_scenario(text, &[]).is_err());
    assert!(parse_full_scenario(text, &["biped.gain=1".into()]).is_err());
    assert!(parse_full_scenario(text, &["biped.dt=-1".into()]).is_err());
}
