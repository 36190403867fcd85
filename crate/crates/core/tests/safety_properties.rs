use footstep::lip::{flow, step_map, GaitParams, StepState};
use footstep::safety::{
    brute_force_safe, classify_state, effective_bound, extremum, safe_by_cases, safe_length_range, slip_time,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_params(r: &mut ChaCha8Rng) -> GaitParams {
    GaitParams::new(
        9.8,
        r.gen_range(0.3..1.5),
        r.gen_range(0.1..1.5),
        50.0,
        r.gen_range(-0.6..0.6),
        r.gen_range(0.1..1.0),
    )
    .unwrap()
}

fn random_state(r: &mut ChaCha8Rng, p: &GaitParams, spread: f64) -> StepState {
    let mh = p.friction_radius();
    StepState::new(
        r.gen_range(-spread * mh..spread * mh),
        r.gen_range(-2.0 * spread * p.omega * mh..2.0 * spread * p.omega * mh),
    )
}

fn x_at(s: StepState, t: f64, w: f64) -> f64 {
    s.x0 * (w * t).cosh() + s.xdot0 / w * (w * t).sinh()
}

fn xdot_at(s: StepState, t: f64, w: f64) -> f64 {
    s.x0 * w * (w * t).sinh() + s.xdot0 * (w * t).cosh()
}

/// Largest `|x|` on `[0, T]`: dense grid, then golden-section refinement.
fn peak(s: StepState, t: f64, w: f64) -> f64 {
    let n = 2000;
    let f = |u: f64| x_at(s, u, w).abs();
    let (k, best) = (0..=n)
        .map(|k| (k, f(t * k as f64 / n as f64)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let h = t / n as f64;
    let (mut lo, mut hi) = ((k as f64 - 1.0).max(0.0) * h, ((k + 1) as f64 * h).min(t));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (c, d) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(c) > f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

#[test]
fn s_is_the_intersection_of_s0_and_st() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100_000 {
        let p = random_params(&mut r);
        let t = r.gen_range(0.05..1.5);
        let s = random_state(&mut r, &p, 1.3);
        let rep = classify_state(s, t, &p).unwrap();
        assert_eq!(rep.in_s, safe_by_cases(s, t, &p).unwrap(), "{s:?} T = {t}");
        assert_eq!(rep.in_s, rep.in_s0 && rep.in_st);
    }
}

#[test]
fn classifier_matches_brute_force_away_from_borders() {
    let mut r = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for _ in 0..100_000 {
        let p = random_params(&mut r);
        let s = random_state(&mut r, &p, 1.3);
        let b = effective_bound(&p);
        let m = peak(s, p.step_time, p.omega);
        if (m - b).abs() <= 1e-6 * p.friction_radius() {
            continue;
        }
        checked += 1;
        let analytic = classify_state(s, p.step_time, &p).unwrap().in_s;
        assert_eq!(analytic, m < b, "{s:?} with {p:?}");
        assert_eq!(analytic, brute_force_safe(s, p.step_time, &p, 1000).unwrap());
    }
    assert!(checked > 99_000);
}

#[test]
fn safe_step_keeps_a_safe_range_next() {
    let mut r = ChaCha8Rng::seed_from_u64(13);
    let mut n = 0;
    while n < 10_000 {
        let p = random_params(&mut r);
        let s = random_state(&mut r, &p, 1.0);
        if !classify_state(s, p.step_time, &p).unwrap().in_s {
            continue;
        }
        n += 1;
        let range = safe_length_range(s, p.step_time, &p).unwrap();
        let (lo, hi) = (range.lower().unwrap(), range.upper().unwrap());
        let l = lo + (hi - lo) * r.gen_range(1e-6..1.0 - 1e-6);
        let next = step_map(s, l, p.step_time, p.omega).unwrap();
        assert!(!safe_length_range(next, p.step_time, &p).unwrap().is_empty());
        // the working inequality of the proof: the velocity after the next
        // flow stays below the critical velocity, whatever the next length
        let a = p.nominal_matrix();
        let xdot_after = a.a21 * next.x0 + a.a22 * next.xdot0;
        assert!(xdot_after.abs() < a.critical_velocity(p.friction_radius()));
    }
}

#[test]
fn slip_time_matches_bisection() {
    let mut r = ChaCha8Rng::seed_from_u64(14);
    let mut n = 0;
    while n < 10_000 {
        let p = random_params(&mut r);
        let s = random_state(&mut r, &p, 1.0);
        let mh = p.friction_radius();
        if !(s.x0.abs() < effective_bound(&p)) {
            continue;
        }
        let w = p.omega;
        let horizon = 10.0 / w;
        let grid = 20_000;
        let first = (1..=grid)
            .map(|k| horizon * k as f64 / grid as f64)
            .find(|&t| x_at(s, t, w).abs() >= mh);
        let got = slip_time(s, &p).unwrap();
        match first {
            None => assert!(got.is_none_or(|t| t > horizon * (1.0 - 1e-3)), "{s:?}: {got:?}"),
            Some(t_hi) => {
                let (mut lo, mut hi) = (t_hi - horizon / grid as f64, t_hi);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if x_at(s, mid, w).abs() >= mh {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let t = got.expect("slips");
                assert!((t - 0.5 * (lo + hi)).abs() < 1e-8, "{t} vs {lo}");
                n += 1;
            }
        }
    }
}

#[test]
fn turning_point_has_zero_velocity() {
    let mut r = ChaCha8Rng::seed_from_u64(15);
    let mut n = 0;
    while n < 10_000 {
        let p = random_params(&mut r);
        let s = random_state(&mut r, &p, 1.0);
        if let Some((t, xm)) = extremum(s, p.omega) {
            assert!(t > 0.0);
            let e = flow(s, t, p.omega).unwrap();
            assert!(e.xdot0.abs() < 1e-9 * p.omega * xm.abs().max(1e-12), "{s:?}");
            assert!((e.x0 - xm).abs() <= 1e-12 * xm.abs().max(1.0));
            n += 1;
        }
    }
}

/// `A` built from its meaning: some instant before slipping at which the
/// speed is below the critical velocity, so that a step ending there can
/// return the state into `S`.
#[test]
fn region_a_matches_constructive_definition() {
    let mut r = ChaCha8Rng::seed_from_u64(16);
    let p = GaitParams::new(9.8, 1.0, 0.3, 50.0, 0.4, 0.4).unwrap();
    let w = p.omega;
    let xcr = p.nominal_matrix().critical_velocity(p.friction_radius());
    let (mut n, mut agree, mut in_a) = (0, 0, 0);
    while n < 20_000 {
        let s = random_state(&mut r, &p, 1.0);
        let rep = classify_state(s, p.step_time, &p).unwrap();
        if !rep.in_d {
            continue;
        }
        let t_slip = slip_time(s, &p).unwrap().expect("D slips within the step");
        let grid = 4000;
        let slowest = (0..grid)
            .map(|k| xdot_at(s, t_slip * k as f64 / grid as f64, w).abs())
            .fold(f64::INFINITY, f64::min);
        if (slowest - xcr).abs() < 1e-3 * xcr {
            continue;
        }
        n += 1;
        in_a += rep.in_a as usize;
        agree += (rep.in_a == (slowest < xcr)) as usize;
    }
    assert_eq!(agree, n, "{} disagreements", n - agree);
    assert!(in_a > 1000 && in_a < n - 1000, "both outcomes sampled: {in_a} of {n}");
}

/// The exported border of `S` lies outside the open set it encloses.
#[test]
fn exported_s_border_is_unsafe() {
    let mut r = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let p = random_params(&mut r);
        let pts = footstep::safety::region_boundaries(&p, p.step_time, 20).unwrap();
        for b in pts.iter().filter(|b| b.region == "S") {
            let s = StepState::new(b.x, b.xdot);
            assert!(!classify_state(s, p.step_time, &p).unwrap().in_s, "{s:?}");
        }
    }
}
