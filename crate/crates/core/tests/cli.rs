use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use footstep::lip::GaitParams;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn footstep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_footstep")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_outputs_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mu040");
    let cfg = scenario("switch_mu040.toml");
    let first = footstep(&["run", s(&cfg), "-o", s(&out)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    for f in ["samples.csv", "summary.csv", "trace.toml", "scenario.toml", "meta.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let meta = fs::read_to_string(out.join("meta.toml")).unwrap();
    assert!(meta.contains("command = \"run\""));

    let before = fs::read(out.join("samples.csv")).unwrap();
    assert_eq!(code(&footstep(&["run", s(&cfg), "-o", s(&out)])), 2);
    assert_eq!(code(&footstep(&["run", s(&cfg), "-o", s(&out), "--force"])), 0);
    assert_eq!(fs::read(out.join("samples.csv")).unwrap(), before);

    // the echoed scenario reproduces the run
    let again = dir.path().join("again");
    let echoed = out.join("scenario.toml");
    assert_eq!(code(&footstep(&["run", s(&echoed), "-o", s(&again)])), 0);
    assert_eq!(fs::read(again.join("samples.csv")).unwrap(), before);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let cfg = scenario("switch_mu021.toml");
    let slip = footstep(&["run", s(&cfg), "-o", s(&out), "--set", "mu=0.15"]);
    assert_eq!(code(&slip), 1, "{}", String::from_utf8_lossy(&slip.stderr));
    assert_eq!(code(&footstep(&["run", "/no/such/file.toml", "-o", s(&out)])), 2);
    assert_eq!(code(&footstep(&["run", s(&cfg), "-o", s(&out), "--force", "--set", "colour=1"])), 2);
    assert_eq!(code(&footstep(&["run", s(&cfg)])), 2);
    assert_eq!(code(&footstep(&["frobnicate"])), 2);
}

#[test]
fn regions_border_surrounds_the_fixed_point() {
    let cfg = scenario("switch_mu040.toml");
    let out = footstep(&["regions", s(&cfg), "--points", "50"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let border: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("S,"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert!(border.len() >= 4);
    let fp = GaitParams::new(9.8, 1.0, 0.4, 50.0, 0.4, 0.4).unwrap().fixed_point();
    // even-odd ray cast along +x
    let mut inside = false;
    for w in border.windows(2) {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        if (y1 > fp.xdot0) != (y2 > fp.xdot0) && fp.x0 < x1 + (fp.xdot0 - y1) * (x2 - x1) / (y2 - y1) {
            inside = !inside;
        }
    }
    assert!(inside);
    assert_eq!(code(&footstep(&["regions", s(&cfg), "--points", "1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.csv");
    assert_eq!(code(&footstep(&["regions", s(&cfg), "--points", "50", "-o", s(&file)])), 0);
    assert_eq!(fs::read_to_string(&file).unwrap(), text);
    assert_eq!(code(&footstep(&["regions", s(&cfg), "-o", s(&file)])), 2);
}

fn sweep_column(text: &str, col: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn sweeps_order_by_friction_and_height() {
    let cfg = scenario("switch_mu021.toml");
    let out = footstep(&["sweep", s(&cfg), "--param", "mu", "--values", "0.21,0.4,1.5"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("value,outcome,transient_steps,time_adjusted_steps,peak_mu_r,min_margin\n"));
    let n = sweep_column(&text, 2);
    assert!(n[0] > n[1] && n[1] >= n[2], "{n:?}");

    let out = footstep(&["sweep", s(&cfg), "--param", "h", "--values", "1.0,1.3"]);
    let peak = sweep_column(&String::from_utf8(out.stdout).unwrap(), 4);
    assert!(peak[1] < peak[0]);

    assert_eq!(code(&footstep(&["sweep", s(&cfg), "--param", "mu", "--values"])), 2);
    assert_eq!(code(&footstep(&["sweep", s(&cfg), "--param", "nonsense", "--values", "1"])), 2);
}

#[test]
fn accept_subset() {
    let out = footstep(&["accept", "--only", "1,11"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert_eq!(code(&footstep(&["accept", "--only", "13"])), 2);
}

#[test]
fn plan6dof_writes_joint_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("walk");
    let cfg = scenario("biped_walk.toml");
    let run = footstep(&["plan6dof", s(&cfg), "-o", s(&out), "--set", "n_steps=2"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["joints.csv", "feasibility.toml", "samples.csv", "trace.toml", "meta.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let joints = fs::read_to_string(out.join("joints.csv")).unwrap();
    assert!(joints.lines().count() > 2 * 600);
    let feas: toml::Table = fs::read_to_string(out.join("feasibility.toml")).unwrap().parse().unwrap();
    assert!(feas["min_normal_force"].as_float().unwrap() > 0.0);

    let model = dir.path().join("missing.toml");
    let bad = footstep(&["plan6dof", s(&cfg), "-o", s(&out), "--force", "--model", s(&model)]);
    assert_eq!(code(&bad), 2);
}
