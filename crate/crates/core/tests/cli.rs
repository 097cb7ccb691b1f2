use std::fs;

use boussinesq_channel::cli::cli_main;
use boussinesq_channel::io::read_snapshot;

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["bqch"];
    v.extend_from_slice(args);
    cli_main(v)
}

const SMALL: &str = r#"
seed = 5
output_dir = "out"

[grid]
nx1 = 16
nx2 = 16

[time]
dt = 0.01
t_end = 0.2
output_every = 5

[steering]
delta_schedule = [0.2, 0.1]
vorticity_steps = 50

[fields.w0]
kind = "random"
amplitude = 1.0
max_mode = 3

[fields.theta0]
kind = "modes"
modes = [{ k1 = 1, k2 = 1, amp = 0.3, phase = "sin" }]

[fields.w_target]
kind = "modes"
modes = [{ k1 = 1, k2 = 2, amp = 0.2 }]
"#;

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]), 2);
    assert_eq!(run(&["frobnicate"]), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[grid]\nnx1 = 16\ncolour = 3\n").unwrap();
    assert_eq!(run(&["validate", "-c", bad.to_str().unwrap()]), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&["validate", "-c", missing.to_str().unwrap()]), 2);
}

#[test]
fn validate_on_defaults_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["validate", "-o", dir.path().to_str().unwrap()]), 0);
    let csv = fs::read_to_string(dir.path().join("validate.csv")).unwrap();
    assert!(csv.starts_with("check,value,tolerance,pass\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let c = cfg.to_str().unwrap();
    let read = |name: &str| fs::read(dir.path().join("out").join(name)).unwrap();

    assert_eq!(run(&["simulate", "-c", c]), 0);
    let (csv, snap) = (read("simulate.csv"), read("final.bqch"));
    assert_eq!(run(&["simulate", "-c", c]), 0);
    assert_eq!(read("simulate.csv"), csv);
    assert_eq!(read("final.bqch"), snap);
    let s = read_snapshot(&dir.path().join("out/final.bqch")).unwrap();
    assert!((s.t - 0.2).abs() < 1e-12);
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,w_l2,w_h1,theta_l2,theta_h2,mean_coeff\n"));
    assert_eq!(text.lines().count(), 6);

    assert_eq!(run(&["steer-vorticity", "-c", c]), 0);
    let first = read("steer_vorticity.csv");
    assert_eq!(run(&["steer-vorticity", "-c", c]), 0);
    assert_eq!(read("steer_vorticity.csv"), first);
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 3);
}

#[test]
fn snapshot_fields_are_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    assert_eq!(run(&["simulate", "-c", cfg.to_str().unwrap()]), 0);
    let resumed = SMALL.replace(
        "[fields.w0]\nkind = \"random\"\namplitude = 1.0\nmax_mode = 3",
        "[fields.w0]\nkind = \"snapshot\"\npath = \"out/final.bqch\"",
    );
    assert_ne!(resumed, SMALL);
    let cfg2 = dir.path().join("resume.toml");
    fs::write(&cfg2, resumed).unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let unwritable = blocker.join("sub");
    assert_eq!(
        run(&["simulate", "-c", cfg2.to_str().unwrap(), "-o", unwritable.to_str().unwrap()]),
        1
    );
    let out = dir.path().join("resumed");
    assert_eq!(
        run(&["simulate", "-c", cfg2.to_str().unwrap(), "-o", out.to_str().unwrap()]),
        0
    );
    assert!(out.join("simulate.csv").exists());
}

#[test]
fn transport_and_residual_commands_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(
        &cfg,
        SMALL.to_owned()
            + "\n[fields.theta_target]\nkind = \"modes\"\nmodes = [{ k1 = 2, k2 = 1, amp = 0.5 }]\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["transport-control", "-c", c]), 0);
    assert_eq!(run(&["reference-residual", "-c", c]), 0);
    let out = dir.path().join("out");
    let t = fs::read_to_string(out.join("transport_control.csv")).unwrap();
    assert_eq!(t.lines().count(), 202);
    let r = fs::read_to_string(out.join("reference_residual.csv")).unwrap();
    assert!(r.starts_with("h,momentum,temperature,"));
}
