use std::path::Path;
use std::process::{Command, Output};

fn strobosq(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_strobosq"));
    cmd.args(args).env_remove("STROBO_SEED");
    if let Some(s) = seed_env {
        cmd.env("STROBO_SEED", s);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const MC_SPIN: &[&str] = &[
    "spin",
    "--set",
    "engine=montecarlo",
    "--set",
    "axis=time",
    "--set",
    "start=0.5e-5",
    "--set",
    "stop=1e-4",
    "--set",
    "points=3",
    "--set",
    "trajectories=200",
];

#[test]
fn repeated_runs_are_byte_identical() {
    let a = strobosq(MC_SPIN, None);
    let b = strobosq(MC_SPIN, None);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = vec!["--threads", "3"];
    threaded.extend_from_slice(MC_SPIN);
    assert_eq!(strobosq(&threaded, None).stdout, a.stdout);
}

#[test]
fn seed_comes_from_environment_unless_overridden() {
    let base = strobosq(MC_SPIN, None);
    let env = strobosq(MC_SPIN, Some("77"));
    assert_ne!(base.stdout, env.stdout);
    let mut args = MC_SPIN.to_vec();
    args.extend_from_slice(&["--set", "seed=77"]);
    assert_eq!(strobosq(&args, None).stdout, env.stdout);
    args.extend_from_slice(&["--set", "seed=1"]);
    assert_eq!(strobosq(&args, Some("77")).stdout, base.stdout);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "axis = angle\npoints = 4 # four angles\nzeta2 = 0.2\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&strobosq(&["spin", "--config", cfg], None));
    assert_eq!(from_file.lines().count(), 5);
    assert!(from_file.starts_with("angle,"));
    let flagged = stdout(&strobosq(&["spin", "--config", cfg, "--set", "points=6"], None));
    assert_eq!(flagged.lines().count(), 7);
}

#[test]
fn params_path_is_relative_to_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    std::fs::create_dir(&sub).unwrap();
    std::fs::write(sub.join("rb.params"), "detuning = 2.0e9\n").unwrap();
    std::fs::write(sub.join("run.cfg"), "params = rb.params\naxis = duty\npoints = 3\n").unwrap();
    // run from elsewhere so a cwd-relative lookup would miss the file
    let out = Command::new(env!("CARGO_BIN_EXE_strobosq"))
        .current_dir(dir.path())
        .args(["spin", "--config", "cfg/run.cfg"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(strobosq(&["validate"], None).status.code(), Some(0));
    let coarse = strobosq(&["validate", "--set", "samples_per_period=25"], None);
    assert_eq!(coarse.status.code(), Some(1));
    assert!(stdout(&coarse).contains("2 pi / 50.0"));
    assert_eq!(strobosq(&["spin", "--set", "bogus=1"], None).status.code(), Some(2));
    assert_eq!(strobosq(&["spin", "--set", "points=1"], None).status.code(), Some(2));
    assert_eq!(
        strobosq(&["spin", "--config", "/nonexistent.cfg"], None).status.code(),
        Some(2)
    );
    assert_eq!(strobosq(&["nope"], None).status.code(), Some(2));
}

#[test]
fn fit_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("angle.csv");
    let mut text = String::from("x,y\n");
    for i in 0..20 {
        let x = i as f64 * 0.1;
        text.push_str(&format!("{x},{}\n", 0.4 + 0.25 * (std::f64::consts::PI * x).cos()));
    }
    std::fs::write(&data, text).unwrap();
    let out = strobosq(
        &[
            "fit",
            "--set",
            &format!("input={}", data.display()),
            "--set",
            "model=angle_cos",
            "--set",
            "initial=1,0",
        ],
        None,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let vals: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((vals[0] - 0.4).abs() < 1e-8 && (vals[1] - 0.25).abs() < 1e-8, "{text}");
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let args = [
        "spectrum",
        "--set",
        "axis=sideband_index",
        "--set",
        "start=0",
        "--set",
        "stop=2",
        "--set",
        "points=3",
    ];
    let direct = strobosq(&args, None);
    let mut with_out = args.to_vec();
    let set = format!("output={}", path.display());
    with_out.extend_from_slice(&["--set", &set]);
    assert!(strobosq(&with_out, None).status.success());
    assert_eq!(std::fs::read(Path::new(&path)).unwrap(), direct.stdout);
}
