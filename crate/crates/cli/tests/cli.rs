use std::fs;
use std::path::Path;
use std::process::Command;

fn netloc(args: &[&str], out: &Path) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_netloc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "netloc {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

#[test]
fn mc_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    netloc(&["mc", "--trials", "6", "--seed", "11", "--iters", "300"], &a);
    netloc(&["mc", "--trials", "6", "--seed", "11", "--iters", "300"], &b);
    let ta = fs::read(a.join("trials.csv")).unwrap();
    assert_eq!(ta, fs::read(b.join("trials.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("cdf.csv")).unwrap(),
        fs::read(b.join("cdf.csv")).unwrap()
    );
    let parsed = netloc_core::io::parse_trials_csv(ta.as_slice()).unwrap();
    assert_eq!(parsed.len(), 6);

    let c = dir.path().join("c");
    netloc(&["mc", "--trials", "6", "--seed", "12", "--iters", "300"], &c);
    assert_ne!(ta, fs::read(c.join("trials.csv")).unwrap());
}

#[test]
fn gen_writes_a_loadable_instance() {
    let dir = tempfile::tempdir().unwrap();
    netloc(&["gen", "--seed", "3"], dir.path());
    let text = fs::read_to_string(dir.path().join("instance.json")).unwrap();
    let inst = netloc_core::NetworkInstance::from_json(&text).unwrap();
    assert_eq!(inst.topology.n(), 10);
    assert_eq!(inst.topology.m(), 4);

    let replay = dir.path().join("replay");
    let instance_path = dir.path().join("instance.json");
    netloc(
        &[
            "solve-sync",
            "--iters",
            "50",
            "--instance",
            instance_path.to_str().unwrap(),
        ],
        &replay,
    );
    assert_eq!(fs::read_to_string(replay.join("instance.json")).unwrap(), text);
}

#[test]
fn solvers_write_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    netloc(&["solve-sync", "--iters", "40", "--tol", "0"], dir.path());
    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("iteration,cost,max_x_change,broadcast_count\n"));
    assert_eq!(traj.lines().count(), 1 + 41);
    let est: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("estimate.json")).unwrap()).unwrap();
    assert_eq!(est["broadcast_count"], 400);

    let adir = dir.path().join("async");
    netloc(
        &[
            "solve-async",
            "--activations",
            "30",
            "--edge-weight",
            "exact",
            "--phi-every",
            "10",
        ],
        &adir,
    );
    let traj = fs::read_to_string(adir.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("activation,node,cost,phi,broadcast_count\n"));
    assert_eq!(traj.lines().count(), 1 + 31);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"experiment": {"trials": 2}, "solver": {"sync": {"max_iters": 20}}}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    netloc(&["mc", "--config", cfg.to_str().unwrap(), "--trials", "3"], &out);
    let trials = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 3);
    assert!(trials.lines().skip(1).all(|l| l.split(',').nth(5) == Some("20")));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": {"trials": 0}}"#).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_netloc"))
        .args(["mc", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("trials"));
}

#[test]
fn bounds_sweep_and_compare_outputs() {
    let dir = tempfile::tempdir().unwrap();
    netloc(&["bounds1d", "--trials", "10"], dir.path());
    let bounds = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("loss,trials,true_gap,posterior_bound,apriori_bound\n"));
    assert_eq!(bounds.lines().count(), 4);

    netloc(
        &["sweep", "--trials", "2", "--iters", "30", "--probabilities", "0,1"],
        dir.path(),
    );
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 4);

    netloc(
        &["compare", "--trials", "2", "--iters", "5", "--sigmas", "10"],
        dir.path(),
    );
    let compare = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let rows: Vec<&str> = compare.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    // Equal communication: 10 sensors x 5 rounds for both solvers.
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("50")), "{compare}");
}
