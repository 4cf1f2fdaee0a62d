//! End-to-end runs of the `soh` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use soh_cli::snapshot::{read_snapshot, SnapshotData};

fn soh(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_soh"));
    cmd.args(args).env_remove("SOH_OUTPUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("run soh")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_COLLISION: &str = "scenario = \"collision\"\ndx = 0.05\ndt = 0.0005\nt_end = 0.005\nsnapshot_every = 4\n";
const SMALL_CROWD: &str = "scenario = \"crowd\"\ndx = 0.05\ndt = 0.0005\nt_end = 0.005\n";

#[test]
fn collision_run_writes_snapshots_and_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COLLISION);
    let out = tmp.path().join("out");
    let o = soh(&["run", &cfg, "--output-dir", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("steps = 10"), "{stdout}");

    let mut snaps: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".bin"))
        .collect();
    snaps.sort();
    assert_eq!(snaps, ["snap_000000.bin", "snap_000004.bin", "snap_000008.bin", "snap_000010.bin"]);

    let diag = fs::read_to_string(out.join("diagnostics.tsv")).unwrap();
    assert_eq!(diag.lines().count(), 1 + 11);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let drift: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("mass_drift = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(drift.abs() <= 1e-10);
}

#[test]
fn text_mirror_agrees_with_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COLLISION);
    let out = tmp.path().join("out");
    assert!(soh(&["run", &cfg, "--output-dir", out.to_str().unwrap()], &[]).status.success());
    let snap = read_snapshot(&out.join("snap_000010.bin")).unwrap();
    let SnapshotData::Single(state) = &snap.data else {
        panic!("expected a single-fluid snapshot")
    };
    let text = fs::read_to_string(out.join("snap_000010.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), snap.nx * snap.ny);
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<f64> = row.split('\t').skip(4).map(|v| v.parse().unwrap()).collect();
        for (got, want) in cols.iter().zip([state.rho[k], state.q1[k], state.q2[k]]) {
            assert!((got - want).abs() <= 1e-15 * want.abs().max(1e-300), "{got} vs {want}");
        }
    }
}

#[test]
fn identical_config_and_seed_give_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "crowd.toml", SMALL_CROWD);
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = soh(&["run", &cfg, "--seed", seed, "--output-dir", out.to_str().unwrap()], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(out.join("diagnostics.tsv")).unwrap(),
            fs::read(out.join("snap_000010.bin")).unwrap(),
        )
    };
    let a = run("a", "3");
    let b = run("b", "3");
    let c = run("c", "4");
    assert_eq!(a, b);
    assert_ne!(a.1, c.1);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COLLISION);
    let root = tmp.path().join("env-root");
    let o = soh(&["run", &cfg, "--snapshot-every", "0"], &[("SOH_OUTPUT_DIR", &root)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(root.join("collision/diagnostics.tsv").exists());
    assert!(root.join("collision/snap_000010.bin").exists());
    assert!(!root.join("collision/snap_000004.bin").exists());
}

#[test]
fn sweep_reports_a_verdict_per_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL_COLLISION);
    let out = tmp.path().join("sweep");
    let o = soh(
        &["sweep", &cfg, "--epsilons", "1e-2,1e-8", "--output-dir", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("verdict = stable"), "{stdout}");
    let table = fs::read_to_string(out.join("sweep.tsv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn inspect_prints_header_and_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "crowd.toml", SMALL_CROWD);
    let out = tmp.path().join("out");
    assert!(soh(&["run", &cfg, "--output-dir", out.to_str().unwrap()], &[]).status.success());
    let o = soh(&["inspect", out.join("snap_000000.bin").to_str().unwrap()], &[]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("TwoFluid") && text.contains("20 x 20") && text.contains("rho_minus"), "{text}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let bad = write(tmp.path(), "bad.toml", "scenario = \"crowd\"\nc = 2\n");
    assert_eq!(soh(&["run", &bad, "--output-dir", out], &[]).status.code(), Some(2));
    let unknown = write(tmp.path(), "unknown.toml", "scenario = \"collision\"\nepsilom = 1\n");
    let o = soh(&["run", &unknown, "--output-dir", out], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilom"));

    let missing = tmp.path().join("missing.toml");
    assert_eq!(
        soh(&["run", missing.to_str().unwrap(), "--output-dir", out], &[]).status.code(),
        Some(4)
    );

    let unstable = write(
        tmp.path(),
        "explicit.toml",
        "scenario = \"collision\"\nstepper = \"explicit\"\ndx = 0.005\nt_end = 0.01\n",
    );
    let o = soh(&["run", &unstable, "--output-dir", out], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step"));

    let junk = write(tmp.path(), "junk.bin", "not a snapshot");
    assert_eq!(soh(&["inspect", &junk], &[]).status.code(), Some(4));
}
