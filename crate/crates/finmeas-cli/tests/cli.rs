//! End-to-end checks of the binary: determinism of emitted files, config
//! round trips, the environment seed override, exit codes, and the closed
//! forms surfaced by the analytic subcommand.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_finmeas"));
    cmd.env_remove("FINMEAS_SEED");
    cmd
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("finmeas-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name} under {dir:?}: {e}"))
}

fn assert_same_outputs(a: &Path, b: &Path) {
    for name in ["manifest.json", "rows.csv", "summary.json"] {
        assert_eq!(read(a, name), read(b, name), "{name} differs");
    }
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should spawn");
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("rerun-a");
    let b = scratch("rerun-b");
    for dir in [&a, &b] {
        run_ok(bin().args([
            "equilibrate",
            "--n",
            "4",
            "--samples",
            "10",
            "--seed",
            "7",
            "--tmin",
            "1e-2",
            "--tmax",
            "100",
            "--tpoints",
            "24",
            "--out",
            dir.to_str().unwrap(),
        ]));
    }
    assert_same_outputs(&a, &b);
    let rows = String::from_utf8(read(&a, "rows.csv")).unwrap();
    assert!(rows.starts_with("h0_index,t,mean_distance,stderr,n_samples\n"));
    for dir in [a, b] {
        let _ = fs::remove_dir_all(dir);
    }
}

#[test]
fn manifest_replays_through_config() {
    let first = scratch("config-a");
    let second = scratch("config-b");
    run_ok(bin().args([
        "typicality",
        "--n",
        "4",
        "--samples",
        "60",
        "--seed",
        "11",
        "--delta",
        "0.02",
        "--out",
        first.to_str().unwrap(),
    ]));
    let manifest = first.join("manifest.json");
    run_ok(bin().args([
        "typicality",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]));
    assert_same_outputs(&first, &second);
    for dir in [first, second] {
        let _ = fs::remove_dir_all(dir);
    }
}

#[test]
fn flags_beat_config_and_env_beats_flags() {
    let base = scratch("prec-base");
    let flagged = scratch("prec-flag");
    let env_run = scratch("prec-env");
    let reference = scratch("prec-ref");

    run_ok(bin().args([
        "typicality", "--n", "4", "--samples", "50", "--seed", "1",
        "--out", base.to_str().unwrap(),
    ]));
    let manifest = base.join("manifest.json");

    // flag seed 5 overrides the config's seed 1
    run_ok(bin().args([
        "typicality",
        "--config",
        manifest.to_str().unwrap(),
        "--seed",
        "5",
        "--out",
        flagged.to_str().unwrap(),
    ]));
    // env seed 9 overrides the flag's 5
    run_ok(bin()
        .env("FINMEAS_SEED", "9")
        .args([
            "typicality",
            "--config",
            manifest.to_str().unwrap(),
            "--seed",
            "5",
            "--out",
            env_run.to_str().unwrap(),
        ]));
    run_ok(bin().args([
        "typicality", "--n", "4", "--samples", "50", "--seed", "9",
        "--out", reference.to_str().unwrap(),
    ]));

    let seed_of = |dir: &Path| {
        let text = String::from_utf8(read(dir, "manifest.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        json["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&flagged), 5);
    assert_eq!(seed_of(&env_run), 9);
    assert_eq!(read(&env_run, "rows.csv"), read(&reference, "rows.csv"));
    for dir in [base, flagged, env_run, reference] {
        let _ = fs::remove_dir_all(dir);
    }
}

#[test]
fn analytic_prints_the_closed_forms() {
    let dir = scratch("analytic");
    let out = run_ok(bin().args([
        "analytic",
        "--n",
        "8",
        "--spin",
        "0.5,0",
        "0.866025,0",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("N = 8 (d0 = 70, d1 = 93)"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&String::from_utf8(read(&dir, "summary.json")).unwrap()).unwrap();
    assert_eq!(summary["p_zero"].as_f64().unwrap(), 71.0 / 164.0);
    // off-unit input by under 1e-6: normalized silently
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!err.contains("warning"), "{err}");
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn far_off_norm_warns_and_renormalizes() {
    let dir = scratch("renorm");
    let out = run_ok(bin().args([
        "analytic",
        "--n",
        "4",
        "--spin",
        "3,0",
        "0,4",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("warning"), "{err}");
    let manifest: serde_json::Value =
        serde_json::from_str(&String::from_utf8(read(&dir, "manifest.json")).unwrap()).unwrap();
    let spin = &manifest["spin"];
    assert_eq!(spin[0][0].as_f64().unwrap(), 0.6);
    assert_eq!(spin[1][1].as_f64().unwrap(), 0.8);
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn config_and_flag_errors_exit_2() {
    let unknown_flag = bin()
        .args(["equilibrate", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(unknown_flag.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown_flag.stderr).contains("Usage"));

    let unwritable = bin()
        .args(["analytic", "--out", "/proc/definitely/nowhere"])
        .output()
        .unwrap();
    assert_eq!(unwritable.status.code(), Some(2));

    let bad_env = bin()
        .env("FINMEAS_SEED", "not-a-number")
        .args(["analytic"])
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));

    let bad_param = bin()
        .args(["typicality", "--n", "4", "--samples", "5"])
        .output()
        .unwrap();
    assert_eq!(bad_param.status.code(), Some(2));

    let zero_spin = bin()
        .args(["analytic", "--spin", "0,0", "0,0"])
        .output()
        .unwrap();
    assert_eq!(zero_spin.status.code(), Some(2));

    let dir = scratch("bad-config");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("config.json");
    fs::write(&path, "{\"tpoint\": 12}").unwrap();
    let unknown_key = bin()
        .args(["analytic", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(unknown_key.status.code(), Some(2));
    let _ = fs::remove_dir_all(dir);
}

#[test]
fn selftest_passes() {
    let out = run_ok(bin().arg("selftest"));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("all checks passed"), "{stdout}");
}
