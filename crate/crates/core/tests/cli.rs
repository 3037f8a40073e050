use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbmlab"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

fn without_wall_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !l.contains("\"wall_clock_seconds\"") && !l.contains("\"out_dir\""))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"hurst":[0.3],"grid":{"horizon":1.0,"n_cells":512},"n_paths":60,"seed":{"root_seed":5,"stream_id":0}}"#,
    );
    let dirs: Vec<String> = ["a", "b"]
        .iter()
        .map(|d| tmp.path().join(d).to_str().unwrap().to_string())
        .collect();
    for (d, workers) in dirs.iter().zip(["1", "2"]) {
        let out = fbmlab(&[
            "estimate-hurst",
            "--config",
            &cfg,
            "--out",
            d,
            "--workers",
            workers,
            "--seed",
            "11",
        ]);
        assert!(out.status.code().is_some(), "{out:?}");
    }
    let a = fs::read_to_string(Path::new(&dirs[0]).join("report.json")).unwrap();
    let b = fs::read_to_string(Path::new(&dirs[1]).join("report.json")).unwrap();
    let strip_workers = |s: &str| {
        without_wall_clock(s)
            .lines()
            .filter(|l| !l.contains("\"workers\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_workers(&a), strip_workers(&b));
    assert!(
        a.contains("\"root_seed\": 11"),
        "seed flag overrides the file"
    );
    assert!(a.contains("\"schema_version\": 1"));
    assert!(!a.contains('\r'));
    let csv_a = fs::read(Path::new(&dirs[0]).join("hurst_H0.3.csv")).unwrap();
    let csv_b = fs::read(Path::new(&dirs[1]).join("hurst_H0.3.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(String::from_utf8(csv_a)
        .unwrap()
        .starts_with("delta,stat_mean,fit\n"));
}

#[test]
fn malformed_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"grid":{"horizon":1.0,"n_cells":0}}"#);
    let out_dir = tmp.path().join("out");
    let out = fbmlab(&[
        "mc-modulus",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!out_dir.exists());

    let cfg = write_config(tmp.path(), "{ not json");
    let out = fbmlab(&[
        "verify-bounds",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(!out_dir.exists());
}

#[test]
fn passing_run_exits_zero_and_writes_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("bounds");
    let out = fbmlab(&[
        "verify-bounds",
        "--out",
        out_dir.to_str().unwrap(),
        "--ch-mode",
        "derived",
    ]);
    assert!(out.status.success(), "{out:?}");
    let sweep = fs::read_to_string(out_dir.join("supbound_H0.3.csv")).unwrap();
    assert!(sweep.starts_with("eta,bound_one_sided,bound_two_sided\n"));
    let report = fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"ch_mode\": \"derived\""));
    assert!(report.contains("\"rng\": null"));
}

#[test]
fn failed_verdict_gives_nonzero_exit() {
    // Dimensions 3 and 4 sit on the same side of the threshold, so the
    // closest-approach contrast cannot reach a factor of 5.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"grid":{"horizon":1.0,"n_cells":256},"n_paths":20,"params":{"dims":[3,4]}}"#,
    );
    let out_dir = tmp.path().join("dp");
    let out = fbmlab(&[
        "mc-doublepoint",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let report = fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"passed\": false"));
    assert!(report.contains("\"status\": \"ok\""));
}

#[test]
fn runtime_error_is_flushed_as_failed() {
    // mc-mgf with a huge α overflows the exponential after sampling.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"hurst":[0.5],"grid":{"horizon":1.0,"n_cells":64},"n_paths":50,"params":{"alphas":[1.0,1e6]}}"#,
    );
    let out_dir = tmp.path().join("mgf");
    let out = fbmlab(&[
        "mc-mgf",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let report = fs::read_to_string(out_dir.join("report.json")).unwrap();
    assert!(report.contains("\"status\": \"failed\""));
    assert!(report.contains("empirical_sup_mgf"));
    // The α = 1 verdict was recorded before the failure.
    assert!(report.contains("mgf_excess_in_se_H0.5_alpha1\""));
}
