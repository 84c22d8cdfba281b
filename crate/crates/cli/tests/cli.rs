use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "random_draws = 20\n[irs]\ncount_x = 8\n[lrs]\ncount_z = 16\n[urs]\ncount_z = 16\n";

fn irsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsense"))
        .args(args)
        .env_remove("IRSENSE_WORKERS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn config_prints_parseable_defaults() {
    let out = irsense(&["config"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("[security]"));
    assert!(text.parse::<toml::Table>().is_ok());
}

#[test]
fn sweep_writes_csv_with_one_row_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_path = dir.path().join("urs.csv");
    let out = irsense(&[
        "--config",
        &config,
        "--out",
        out_path.to_str().unwrap(),
        "sweep",
        "--experiment",
        "urs_distance",
        "--values",
        "10,20",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "swept_value,scheme,lrs_power_or_energy,urs_power,feasible,iterations,wall_time"
    );
    assert_eq!(lines.count(), 2 * 4);
}

#[test]
fn json_output_and_seed_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{SMALL}[error]\nangle_sigma_deg = 0.5\n"));
    let run = |seed: &str| {
        let out = irsense(&[
            "--config",
            &config,
            "--seed",
            seed,
            "--format",
            "json",
            "sweep",
            "--experiment",
            "angle_error",
            "--values",
            "0,1",
        ]);
        assert!(out.status.success());
        stdout(&out)
    };
    let first = run("4");
    assert_eq!(first, run("4"));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&first).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0]["scheme"], "proposed_short_term");
}

#[test]
fn scan_and_reproduce_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let scan = irsense(&["--config", &config, "scan", "--radar", "urs"]);
    assert!(scan.status.success());
    assert_eq!(stdout(&scan).lines().count(), 1 + 16 * 3);
    let fig = irsense(&["--config", &config, "reproduce", "fig5"]);
    assert!(fig.status.success());
    assert_eq!(stdout(&fig).lines().count(), 1 + 16 * 3);
}

#[test]
fn optimize_prints_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = irsense(&["--config", &config, "optimize"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(report["cpi"]["lrs_energy"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[irs]\nunknown_key = 3\n");
    let out = irsense(&["--config", &bad, "config"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("irs.unknown_key"));

    let missing = dir.path().join("absent.toml");
    let out = irsense(&["--config", missing.to_str().unwrap(), "config"]);
    assert_eq!(out.status.code(), Some(2));

    let out = irsense(&["sweep", "--experiment", "no_such_thing"]);
    assert_eq!(out.status.code(), Some(2));

    let out = irsense(&["sweep", "--experiment", "gamma_sweep", "--values", "1e-9,1e-10,1e-8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_sweep_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[irs]\ncount_x = 1\n[security]\ngamma = 1e-30\n");
    let out = irsense(&["--config", &config, "sweep", "--experiment", "lrs_distance", "--values", "20"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).contains("proposed_short_term"));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_irsense"))
        .arg("config")
        .env("IRSENSE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
