use std::fs;
use std::process::{Command, Output};

fn ecopull(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecopull"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = ecopull(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn print_config_round_trips_through_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&["print-config", "--set", "compression_rate=1.5", "--set", "radio.rate=2e5"]);
    assert!(text.contains("compression_rate = 1.5"));
    let path = dir.path().join("scenario.toml");
    fs::write(&path, &text).unwrap();
    let again = stdout(&["print-config", "--config", path.to_str().unwrap()]);
    assert_eq!(text, again);
}

#[test]
fn partial_config_files_fill_in_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.toml");
    fs::write(&path, "device_count = 7\n[radio]\ntx_power = 0.2\n").unwrap();
    let text = stdout(&["print-config", "--config", path.to_str().unwrap()]);
    assert!(text.contains("device_count = 7"));
    assert!(text.contains("tx_power = 0.2"));
    assert!(text.contains("rx_power = 0.0669"));
}

#[test]
fn bad_configuration_fails_cleanly() {
    let out = ecopull(&["energy-breakdown", "--set", "relevance_threshold=1.5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("relevance_threshold"));
    let out = ecopull(&["energy-breakdown", "--set", "no_such_field=1"]);
    assert!(!out.status.success());
}

#[test]
fn csv_has_header_and_nine_digit_floats() {
    let text = stdout(&["expected-energy", "--thresholds", "0.6", "--rates", "2"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "v_th,r,p_th,expected_energy_j,closed_form_j");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0.600000000");
    for field in &row {
        let digits: String = field.chars().filter(char::is_ascii_digit).collect();
        assert_eq!(digits.trim_start_matches('0').len(), 9, "{field}");
    }
}

#[test]
fn simulate_is_deterministic_and_writes_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = ecopull(&[
            "simulate",
            "--rounds",
            "50",
            "--seed",
            "9",
            "--format",
            "both",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for name in ["simulate_rounds.csv", "simulate_summary.csv", "simulate.svg"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let rounds = fs::read_to_string(a.path().join("simulate_rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 51);
    let other = stdout(&["simulate", "--rounds", "50", "--seed", "10"]);
    let same_seed = stdout(&["simulate", "--rounds", "50", "--seed", "9"]);
    assert_ne!(other, same_seed);
}

#[test]
fn svg_goes_to_stdout_without_out_dir() {
    let text = stdout(&["sweep-sifi", "--grid", "1,2", "--samples", "200", "--modes", "mcmc", "--format", "svg"]);
    assert!(text.starts_with("<svg"));
    assert_eq!(text.matches("<polyline").count(), 3);
    assert!(!ecopull(&["energy-breakdown", "--format", "both"]).status.success());
}

#[test]
fn analyze_reports_diagnostics() {
    let text = stdout(&["analyze", "--samples", "500", "--trace", "--set", "images_per_device=10"]);
    let (summary, trace) = text.split_once("\n\n").unwrap();
    assert!(summary.starts_with("mode,estimate,acceptance_rule,acceptance_rate"));
    assert!(summary.contains("mcmc,"));
    assert_eq!(trace.lines().count(), 501);

    let exact = stdout(&["analyze", "--mode", "exact", "--set", "device_count=2", "--set", "images_per_device=3"]);
    assert!(exact.lines().nth(1).unwrap().starts_with("exact,"));
    assert!(exact.lines().nth(1).unwrap().ends_with(",10"));
}

#[test]
fn optimize_flags_infeasible_targets() {
    let text = stdout(&["optimize", "--target", "1.5", "--samples", "200", "--r-steps", "1", "--set", "images_per_device=10"]);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("1.50000000,false,"));
}

#[test]
fn compare_lists_assumptions() {
    let out = ecopull(&["compare", "--samples", "200", "--images", "5,10", "--r-steps", "1"]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("png_rate_bpp=4.86"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,v_th,r,sifi,feasible,"));
    assert!(text.contains("assumption,value"));
}
