//! End-to-end tests of the `cellrate` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cellrate"))
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cellrate-test-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read_rates(out: &Path) -> Vec<(usize, f64, f64)> {
    let text = fs::read_to_string(out.join("rates.csv")).expect("rates.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].parse().unwrap(),
                f[5].parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn list_scenarios_is_complete() {
    let out = bin().arg("list-scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "2cell-fullcoop-pfs",
        "2cell-fullcoop-hfs",
        "2cell-nocoop-pfs",
        "2cell-nocoop-hfs",
        "7cell-nocoop-pfs",
        "7cell-sectorcoop-pfs",
        "7cell-fullcoop-pfs",
    ] {
        assert!(text.contains(name), "missing scenario {name}");
    }
}

#[test]
fn full_cooperation_pfs_rates_are_symmetric_about_midpoint() {
    let out_dir = tmp_dir("pfs-sym");
    let status = bin()
        .args(["run", "--scenario", "2cell-fullcoop-pfs", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_rates(&out_dir);
    assert_eq!(rows.len(), 8);
    // Mirror groups around x = 0 achieve the same rate.
    for g in 0..4 {
        let (_, x1, r1) = rows[g];
        let (_, x2, r2) = rows[7 - g];
        assert!((x1 + x2).abs() < 1e-12);
        assert!(
            (r1 - r2).abs() <= 1e-2 * r1.max(r2),
            "groups {g} and {}: {r1} vs {r2}",
            7 - g
        );
    }
    assert!(out_dir.join("summary.json").exists());
    assert!(!out_dir.join("validation.csv").exists());
    let _ = fs::remove_dir_all(&out_dir);
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let out_dir = tmp_dir("badcfg");
    let cfg = out_dir.with_extension("json");
    fs::write(&cfg, "{ not json").unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out_dir.exists() || fs::read_dir(&out_dir).unwrap().next().is_none());
    let _ = fs::remove_file(&cfg);
}

#[test]
fn unknown_scenario_exits_2() {
    let out_dir = tmp_dir("unknown");
    let status = bin()
        .args(["run", "--scenario", "no-such-scenario", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn invalid_scenario_file_exits_2_without_artifacts() {
    let out_dir = tmp_dir("badscenario");
    let cfg = out_dir.with_extension("scenario.json");
    // Structurally valid JSON, invalid partition (group 0 appears twice).
    let scenario = serde_json::json!({
        "bs_list": [{"position_km": [0.0, 0.0], "boresight_deg": 0.0, "gamma": 2}],
        "group_list": [{"position_km": [0.5, 0.0]}, {"position_km": [1.0, 0.0]}],
        "per_bs_power_db": 0.0,
        "pathloss": {"g0": 100.0, "eta": 3.76, "d0_km": 1.0, "d_min_km": 0.035},
        "antenna": {"theta_3db_deg": 70.0, "front_back_db": 20.0, "enabled": false},
        "layout": {"kind": "linear"},
        "partition": [{"bs": [0], "groups": [0, 0]}]
    });
    fs::write(&cfg, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();
    let status = bin()
        .args(["run", "--scenario-file"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out_dir.exists());
    let _ = fs::remove_file(&cfg);
}

#[test]
fn custom_scenario_file_runs_in_weighted_mode() {
    let out_dir = tmp_dir("custom");
    let cfg = out_dir.with_extension("scenario.json");
    let scenario = serde_json::json!({
        "bs_list": [{"position_km": [0.0, 0.0], "boresight_deg": 0.0, "gamma": 2}],
        "group_list": [{"position_km": [0.3, 0.0]}, {"position_km": [0.9, 0.0]}],
        "per_bs_power_db": 0.0,
        "pathloss": {"g0": 100.0, "eta": 3.76, "d0_km": 1.0, "d_min_km": 0.035},
        "antenna": {"theta_3db_deg": 70.0, "front_back_db": 20.0, "enabled": false},
        "layout": {"kind": "linear"},
        "partition": [{"bs": [0], "groups": [0, 1]}]
    });
    fs::write(&cfg, serde_json::to_string_pretty(&scenario).unwrap()).unwrap();
    let status = bin()
        .args(["run", "--scenario-file"])
        .arg(&cfg)
        .args(["--mode", "weighted", "--weights", "1.0,2.0", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let rows = read_rates(&out_dir);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|(_, _, r)| *r >= 0.0));
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"mode\": \"weighted\""));
    let _ = fs::remove_file(&cfg);
    let _ = fs::remove_dir_all(&out_dir);
}

#[test]
fn mc_validation_emits_table_and_passes() {
    let out_dir = tmp_dir("mcv");
    let status = bin()
        .args(["run", "--scenario", "2cell-nocoop-pfs", "--mc-validate"])
        .args(["--mc-draws", "200", "--mc-N", "2", "--seed", "11", "--out"])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0), "validation should pass");
    let table = fs::read_to_string(out_dir.join("validation.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 8, "one row per group and n");
    assert!(rows.iter().all(|r| r.ends_with("true")), "{table}");
    let _ = fs::remove_dir_all(&out_dir);
}
