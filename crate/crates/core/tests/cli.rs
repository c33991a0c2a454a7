//! End-to-end runs of the `vpair` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vpair(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vpair"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("VPAIR_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    vortex_pair::io::read_csv(&text).unwrap().1
}

#[test]
fn spectrum_reports_the_instance_a_kernel() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["spectrum", "--p", "1", "--q", "2", "--k0", "1", "--l0", "0", "--cutoff", "64x32"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("spectrum.json"));
    assert_eq!(report["gap"]["min_abs_lambda"], "1/4");
    assert_eq!(report["kernel"].as_array().unwrap().len(), 4);
    assert_eq!(report["nonresonant"], true);
    let rows = csv_rows(&out.join("eigenvalues.csv"));
    assert_eq!(rows.len(), (129 * 65 - 1) * 2);
}

#[test]
fn resonant_site_warns_and_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["spectrum", "--p", "2", "--q", "1", "--k0", "1", "--l0", "1", "--cutoff", "8x8"], &out);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1,2,0)"));
    let report = json(&out.join("spectrum.json"));
    assert_eq!(report["nonresonant"], false);
    assert_eq!(report["witness"], serde_json::json!({ "j": 1, "k": 2, "l": 0 }));
}

#[test]
fn usage_errors_exit_2_without_files() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    for args in [
        vec!["spectrum", "--p", "1", "--q", "0", "--k0", "1", "--l0", "0"],
        vec!["spectrum", "--p", "1", "--q", "2"],
        vec!["branch", "--p", "1", "--q", "2", "--k0", "1", "--l0", "0", "--oversample", "1"],
        vec!["evolve", "--periods", "1"],
        vec!["travel", "--a", "2", "--l", "0", "--b-grid", "0,abc"],
        vec!["nonsense"],
    ] {
        let o = vpair(&args, &out);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{args:?} left files behind");
    }
}

#[test]
fn degenerate_travel_frequency_exits_3() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["travel", "--a", "1", "--l", "1"], &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not positive"));
    assert!(!out.exists());
}

#[test]
fn amplitude_atlas_contains_the_known_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["amplitudes", "--q", "2", "--kmax", "2", "--pmax", "8", "--cutoff", "16x8"], &out);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&out.join("amplitudes.csv"));
    for a in ["3/4", "5/4", "15/16"] {
        assert!(rows.iter().any(|r| r[0] == a), "missing a2inv {a}");
    }
    let empty = dir.path().join("empty");
    let o = vpair(&["amplitudes", "--q", "1", "--kmax", "1", "--pmax", "1"], &empty);
    assert_eq!(o.status.code(), Some(0));
    assert!(csv_rows(&empty.join("amplitudes.csv")).is_empty());
}

#[test]
fn branch_then_evolve_returns_after_one_period() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("branch");
    let args = ["branch", "--p", "1", "--q", "2", "--k0", "1", "--l0", "0", "--jmax", "24", "--kmax", "24", "--b-grid", "0,0.025,0.05"];
    let o = vpair(&args, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("branch.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1], "1.1547005383792515e0");
    for r in &rows[1..] {
        assert!(r[2].parse::<f64>().unwrap() < 1e-10);
    }
    let evolved = dir.path().join("evolve");
    let snap = out.join("point_002.field");
    let o = vpair(&["evolve", "--snapshot", snap.to_str().unwrap(), "--reverse"], &evolved);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&evolved.join("evolve.json"));
    let ret: f64 = summary["return_error"].as_str().unwrap().parse().unwrap();
    let rev: f64 = summary["reversibility_error"].as_str().unwrap().parse().unwrap();
    assert!(ret < 1e-5 && rev < 1e-8, "return {ret:e}, reversibility {rev:e}");
    let manifest = json(&evolved.join("manifest.json"));
    assert_eq!(manifest["inputs"][0]["sha256"], vortex_pair::io::sha256_hex(&fs::read(&snap).unwrap()));
}

#[test]
fn figure_eight_branch_runs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let args = ["branch", "--p", "3", "--q", "2", "--k0", "1", "--l0", "1", "--jmax", "24", "--kmax", "24", "--b-grid", "0,0.05"];
    let o = vpair(&args, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("branch.json"));
    assert_eq!(report["site"]["a2inv"], "5/4");
    let defect: f64 = report["points"][1]["symmetry_max_defect"].as_str().unwrap().parse().unwrap();
    assert!(defect < 1e-10);
}

#[test]
fn travel_echoes_nu0_and_profiles_evolve() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("travel");
    let o = vpair(&["travel", "--a", "2", "--l", "0", "--b-grid", "0,0.05"], &out);
    assert_eq!(o.status.code(), Some(0));
    let summary = json(&out.join("travel.json"));
    assert_eq!(summary["nu0"], vortex_pair::io::fmt_f64(5f64.sqrt() / 2.0));
    let evolved = dir.path().join("evolve");
    let snap = out.join("profile_001.line");
    let o = vpair(&["evolve", "--snapshot", snap.to_str().unwrap()], &evolved);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let err: f64 = json(&evolved.join("evolve.json"))["translation_error"].as_str().unwrap().parse().unwrap();
    assert!(err < 1e-5);
}

#[test]
fn straight_pair_drifts_at_minus_i_over_a() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["evolve", "--straight", "2", "--modes", "16", "--dt-divisions", "512"], &out);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&out.join("evolve.json"));
    let im: f64 = s["drift_rate_im"].as_str().unwrap().parse().unwrap();
    assert!((im + 0.5).abs() < 1e-10);
    assert!(out.join("final_state.line").exists());
}

/// Output files with the wall clock removed from the manifest.
fn snapshot_dir(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            let mut text = fs::read_to_string(e.path()).unwrap();
            if name == "manifest.json" {
                let mut v: Value = serde_json::from_str(&text).unwrap();
                v["wall_clock_seconds"] = Value::Null;
                v["args"] = Value::Null;
                text = v.to_string();
            }
            (name, text)
        })
        .collect();
    files.sort();
    files
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let args = ["branch", "--p", "1", "--q", "2", "--k0", "1", "--l0", "0", "--jmax", "16", "--kmax", "16", "--b-grid", "0,0.05", "--threads", "1"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(vpair(&args, &a).status.code(), Some(0));
    assert_eq!(vpair(&args, &b).status.code(), Some(0));
    let (fa, fb) = (snapshot_dir(&a), snapshot_dir(&b));
    assert_eq!(fa.len(), 5);
    assert_eq!(fa, fb);
    // Every output carries the run digest.
    let digest = json(&a.join("manifest.json"))["run_digest"].as_str().unwrap().to_string();
    for (name, text) in &fa {
        if name.ends_with(".json") {
            if name != "manifest.json" {
                assert_eq!(json(&a.join(name))["run_digest"], digest.as_str());
            }
        } else {
            assert_eq!(text.lines().next().unwrap(), format!("# run sha256:{digest}"), "{name}");
        }
    }
}

#[test]
fn config_file_is_flat_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "modes = 8\nb_grid = \"0,0.02\"\ntol = 1e-13\n").unwrap();
    let out = dir.path().join("run");
    let o = vpair(&["travel", "--a", "2", "--l", "1", "--config", cfg.to_str().unwrap(), "--modes", "12"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("travel.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][3], "12");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["tol"], vortex_pair::io::fmt_f64(1e-13));

    fs::write(&cfg, "modes = 8\nshiny = true\n").unwrap();
    let bad = dir.path().join("bad");
    let o = vpair(&["travel", "--a", "2", "--l", "1", "--config", cfg.to_str().unwrap()], &bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("shiny"));
    assert!(!bad.exists());
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_vpair"))
        .args(["travel", "--a", "2", "--l", "0", "--b-grid", "0"])
        .env("VPAIR_OUT", &out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("travel.csv").exists());
}
