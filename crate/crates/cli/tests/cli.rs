use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn vortex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vortex")).args(args).output().expect("binary runs")
}

fn preset(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name).display().to_string()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect::<Vec<_>>();
    let rows = lines
        .map(|l| l.split(',').map(|f| if f == "NA" { f64::NAN } else { f.parse().unwrap() }).collect())
        .collect();
    (header, rows)
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

#[test]
fn simulate_is_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = vortex(&["simulate", "--config", &preset("three_vortex.json"), "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stderr.is_empty());
        let report = json(&out.stdout);
        assert!(report["hamiltonian_relative_drift"].as_f64().unwrap() <= 1e-8);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let (header, rows) = csv(&a);
    assert_eq!(header, ["t", "re_q1", "im_q1", "re_q2", "im_q2", "re_q3", "im_q3"]);
    assert_eq!(rows[0][..3], [0.0, 1.0, -2.0]);
    assert_eq!(rows.last().unwrap()[0], 50.0);
    let text = fs::read_to_string(&a).unwrap();
    let field = text.lines().nth(1).unwrap().split(',').nth(5).unwrap();
    assert_eq!(field, "-1.6666666666666667e0");
}

#[test]
fn reduce_reports_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.csv");
    let out = vortex(&["reduce", "--config", &preset("three_vortex.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out.stdout);
    assert_eq!(r["branch"], "Gamma!=0");
    assert_eq!(r["M"], 2);
    assert!((r["det_K"].as_f64().unwrap() - 25.0).abs() < 1e-12);
    let (header, _) = csv(&out_path);
    assert_eq!(header, ["t", "re_z1", "im_z1", "re_z2", "im_z2", "R", "mu1", "mu2", "mu3", "mu4"]);

    let out = vortex(&["reduce", "--config", &preset("four_vortex.json"), "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out.stdout);
    assert_eq!(r["branch"], "Gamma=0");
    assert!((r["det_K"].as_f64().unwrap() + 43.75).abs() < 1e-12);
    assert_eq!((r["signature"]["n1"].as_u64(), r["signature"]["n2"].as_u64()), (Some(1), Some(1)));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonzero"));
}

#[test]
fn lp_csv_columns_and_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("lp.csv");
    let out = vortex(&["lp", "--config", &preset("three_vortex.json"), "--out", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv(&p);
    assert_eq!(header, ["t", "mu1", "mu2", "mu3", "mu4", "C1", "C2_shape", "D", "h"]);
    let c1 = rows[0][5];
    assert!((c1 - 980.0 / 3.0).abs() < 1e-10);
    for r in &rows {
        assert!((r[5] - c1).abs() <= 1e-8 * c1);
    }
}

#[test]
fn levelset_reproduces_initial_node() {
    let dir = tempfile::tempdir().unwrap();
    let lp = dir.path().join("lp.csv");
    assert_eq!(
        vortex(&["lp", "--config", &preset("three_vortex.json"), "--out", lp.to_str().unwrap()]).status.code(),
        Some(0)
    );
    let (_, lp_rows) = csv(&lp);
    let (mu1, mu2, mu4, c2, h) = (lp_rows[0][1], lp_rows[0][2], lp_rows[0][4], lp_rows[0][6], lp_rows[0][8]);
    let grid = format!("{}:{}:3,{}:{}:3,{}:{}:3", mu1 - 1.0, mu1 + 1.0, mu2 - 1.0, mu2 + 1.0, mu4 - 1.0, mu4 + 1.0);
    let p = dir.path().join("ls.csv");
    let c1 = format!("{}", 980.0 / 3.0);
    let out = vortex(&[
        "levelset", "--config", &preset("three_vortex.json"), "--c1", &c1, "--grid", &grid, "--out",
        p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv(&p);
    assert_eq!(header, ["mu1", "mu2", "mu4", "C2", "h", "D"]);
    assert_eq!(rows.len(), 27);
    let centre = &rows[13];
    assert!((centre[0] - mu1).abs() < 1e-12 * mu1.abs());
    assert!((centre[3] - c2).abs() <= 1e-9 * c2.abs(), "{} vs {c2}", centre[3]);
    assert!((centre[4] - h).abs() <= 1e-9 * h.abs(), "{} vs {h}", centre[4]);
    assert!(rows.windows(2).all(|w| (w[0][0], w[0][1], w[0][2]) < (w[1][0], w[1][1], w[1][2])));
}

#[test]
fn levelset_rejects_three_dimensional_shape_space() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "four.json",
        r#"{"circulations":[1,2,3,4],"initial_positions":[[0,0],[1,0],[0,1],[1,1]],
            "t_span":[0,1],"rel_tol":1e-10,"abs_tol":1e-12}"#,
    );
    let out = vortex(&["levelset", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
}

#[test]
fn period_of_presets_and_relative_equilibrium() {
    let out = vortex(&["period", "--config", &preset("three_vortex.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out.stdout);
    let t = r["period"].as_f64().unwrap();
    assert!((t - 21.7177381034437).abs() <= 1e-6 * t);
    assert!(r["displacement"].as_f64().unwrap() > 1e3 * r["return_distance"].as_f64().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let s3 = 3f64.sqrt() / 2.0;
    let cfg = write_config(
        dir.path(),
        "eq.json",
        &format!(
            r#"{{"circulations":[1,1,1],"initial_positions":[[1,0],[-0.5,{s3}],[-0.5,{}]],
                "t_span":[0,20],"rel_tol":1e-10,"abs_tol":1e-12}}"#,
            -s3
        ),
    );
    let out = vortex(&["period", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let r = json(&out.stdout);
    assert_eq!(r["found"], false);
    assert!(r["period"].is_null());
}

#[test]
fn verify_passes_and_detects_injected_fault() {
    let ok = vortex(&["verify", "--count", "50"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let table = String::from_utf8_lossy(&ok.stdout);
    assert!(table.contains("fit    C2_shape"));
    assert!(!table.contains("FAIL"));

    let bad = vortex(&["verify", "--count", "5", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(4));
    let table = String::from_utf8_lossy(&bad.stdout);
    let failed: Vec<_> = table.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{table}");
    assert!(failed[0].contains("symmetry and det lemma"));
}

#[test]
fn verify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(vortex(&["verify", "--seed", "9", "--count", "20", "--out", p.to_str().unwrap()]).status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let collide = write_config(
        dir.path(),
        "c.json",
        r#"{"circulations":[1,2,3],"initial_positions":[[0,0],[1,0],[1,0]],
            "t_span":[0,1],"rel_tol":1e-10,"abs_tol":1e-12}"#,
    );
    let out = vortex(&["simulate", "--config", &collide]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("2 and 3"));

    let unknown = write_config(
        dir.path(),
        "u.json",
        r#"{"circulations":[1,2,3],"initial_positions":[[0,0],[1,0],[0,1]],
            "t_span":[0,1],"rel_tol":1e-10,"abs_tol":1e-12,"colour":"red"}"#,
    );
    assert_eq!(vortex(&["reduce", "--config", &unknown]).status.code(), Some(1));
    assert_eq!(vortex(&["lp", "--config", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(vortex(&["frobnicate"]).status.code(), Some(1));
    let bad_grid = vortex(&["levelset", "--config", &preset("three_vortex.json"), "--grid", "1:2"]);
    assert_eq!(bad_grid.status.code(), Some(1));
}

#[test]
fn collapse_exits_two_with_last_good_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "collapse.json",
        r#"{"circulations":[2,2,-1],"initial_positions":[[-1,0],[1,0],[1,1.4142135623730951]],
            "t_span":[0,100],"rel_tol":1e-10,"abs_tol":1e-12}"#,
    );
    let csv_path = dir.path().join("out.csv");
    let out = vortex(&["simulate", "--config", &cfg, "--out", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("integration stopped at t = "));
    assert!(!csv_path.exists());
}

#[test]
fn config_outputs_are_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("traj.csv");
    let report = dir.path().join("report.json");
    let cfg = write_config(
        dir.path(),
        "o.json",
        &format!(
            r#"{{"circulations":[1,2,3],"initial_positions":[[0,0],[1,0],[0,1]],
                "t_span":[0,1],"rel_tol":1e-10,"abs_tol":1e-12,
                "outputs":{{"csv":{:?},"report":{:?}}}}}"#,
            csv_path, report
        ),
    );
    let out = vortex(&["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert!(csv_path.exists());
    assert_eq!(json(&fs::read(&report).unwrap())["command"], "simulate");
}
