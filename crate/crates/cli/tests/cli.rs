use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SHORT: &str = "sim_duration_s = 300\nexploration_s = 120\nwarmup_s = 30\n\n[analytic]\ngrid_points = 41\nquadrature_cells = 80\n";

fn macol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macol")).args(args).output().unwrap()
}

fn setup(config: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn run_ok(cfg: &Path, out: &Path, args: &[&str]) {
    let mut all = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    all.extend_from_slice(args);
    let o = macol(&all);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn cdf_column(path: &Path) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    assert_eq!(header, ["l_m", "cdf"]);
    rows.iter().map(|r| r[1].parse().unwrap()).collect()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn analytic_curves_are_ordered_and_stable() {
    let (dir, cfg) = setup(SHORT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&cfg, &a, &["analytic"]);
    run_ok(&cfg, &b, &["analytic"]);
    assert_eq!(snapshot(&a), snapshot(&b));

    let p0 = cdf_column(&a.join("analytic_cdf_p0.00.csv"));
    assert_eq!(p0.len(), 41);
    assert_eq!(p0[0], 0.0);
    let mut prev = p0;
    for p in ["0.20", "0.40", "0.60", "0.80"] {
        let cur = cdf_column(&a.join(format!("analytic_cdf_p{p}.csv")));
        assert!(cur.iter().zip(&prev).all(|(c, q)| c >= q), "p={p}");
        assert_eq!(*cur.last().unwrap(), 1.0);
        prev = cur;
    }

    let (header, rows) = read_csv(&a.join("interfered_area.csv"));
    assert_eq!(header[0], "beam");
    assert_eq!(rows.len(), 18);
    for r in &rows {
        let f: f64 = r[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&f));
    }
}

#[test]
fn simulate_writes_per_seed_files_and_a_merge() {
    let (dir, cfg) = setup(&format!("vehicle_count = 30\n{SHORT}"));
    let out = dir.path().join("sim");
    run_ok(&cfg, &out, &["--seed", "1,2,3", "simulate"]);
    for seed in 1..=3 {
        let stem = format!("macol_seed{seed}_v30");
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(format!("{stem}_summary.json"))).unwrap()).unwrap();
        assert!(summary["interference_ratio"].is_f64());
        assert_eq!(summary["seed"], seed);
        assert_eq!(summary["config"]["vehicle_count"], 30);
        assert_eq!(summary["config"]["epsilon"], 0.05);
        assert_eq!(summary["config"]["channel"]["bandwidth_hz"], 50e6);
        assert!(summary["signaling"]["pushes"].as_u64().unwrap() > 0);
        assert_eq!(summary["contexts"].as_array().unwrap().len(), 18);

        let (header, rows) = read_csv(&out.join(format!("{stem}_windows.csv")));
        assert_eq!(header.len(), 7);
        assert_eq!(rows.len(), 15);
        let (header, _) = read_csv(&out.join(format!("{stem}_sinr.csv")));
        assert_eq!(header, ["time_s", "beam", "band", "sinr_db"]);
        let cdf = cdf_column(&out.join(format!("{stem}_service_cdf.csv")));
        assert_eq!(cdf.len(), 41);
        assert_eq!(*cdf.last().unwrap(), 1.0);
    }
    let (header, rows) = read_csv(&out.join("macol_v30_merged.csv"));
    assert_eq!(header, ["metric", "mean", "stddev", "runs"]);
    assert!(rows.iter().any(|r| r[0] == "interference_ratio" && r[3] == "3"));
}

#[test]
fn empirical_and_analytic_cdfs_share_a_grid() {
    let (dir, cfg) = setup(SHORT);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &["analytic"]);
    run_ok(&cfg, &out, &["--policy", "random", "simulate"]);
    let (_, a) = read_csv(&out.join("analytic_cdf_p0.00.csv"));
    let (_, e) = read_csv(&out.join("random_seed1_v20_service_cdf.csv"));
    let col = |rows: &[Vec<String>]| rows.iter().map(|r| r[0].clone()).collect::<Vec<_>>();
    assert_eq!(col(&a), col(&e));
}

#[test]
fn practical_mode_traces_sinr() {
    let (dir, cfg) = setup(SHORT);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &["--mode", "practical", "--policy", "best_snr", "simulate"]);
    let (_, rows) = read_csv(&out.join("best_snr_seed1_v20_sinr.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[1] == "7"));
    let summary = fs::read_to_string(out.join("best_snr_seed1_v20_summary.json")).unwrap();
    assert!(summary.contains("\"mode\": \"practical\""));
    assert!(summary.contains("\"signaling\": null"));
}

#[test]
fn vehicle_sweep_covers_the_cross_product() {
    let (dir, cfg) = setup(SHORT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["--seed", "4", "sweep", "--sweep", "vehicle_count=6,10,20,30"];
    run_ok(&cfg, &a, &args);
    run_ok(&cfg, &b, &args);
    assert_eq!(snapshot(&a), snapshot(&b));
    let (header, rows) = read_csv(&a.join("sweep_vehicle_count.csv"));
    assert_eq!(header, ["axis", "level", "policy", "seed", "metric", "value"]);
    let runs: BTreeSet<(String, String, String)> =
        rows.iter().map(|r| (r[1].clone(), r[2].clone(), r[3].clone())).collect();
    assert_eq!(runs.len(), 12);
    assert!(rows.iter().all(|r| r[0] == "vehicle_count" && r[3] == "4"));
}

#[test]
fn band_sweep_reports_loss_per_policy_and_band() {
    let (dir, cfg) = setup(&format!("vehicle_count = 10\n{SHORT}"));
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &["--mode", "practical", "sweep", "--sweep", "band_count=1,2,3,4,5"]);
    let (_, rows) = read_csv(&out.join("sweep_band_count.csv"));
    let loss: BTreeSet<(String, String)> = rows
        .iter()
        .filter(|r| r[4] == "loss_rate")
        .map(|r| (r[2].clone(), r[1].clone()))
        .collect();
    assert_eq!(loss.len(), 15);
}

#[test]
fn exit_codes_separate_config_and_runtime_errors() {
    let (dir, cfg) = setup("vehicle_count = 41\n");
    let out = dir.path().join("o");
    let o = macol(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vehicle_count"));

    fs::write(&cfg, "speed = 3\n").unwrap();
    let o = macol(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = macol(&["--config", dir.path().join("missing.toml").to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(&cfg, SHORT).unwrap();
    let o = macol(&["--config", cfg.to_str().unwrap(), "sweep", "--sweep", "exploration_s=120,90"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exploration_s"));

    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = macol(&["--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap(), "analytic"]);
    assert_eq!(o.status.code(), Some(3));
}
