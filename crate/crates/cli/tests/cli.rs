use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spotscale::experiment::{run_experiment, ExperimentSpec};
use spotscale::policy::PolicyKind;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn spotscale(args: &[&str]) -> Output {
    // the workspace root, so the default data paths resolve
    Command::new(env!("CARGO_BIN_EXE_spotscale"))
        .current_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .args(args)
        .arg("--catalog")
        .arg(data("catalog.csv"))
        .arg("--workload")
        .arg(data("workload_diurnal.csv"))
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn short_on_demand_run_writes_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = spotscale(&["run", "--policy", "on-demand-only", "--duration", "3600", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("summary.csv").is_file());
    assert!(read(dir.path(), "config.json").contains("\"on_demand_only\""));
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = spotscale(&[
            "run",
            "--policy",
            "proposed",
            "--f",
            "1",
            "--on-demand-pct",
            "0",
            "--bidding",
            "truthful",
            "--margin",
            "dynamic",
            "--duration",
            "7200",
            "--seed",
            "5",
            "--out",
            d.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["summary.csv", "cost.csv", "response_time.csv", "decisions.log"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn cli_and_library_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cli_dir = dir.path().join("cli");
    let lib_dir = dir.path().join("lib");
    let o = spotscale(&[
        "run",
        "--policy",
        "one-spot-type",
        "--duration",
        "5400",
        "--seed",
        "11",
        "--prices",
        data("prices_mixed.csv").to_str().unwrap(),
        "--out",
        cli_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = ExperimentSpec {
        policy: PolicyKind::OneSpotType,
        duration: 5400.0,
        seed: 11,
        catalog: data("catalog.csv"),
        prices: data("prices_mixed.csv"),
        workload: data("workload_diurnal.csv"),
        out: Some(lib_dir.clone()),
        ..ExperimentSpec::default()
    };
    run_experiment(&spec).unwrap();
    for f in ["summary.csv", "cost.csv", "response_time.csv", "decisions.log"] {
        assert_eq!(read(&cli_dir, f), read(&lib_dir, f), "{f}");
    }
}

#[test]
fn validation_errors_exit_with_one() {
    let prices = data("prices_stable.csv");
    let p = prices.to_str().unwrap();
    for args in [
        vec!["run", "--f", "9", "--prices", p],
        vec!["run", "--on-demand-pct", "150", "--prices", p],
        vec!["run", "--policy", "cheapest", "--prices", p],
        vec!["run", "--prices", "/nonexistent/prices.csv"],
        vec!["run", "--no-such-flag"],
        vec!["sweep", "--f", "0,9", "--prices", p],
    ] {
        let o = spotscale(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = spotscale(&[
        "run",
        "--duration",
        "600",
        "--prices",
        data("prices_stable.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "policy = \"one_spot_type\"\nf = 0\nduration = 1800.0\nprices = {:?}\n",
            data("prices_stable.csv")
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = spotscale(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--policy",
        "proposed",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo: serde_json::Value = serde_json::from_str(&read(&out, "config.json")).unwrap();
    assert_eq!(echo["experiment"]["policy"], "proposed");
    assert_eq!(echo["experiment"]["f"], 0);
    assert_eq!(echo["experiment"]["duration"], 1800.0);

    fs::write(&cfg, "polcy = \"proposed\"\n").unwrap();
    let o = spotscale(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parallel_sweep_matches_serial() {
    let dir = tempfile::tempdir().unwrap();
    let prices = data("prices_mixed.csv");
    let mut tables = Vec::new();
    for (name, jobs) in [("serial", "1"), ("parallel", "3")] {
        let out = dir.path().join(name);
        let o = spotscale(&[
            "sweep",
            "--policy",
            "proposed,on-demand-only",
            "--on-demand-pct",
            "0,20",
            "--duration",
            "3600",
            "--prices",
            prices.to_str().unwrap(),
            "--jobs",
            jobs,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let table = read(&out, "comparison.csv");
        assert_eq!(String::from_utf8_lossy(&o.stdout), table);
        tables.push(table);
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0].lines().count(), 5);
}

#[test]
fn sweep_axes_can_come_from_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        format!(
            "duration = 1800.0\nprices = {:?}\n\n[sweep]\nf = [0, 1]\nmargin = [\"static\", \"dynamic\"]\n",
            data("prices_stable.csv")
        ),
    )
    .unwrap();
    let o = spotscale(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().count(), 5);
    assert!(stdout
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("proposed,0,0,truthful,static,"));
}
