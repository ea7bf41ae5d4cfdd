//! Library-level experiment runs and sweeps over the bundled data.

mod common;

use std::fs;

use spotscale::experiment::{run_experiment, run_sweep, CellOutcome, ExperimentSpec, SweepMatrix};
use spotscale::policy::PolicyKind;
use spotscale::sim::format_money;

#[test]
fn reports_and_config_echo_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        duration: 7200.0,
        out: Some(dir.path().to_path_buf()),
        ..common::bundled_spec("prices_stable.csv")
    };
    let r = run_experiment(&spec).unwrap();
    for f in [
        "summary.csv",
        "cost.csv",
        "response_time.csv",
        "decisions.log",
        "config.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }

    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["experiment"]["policy"], "proposed");
    assert_eq!(echo["experiment"]["duration"], 7200.0);
    assert_eq!(echo["scaling"]["on_demand_fraction"], 0.0);
    assert_eq!(echo["on_demand_type"], "c3.large");

    // summary total equals the sum of the ledger column
    let cost = fs::read_to_string(dir.path().join("cost.csv")).unwrap();
    let sum: f64 = cost
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let total: f64 = summary
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((sum - total).abs() < 0.005);
    assert_eq!(
        format_money(r.total_cost_micros()),
        summary.lines().nth(1).unwrap().split(',').next().unwrap()
    );
}

#[test]
fn two_by_two_sweep_has_four_rows() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = SweepMatrix {
        policies: vec![PolicyKind::Proposed, PolicyKind::OnDemandOnly],
        on_demand_pct: vec![0.0, 40.0],
        ..SweepMatrix::single(ExperimentSpec {
            duration: 6.0 * 3600.0,
            out: Some(dir.path().to_path_buf()),
            ..common::bundled_spec("prices_stable.csv")
        })
    };
    let rows = run_sweep(&matrix).unwrap();
    assert_eq!(rows.len(), 4);
    let table = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(dir.path().join("cell-003/summary.csv").is_file());

    let cost = |i: usize| match rows[i].outcome {
        CellOutcome::Ok {
            total_cost,
            availability,
        } => (total_cost, availability),
        CellOutcome::Failed(ref m) => panic!("{m}"),
    };
    let max = (0..4).map(|i| cost(i).0).max().unwrap();
    for i in [2, 3] {
        assert_eq!(rows[i].spec.policy, PolicyKind::OnDemandOnly);
        assert_eq!(cost(i).1, 1.0);
        assert_eq!(cost(i).0, max);
    }
}

#[test]
fn failing_cell_is_marked_and_the_sweep_goes_on() {
    let mut matrix = SweepMatrix::single(ExperimentSpec {
        duration: 1800.0,
        ..common::bundled_spec("prices_stable.csv")
    });
    matrix.f = vec![1, 3];
    matrix.base.max_groups = 2;
    let rows = run_sweep(&matrix).unwrap();
    assert!(matches!(rows[0].outcome, CellOutcome::Ok { .. }));
    assert!(matches!(rows[1].outcome, CellOutcome::Failed(_)));
}

#[test]
fn cost_grows_with_the_fault_tolerant_level() {
    let mut matrix = SweepMatrix::single(common::bundled_spec("prices_stable.csv"));
    matrix.f = vec![0, 1, 2, 3];
    let costs: Vec<i64> = run_sweep(&matrix)
        .unwrap()
        .iter()
        .map(|r| match r.outcome {
            CellOutcome::Ok { total_cost, .. } => total_cost,
            CellOutcome::Failed(ref m) => panic!("{m}"),
        })
        .collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
}
