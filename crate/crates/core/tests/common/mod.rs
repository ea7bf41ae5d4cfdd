#![allow(dead_code)]

use std::path::{Path, PathBuf};

use spotscale::capacity::{Catalog, InstanceType, ResourceVector};
use spotscale::experiment::ExperimentSpec;
use spotscale::market::PriceTrace;
use spotscale::sim::{self, Gaussian, ScriptAction, ScriptedController, SimConfig};
use spotscale::trace_io::{ExperimentResult, WorkloadTrace};

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Spec over the bundled catalog and workload with the given price file.
pub fn bundled_spec(prices: &str) -> ExperimentSpec {
    let d = data_dir();
    ExperimentSpec {
        catalog: d.join("catalog.csv"),
        prices: d.join(prices),
        workload: d.join("workload_diurnal.csv"),
        ..ExperimentSpec::default()
    }
}

/// Spike start and length in `prices_spike.csv`.
pub const SPIKE_AT: f64 = 43_200.0;
pub const SPIKE_LENGTH: f64 = 3_600.0;

pub fn fixed(mean: f64) -> Gaussian {
    Gaussian::new(mean, 0.0)
}

/// Three instances on an idle cluster: a spot instance the provider kills
/// mid-hour, a spot instance the user stops mid-hour and an on-demand
/// instance that runs to the end.
pub fn billing_scenario() -> ExperimentResult {
    let r = |ecu: f64| ResourceVector::new(ecu, 4.0, 500.0, 100.0);
    let catalog = Catalog::new(vec![
        InstanceType::new("m1.small", r(1.0), 0.044),
        InstanceType::new("m1.medium", r(2.0), 0.087),
        InstanceType::new("c3.large", r(7.0), 0.105),
    ])
    .unwrap();
    let prices = vec![
        Some(PriceTrace::new("m1.small", vec![(0.0, 0.01), (4000.0, 0.02), (9000.0, 0.06)]).unwrap()),
        Some(PriceTrace::new("m1.medium", vec![(0.0, 0.015), (4000.0, 0.025)]).unwrap()),
        Some(PriceTrace::new("c3.large", vec![(0.0, 0.02)]).unwrap()),
    ];
    let cfg = SimConfig {
        duration: 14_400.0,
        on_demand_startup: fixed(100.0),
        shutdown: fixed(100.0),
        spot_request: fixed(550.0),
        initial_on_demand: 0,
        check_invariants: true,
        ..SimConfig::default()
    };
    let workload = WorkloadTrace::constant(0, 10.0, cfg.duration);
    let mut script = ScriptedController::new(vec![
        (
            0.0,
            ScriptAction::LaunchSpot {
                instance_type: "m1.small".into(),
                bid: 0.05,
            },
        ),
        (
            0.0,
            ScriptAction::LaunchSpot {
                instance_type: "m1.medium".into(),
                bid: 0.05,
            },
        ),
        (0.0, ScriptAction::LaunchOnDemand("c3.large".into())),
        (5_000.0, ScriptAction::Shutdown(1)),
    ]);
    sim::run(&cfg, &catalog, &prices, &workload, &mut script).unwrap()
}
