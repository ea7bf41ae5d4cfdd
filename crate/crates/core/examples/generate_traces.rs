//! Regenerates the bundled inputs under `data/`.
//!
//! ```text
//! cargo run -p spotscale --example generate_traces -- [out_dir]
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use spotscale::capacity::{Catalog, InstanceType, ResourceVector};
use spotscale::policy::{AutoScaler, PolicyKind};
use spotscale::provision::ScalingConfig;
use spotscale::sim::{self, SimConfig};
use spotscale::trace_io::synth::{diurnal_workload, synthetic_prices, PriceRegime};
use spotscale::trace_io::{write_price_traces, PriceTraces, WorkloadTrace};

const SEED: u64 = 2014;
const DAY: f64 = 86_400.0;
const SPIKE_AT: f64 = 43_200.0;
const SPIKE_LENGTH: f64 = 3_600.0;

// name, ECU, GiB, Mbit/s, MB/s disk, hourly on-demand price
const TYPES: [(&str, f64, f64, f64, f64, f64); 13] = [
    ("m1.small", 1.0, 1.7, 100.0, 40.0, 0.044),
    ("m1.medium", 2.0, 3.75, 300.0, 60.0, 0.087),
    ("m1.large", 4.0, 7.5, 500.0, 100.0, 0.175),
    ("m1.xlarge", 8.0, 15.0, 1000.0, 150.0, 0.35),
    ("m3.medium", 3.0, 3.75, 300.0, 80.0, 0.070),
    ("m3.large", 6.5, 7.5, 500.0, 120.0, 0.140),
    ("m3.xlarge", 13.0, 15.0, 1000.0, 200.0, 0.280),
    ("m3.2xlarge", 26.0, 30.0, 1000.0, 300.0, 0.560),
    ("c3.large", 7.0, 3.75, 500.0, 120.0, 0.105),
    ("c3.xlarge", 14.0, 7.5, 700.0, 200.0, 0.210),
    ("c3.2xlarge", 28.0, 15.0, 1000.0, 300.0, 0.420),
    ("c3.4xlarge", 55.0, 30.0, 2000.0, 400.0, 0.840),
    ("c3.8xlarge", 108.0, 60.0, 10000.0, 800.0, 1.680),
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "data".into()).into();
    fs::create_dir_all(&out)?;

    let catalog = Catalog::new(
        TYPES
            .iter()
            .map(|&(name, ecu, mem, net, disk, price)| {
                InstanceType::new(name, ResourceVector::new(ecu, mem, net, disk), price)
            })
            .collect(),
    )?;
    catalog.write_csv(File::create(out.join("catalog.csv"))?)?;

    let workload = diurnal_workload(300.0, 0.4, 10.0, DAY, SEED)?;
    workload.write_csv(BufWriter::new(File::create(out.join("workload_diurnal.csv"))?))?;

    let stable = synthetic_prices(&catalog, &PriceRegime::Stable, DAY, SEED)?;
    let mixed = synthetic_prices(&catalog, &PriceRegime::Mixed, DAY, SEED)?;
    let victim = held_group(&catalog, &stable, &workload)?;
    let spike = synthetic_prices(
        &catalog,
        &PriceRegime::Spike {
            instance_type: catalog.name(victim).to_string(),
            at: SPIKE_AT,
            length: SPIKE_LENGTH,
        },
        DAY,
        SEED,
    )?;
    for (name, traces) in [("stable", &stable), ("mixed", &mixed), ("spike", &spike)] {
        write_price_traces(
            traces,
            BufWriter::new(File::create(out.join(format!("prices_{name}.csv")))?),
        )?;
    }

    println!(
        "wrote {} (spike on {} at {SPIKE_AT} s)",
        out.display(),
        catalog.name(victim)
    );
    Ok(())
}

// Spot type a single-group cluster runs on when the spike starts.
fn held_group(
    catalog: &Catalog,
    prices: &PriceTraces,
    workload: &WorkloadTrace,
) -> Result<spotscale::capacity::TypeIdx, Box<dyn std::error::Error>> {
    let cfg = SimConfig {
        duration: SPIKE_AT,
        ..SimConfig::default()
    };
    let scaling = ScalingConfig::new(catalog.lookup(&cfg.initial_type)?);
    let mut scaler = AutoScaler::new(PolicyKind::OneSpotType, &scaling, catalog)?;
    sim::run(&cfg, catalog, prices, workload, &mut scaler)?;
    let group = scaler
        .provision()
        .groups
        .first()
        .ok_or("no spot group at the spike time")?;
    Ok(group.group_type)
}
