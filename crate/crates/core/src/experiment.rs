//! Experiment plumbing: resolve a spec, load its inputs, run the simulator
//! with the selected policy and write reports.
//!
//! The command-line tool is a thin shell over this module.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::capacity::{Catalog, MarginMode, MarginPolicy};
use crate::error::{Error, Result};
use crate::policy::{AutoScaler, PolicyKind};
use crate::provision::{BiddingStrategy, ScalingConfig};
use crate::sim::{self, format_money, SimConfig};
use crate::trace_io::{emit_report, load_price_traces, ExperimentResult, PriceTraces, WorkloadTrace};

/// Everything that defines one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub policy: PolicyKind,
    pub f: u32,
    /// Minimum on-demand share of required capacity, in percent.
    pub on_demand_pct: f64,
    pub max_groups: u32,
    pub bidding: BiddingStrategy,
    pub margin: MarginMode,
    pub seed: u64,
    /// Simulated seconds.
    pub duration: f64,
    pub workload_scale: f64,
    pub on_demand_type: String,
    pub catalog: PathBuf,
    pub prices: PathBuf,
    pub workload: PathBuf,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            policy: PolicyKind::Proposed,
            f: 1,
            on_demand_pct: 0.0,
            max_groups: 4,
            bidding: BiddingStrategy::Truthful,
            margin: MarginMode::Dynamic,
            seed: 1,
            duration: 86_400.0,
            workload_scale: 1.0,
            on_demand_type: "c3.large".into(),
            catalog: "data/catalog.csv".into(),
            prices: "data/prices_mixed.csv".into(),
            workload: "data/workload_diurnal.csv".into(),
            out: None,
        }
    }
}

impl ExperimentSpec {
    /// Checks everything that can be checked without reading the inputs.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.on_demand_pct) {
            return Err(Error::InvalidConfig(format!(
                "on-demand percentage {} outside [0, 100]",
                self.on_demand_pct
            )));
        }
        for (what, p) in [
            ("catalog", &self.catalog),
            ("prices", &self.prices),
            ("workload", &self.workload),
        ] {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "{what} file {} does not exist",
                    p.display()
                )));
            }
        }
        self.sim_config().validate()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            duration: self.duration,
            seed: self.seed,
            workload_scale: self.workload_scale,
            initial_type: self.on_demand_type.clone(),
            ..SimConfig::default()
        }
    }

    /// Scaling configuration for `catalog`, before policy adjustments.
    pub fn scaling_config(&self, catalog: &Catalog) -> Result<ScalingConfig> {
        let mut c = ScalingConfig::new(catalog.lookup(&self.on_demand_type)?);
        c.f = self.f;
        c.on_demand_fraction = self.on_demand_pct / 100.0;
        c.max_groups = self.max_groups;
        c.bidding = self.bidding;
        c.margin = MarginPolicy {
            mode: self.margin,
            ..MarginPolicy::default()
        };
        Ok(c)
    }

    /// Short human-readable cell label.
    pub fn label(&self) -> String {
        format!(
            "{}-f{}-o{}-{}-{}",
            self.policy, self.f, self.on_demand_pct, self.bidding, self.margin
        )
    }
}

/// Parsed inputs of an experiment.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub catalog: Catalog,
    pub prices: PriceTraces,
    pub workload: WorkloadTrace,
}

impl Inputs {
    pub fn load(spec: &ExperimentSpec) -> Result<Self> {
        let catalog = Catalog::load(&spec.catalog)?;
        let prices = load_price_traces(&spec.prices, &catalog)?;
        let workload = WorkloadTrace::load(&spec.workload)?;
        Ok(Inputs {
            catalog,
            prices,
            workload,
        })
    }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ExperimentSpec,
    pub inputs: Inputs,
    pub sim: SimConfig,
    pub scaling: ScalingConfig,
}

impl Prepared {
    /// Validates `spec`, loads its inputs and checks the scaling
    /// configuration against the catalog. Every error here is a problem
    /// with the inputs.
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let inputs = Inputs::load(spec)?;
        Self::with_inputs(spec, inputs)
    }

    pub fn with_inputs(spec: &ExperimentSpec, inputs: Inputs) -> Result<Self> {
        let scaling = spec.scaling_config(&inputs.catalog)?;
        // fail early on f, O and S
        AutoScaler::new(spec.policy, &scaling, &inputs.catalog)?;
        Ok(Prepared {
            spec: spec.clone(),
            sim: spec.sim_config(),
            scaling,
            inputs,
        })
    }

    pub fn run(&self) -> Result<ExperimentResult> {
        let mut scaler = AutoScaler::new(self.spec.policy, &self.scaling, &self.inputs.catalog)?;
        sim::run(
            &self.sim,
            &self.inputs.catalog,
            &self.inputs.prices,
            &self.inputs.workload,
            &mut scaler,
        )
    }

    /// Resolved configuration as pretty JSON.
    pub fn config_json(&self) -> String {
        let echo = ConfigEcho {
            experiment: &self.spec,
            simulation: &self.sim,
            scaling: &self.scaling,
            on_demand_type: self.inputs.catalog.name(self.scaling.on_demand_type),
        };
        serde_json::to_string_pretty(&echo).expect("configuration serializes")
    }

    /// Writes the reports and `config.json` into `dir`.
    pub fn write_outputs(&self, result: &ExperimentResult, dir: &Path) -> Result<()> {
        emit_report(result, dir)?;
        let path = dir.join("config.json");
        fs::write(&path, self.config_json() + "\n").map_err(|e| Error::io(&path, e))
    }
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    experiment: &'a ExperimentSpec,
    simulation: &'a SimConfig,
    scaling: &'a ScalingConfig,
    on_demand_type: &'a str,
}

/// Runs one experiment and, if `spec.out` is set, writes its reports there.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let prepared = Prepared::new(spec)?;
    let result = prepared.run()?;
    if let Some(dir) = &spec.out {
        prepared.write_outputs(&result, dir)?;
    }
    Ok(result)
}

/// Axes of a sweep. Every combination becomes one cell; fields not listed
/// here come from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMatrix {
    pub base: ExperimentSpec,
    pub policies: Vec<PolicyKind>,
    pub f: Vec<u32>,
    pub on_demand_pct: Vec<f64>,
    pub bidding: Vec<BiddingStrategy>,
    pub margin: Vec<MarginMode>,
}

impl SweepMatrix {
    /// A matrix with a single cell, `base` itself.
    pub fn single(base: ExperimentSpec) -> Self {
        SweepMatrix {
            policies: vec![base.policy],
            f: vec![base.f],
            on_demand_pct: vec![base.on_demand_pct],
            bidding: vec![base.bidding],
            margin: vec![base.margin],
            base,
        }
    }

    /// Cells in row order: policy, then f, on-demand share, bidding and
    /// margin. Output directories are numbered subdirectories of
    /// `base.out`.
    pub fn cells(&self) -> Vec<ExperimentSpec> {
        let mut out = Vec::new();
        for &policy in &self.policies {
            for &f in &self.f {
                for &pct in &self.on_demand_pct {
                    for &bidding in &self.bidding {
                        for &margin in &self.margin {
                            let mut s = self.base.clone();
                            s.policy = policy;
                            s.f = f;
                            s.on_demand_pct = pct;
                            s.bidding = bidding;
                            s.margin = margin;
                            out.push(s);
                        }
                    }
                }
            }
        }
        let root = self.base.out.clone();
        for (i, s) in out.iter_mut().enumerate() {
            s.out = root.as_ref().map(|r| r.join(cell_dir_name(i)));
        }
        out
    }
}

pub fn cell_dir_name(i: usize) -> String {
    format!("cell-{i:03}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Ok { total_cost: i64, availability: f64 },
    Failed(String),
}

/// One row of a sweep comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub spec: ExperimentSpec,
    pub outcome: CellOutcome,
}

impl SweepRow {
    pub fn from_result(spec: &ExperimentSpec, result: &Result<ExperimentResult>) -> Self {
        let outcome = match result {
            Ok(r) => CellOutcome::Ok {
                total_cost: r.total_cost_micros(),
                availability: round6(r.availability()),
            },
            Err(e) => CellOutcome::Failed(e.to_string()),
        };
        SweepRow {
            spec: spec.clone(),
            outcome,
        }
    }

    /// Row for a cell that was run elsewhere and left a `summary.csv` in
    /// `dir`.
    pub fn from_report_dir(spec: &ExperimentSpec, dir: &Path) -> Result<Self> {
        let path = dir.join("summary.csv");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let bad = || Error::validation(&path, 2, "malformed summary row");
        let row = text.lines().nth(1).ok_or_else(bad)?;
        let mut fields = row.split(',');
        let total_cost = parse_money(fields.next().ok_or_else(bad)?).ok_or_else(bad)?;
        let availability: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Ok(SweepRow {
            spec: spec.clone(),
            outcome: CellOutcome::Ok {
                total_cost,
                availability: round6(availability),
            },
        })
    }

    pub fn failed(spec: &ExperimentSpec, message: impl Into<String>) -> Self {
        SweepRow {
            spec: spec.clone(),
            outcome: CellOutcome::Failed(message.into()),
        }
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn parse_money(s: &str) -> Option<i64> {
    let (whole, frac) = s.split_once('.')?;
    if frac.len() != 6 || whole.starts_with('-') {
        return None;
    }
    Some(whole.parse::<i64>().ok()? * 1_000_000 + frac.parse::<i64>().ok()?)
}

pub const COMPARISON_HEADER: [&str; 8] = [
    "policy",
    "f",
    "on_demand_pct",
    "bidding",
    "margin",
    "total_cost",
    "availability",
    "status",
];

/// Writes the comparison table as CSV.
pub fn write_comparison<W: std::io::Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::io("comparison table", std::io::Error::other(e));
    w.write_record(COMPARISON_HEADER).map_err(wrap)?;
    for r in rows {
        let s = &r.spec;
        let (cost, avail, status) = match &r.outcome {
            CellOutcome::Ok {
                total_cost,
                availability,
            } => (
                format_money(*total_cost),
                format!("{availability:.6}"),
                "ok".to_string(),
            ),
            CellOutcome::Failed(m) => (String::new(), String::new(), format!("failed: {m}")),
        };
        w.write_record([
            s.policy.to_string(),
            s.f.to_string(),
            s.on_demand_pct.to_string(),
            s.bidding.to_string(),
            s.margin.to_string(),
            cost,
            avail,
            status,
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("comparison table", e))
}

/// Runs every cell in order in this process. A failing cell is recorded
/// and the sweep goes on. With `base.out` set, each cell writes its
/// reports to its own subdirectory and `comparison.csv` goes to the root.
pub fn run_sweep(matrix: &SweepMatrix) -> Result<Vec<SweepRow>> {
    let rows: Vec<SweepRow> = matrix
        .cells()
        .iter()
        .map(|spec| SweepRow::from_result(spec, &run_experiment(spec)))
        .collect();
    if let Some(root) = &matrix.base.out {
        write_comparison_file(&rows, root)?;
    }
    Ok(rows)
}

pub fn write_comparison_file(rows: &[SweepRow], root: &Path) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let path = root.join("comparison.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_comparison(rows, std::io::BufWriter::new(file))
}

fn unknown(what: &str, s: &str, allowed: &str) -> Error {
    Error::InvalidArgument(format!("unknown {what} `{s}` (expected {allowed})"))
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('-', "_")
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "proposed" => Ok(PolicyKind::Proposed),
            "on_demand_only" | "on_demand" => Ok(PolicyKind::OnDemandOnly),
            "one_spot_type" | "one_spot" => Ok(PolicyKind::OneSpotType),
            _ => Err(unknown("policy", s, "proposed, on-demand-only or one-spot-type")),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BiddingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "truthful" => Ok(BiddingStrategy::Truthful),
            "on_demand" | "on_demand_price" => Ok(BiddingStrategy::OnDemandPrice),
            _ => Err(unknown("bidding strategy", s, "truthful or on-demand")),
        }
    }
}

impl fmt::Display for BiddingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BiddingStrategy::Truthful => "truthful",
            BiddingStrategy::OnDemandPrice => "on_demand",
        })
    }
}

impl FromStr for MarginMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "static" => Ok(MarginMode::Static),
            "dynamic" => Ok(MarginMode::Dynamic),
            _ => Err(unknown("margin mode", s, "static or dynamic")),
        }
    }
}

impl fmt::Display for MarginMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarginMode::Static => "static",
            MarginMode::Dynamic => "dynamic",
        })
    }
}
