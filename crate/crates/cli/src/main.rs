//! `spotscale` command-line experiment runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use spotscale::capacity::MarginMode;
use spotscale::experiment::{
    cell_dir_name, run_sweep, write_comparison, write_comparison_file, CellOutcome, ExperimentSpec, Prepared,
    SweepMatrix, SweepRow,
};
use spotscale::policy::PolicyKind;
use spotscale::provision::BiddingStrategy;
use spotscale::sim::format_money;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(
    name = "spotscale",
    version,
    about = "Simulate fault-tolerant spot auto-scaling over traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment.
    Run(RunArgs),
    /// Run every combination of the listed values and print a comparison.
    Sweep(SweepArgs),
}

/// Flags shared by both commands. Values given here override the config
/// file, which overrides the defaults.
#[derive(Args, Clone, Default)]
struct Common {
    /// TOML file with experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_groups: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    workload_scale: Option<f64>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// proposed, on-demand-only or one-spot-type.
    #[arg(long)]
    policy: Option<String>,
    /// Fault-tolerant level.
    #[arg(long)]
    f: Option<u32>,
    /// Minimum on-demand share of required capacity, 0 to 100.
    #[arg(long)]
    on_demand_pct: Option<f64>,
    /// truthful or on-demand.
    #[arg(long)]
    bidding: Option<String>,
    /// static or dynamic.
    #[arg(long)]
    margin: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    f: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    on_demand_pct: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    bidding: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    margin: Vec<String>,
    /// Cells run at once, each in its own process.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    common: Common,
}

/// Sweep axes as they may appear in the `[sweep]` table of a config file.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SweepAxes {
    #[serde(default)]
    policy: Vec<String>,
    #[serde(default)]
    f: Vec<u32>,
    #[serde(default)]
    on_demand_pct: Vec<f64>,
    #[serde(default)]
    bidding: Vec<String>,
    #[serde(default)]
    margin: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn validation(e: impl std::fmt::Display) -> Self {
        Failure::Validation(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

/// Reads the config file into a base spec plus the raw `[sweep]` table.
fn load_config(path: Option<&Path>) -> Result<(ExperimentSpec, SweepAxes), Failure> {
    let Some(path) = path else {
        return Ok(Default::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    let axes = match table.remove("sweep") {
        Some(v) => v
            .try_into()
            .map_err(|e| Failure::Validation(format!("{}: [sweep]: {e}", path.display())))?,
        None => SweepAxes::default(),
    };
    let spec = table
        .try_into()
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    Ok((spec, axes))
}

fn apply_common(spec: &mut ExperimentSpec, c: &Common) {
    if let Some(v) = c.max_groups {
        spec.max_groups = v;
    }
    if let Some(v) = c.seed {
        spec.seed = v;
    }
    if let Some(v) = c.duration {
        spec.duration = v;
    }
    if let Some(v) = c.workload_scale {
        spec.workload_scale = v;
    }
    if let Some(v) = &c.catalog {
        spec.catalog = v.clone();
    }
    if let Some(v) = &c.prices {
        spec.prices = v.clone();
    }
    if let Some(v) = &c.workload {
        spec.workload = v.clone();
    }
    if let Some(v) = &c.out {
        spec.out = Some(v.clone());
    }
}

fn parse_all<T: std::str::FromStr<Err = spotscale::Error>>(values: &[String]) -> Result<Vec<T>, Failure> {
    values.iter().map(|v| v.parse().map_err(Failure::validation)).collect()
}

fn resolve_run(a: &RunArgs) -> Result<ExperimentSpec, Failure> {
    let (mut spec, _) = load_config(a.common.config.as_deref())?;
    apply_common(&mut spec, &a.common);
    if let Some(p) = &a.policy {
        spec.policy = p.parse().map_err(Failure::validation)?;
    }
    if let Some(f) = a.f {
        spec.f = f;
    }
    if let Some(o) = a.on_demand_pct {
        spec.on_demand_pct = o;
    }
    if let Some(b) = &a.bidding {
        spec.bidding = b.parse().map_err(Failure::validation)?;
    }
    if let Some(m) = &a.margin {
        spec.margin = m.parse().map_err(Failure::validation)?;
    }
    Ok(spec)
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let spec = resolve_run(&a)?;
    let prepared = Prepared::new(&spec).map_err(Failure::validation)?;
    let result = prepared.run().map_err(Failure::runtime)?;
    if let Some(dir) = &spec.out {
        prepared.write_outputs(&result, dir).map_err(Failure::runtime)?;
    }
    println!(
        "{}: total cost {}, availability {:.6}, shortfall {} s, timeouts {}",
        spec.label(),
        format_money(result.total_cost_micros()),
        result.availability(),
        result.shortfall_seconds(),
        result.totals.timeouts
    );
    Ok(())
}

fn pick<T: Clone>(flag: Vec<T>, file: Vec<T>, base: T) -> Vec<T> {
    if !flag.is_empty() {
        flag
    } else if !file.is_empty() {
        file
    } else {
        vec![base]
    }
}

fn resolve_sweep(a: &SweepArgs) -> Result<SweepMatrix, Failure> {
    let (mut base, axes) = load_config(a.common.config.as_deref())?;
    apply_common(&mut base, &a.common);
    let policies: Vec<PolicyKind> = parse_all(&pick(a.policy.clone(), axes.policy, base.policy.to_string()))?;
    let bidding: Vec<BiddingStrategy> = parse_all(&pick(a.bidding.clone(), axes.bidding, base.bidding.to_string()))?;
    let margin: Vec<MarginMode> = parse_all(&pick(a.margin.clone(), axes.margin, base.margin.to_string()))?;
    Ok(SweepMatrix {
        policies,
        f: pick(a.f.clone(), axes.f, base.f),
        on_demand_pct: pick(a.on_demand_pct.clone(), axes.on_demand_pct, base.on_demand_pct),
        bidding,
        margin,
        base,
    })
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let matrix = resolve_sweep(&a)?;
    if a.jobs == 0 {
        return Err(Failure::Validation("--jobs must be at least 1".into()));
    }
    let cells = matrix.cells();
    for cell in &cells {
        Prepared::new(cell).map_err(|e| Failure::Validation(format!("{}: {e}", cell.label())))?;
    }
    let rows = if a.jobs == 1 {
        run_sweep(&matrix).map_err(Failure::runtime)?
    } else {
        let root = matrix
            .base
            .out
            .clone()
            .ok_or_else(|| Failure::Validation("parallel sweeps need --out".into()))?;
        let rows = run_in_processes(&cells, &root, a.jobs)?;
        write_comparison_file(&rows, &root).map_err(Failure::runtime)?;
        rows
    };
    write_comparison(&rows, std::io::stdout().lock()).map_err(Failure::runtime)?;
    let failed = rows
        .iter()
        .filter(|r| matches!(r.outcome, CellOutcome::Failed(_)))
        .count();
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} of {} cells failed", rows.len())));
    }
    Ok(())
}

/// Runs each cell as `spotscale run --config <cell>/spec.toml`, at most
/// `jobs` at a time, and reads the rows back from the cell reports.
fn run_in_processes(cells: &[ExperimentSpec], root: &Path, jobs: usize) -> Result<Vec<SweepRow>, Failure> {
    let exe = std::env::current_exe().map_err(Failure::runtime)?;
    let mut rows: Vec<Option<SweepRow>> = vec![None; cells.len()];
    let mut running = Vec::new();
    let mut next = 0;
    while next < cells.len() || !running.is_empty() {
        while running.len() < jobs && next < cells.len() {
            let cell = &cells[next];
            let dir = root.join(cell_dir_name(next));
            fs::create_dir_all(&dir).map_err(Failure::runtime)?;
            let spec_path = dir.join("spec.toml");
            let text = toml::to_string(cell).map_err(Failure::runtime)?;
            fs::write(&spec_path, text).map_err(Failure::runtime)?;
            let child = Command::new(&exe)
                .arg("run")
                .arg("--config")
                .arg(&spec_path)
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::piped())
                .spawn()
                .map_err(Failure::runtime)?;
            running.push((next, dir, child));
            next += 1;
        }
        // wait on the oldest child; cells finish in any order but rows keep theirs
        let (i, dir, child) = running.remove(0);
        let output = child.wait_with_output().map_err(Failure::runtime)?;
        let cell = &cells[i];
        rows[i] = Some(if output.status.success() {
            SweepRow::from_report_dir(cell, &dir).unwrap_or_else(|e| SweepRow::failed(cell, e.to_string()))
        } else {
            let msg = String::from_utf8_lossy(&output.stderr);
            let msg = msg.trim().trim_start_matches("error: ");
            SweepRow::failed(cell, msg)
        });
    }
    Ok(rows.into_iter().map(|r| r.expect("every cell ran")).collect())
}
