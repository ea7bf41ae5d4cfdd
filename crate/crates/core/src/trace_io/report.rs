use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provision::Mode;
use crate::sim::{format_money, LedgerEntry};

/// Width of a response-time histogram bin, seconds.
pub const HISTOGRAM_BIN: f64 = 1e-4;
/// Response times at or above this land in the overflow bin.
pub const HISTOGRAM_MAX: f64 = 30.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SecondStats {
    /// Sum of response times of requests completed in this second.
    pub rt_sum: f64,
    pub completions: u32,
    pub timeouts: u32,
}

impl SecondStats {
    pub fn mean_response_time(&self) -> Option<f64> {
        (self.completions > 0).then(|| self.rt_sum / self.completions as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub arrivals: u64,
    pub completions: u64,
    pub timeouts: u64,
    pub in_flight_at_end: u64,
    pub redispatched: u64,
    pub provider_terminations: u64,
    pub on_demand_launches: u64,
    pub spot_launches: u64,
    pub rejected_bids: u64,
}

/// Fixed-width histogram of response times.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseHistogram {
    bins: Vec<u64>,
    overflow: u64,
    count: u64,
}

impl Default for ResponseHistogram {
    fn default() -> Self {
        ResponseHistogram {
            bins: vec![0; (HISTOGRAM_MAX / HISTOGRAM_BIN).round() as usize],
            overflow: 0,
            count: 0,
        }
    }
}

impl ResponseHistogram {
    #[inline]
    pub fn record(&mut self, rt: f64) {
        let idx = (rt / HISTOGRAM_BIN) as usize;
        match self.bins.get_mut(idx) {
            Some(b) => *b += 1,
            None => self.overflow += 1,
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Upper edge of the bin holding the `q` quantile, or `None` when empty.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        let rank = ((q * self.count as f64).ceil() as u64).clamp(1, self.count);
        let mut seen = 0;
        for (i, &b) in self.bins.iter().enumerate() {
            seen += b;
            if seen >= rank {
                return Some((i + 1) as f64 * HISTOGRAM_BIN);
            }
        }
        Some(HISTOGRAM_MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub instance_type: String,
    pub members: u32,
    pub truthful_bid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub mode: Mode,
    pub on_demand: u32,
    pub groups: Vec<GroupSummary>,
    pub orphans: u32,
    /// Hourly cost of everything held, at current prices.
    pub hourly_cost: f64,
}

/// One scaling decision, as written to `decisions.log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub time: f64,
    pub trigger: String,
    pub before: PlanSummary,
    pub after: PlanSummary,
    /// Planner estimate for the chosen target, per hour.
    pub target_cost: Option<f64>,
    pub launched: Vec<u32>,
    pub shut_down: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub duration: f64,
    /// One entry per simulated second.
    pub seconds: Vec<SecondStats>,
    /// Seconds in which the requirement exceeded online capacity.
    pub shortfall: Vec<bool>,
    /// Sorted by instance id.
    pub ledger: Vec<LedgerEntry>,
    pub decisions: Vec<DecisionRecord>,
    pub histogram: ResponseHistogram,
    pub totals: Totals,
    /// Hash of the popped event sequence.
    pub event_hash: u64,
}

impl ExperimentResult {
    pub fn empty(duration: f64) -> Self {
        let n = duration.max(0.0).ceil() as usize;
        ExperimentResult {
            duration,
            seconds: vec![SecondStats::default(); n],
            shortfall: vec![false; n],
            ledger: Vec::new(),
            decisions: Vec::new(),
            histogram: ResponseHistogram::default(),
            totals: Totals::default(),
            event_hash: 0,
        }
    }

    pub fn total_cost_micros(&self) -> i64 {
        self.ledger.iter().map(|e| e.total).sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost_micros() as f64 / 1e6
    }

    pub fn shortfall_seconds(&self) -> usize {
        self.shortfall.iter().filter(|&&s| s).count()
    }

    /// Fraction of seconds without a capacity shortfall.
    pub fn availability(&self) -> f64 {
        if self.shortfall.is_empty() {
            return 1.0;
        }
        1.0 - self.shortfall_seconds() as f64 / self.shortfall.len() as f64
    }

    /// Seconds in `[from, to)` with at least one timeout.
    pub fn timeout_seconds_between(&self, from: f64, to: f64) -> usize {
        let a = from.max(0.0) as usize;
        let b = (to.max(0.0).ceil() as usize).min(self.seconds.len());
        self.seconds
            .get(a..b)
            .map_or(0, |s| s.iter().filter(|x| x.timeouts > 0).count())
    }

    pub fn timeouts_between(&self, from: f64, to: f64) -> u64 {
        let a = from.max(0.0) as usize;
        let b = (to.max(0.0).ceil() as usize).min(self.seconds.len());
        self.seconds
            .get(a..b)
            .map_or(0, |s| s.iter().map(|x| x.timeouts as u64).sum())
    }

    pub fn shortfall_seconds_between(&self, from: f64, to: f64) -> usize {
        let a = from.max(0.0) as usize;
        let b = (to.max(0.0).ceil() as usize).min(self.shortfall.len());
        self.shortfall.get(a..b).map_or(0, |s| s.iter().filter(|&&x| x).count())
    }

    pub fn mean_response_time(&self) -> Option<f64> {
        let (sum, n) = self
            .seconds
            .iter()
            .fold((0.0, 0u64), |(s, n), x| (s + x.rt_sum, n + x.completions as u64));
        (n > 0).then(|| sum / n as f64)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn write_response_times<W: Write>(result: &ExperimentResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "second,mean_rt,completions,timeouts")?;
    for (i, s) in result.seconds.iter().enumerate() {
        writeln!(
            w,
            "{i},{},{},{}",
            opt(s.mean_response_time()),
            s.completions,
            s.timeouts
        )?;
    }
    Ok(())
}

pub fn write_cost<W: Write>(result: &ExperimentResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "instance_id,type,role,hours,total")?;
    for e in &result.ledger {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.instance_id,
            e.instance_type,
            e.role.as_str(),
            e.hours,
            format_money(e.total)
        )?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "total_cost,availability,shortfall_seconds,p50_rt,p95_rt,p99_rt,mean_rt,arrivals,completions,timeouts,in_flight_at_end,provider_terminations,on_demand_launches,spot_launches";

pub fn summary_row(result: &ExperimentResult) -> String {
    let t = &result.totals;
    let h = &result.histogram;
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{:.6},{},{},{},{},{},{},{},{},{},{},{},{}",
        format_money(result.total_cost_micros()),
        result.availability(),
        result.shortfall_seconds(),
        opt(h.quantile(0.50)),
        opt(h.quantile(0.95)),
        opt(h.quantile(0.99)),
        opt(result.mean_response_time()),
        t.arrivals,
        t.completions,
        t.timeouts,
        t.in_flight_at_end,
        t.provider_terminations,
        t.on_demand_launches,
        t.spot_launches,
    );
    s
}

pub fn write_summary<W: Write>(result: &ExperimentResult, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    writeln!(w, "{}", summary_row(result))
}

pub fn write_decisions<W: Write>(result: &ExperimentResult, mut w: W) -> std::io::Result<()> {
    for d in &result.decisions {
        serde_json::to_writer(&mut w, d).map_err(std::io::Error::other)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Writes `response_time.csv`, `cost.csv`, `summary.csv` and
/// `decisions.log` into `out_dir`, creating it if needed.
pub fn emit_report(result: &ExperimentResult, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    type Writer = fn(&ExperimentResult, &mut BufWriter<fs::File>) -> std::io::Result<()>;
    let files: [(&str, Writer); 4] = [
        ("response_time.csv", |r, w| write_response_times(r, w)),
        ("cost.csv", |r, w| write_cost(r, w)),
        ("summary.csv", |r, w| write_summary(r, w)),
        ("decisions.log", |r, w| write_decisions(r, w)),
    ];
    for (name, write) in files {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        write(result, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
