use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack when checking that sample spacing is uniform.
const SPACING_SLACK: f64 = 1e-9;

/// Request counts per fixed sampling interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    /// Seconds between consecutive samples.
    pub interval: f64,
    /// `(timestamp seconds, requests in [timestamp, timestamp + interval))`.
    pub samples: Vec<(f64, u64)>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Row {
    timestamp: f64,
    requests: i64,
}

impl WorkloadTrace {
    pub fn new(interval: f64, samples: Vec<(f64, u64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Trace("workload trace is empty".into()));
        }
        if !(interval > 0.0 && interval.is_finite()) {
            return Err(Error::Trace("workload interval must be positive".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let step = w[1].0 - w[0].0;
            if (step - interval).abs() > SPACING_SLACK * interval.max(1.0) {
                return Err(Error::Trace(format!(
                    "workload sample {} is {step} s after its predecessor, expected {interval} s",
                    i + 1
                )));
            }
        }
        Ok(WorkloadTrace { interval, samples })
    }

    /// Constant-rate trace, handy for tests.
    pub fn constant(rate_per_second: u64, interval: f64, duration: f64) -> Self {
        let n = (duration / interval).ceil().max(1.0) as usize;
        let per = rate_per_second * interval as u64;
        WorkloadTrace {
            interval,
            samples: (0..n).map(|i| (i as f64 * interval, per)).collect(),
        }
    }

    pub fn start(&self) -> f64 {
        self.samples[0].0
    }

    /// End of the last sampling interval.
    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].0 + self.interval
    }

    pub fn total_requests(&self) -> u64 {
        self.samples.iter().map(|s| s.1).sum()
    }

    /// Loads a `timestamp,requests` CSV file. A single-sample trace gets a
    /// one-second interval.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut samples: Vec<(f64, u64)> = Vec::new();
        let mut interval = None;
        for (row, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::validation(origin, line, e.to_string()))?;
            if !rec.timestamp.is_finite() {
                return Err(Error::validation(origin, line, "timestamp is not finite"));
            }
            if rec.requests < 0 {
                return Err(Error::validation(
                    origin,
                    line,
                    format!("negative request count {}", rec.requests),
                ));
            }
            if let Some(&(prev, _)) = samples.last() {
                let step = rec.timestamp - prev;
                if !(step > 0.0) {
                    return Err(Error::validation(
                        origin,
                        line,
                        format!("timestamp {} does not increase", rec.timestamp),
                    ));
                }
                match interval {
                    None => interval = Some(step),
                    Some(iv) if (step - iv).abs() > SPACING_SLACK * f64::max(iv, 1.0) => {
                        return Err(Error::validation(
                            origin,
                            line,
                            format!("sampling interval {step} s differs from {iv} s"),
                        ));
                    }
                    Some(_) => {}
                }
            }
            samples.push((rec.timestamp, rec.requests as u64));
        }
        if samples.is_empty() {
            return Err(Error::validation(origin, 1, "workload trace is empty"));
        }
        Ok(WorkloadTrace {
            interval: interval.unwrap_or(1.0),
            samples,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for &(timestamp, requests) in &self.samples {
            w.serialize(Row {
                timestamp,
                requests: requests as i64,
            })?;
        }
        w.flush()
    }

    /// Arrival schedule with counts multiplied by `scale`; see
    /// [`ArrivalCursor`].
    pub fn arrivals(&self, scale: f64, horizon: f64) -> ArrivalCursor<'_> {
        ArrivalCursor::new(self, scale, horizon)
    }

    /// Scaled request count of sample `i`: the difference of floored
    /// cumulative scaled totals, so no requests are lost to rounding.
    pub fn scaled_count(&self, i: usize, scale: f64, cumulative_before: u64) -> u64 {
        let before = (cumulative_before as f64 * scale).floor();
        let after = ((cumulative_before + self.samples[i].1) as f64 * scale).floor();
        (after - before) as u64
    }
}

/// Deterministic request arrival times.
///
/// The `c` requests of an interval `[t, t + d)` arrive at
/// `t + (j + 0.5) d / c` for `j = 0..c`.
#[derive(Debug, Clone)]
pub struct ArrivalCursor<'a> {
    trace: &'a WorkloadTrace,
    scale: f64,
    horizon: f64,
    sample: usize,
    cumulative: u64,
    count: u64,
    next: u64,
}

impl<'a> ArrivalCursor<'a> {
    fn new(trace: &'a WorkloadTrace, scale: f64, horizon: f64) -> Self {
        let mut c = ArrivalCursor {
            trace,
            scale,
            horizon,
            sample: 0,
            cumulative: 0,
            count: 0,
            next: 0,
        };
        c.count = trace.scaled_count(0, scale, 0);
        c.skip_empty();
        c
    }

    fn skip_empty(&mut self) {
        while self.next >= self.count && self.sample < self.trace.samples.len() {
            self.cumulative += self.trace.samples[self.sample].1;
            self.sample += 1;
            self.next = 0;
            self.count = if self.sample < self.trace.samples.len() {
                self.trace.scaled_count(self.sample, self.scale, self.cumulative)
            } else {
                0
            };
        }
    }

    /// Time of the next arrival, if any before the horizon.
    #[inline]
    pub fn peek(&self) -> Option<f64> {
        if self.sample >= self.trace.samples.len() {
            return None;
        }
        let (t0, _) = self.trace.samples[self.sample];
        let t = t0 + (self.next as f64 + 0.5) * self.trace.interval / self.count as f64;
        (t < self.horizon).then_some(t)
    }

    #[inline]
    pub fn advance(&mut self) {
        self.next += 1;
        if self.next >= self.count {
            self.skip_empty();
        }
    }

    /// Scaled request rate, per second, of the interval containing `t`.
    pub fn rate_at(trace: &WorkloadTrace, scale: f64, t: f64) -> f64 {
        let idx = ((t - trace.start()) / trace.interval).floor();
        if idx < 0.0 || idx as usize >= trace.samples.len() {
            return 0.0;
        }
        trace.samples[idx as usize].1 as f64 * scale / trace.interval
    }
}
