//! Weighted round-robin dispatch for a heterogeneous cluster.

use super::{bottleneck_throughput, effective_capacity, InstanceType, ResourceVector};
use crate::error::{Error, Result};

/// Upper bound on any single weight.
pub const MAX_WEIGHT: u32 = 100;

const INTEGRALITY_SLACK: f64 = 1e-6;

/// Integer dispatch weights proportional to each instance's throughput in
/// the application's bottleneck dimension.
///
/// Throughputs are normalised by the smallest one and multiplied by the
/// smallest integer that makes every ratio integral, as long as no weight
/// exceeds [`MAX_WEIGHT`]; otherwise ratios are rounded at the largest
/// multiplier that still fits. Every weight is at least 1.
pub fn wrr_weights(demand_per_request: &ResourceVector, instances: &[(&InstanceType, f64)]) -> Result<Vec<u32>> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("cannot weight an empty instance list".into()));
    }
    let throughputs: Vec<f64> = instances
        .iter()
        .map(|(t, m)| bottleneck_throughput(&effective_capacity(t, *m), demand_per_request))
        .collect();
    Ok(weights_from_throughputs(&throughputs))
}

pub(crate) fn weights_from_throughputs(throughputs: &[f64]) -> Vec<u32> {
    let min = throughputs.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && min.is_finite()) {
        return vec![1; throughputs.len()];
    }
    let ratios: Vec<f64> = throughputs.iter().map(|t| t / min).collect();
    let max_ratio = ratios.iter().copied().fold(1.0, f64::max);
    let max_mult = ((MAX_WEIGHT as f64 / max_ratio).floor() as u32).max(1);
    let mult = (1..=max_mult)
        .find(|&k| {
            ratios.iter().all(|r| {
                let x = r * k as f64;
                (x - x.round()).abs() <= INTEGRALITY_SLACK * x
            })
        })
        .unwrap_or(max_mult);
    ratios
        .iter()
        .map(|r| ((r * mult as f64).round() as u32).clamp(1, MAX_WEIGHT))
        .collect()
}

/// Smooth weighted round robin over `targets`.
///
/// The dispatch order for the current weights is precomputed once, so each
/// pick is O(1). The sequence is periodic with period equal to the sum of
/// the weights, hence every window of that many consecutive picks hands
/// each target exactly its weight.
#[derive(Debug, Clone)]
pub struct WrrDispatcher<T> {
    targets: Vec<T>,
    weights: Vec<u32>,
    schedule: Vec<u32>,
    cursor: usize,
}

impl<T> Default for WrrDispatcher<T> {
    fn default() -> Self {
        WrrDispatcher {
            targets: Vec::new(),
            weights: Vec::new(),
            schedule: Vec::new(),
            cursor: 0,
        }
    }
}

impl<T: Copy> WrrDispatcher<T> {
    pub fn new(targets: Vec<T>, weights: Vec<u32>) -> Self {
        assert_eq!(targets.len(), weights.len());
        let schedule = smooth_schedule(&weights);
        WrrDispatcher {
            targets,
            weights,
            schedule,
            cursor: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn targets(&self) -> &[T] {
        &self.targets
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn pick(&mut self) -> Option<T> {
        if self.schedule.is_empty() {
            return None;
        }
        let slot = self.schedule[self.cursor];
        self.cursor += 1;
        if self.cursor == self.schedule.len() {
            self.cursor = 0;
        }
        Some(self.targets[slot as usize])
    }
}

// nginx-style smooth WRR, unrolled over one full period.
fn smooth_schedule(weights: &[u32]) -> Vec<u32> {
    let total: i64 = weights.iter().map(|&w| w as i64).sum();
    let mut current = vec![0i64; weights.len()];
    let mut out = Vec::with_capacity(total as usize);
    for _ in 0..total {
        let mut best = 0;
        for (i, &w) in weights.iter().enumerate() {
            current[i] += w as i64;
            if current[i] > current[best] {
                best = i;
            }
        }
        current[best] -= total;
        out.push(best as u32);
    }
    out
}
