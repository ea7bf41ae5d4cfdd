//! Instance catalog, application profile and capacity arithmetic.
//!
//! Capacities are multi-dimensional. An instance of type `t` running with
//! resource margin `m` contributes `capacity(t) * (1 - m)` to a provision,
//! and the number of instances needed to cover a demand vector is driven by
//! whichever dimension runs out first.

mod catalog;
mod resource;
pub mod wrr;

use serde::{Deserialize, Serialize};

pub use catalog::{Catalog, InstanceType, TypeIdx};
pub use resource::{Dimension, ResourceVector, COVER_EPSILON, DIMENSIONS};

use crate::error::{Error, Result};

/// Offline resource profile of the hosted application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    /// Steady-state resources consumed per request/s of load.
    pub demand_per_request: ResourceVector,
    /// Mean request length, in ECU-seconds.
    pub mean_request_length: f64,
    pub request_length_stddev: f64,
}

impl AppProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.demand_per_request.all_non_negative() || !self.demand_per_request.any_positive() {
            return Err(Error::InvalidConfig(
                "request demand must be non-negative and positive in at least one dimension".into(),
            ));
        }
        if !(self.mean_request_length > 0.0) || self.request_length_stddev < 0.0 {
            return Err(Error::InvalidConfig("request length distribution is invalid".into()));
        }
        Ok(())
    }
}

impl Default for AppProfile {
    /// A page-view dominated web application: 70 ms of one ECU per request,
    /// a couple of MB of working memory and ~100 kbit of traffic.
    fn default() -> Self {
        AppProfile {
            demand_per_request: ResourceVector::new(0.07, 0.002, 0.1, 0.0),
            mean_request_length: 0.07,
            request_length_stddev: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginPolicy {
    pub min: f64,
    pub default: f64,
    pub f_max: u32,
    pub mode: MarginMode,
}

impl Default for MarginPolicy {
    fn default() -> Self {
        MarginPolicy {
            min: 0.10,
            default: 0.25,
            f_max: 3,
            mode: MarginMode::Dynamic,
        }
    }
}

impl MarginPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.min && self.min <= self.default && self.default < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "margins must satisfy 0 <= min ({}) <= default ({}) < 1",
                self.min, self.default
            )));
        }
        if self.f_max < 1 {
            return Err(Error::InvalidConfig("maximum fault-tolerant level must be >= 1".into()));
        }
        Ok(())
    }
}

/// Nominal capacity reduced by the headroom fraction `margin`.
pub fn effective_capacity(t: &InstanceType, margin: f64) -> ResourceVector {
    debug_assert!((0.0..1.0).contains(&margin), "margin {margin} out of [0, 1)");
    t.capacity.scale(1.0 - margin)
}

/// Margin to apply at fault-tolerant level `f`: interpolates linearly from
/// `min` at `f = 0` to `default` at `f = f_max`. Static policies always
/// return `default`.
pub fn dynamic_margin(policy: &MarginPolicy, f: u32) -> Result<f64> {
    if f > policy.f_max {
        return Err(Error::InvalidConfig(format!(
            "fault-tolerant level {f} exceeds the maximum {}",
            policy.f_max
        )));
    }
    Ok(match policy.mode {
        MarginMode::Static => policy.default,
        MarginMode::Dynamic => (policy.default - policy.min) / policy.f_max as f64 * f as f64 + policy.min,
    })
}

/// Capacity needed to serve `request_rate` requests per second.
pub fn required_capacity(profile: &AppProfile, request_rate: f64) -> ResourceVector {
    debug_assert!(request_rate >= 0.0);
    profile.demand_per_request.scale(request_rate)
}

/// Smallest number of `t` instances at margin `margin` whose combined
/// effective capacity covers `c`.
pub fn num(c: &ResourceVector, t: &InstanceType, margin: f64) -> u32 {
    num_for_capacity(c, &effective_capacity(t, margin))
}

/// [`num`] against a precomputed per-instance effective capacity.
pub fn num_for_capacity(c: &ResourceVector, per_instance: &ResourceVector) -> u32 {
    let mut n = 0.0f64;
    for (&need, &have) in c.0.iter().zip(per_instance.0.iter()) {
        // Same slack as `ResourceVector::covers`, so `num * cap` always covers.
        let need = need * (1.0 - COVER_EPSILON) - 1e-12;
        if need <= 0.0 {
            continue;
        }
        if have <= 0.0 {
            return u32::MAX;
        }
        n = n.max((need / have).ceil());
    }
    if n >= u32::MAX as f64 {
        u32::MAX
    } else {
        n as u32
    }
}

/// Requests per second one instance can absorb before its most loaded
/// dimension saturates.
pub fn bottleneck_throughput(capacity: &ResourceVector, demand_per_request: &ResourceVector) -> f64 {
    capacity
        .0
        .iter()
        .zip(demand_per_request.0.iter())
        .filter(|(_, &d)| d > 0.0)
        .map(|(&c, &d)| c / d)
        .fold(f64::INFINITY, f64::min)
}
