//! Seeded synthetic workloads and spot price histories.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{PriceTraces, WorkloadTrace};
use crate::capacity::Catalog;
use crate::error::{Error, Result};
use crate::market::PriceTrace;

/// Seconds between synthetic price samples.
pub const PRICE_STEP: f64 = 300.0;

/// Request counts following a daily sine with multiplicative noise.
///
/// The rate peaks at `mean_rate * (1 + amplitude)` in the early afternoon
/// and bottoms out twelve hours later.
pub fn diurnal_workload(
    mean_rate: f64,
    amplitude: f64,
    interval: f64,
    duration: f64,
    seed: u64,
) -> Result<WorkloadTrace> {
    if !(mean_rate > 0.0 && (0.0..1.0).contains(&amplitude) && interval > 0.0 && duration > 0.0) {
        return Err(Error::InvalidArgument(
            "diurnal workload parameters out of range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("valid");
    let n = (duration / interval).ceil() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * interval;
            let phase = TAU * (t / 86_400.0 - 14.0 / 24.0 + 0.25);
            let rate = mean_rate * (1.0 + amplitude * phase.sin()) * (1.0 + noise.sample(&mut rng));
            (t, (rate.max(0.0) * interval).round() as u64)
        })
        .collect();
    WorkloadTrace::new(interval, samples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceRegime {
    /// Small fluctuations around a per-type level.
    Stable,
    /// About half the types are volatile and now and then spike above
    /// their on-demand price.
    Mixed,
    /// Stable, except that one type jumps to ten times its on-demand price
    /// during `[at, at + length)`.
    Spike {
        instance_type: String,
        at: f64,
        length: f64,
    },
}

struct Walk {
    level: f64,
    sigma: f64,
    change_prob: f64,
}

fn round_price(p: f64) -> f64 {
    ((p * 1e4).round() / 1e4).max(1e-4)
}

/// Price histories for every spot type of `catalog`, one sample every
/// [`PRICE_STEP`] seconds from time zero through `duration`.
pub fn synthetic_prices(catalog: &Catalog, regime: &PriceRegime, duration: f64, seed: u64) -> Result<PriceTraces> {
    let spike = match regime {
        PriceRegime::Spike {
            instance_type,
            at,
            length,
        } => Some((catalog.lookup(instance_type)?, *at, *at + *length)),
        _ => None,
    };
    let steps = (duration / PRICE_STEP).ceil() as usize + 1;
    let mut out = Vec::with_capacity(catalog.len());
    for (ty, t) in catalog.iter() {
        if !t.spot_eligible {
            out.push(None);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(ty.0 as u64 + 1)));
        let od = t.on_demand_price;
        let volatile = matches!(regime, PriceRegime::Mixed) && rng.random_bool(0.5);
        let walk = Walk {
            level: od * rng.random_range(0.10..0.22),
            sigma: if volatile { 0.20 } else { 0.06 },
            change_prob: if volatile { 0.30 } else { 0.10 },
        };
        let spikes = if volatile {
            spike_windows(&mut rng, duration, od)
        } else {
            Vec::new()
        };
        let noise = Normal::new(0.0, walk.sigma).expect("valid");
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(steps);
        let mut base = walk.level;
        for i in 0..steps {
            let time = i as f64 * PRICE_STEP;
            if i > 0 && rng.random_bool(walk.change_prob) {
                base = (walk.level * noise.sample(&mut rng).exp()).clamp(0.6 * walk.level, 1.6 * walk.level);
            }
            let mut price = base;
            if let Some(&(_, _, p)) = spikes.iter().find(|(a, b, _)| (*a..*b).contains(&time)) {
                price = p;
            }
            if let Some((sty, a, b)) = spike {
                if sty == ty && (a..b).contains(&time) {
                    price = 10.0 * od;
                }
            }
            let price = round_price(price);
            if samples.last().is_none_or(|&(_, p)| p != price) {
                samples.push((time, price));
            }
        }
        if let Some((sty, a, b)) = spike {
            if sty == ty {
                insert_step(&mut samples, a, round_price(10.0 * od));
                let after = samples.iter().rev().find(|s| s.0 < a).map_or(walk.level, |s| s.1);
                insert_step(&mut samples, b, after);
            }
        }
        out.push(Some(PriceTrace::new(t.name.clone(), samples)?));
    }
    Ok(out)
}

// Forces a price change at exactly `at`, dropping samples it overrides.
fn insert_step(samples: &mut Vec<(f64, f64)>, at: f64, price: f64) {
    let pos = samples.partition_point(|s| s.0 < at);
    if samples.get(pos).is_some_and(|s| s.0 == at) {
        samples[pos].1 = price;
    } else {
        samples.insert(pos, (at, price));
    }
}

fn spike_windows(rng: &mut ChaCha8Rng, duration: f64, od: f64) -> Vec<(f64, f64, f64)> {
    // roughly one spike every 16 hours
    let expected = duration / (16.0 * 3600.0);
    let count = if expected > 0.0 {
        Poisson::new(expected).expect("positive").sample(rng) as usize
    } else {
        0
    };
    let mut out: Vec<(f64, f64, f64)> = (0..count)
        .map(|_| {
            let start = (rng.random_range(0.0..duration) / PRICE_STEP).floor() * PRICE_STEP;
            let len = PRICE_STEP * rng.random_range(2..=12) as f64;
            (start, start + len, od * rng.random_range(1.2..5.0))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{InstanceType, ResourceVector};

    fn catalog() -> Catalog {
        let r = |ecu: f64| ResourceVector::new(ecu, 4.0, 500.0, 100.0);
        Catalog::new(vec![
            InstanceType::new("a", r(1.0), 0.05),
            InstanceType::new("b", r(2.0), 0.09),
            InstanceType::new("c", r(7.0), 0.105),
        ])
        .unwrap()
    }

    #[test]
    fn workload_is_deterministic_and_near_the_mean() {
        let a = diurnal_workload(150.0, 0.4, 10.0, 86_400.0, 7).unwrap();
        let b = diurnal_workload(150.0, 0.4, 10.0, 86_400.0, 7).unwrap();
        assert_eq!(a, b);
        let mean = a.total_requests() as f64 / 86_400.0;
        assert!((mean - 150.0).abs() < 3.0, "{mean}");
    }

    #[test]
    fn spike_is_exact() {
        let cat = catalog();
        let regime = PriceRegime::Spike {
            instance_type: "c".into(),
            at: 40_000.0,
            length: 3_600.0,
        };
        let tr = synthetic_prices(&cat, &regime, 86_400.0, 3).unwrap();
        let c = tr[2].as_ref().unwrap();
        assert!(c.price_at(39_999.0).unwrap() < 0.105);
        assert_eq!(c.price_at(40_000.0).unwrap(), 1.05);
        assert!(c.price_at(43_600.0).unwrap() < 0.105);
    }

    #[test]
    fn prices_start_at_zero_and_stay_positive() {
        let cat = catalog();
        for regime in [PriceRegime::Stable, PriceRegime::Mixed] {
            let tr = synthetic_prices(&cat, &regime, 7.0 * 86_400.0, 11).unwrap();
            for t in tr.iter().flatten() {
                assert_eq!(t.first_time(), 0.0);
                assert!(t.samples.iter().all(|s| s.1 > 0.0));
            }
        }
    }
}
