//! Spot price replay, bid matching and provider terminations.
//!
//! Prices follow a right-continuous step function over the recorded
//! samples. Bids never move the market.

use serde::{Deserialize, Serialize};

use crate::capacity::{Catalog, TypeIdx};
use crate::error::{Error, Result};

/// Price history of one spot type: `(timestamp seconds, price per hour)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTrace {
    pub instance_type: String,
    pub samples: Vec<(f64, f64)>,
}

impl PriceTrace {
    pub fn new(instance_type: impl Into<String>, samples: Vec<(f64, f64)>) -> Result<Self> {
        let instance_type = instance_type.into();
        if samples.is_empty() {
            return Err(Error::Trace(format!("price trace for `{instance_type}` is empty")));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Trace(format!(
                    "price trace for `{instance_type}` is not strictly increasing at t={}",
                    w[1].0
                )));
            }
        }
        if let Some(&(t, p)) = samples.iter().find(|(_, p)| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Trace(format!(
                "price trace for `{instance_type}` has non-positive price {p} at t={t}"
            )));
        }
        Ok(PriceTrace { instance_type, samples })
    }

    pub fn first_time(&self) -> f64 {
        self.samples[0].0
    }

    /// Price of the latest sample at or before `t`.
    pub fn price_at(&self, t: f64) -> Result<f64> {
        let idx = self.samples.partition_point(|&(ts, _)| ts <= t);
        if idx == 0 {
            return Err(Error::OutOfRange {
                instance_type: self.instance_type.clone(),
                time: t,
                first: self.first_time(),
            });
        }
        Ok(self.samples[idx - 1].1)
    }

    /// Index of the first sample strictly after `t`, if any.
    pub fn next_change_after(&self, t: f64) -> Option<usize> {
        let idx = self.samples.partition_point(|&(ts, _)| ts <= t);
        (idx < self.samples.len()).then_some(idx)
    }
}

/// Free-function form of [`PriceTrace::price_at`].
pub fn price_at(trace: &PriceTrace, t: f64) -> Result<f64> {
    trace.price_at(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub instance_type: TypeIdx,
    pub count: u32,
    pub max_price: f64,
}

/// Current price of every spot type. Non-spot types have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    prices: Vec<Option<f64>>,
    pub clock: f64,
}

impl MarketState {
    pub fn new(type_count: usize) -> Self {
        MarketState {
            prices: vec![None; type_count],
            clock: 0.0,
        }
    }

    /// Market snapshot at time `t` from per-type traces (indexed like the catalog).
    pub fn at(traces: &[Option<PriceTrace>], t: f64) -> Result<Self> {
        let mut m = MarketState::new(traces.len());
        m.clock = t;
        for (i, tr) in traces.iter().enumerate() {
            if let Some(tr) = tr {
                m.prices[i] = Some(tr.price_at(t)?);
            }
        }
        Ok(m)
    }

    pub fn from_prices(prices: Vec<Option<f64>>) -> Self {
        MarketState { prices, clock: 0.0 }
    }

    pub fn set_price(&mut self, ty: TypeIdx, price: f64) {
        self.prices[ty.index()] = Some(price);
    }

    pub fn price(&self, ty: TypeIdx) -> Option<f64> {
        self.prices.get(ty.index()).copied().flatten()
    }

    pub fn price_of(&self, ty: TypeIdx, catalog: &Catalog) -> Result<f64> {
        self.price(ty)
            .ok_or_else(|| Error::UnknownType(catalog.name(ty).to_string()))
    }

    pub fn has_type(&self, ty: TypeIdx) -> bool {
        self.price(ty).is_some()
    }
}

/// A bid is fulfilled only when it strictly exceeds the market price.
pub fn bid_accepted(bid: &Bid, market: &MarketState, catalog: &Catalog) -> Result<bool> {
    let price = market.price_of(bid.instance_type, catalog)?;
    Ok(bid.max_price > price)
}

/// A live spot instance as seen by the market: its type and its own bid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotHolding<I> {
    pub id: I,
    pub instance_type: TypeIdx,
    pub bid: f64,
}

/// Holdings whose bid is now strictly below the market price of their
/// type. A bid equal to the market price survives.
pub fn terminations_due<I: Copy>(market: &MarketState, live: &[SpotHolding<I>]) -> Vec<I> {
    live.iter()
        .filter(|h| market.price(h.instance_type).is_some_and(|p| h.bid < p))
        .map(|h| h.id)
        .collect()
}
