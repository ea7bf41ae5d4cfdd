//! Scaling decisions: truthful bids, the provision planner, scale-down
//! rules, spot-group removal and the benchmark policies.

mod autoscaler;
mod planner;
mod scale_down;

use serde::{Deserialize, Serialize};

pub use autoscaler::AutoScaler;
pub use planner::{
    find_provision_given_on_demand, on_demand_hour_end, scale_up, HourEndOutcome, PlanContext, PlannedGroup,
    ProvisionPlan, ScaleUpOutcome,
};
pub use scale_down::{group_removal_sweep, spot_hour_end, SpotHourEnd, SweepAction};

use crate::capacity::{num, InstanceType, ResourceVector};
use crate::error::{Error, Result};
use crate::provision::{BiddingStrategy, ScalingConfig};

/// Hourly cost of serving `required` with on-demand instances only.
pub fn on_demand_baseline_cost(required: &ResourceVector, vm_o: &InstanceType, margin: f64) -> f64 {
    num(required, vm_o, margin) as f64 * vm_o.on_demand_price
}

/// Per-instance bid at which a provision of `s` groups of `n_q` instances
/// each, plus on-demand instances costing `r_o_cost`, costs exactly `c_o`
/// per hour.
pub fn truthful_bid(c_o: f64, r_o_cost: f64, s: u32, n_q: u32, type_name: &str) -> Result<f64> {
    if n_q == 0 {
        return Err(Error::UndefinedBid(type_name.to_string()));
    }
    if s == 0 {
        return Err(Error::InvalidArgument(
            "truthful bid needs at least one spot group".into(),
        ));
    }
    Ok((c_o - r_o_cost) / (s as f64 * n_q as f64))
}

/// Price actually bid for new instances of `t`.
pub fn place_bid(t: &InstanceType, strategy: BiddingStrategy, truthful: f64) -> f64 {
    match strategy {
        BiddingStrategy::Truthful => truthful,
        BiddingStrategy::OnDemandPrice => t.on_demand_price,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Fault-tolerant spot provisioning.
    Proposed,
    /// Always on-demand.
    OnDemandOnly,
    /// One spot group, no redundancy.
    OneSpotType,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Proposed => "proposed",
            PolicyKind::OnDemandOnly => "on_demand_only",
            PolicyKind::OneSpotType => "one_spot_type",
        }
    }
}

/// Configuration a benchmark actually runs with.
pub fn benchmark_config(kind: PolicyKind, config: &ScalingConfig) -> ScalingConfig {
    let mut c = config.clone();
    if kind == PolicyKind::OneSpotType {
        c.f = 0;
        c.max_groups = 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::capacity::TypeIdx;

    fn c3_large() -> InstanceType {
        InstanceType::new("c3.large", ResourceVector::new(7.0, 3.75, 500.0, 80.0), 0.105)
    }

    #[test]
    fn baseline_cost_examples() {
        let t = c3_large();
        assert_eq!(on_demand_baseline_cost(&ResourceVector::ZERO, &t, 0.0), 0.0);
        let five = on_demand_baseline_cost(&ResourceVector::cpu(35.0), &t, 0.0);
        assert!((five - 0.525).abs() < 1e-12);
        let six = on_demand_baseline_cost(&ResourceVector::cpu(35.7), &t, 0.0);
        assert!((six - 0.63).abs() < 1e-12);
    }

    #[test]
    fn truthful_bid_examples() {
        assert!((truthful_bid(1.0, 0.0, 2, 5, "a").unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(truthful_bid(1.0, 1.0, 2, 5, "a").unwrap(), 0.0);
        assert!(matches!(truthful_bid(1.0, 0.0, 2, 0, "a"), Err(Error::UndefinedBid(_))));
    }

    #[test]
    fn bid_strategies() {
        let t = c3_large();
        assert_eq!(place_bid(&t, BiddingStrategy::Truthful, 0.031), 0.031);
        assert_eq!(place_bid(&t, BiddingStrategy::OnDemandPrice, 0.031), 0.105);
    }

    #[test]
    fn one_spot_type_is_coerced() {
        let base = ScalingConfig {
            f: 2,
            max_groups: 5,
            ..ScalingConfig::new(TypeIdx(0))
        };
        let c = benchmark_config(PolicyKind::OneSpotType, &base);
        assert_eq!((c.f, c.max_groups), (0, 1));
        assert_eq!(benchmark_config(PolicyKind::Proposed, &base), base);
    }

    proptest! {
        #[test]
        fn truthful_prices_reproduce_the_baseline(c_o in 0.1f64..50.0, frac in 0.0f64..1.0, s in 1u32..7, n_q in 1u32..200) {
            let r_o_cost = c_o * frac;
            let tb = truthful_bid(c_o, r_o_cost, s, n_q, "a").unwrap();
            let total = r_o_cost + s as f64 * n_q as f64 * tb;
            prop_assert!((total - c_o).abs() <= 1e-12 * c_o);
        }
    }
}
