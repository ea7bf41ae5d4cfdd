use serde::{Deserialize, Serialize};

/// Seconds in a billing hour.
pub const HOUR: f64 = 3600.0;

// Elapsed times within this many hours of a whole hour count as whole.
const HOUR_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    OnDemand,
    Spot,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::OnDemand => "on_demand",
            Role::Spot => "spot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    User,
    Provider,
}

/// Charges of one instance over its lifetime. Amounts are in millionths of
/// a currency unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub instance_id: u32,
    pub instance_type: String,
    pub role: Role,
    pub hours: u32,
    /// One charge per billed hour, in order.
    pub charges: Vec<i64>,
    pub total: i64,
}

/// Hourly price in micro-units.
pub fn to_micros(price: f64) -> i64 {
    (price * 1e6).round() as i64
}

/// Renders a micro-unit amount with six decimals.
pub fn format_money(micros: i64) -> String {
    let sign = if micros < 0 { "-" } else { "" };
    let m = micros.unsigned_abs();
    format!("{sign}{}.{:06}", m / 1_000_000, m % 1_000_000)
}

/// Charges for an instance billed from `anchor` until `end`.
///
/// Every started hour is charged, except that a spot instance terminated by
/// the provider gets its final partial hour for free. On-demand hours cost
/// `on_demand_price`; a spot hour costs the market price at its start.
pub fn bill(
    role: Role,
    anchor: f64,
    end: f64,
    cause: Termination,
    on_demand_price: f64,
    spot_price_at: impl Fn(f64) -> f64,
) -> Vec<i64> {
    if !(end > anchor) {
        return Vec::new();
    }
    let hours_f = (end - anchor) / HOUR;
    let hours = match (role, cause) {
        (Role::Spot, Termination::Provider) => (hours_f + HOUR_SLACK).floor(),
        _ => (hours_f - HOUR_SLACK).ceil(),
    }
    .max(0.0) as u32;
    (0..hours)
        .map(|k| match role {
            Role::OnDemand => to_micros(on_demand_price),
            Role::Spot => to_micros(spot_price_at(anchor + k as f64 * HOUR)),
        })
        .collect()
}
