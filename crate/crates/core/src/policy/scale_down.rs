use serde::{Deserialize, Serialize};

use super::place_bid;
use super::planner::PlanContext;
use crate::capacity::TypeIdx;
use crate::provision::{planning_quota, CapacityView, Location, Mode, Provision, VmId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpotHourEnd {
    Keep,
    Shutdown,
    /// Shut the instance down and launch `count` instances of the host
    /// group's type to make up for it.
    ShutdownAndReplace {
        group_type: TypeIdx,
        count: u32,
    },
}

/// Decision for a spot instance at the end of its billing hour.
///
/// Orphans in the queue go. A native member goes when its group still
/// covers its quota with the remaining online members. A foreign member
/// always goes and is replaced by instances of the group's own type.
pub fn spot_hour_end(
    p: &Provision,
    vm: VmId,
    view: &CapacityView<'_>,
    is_online: &dyn Fn(VmId) -> bool,
) -> SpotHourEnd {
    match p.locate(vm) {
        Some(Location::Orphan) => SpotHourEnd::Shutdown,
        Some(Location::Group {
            group_type,
            native: true,
        }) => {
            let g = p.group(group_type).expect("located");
            let rest = g.capacity_where(view, |m| m.vm != vm && is_online(m.vm));
            if rest.covers(&g.quota) {
                SpotHourEnd::Shutdown
            } else {
                SpotHourEnd::Keep
            }
        }
        Some(Location::Group {
            group_type,
            native: false,
        }) => {
            let g = p.group(group_type).expect("located");
            let rest = g.capacity_where(view, |m| m.vm != vm);
            let count = view.num(&g.quota.saturating_sub(&rest), group_type);
            SpotHourEnd::ShutdownAndReplace { group_type, count }
        }
        // On-demand or unknown instances are not handled here.
        Some(Location::OnDemand) | None => SpotHourEnd::Keep,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAction {
    /// Market price rose above the group's truthful bid.
    Remove {
        group_type: TypeIdx,
        market: f64,
        truthful_bid: f64,
    },
    /// An unchosen type would carry the same quota for sufficiently less.
    Replace {
        old: TypeIdx,
        new: TypeIdx,
        old_cost: f64,
        new_cost: f64,
    },
}

/// Periodic review of the chosen spot groups.
///
/// Groups whose market price exceeds their current truthful bid are
/// removed. Each remaining group may then be replaced by an unchosen
/// eligible type whose hourly cost for the same quota is lower by more than
/// the configured hysteresis; the dearest groups are paired with the
/// cheapest candidates first.
pub fn group_removal_sweep(ctx: &PlanContext<'_>, p: &Provision) -> Vec<SweepAction> {
    if p.mode != Mode::Spot || p.groups.is_empty() {
        return Vec::new();
    }
    let view = ctx.spot_view();
    let cfg = ctx.config;
    let vm_o = cfg.on_demand_type;
    let c_o = ctx.catalog.get(vm_o).on_demand_price;
    let n_c = p.active_on_demand_count();
    let s = p.groups.len() as u32;
    let r_o = view.effective(vm_o).scale(n_c as f64);
    let baseline = view.num(&ctx.required, vm_o) as f64 * c_o;
    let budget = baseline - n_c as f64 * c_o;
    let shared_quota = (s > p.f)
        .then(|| planning_quota(&ctx.required, &r_o, s, p.f).ok())
        .flatten();

    let mut actions = Vec::new();
    let mut incumbents: Vec<(f64, TypeIdx)> = Vec::new();
    for g in &p.groups {
        let quota = shared_quota.unwrap_or(g.quota);
        let n_q = view.num(&quota, g.group_type);
        let Some(market) = ctx.market.price(g.group_type) else {
            continue;
        };
        if n_q == 0 {
            continue;
        }
        let tb = budget / (s as f64 * n_q as f64);
        if market > tb {
            actions.push(SweepAction::Remove {
                group_type: g.group_type,
                market,
                truthful_bid: tb,
            });
        } else {
            incumbents.push((n_q as f64 * market, g.group_type));
        }
    }

    let Some(quota) = shared_quota else {
        return actions;
    };
    let chosen = p.group_types();
    let mut candidates: Vec<(f64, TypeIdx)> = Vec::new();
    for &ty in ctx.spot_types() {
        if chosen.contains(&ty) {
            continue;
        }
        let n_q = view.num(&quota, ty);
        let market = ctx.market.price(ty).expect("spot types have prices");
        if n_q == 0 {
            continue;
        }
        let tb = budget / (s as f64 * n_q as f64);
        let bid = place_bid(ctx.catalog.get(ty), cfg.bidding, tb);
        if tb > market && bid > market {
            candidates.push((n_q as f64 * market, ty));
        }
    }
    let by_name = |a: &(f64, TypeIdx), b: &(f64, TypeIdx)| ctx.catalog.name(a.1).cmp(ctx.catalog.name(b.1));
    incumbents.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| by_name(a, b)));
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| by_name(a, b)));
    for (&(old_cost, old), &(new_cost, new)) in incumbents.iter().zip(&candidates) {
        if new_cost < (1.0 - cfg.replacement_hysteresis) * old_cost {
            actions.push(SweepAction::Replace {
                old,
                new,
                old_cost,
                new_cost,
            });
        } else {
            break;
        }
    }
    actions
}
