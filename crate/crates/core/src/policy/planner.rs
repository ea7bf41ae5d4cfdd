use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{place_bid, truthful_bid};
use crate::capacity::{num, Catalog, ResourceVector, TypeIdx};
use crate::market::MarketState;
use crate::provision::{planning_quota, CapacityView, Mode, Provision, ScalingConfig};

/// Relative tolerance under which two plan costs count as equal.
const COST_TIE: f64 = 1e-9;

/// Everything the planner reads: the requirement, the configuration and a
/// market snapshot.
#[derive(Debug, Clone)]
pub struct PlanContext<'a> {
    pub required: ResourceVector,
    pub config: &'a ScalingConfig,
    pub catalog: &'a Catalog,
    pub market: &'a MarketState,
    pub spot_margin: f64,
    pub on_demand_margin: f64,
    spot_types: Vec<TypeIdx>,
}

impl<'a> PlanContext<'a> {
    pub fn new(
        required: ResourceVector,
        config: &'a ScalingConfig,
        catalog: &'a Catalog,
        market: &'a MarketState,
    ) -> Self {
        let spot_types = catalog.spot_types().filter(|&t| market.has_type(t)).collect();
        PlanContext {
            required,
            config,
            catalog,
            market,
            spot_margin: config.active_margin(Mode::Spot),
            on_demand_margin: config.active_margin(Mode::OnDemand),
            spot_types,
        }
    }

    /// Spot types with a market price.
    pub fn spot_types(&self) -> &[TypeIdx] {
        &self.spot_types
    }

    pub fn spot_view(&self) -> CapacityView<'a> {
        CapacityView::new(self.catalog, self.spot_margin)
    }

    pub fn on_demand_view(&self) -> CapacityView<'a> {
        CapacityView::new(self.catalog, self.on_demand_margin)
    }

    pub fn margin(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Spot => self.spot_margin,
            Mode::OnDemand => self.on_demand_margin,
        }
    }

    fn vm_o(&self) -> TypeIdx {
        self.config.on_demand_type
    }

    fn on_demand_price(&self) -> f64 {
        self.catalog.get(self.vm_o()).on_demand_price
    }

    /// On-demand instances needed to meet the on-demand floor.
    pub fn on_demand_floor(&self) -> u32 {
        num(
            &self.required.scale(self.config.on_demand_fraction),
            self.catalog.get(self.vm_o()),
            self.spot_margin,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedGroup {
    pub group_type: TypeIdx,
    pub count: u32,
    pub quota: ResourceVector,
    pub truthful_bid: f64,
    /// Bid placed for new instances under the active strategy.
    pub bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionPlan {
    pub mode: Mode,
    pub on_demand_count: u32,
    /// Sorted by type.
    pub groups: Vec<PlannedGroup>,
    /// Estimated cost per hour at current market prices.
    pub hourly_cost: f64,
}

impl ProvisionPlan {
    pub fn on_demand(count: u32, price: f64) -> Self {
        ProvisionPlan {
            mode: Mode::OnDemand,
            on_demand_count: count,
            groups: Vec::new(),
            hourly_cost: count as f64 * price,
        }
    }

    pub fn total_instances(&self) -> u64 {
        self.on_demand_count as u64 + self.groups.iter().map(|g| g.count as u64).sum::<u64>()
    }

    pub fn group_types(&self) -> Vec<TypeIdx> {
        self.groups.iter().map(|g| g.group_type).collect()
    }

    /// Cheaper first; ties go to fewer instances, then fewer groups, then
    /// the lexicographically smaller list of group type names.
    pub fn compare(&self, other: &ProvisionPlan, catalog: &Catalog) -> Ordering {
        let scale = self.hourly_cost.abs().max(other.hourly_cost.abs()).max(1.0);
        if (self.hourly_cost - other.hourly_cost).abs() > COST_TIE * scale {
            return self.hourly_cost.total_cmp(&other.hourly_cost);
        }
        self.total_instances()
            .cmp(&other.total_instances())
            .then(self.groups.len().cmp(&other.groups.len()))
            .then_with(|| names(self, catalog).cmp(&names(other, catalog)))
    }

    /// Plan describing `p` as it stands, with quotas and bids refreshed for
    /// the current requirement.
    pub fn from_provision(ctx: &PlanContext<'_>, p: &Provision) -> Self {
        let n = p.active_on_demand_count();
        let c_o = ctx.on_demand_price();
        if p.mode == Mode::OnDemand {
            return ProvisionPlan::on_demand(n, c_o);
        }
        let view = ctx.spot_view();
        let s = p.groups.len() as u32;
        let r_o = view.effective(ctx.vm_o()).scale(n as f64);
        let budget = baseline(ctx) - n as f64 * c_o;
        let mut cost = n as f64 * c_o;
        let mut groups = Vec::with_capacity(p.groups.len());
        for g in &p.groups {
            let quota = if s > p.f {
                planning_quota(&ctx.required, &r_o, s, p.f).unwrap_or(g.quota)
            } else {
                g.quota
            };
            let count = view.num(&quota, g.group_type);
            let t = ctx.catalog.get(g.group_type);
            let tb = if count > 0 {
                budget / (s as f64 * count as f64)
            } else {
                0.0
            };
            cost += count as f64 * ctx.market.price(g.group_type).unwrap_or(t.on_demand_price);
            groups.push(PlannedGroup {
                group_type: g.group_type,
                count,
                quota,
                truthful_bid: tb,
                bid: place_bid(t, ctx.config.bidding, tb),
            });
        }
        ProvisionPlan {
            mode: Mode::Spot,
            on_demand_count: n,
            groups,
            hourly_cost: cost,
        }
    }
}

fn names<'c>(p: &ProvisionPlan, catalog: &'c Catalog) -> Vec<&'c str> {
    let mut v: Vec<&str> = p.groups.iter().map(|g| catalog.name(g.group_type)).collect();
    v.sort_unstable();
    v
}

fn baseline(ctx: &PlanContext<'_>) -> f64 {
    ctx.spot_view().num(&ctx.required, ctx.vm_o()) as f64 * ctx.on_demand_price()
}

fn strictly_cheaper(a: &ProvisionPlan, b: &ProvisionPlan) -> bool {
    let scale = a.hourly_cost.abs().max(b.hourly_cost.abs()).max(1.0);
    a.hourly_cost < b.hourly_cost - COST_TIE * scale
}

fn keep_better(best: &mut Option<ProvisionPlan>, candidate: ProvisionPlan, catalog: &Catalog) {
    match best {
        Some(b) if candidate.compare(b, catalog) != Ordering::Less => {}
        _ => *best = Some(candidate),
    }
}

/// Best spot provision with exactly `n` on-demand instances that keeps every
/// group in `current_groups`, or `None` if none exists.
///
/// For each admissible group count `s` the quota and the truthful bid of
/// every spot type are computed; current groups are retained and the `k`
/// cheapest eligible new types are added, where a type is eligible when both
/// its truthful bid and the bid we would place exceed its market price.
/// `visits` counts per-type candidate evaluations.
pub fn find_provision_given_on_demand(
    ctx: &PlanContext<'_>,
    n: u32,
    current_groups: &[TypeIdx],
    visits: &mut u64,
) -> Option<ProvisionPlan> {
    let f = ctx.config.f;
    let min_groups = (current_groups.len() as u32).max(f + 1);
    let max_groups = (ctx.spot_types.len() as u32).min(ctx.config.max_groups);
    if max_groups < min_groups {
        return None;
    }
    let view = ctx.spot_view();
    let c_o = ctx.on_demand_price();
    let r_o = view.effective(ctx.vm_o()).scale(n as f64);
    if r_o.covers(&ctx.required) {
        // Nothing left for spot groups to carry.
        return None;
    }
    let c_base = baseline(ctx);
    let budget = c_base - n as f64 * c_o;

    let mut best: Option<ProvisionPlan> = None;
    let mut eligible: Vec<(f64, TypeIdx, PlannedGroup)> = Vec::new();
    for s in min_groups..=max_groups {
        let quota = planning_quota(&ctx.required, &r_o, s, f).ok()?;
        let mut groups = Vec::with_capacity(s as usize);
        let mut cost = n as f64 * c_o;
        let mut retained_ok = true;
        eligible.clear();
        for &ty in &ctx.spot_types {
            *visits += 1;
            let t = ctx.catalog.get(ty);
            let n_q = view.num(&quota, ty);
            let Ok(tb) = truthful_bid(c_base, n as f64 * c_o, s, n_q, &t.name) else {
                if current_groups.contains(&ty) {
                    retained_ok = false;
                }
                continue;
            };
            debug_assert!((tb - budget / (s as f64 * n_q as f64)).abs() <= 1e-12 * budget.abs().max(1.0));
            let market = ctx.market.price(ty).expect("spot types have prices");
            let bid = place_bid(t, ctx.config.bidding, tb);
            let g = PlannedGroup {
                group_type: ty,
                count: n_q,
                quota,
                truthful_bid: tb,
                bid,
            };
            let group_cost = n_q as f64 * market;
            if current_groups.contains(&ty) {
                cost += group_cost;
                groups.push(g);
            } else if tb > market && bid > market {
                eligible.push((group_cost, ty, g));
            }
        }
        if !retained_ok || groups.len() != current_groups.len() {
            continue;
        }
        let k = (s as usize) - current_groups.len();
        if eligible.len() < k {
            continue;
        }
        eligible.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| ctx.catalog.name(a.1).cmp(ctx.catalog.name(b.1)))
        });
        for (gc, _, g) in eligible.drain(..k) {
            cost += gc;
            groups.push(g);
        }
        groups.sort_by_key(|g| g.group_type);
        keep_better(
            &mut best,
            ProvisionPlan {
                mode: Mode::Spot,
                on_demand_count: n,
                groups,
                hourly_cost: cost,
            },
            ctx.catalog,
        );
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleUpOutcome {
    pub plan: ProvisionPlan,
    /// Candidate evaluations performed.
    pub visits: u64,
    /// True when the current provision already met the requirement.
    pub unchanged: bool,
}

/// New target provision when the current one does not meet the requirement.
///
/// On-demand counts from `max(n_c, floor)` up to what on-demand alone would
/// need are tried; the cheapest spot candidate wins, and with no candidate
/// the result is an on-demand provision. Existing groups are never dropped
/// and the on-demand count never decreases.
pub fn scale_up(ctx: &PlanContext<'_>, current: &Provision) -> ScaleUpOutcome {
    let n_c = current.active_on_demand_count();
    let vm_o = ctx.vm_o();
    let already_met = match current.mode {
        Mode::Spot => current
            .is_safe(&ctx.required, ctx.config, &ctx.spot_view())
            .unwrap_or(false),
        Mode::OnDemand => current
            .on_demand_capacity(&ctx.on_demand_view(), vm_o)
            .covers(&ctx.required),
    };
    if already_met {
        return ScaleUpOutcome {
            plan: ProvisionPlan::from_provision(ctx, current),
            visits: 0,
            unchanged: true,
        };
    }
    let current_groups = match current.mode {
        Mode::Spot => current.group_types(),
        Mode::OnDemand => Vec::new(),
    };
    let (plan, visits) = plan_scale_up(ctx, n_c, &current_groups);
    ScaleUpOutcome {
        plan,
        visits,
        unchanged: false,
    }
}

/// The search behind [`scale_up`], without the already-satisfied shortcut.
pub(crate) fn plan_scale_up(ctx: &PlanContext<'_>, n_c: u32, current_groups: &[TypeIdx]) -> (ProvisionPlan, u64) {
    let spot = ctx.spot_view();
    let vm_o = ctx.vm_o();
    let min_n = n_c.max(ctx.on_demand_floor());
    let max_n = spot.num(&ctx.required, vm_o).max(min_n);
    let mut visits = 0;
    let mut best = None;
    for n in min_n..=max_n {
        if let Some(p) = find_provision_given_on_demand(ctx, n, current_groups, &mut visits) {
            keep_better(&mut best, p, ctx.catalog);
        }
    }
    let plan = best.unwrap_or_else(|| {
        let need = ctx.on_demand_view().num(&ctx.required, vm_o);
        ProvisionPlan::on_demand(need.max(n_c), ctx.on_demand_price())
    });
    (plan, visits)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HourEndOutcome {
    /// The instance renews and nothing else changes.
    Keep,
    /// Move to `plan`; `release` says whether the instance at its hour end
    /// is given up.
    Plan { plan: ProvisionPlan, release: bool },
}

/// Decision for an on-demand instance whose billing hour is about to end.
pub fn on_demand_hour_end(ctx: &PlanContext<'_>, current: &Provision) -> HourEndOutcome {
    let n_c = current.active_on_demand_count();
    if n_c == 0 || n_c <= ctx.on_demand_floor() {
        return HourEndOutcome::Keep;
    }
    let c_o = ctx.on_demand_price();
    let need_od = ctx.on_demand_view().num(&ctx.required, ctx.vm_o());
    let on_demand_fallback = || {
        if n_c > need_od {
            HourEndOutcome::Plan {
                plan: ProvisionPlan::on_demand(n_c - 1, c_o),
                release: true,
            }
        } else {
            HourEndOutcome::Plan {
                plan: ProvisionPlan::on_demand(need_od, c_o),
                release: false,
            }
        }
    };
    let current_groups = match current.mode {
        Mode::Spot => current.group_types(),
        Mode::OnDemand => Vec::new(),
    };
    let mut visits = 0;
    let p1 = find_provision_given_on_demand(ctx, n_c, &current_groups, &mut visits);
    let p2 = find_provision_given_on_demand(ctx, n_c - 1, &current_groups, &mut visits);
    match (current.mode, p1, p2) {
        (_, None, None) | (Mode::OnDemand, _, None) => on_demand_fallback(),
        (Mode::OnDemand, _, Some(p2)) => HourEndOutcome::Plan {
            plan: p2,
            release: true,
        },
        (Mode::Spot, Some(p1), None) => HourEndOutcome::Plan {
            plan: p1,
            release: false,
        },
        (Mode::Spot, None, Some(p2)) => HourEndOutcome::Plan {
            plan: p2,
            release: true,
        },
        (Mode::Spot, Some(p1), Some(p2)) => {
            if strictly_cheaper(&p2, &p1) {
                HourEndOutcome::Plan {
                    plan: p2,
                    release: true,
                }
            } else {
                HourEndOutcome::Plan {
                    plan: p1,
                    release: false,
                }
            }
        }
    }
}
