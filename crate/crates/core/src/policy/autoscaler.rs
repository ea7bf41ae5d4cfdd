use super::planner::{on_demand_hour_end, scale_up, HourEndOutcome, PlanContext, ProvisionPlan};
use super::scale_down::{group_removal_sweep, spot_hour_end, SpotHourEnd, SweepAction};
use super::{benchmark_config, place_bid, PolicyKind};
use crate::capacity::{effective_capacity, num, Catalog, ResourceVector, TypeIdx};
use crate::error::{Error, Result};
use crate::market::MarketState;
use crate::provision::{
    CapacityView, Location, Member, Mode, OnDemandMember, Provision, ScalingConfig, SpotGroup, VmId,
};
use crate::sim::{Cluster, ControlEvent, Controller, VmState};
use crate::trace_io::{DecisionRecord, GroupSummary, PlanSummary};

/// Replanning attempts after a rejected spot bid.
const MAX_REPLANS: usize = 4;

#[derive(Debug, Default)]
struct Step {
    launched: Vec<u32>,
    shut_down: Vec<u32>,
    target_cost: Option<f64>,
}

/// Drives a cluster with one of the scaling policies.
///
/// The fault-tolerant policy and the one-spot-type benchmark share the same
/// machinery; the on-demand benchmark only ever holds on-demand instances.
#[derive(Debug, Clone)]
pub struct AutoScaler {
    kind: PolicyKind,
    config: ScalingConfig,
    catalog: Catalog,
    provision: Provision,
}

impl AutoScaler {
    pub fn new(kind: PolicyKind, config: &ScalingConfig, catalog: &Catalog) -> Result<Self> {
        let config = benchmark_config(kind, config);
        config.validate(catalog)?;
        let mode = match kind {
            PolicyKind::OnDemandOnly => Mode::OnDemand,
            _ => Mode::Spot,
        };
        Ok(AutoScaler {
            kind,
            provision: Provision::new(mode, config.f),
            config,
            catalog: catalog.clone(),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    /// Configuration in force, after benchmark adjustments.
    pub fn config(&self) -> &ScalingConfig {
        &self.config
    }

    pub fn provision(&self) -> &Provision {
        &self.provision
    }

    fn vm_o(&self) -> TypeIdx {
        self.config.on_demand_type
    }

    fn spot_view(&self) -> CapacityView<'_> {
        CapacityView::new(&self.catalog, self.config.active_margin(Mode::Spot))
    }

    fn on_demand_need(&self, required: &ResourceVector) -> u32 {
        num(required, self.catalog.get(self.vm_o()), self.config.margin.default)
    }

    fn summary(&self, market: &MarketState) -> PlanSummary {
        let p = &self.provision;
        let spot_price = |m: &Member| market.price(m.instance_type).unwrap_or(0.0);
        let hourly_cost = p.on_demand.len() as f64 * self.catalog.get(self.vm_o()).on_demand_price
            + p.groups.iter().flat_map(|g| &g.members).map(spot_price).sum::<f64>()
            + p.orphans.iter().map(spot_price).sum::<f64>();
        PlanSummary {
            mode: p.mode,
            on_demand: p.active_on_demand_count(),
            groups: p
                .groups
                .iter()
                .map(|g| GroupSummary {
                    instance_type: self.catalog.name(g.group_type).to_string(),
                    members: g.members.len() as u32,
                    truthful_bid: g.truthful_bid,
                })
                .collect(),
            orphans: p.orphans.len() as u32,
            hourly_cost,
        }
    }

    /// Re-derives quotas and truthful bids of existing groups from the
    /// current requirement and prices.
    fn refresh_quotas(&mut self, required: ResourceVector, market: &MarketState) {
        if self.provision.mode != Mode::Spot || self.provision.groups.is_empty() {
            return;
        }
        let ctx = PlanContext::new(required, &self.config, &self.catalog, market);
        let plan = ProvisionPlan::from_provision(&ctx, &self.provision);
        for pg in plan.groups {
            if let Some(g) = self.provision.group_mut(pg.group_type) {
                g.quota = pg.quota;
                g.truthful_bid = Some(pg.truthful_bid);
            }
        }
    }

    /// Scales up until the provision meets the requirement, replanning
    /// when a spot bid is turned down.
    fn scale_up(&mut self, cl: &mut dyn Cluster, step: &mut Step) -> Result<()> {
        for _ in 0..MAX_REPLANS {
            let required = cl.required();
            let market = cl.market().clone();
            let plan = if self.kind == PolicyKind::OnDemandOnly {
                let need = self.on_demand_need(&required);
                if self.provision.active_on_demand_count() >= need {
                    return Ok(());
                }
                ProvisionPlan::on_demand(need, self.catalog.get(self.vm_o()).on_demand_price)
            } else {
                self.refresh_quotas(required, &market);
                let ctx = PlanContext::new(required, &self.config, &self.catalog, &market);
                let out = scale_up(&ctx, &self.provision);
                if out.unchanged {
                    return Ok(());
                }
                out.plan
            };
            step.target_cost = Some(plan.hourly_cost);
            match self.actuate(&plan, cl, step)? {
                None => return Ok(()),
                Some(rejected) => {
                    self.provision.evict_group(rejected);
                }
            }
        }
        Ok(())
    }

    /// Moves the provision towards `plan`. Returns the group type whose bid
    /// the market turned down, if any.
    fn actuate(&mut self, plan: &ProvisionPlan, cl: &mut dyn Cluster, step: &mut Step) -> Result<Option<TypeIdx>> {
        match (plan.mode, self.provision.mode) {
            (Mode::OnDemand, Mode::Spot) => self.provision.switch_to_on_demand(),
            (Mode::Spot, Mode::OnDemand) => self.provision.switch_to_spot(),
            _ => {}
        }
        let mut n = self.provision.active_on_demand_count();
        for m in self.provision.on_demand.iter_mut().filter(|m| m.retiring) {
            if n >= plan.on_demand_count {
                break;
            }
            m.retiring = false;
            n += 1;
        }
        while n < plan.on_demand_count {
            let vm = cl.launch_on_demand(self.vm_o());
            self.provision.on_demand.push(OnDemandMember { vm, retiring: false });
            step.launched.push(vm.0);
            n += 1;
        }
        if plan.mode == Mode::OnDemand {
            return Ok(None);
        }

        for pg in &plan.groups {
            match self.provision.group_mut(pg.group_type) {
                Some(g) => {
                    g.quota = pg.quota;
                    g.truthful_bid = Some(pg.truthful_bid);
                }
                None => self
                    .provision
                    .add_group(SpotGroup::new(pg.group_type, pg.quota, Some(pg.truthful_bid)))?,
            }
        }
        self.place_orphans();

        for pg in &plan.groups {
            let count = {
                let view = self.spot_view();
                let g = self.provision.group(pg.group_type).expect("just added");
                view.num(&g.quota.saturating_sub(&g.capacity(&view)), g.group_type)
            };
            for _ in 0..count {
                match cl.launch_spot(pg.group_type, pg.bid) {
                    Ok(vm) => {
                        step.launched.push(vm.0);
                        self.provision
                            .group_mut(pg.group_type)
                            .expect("just added")
                            .members
                            .push(Member {
                                vm,
                                instance_type: pg.group_type,
                                bid: Some(pg.bid),
                            });
                    }
                    Err(Error::BidRejected { .. }) => return Ok(Some(pg.group_type)),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(None)
    }

    /// Puts idle spot instances to work before anything new is launched.
    ///
    /// Instances whose type has an unsatisfied group join it as native
    /// members, whether they are queued or hosted by another group. Queued
    /// orphans of a type without a group join the first unsatisfied group.
    fn place_orphans(&mut self) {
        let margin = self.config.active_margin(Mode::Spot);
        let view = CapacityView::new(&self.catalog, margin);
        let p = &mut self.provision;
        for ty in p.group_types() {
            let candidates: Vec<VmId> = p
                .orphans
                .iter()
                .chain(p.groups.iter().filter(|g| g.group_type != ty).flat_map(|g| &g.members))
                .filter(|m| m.instance_type == ty)
                .map(|m| m.vm)
                .collect();
            for vm in candidates {
                if p.adopt_orphan(vm, ty, &view).is_err() {
                    break;
                }
            }
        }
        let chosen = p.group_types();
        let queued: Vec<VmId> = p
            .orphans
            .iter()
            .filter(|m| !chosen.contains(&m.instance_type))
            .map(|m| m.vm)
            .collect();
        for vm in queued {
            let Some(target) = p.groups.iter().find(|g| !g.is_satisfied(&view)).map(|g| g.group_type) else {
                break;
            };
            p.adopt_orphan(vm, target, &view)
                .expect("unsatisfied group accepts orphans");
        }
    }

    /// Shuts `vm` down if the other online instances can carry the load.
    fn release(&mut self, vm: VmId, cl: &mut dyn Cluster, step: &mut Step) -> bool {
        let margin = self.config.active_margin(self.provision.mode);
        let p = &self.provision;
        let held = p
            .on_demand
            .iter()
            .map(|m| m.vm)
            .chain(p.groups.iter().flat_map(|g| g.members.iter().map(|m| m.vm)))
            .chain(p.orphans.iter().map(|m| m.vm));
        let remaining: ResourceVector = held
            .filter(|&id| id != vm)
            .filter_map(|id| cl.vm(id))
            .filter(|info| info.state == VmState::Online)
            .map(|info| effective_capacity(self.catalog.get(info.instance_type), margin))
            .sum();
        if !remaining.covers(&cl.required()) {
            return false;
        }
        self.provision.remove_vm(vm);
        cl.shutdown(vm);
        step.shut_down.push(vm.0);
        true
    }

    fn release_or_retire(&mut self, vm: VmId, cl: &mut dyn Cluster, step: &mut Step) {
        if !self.release(vm, cl, step) {
            if let Some(m) = self.provision.on_demand.iter_mut().find(|m| m.vm == vm) {
                m.retiring = true;
            }
        }
    }

    fn on_demand_boundary(&mut self, vm: VmId, cl: &mut dyn Cluster, step: &mut Step) -> Result<()> {
        let retiring = self.provision.on_demand.iter().any(|m| m.vm == vm && m.retiring);
        if retiring {
            self.release(vm, cl, step);
            return Ok(());
        }
        let required = cl.required();
        if self.kind == PolicyKind::OnDemandOnly {
            if self.provision.active_on_demand_count() > self.on_demand_need(&required) {
                self.release_or_retire(vm, cl, step);
            }
            return Ok(());
        }
        let market = cl.market().clone();
        self.refresh_quotas(required, &market);
        let outcome = {
            let ctx = PlanContext::new(required, &self.config, &self.catalog, &market);
            on_demand_hour_end(&ctx, &self.provision)
        };
        if let HourEndOutcome::Plan { plan, release } = outcome {
            step.target_cost = Some(plan.hourly_cost);
            if let Some(rejected) = self.actuate(&plan, cl, step)? {
                self.provision.evict_group(rejected);
                self.scale_up(cl, step)?;
            }
            if release {
                self.release_or_retire(vm, cl, step);
            }
        }
        Ok(())
    }

    fn spot_boundary(&mut self, vm: VmId, cl: &mut dyn Cluster, step: &mut Step) -> Result<()> {
        let required = cl.required();
        let market = cl.market().clone();
        self.refresh_quotas(required, &market);
        let decision = {
            let view = self.spot_view();
            let online = |id: VmId| cl.vm(id).is_some_and(|v| v.state == VmState::Online);
            spot_hour_end(&self.provision, vm, &view, &online)
        };
        match decision {
            SpotHourEnd::Keep => {}
            SpotHourEnd::Shutdown => {
                self.release(vm, cl, step);
            }
            SpotHourEnd::ShutdownAndReplace { group_type, count } => {
                if !self.release(vm, cl, step) {
                    return Ok(());
                }
                let g = self.provision.group(group_type).expect("host group");
                let bid = place_bid(
                    self.catalog.get(group_type),
                    self.config.bidding,
                    g.truthful_bid.unwrap_or(0.0),
                );
                for _ in 0..count {
                    match cl.launch_spot(group_type, bid) {
                        Ok(id) => {
                            step.launched.push(id.0);
                            self.provision
                                .group_mut(group_type)
                                .expect("host group")
                                .members
                                .push(Member {
                                    vm: id,
                                    instance_type: group_type,
                                    bid: Some(bid),
                                });
                        }
                        Err(Error::BidRejected { .. }) => {
                            self.provision.evict_group(group_type);
                            return self.scale_up(cl, step);
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        Ok(())
    }

    fn provider_termination(&mut self, killed: &[VmId], cl: &mut dyn Cluster, step: &mut Step) -> Result<()> {
        let mut types: Vec<TypeIdx> = killed
            .iter()
            .filter_map(|&id| cl.vm(id))
            .map(|v| v.instance_type)
            .collect();
        types.sort();
        types.dedup();
        for &vm in killed {
            self.provision.remove_vm(vm);
        }
        for ty in types {
            self.provision.evict_group(ty);
        }
        self.scale_up(cl, step)
    }

    fn sweep(&mut self, cl: &mut dyn Cluster, step: &mut Step) -> Result<()> {
        if self.provision.mode != Mode::Spot {
            return Ok(());
        }
        let required = cl.required();
        let market = cl.market().clone();
        self.refresh_quotas(required, &market);
        let actions = {
            let ctx = PlanContext::new(required, &self.config, &self.catalog, &market);
            group_removal_sweep(&ctx, &self.provision)
        };
        for a in actions {
            match a {
                SweepAction::Remove { group_type, .. } => {
                    self.provision.evict_group(group_type);
                }
                SweepAction::Replace { old, new, .. } => {
                    if let Some(g) = self.provision.evict_group(old) {
                        self.provision.add_group(SpotGroup::new(new, g.quota, None))?;
                    }
                }
            }
        }
        self.scale_up(cl, step)
    }
}

fn trigger_name(event: &ControlEvent<'_>) -> &'static str {
    match event {
        ControlEvent::Start { .. } => "start",
        ControlEvent::UtilizationSample => "utilization_sample",
        ControlEvent::BillingBoundary(_) => "billing_boundary",
        ControlEvent::ProviderTermination(_) => "provider_termination",
        ControlEvent::RemovalSweep => "removal_sweep",
        ControlEvent::VmOnline(_) => "vm_online",
        ControlEvent::Wakeup(_) => "wakeup",
    }
}

fn structure(s: &PlanSummary) -> (Mode, u32, u32, Vec<(&str, u32)>) {
    (
        s.mode,
        s.on_demand,
        s.orphans,
        s.groups.iter().map(|g| (g.instance_type.as_str(), g.members)).collect(),
    )
}

impl Controller for AutoScaler {
    fn handle(&mut self, event: ControlEvent<'_>, cl: &mut dyn Cluster) -> Result<()> {
        let before = self.summary(cl.market());
        let mut step = Step::default();
        match event {
            ControlEvent::Start { initial } => {
                for &vm in initial {
                    let ty = cl.vm(vm).map(|v| v.instance_type);
                    if ty != Some(self.vm_o()) {
                        return Err(Error::InvalidConfig(format!(
                            "initial instance {vm} is not of the on-demand type `{}`",
                            self.catalog.name(self.vm_o())
                        )));
                    }
                    self.provision.on_demand.push(OnDemandMember { vm, retiring: false });
                }
                self.scale_up(cl, &mut step)?;
            }
            ControlEvent::UtilizationSample => self.scale_up(cl, &mut step)?,
            ControlEvent::BillingBoundary(vm) => match self.provision.locate(vm) {
                Some(Location::OnDemand) => self.on_demand_boundary(vm, cl, &mut step)?,
                Some(_) => self.spot_boundary(vm, cl, &mut step)?,
                None => {}
            },
            ControlEvent::ProviderTermination(killed) => self.provider_termination(killed, cl, &mut step)?,
            ControlEvent::RemovalSweep => self.sweep(cl, &mut step)?,
            ControlEvent::VmOnline(_) | ControlEvent::Wakeup(_) => {}
        }
        let after = self.summary(cl.market());
        if !step.launched.is_empty() || !step.shut_down.is_empty() || structure(&before) != structure(&after) {
            cl.record(DecisionRecord {
                time: cl.now(),
                trigger: trigger_name(&event).to_string(),
                before,
                after,
                target_cost: step.target_cost,
                launched: step.launched,
                shut_down: step.shut_down,
            });
        }
        Ok(())
    }

    fn removal_interval(&self) -> Option<f64> {
        (self.kind != PolicyKind::OnDemandOnly).then_some(self.config.removal_interval)
    }

    fn check(&self, live: &[VmId]) -> std::result::Result<(), String> {
        self.provision.check_partition(live)
    }
}
