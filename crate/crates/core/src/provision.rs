//! Provision state: on-demand pool, spot groups with quotas, orphans.
//!
//! A provision in spot mode is *safe* when the on-demand pool meets its
//! floor and every spot group's capacity covers the quota
//! `Q = (R - r_o) / (s - f)`. Losing any `f` whole groups then still leaves
//! `R` covered.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::capacity::{dynamic_margin, effective_capacity, num, Catalog, MarginPolicy, ResourceVector, TypeIdx};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VmId(pub u32);

impl fmt::Display for VmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vm-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Spot,
    OnDemand,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spot => "spot",
            Mode::OnDemand => "on-demand",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiddingStrategy {
    /// Bid the truthful price computed for the group.
    Truthful,
    /// Bid the on-demand price of the spot type.
    #[serde(alias = "on_demand")]
    OnDemandPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Fault-tolerant level.
    pub f: u32,
    /// Minimum share of required capacity served by on-demand instances.
    pub on_demand_fraction: f64,
    /// Maximum number of spot groups.
    pub max_groups: u32,
    pub bidding: BiddingStrategy,
    pub margin: MarginPolicy,
    /// Seconds between spot-group removal sweeps.
    pub removal_interval: f64,
    pub on_demand_type: TypeIdx,
    /// Relative price-per-capacity advantage a candidate needs before it
    /// replaces a chosen group.
    pub replacement_hysteresis: f64,
}

impl ScalingConfig {
    pub fn new(on_demand_type: TypeIdx) -> Self {
        ScalingConfig {
            f: 1,
            on_demand_fraction: 0.0,
            max_groups: 4,
            bidding: BiddingStrategy::Truthful,
            margin: MarginPolicy::default(),
            removal_interval: 1800.0,
            on_demand_type,
            replacement_hysteresis: 0.05,
        }
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        self.margin.validate()?;
        if self.f > self.margin.f_max {
            return Err(Error::InvalidConfig(format!(
                "fault-tolerant level {} exceeds the maximum {}",
                self.f, self.margin.f_max
            )));
        }
        if self.f + 1 > self.max_groups {
            return Err(Error::InvalidConfig(format!(
                "f + 1 = {} exceeds the spot group limit {}; no safe provision exists",
                self.f + 1,
                self.max_groups
            )));
        }
        if !(0.0..=1.0).contains(&self.on_demand_fraction) {
            return Err(Error::InvalidConfig("on-demand fraction must lie in [0, 1]".into()));
        }
        if !(self.removal_interval > 0.0) {
            return Err(Error::InvalidConfig("removal interval must be positive".into()));
        }
        if !(self.replacement_hysteresis >= 0.0 && self.replacement_hysteresis < 1.0) {
            return Err(Error::InvalidConfig("replacement hysteresis must lie in [0, 1)".into()));
        }
        if self.on_demand_type.index() >= catalog.len() {
            return Err(Error::InvalidConfig("on-demand type not in catalog".into()));
        }
        Ok(())
    }

    /// Margin applied to every instance. Margin reduction only applies to
    /// over-provisioned spot mode (`f >= 1`); otherwise the default margin.
    pub fn active_margin(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Spot if self.f >= 1 => dynamic_margin(&self.margin, self.f).unwrap_or(self.margin.default),
            _ => self.margin.default,
        }
    }
}

/// Catalog plus the margin currently in force.
#[derive(Debug, Clone, Copy)]
pub struct CapacityView<'a> {
    pub catalog: &'a Catalog,
    pub margin: f64,
}

impl<'a> CapacityView<'a> {
    pub fn new(catalog: &'a Catalog, margin: f64) -> Self {
        CapacityView { catalog, margin }
    }

    pub fn effective(&self, ty: TypeIdx) -> ResourceVector {
        effective_capacity(self.catalog.get(ty), self.margin)
    }

    pub fn num(&self, c: &ResourceVector, ty: TypeIdx) -> u32 {
        num(c, self.catalog.get(ty), self.margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub vm: VmId,
    pub instance_type: TypeIdx,
    /// Spot bid, absent for on-demand instances.
    pub bid: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnDemandMember {
    pub vm: VmId,
    /// Scheduled for release once the rest of the cluster can carry the
    /// load; no longer counted towards the provision.
    pub retiring: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotGroup {
    pub group_type: TypeIdx,
    pub quota: ResourceVector,
    pub members: Vec<Member>,
    pub truthful_bid: Option<f64>,
}

impl SpotGroup {
    pub fn new(group_type: TypeIdx, quota: ResourceVector, truthful_bid: Option<f64>) -> Self {
        SpotGroup {
            group_type,
            quota,
            members: Vec::new(),
            truthful_bid,
        }
    }

    pub fn capacity(&self, view: &CapacityView<'_>) -> ResourceVector {
        self.members.iter().map(|m| view.effective(m.instance_type)).sum()
    }

    /// Capacity counting only the members accepted by `filter`.
    pub fn capacity_where(&self, view: &CapacityView<'_>, mut filter: impl FnMut(&Member) -> bool) -> ResourceVector {
        self.members
            .iter()
            .filter(|m| filter(m))
            .map(|m| view.effective(m.instance_type))
            .sum()
    }

    pub fn is_satisfied(&self, view: &CapacityView<'_>) -> bool {
        self.capacity(view).covers(&self.quota)
    }

    pub fn is_native(&self, m: &Member) -> bool {
        m.instance_type == self.group_type
    }
}

/// Where a VM sits inside a provision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    OnDemand,
    Group { group_type: TypeIdx, native: bool },
    Orphan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provision {
    pub mode: Mode,
    pub f: u32,
    pub on_demand: Vec<OnDemandMember>,
    /// Sorted by group type.
    pub groups: Vec<SpotGroup>,
    pub orphans: Vec<Member>,
}

/// Spot quota `(R - r_o) / (s - f)`.
pub fn quota(required: &ResourceVector, on_demand: &ResourceVector, s: u32, f: u32) -> Result<ResourceVector> {
    if s <= f {
        return Err(Error::InvalidPlan(format!(
            "{s} spot groups cannot tolerate {f} failures"
        )));
    }
    if !required.covers(on_demand) {
        return Err(Error::InvalidPlan(format!(
            "on-demand capacity {on_demand} exceeds requirement {required}"
        )));
    }
    Ok(required.saturating_sub(on_demand).scale(1.0 / (s - f) as f64))
}

/// Quota used during planning: on-demand capacity beyond the requirement in
/// some dimension simply leaves nothing for spot groups there.
pub fn planning_quota(required: &ResourceVector, on_demand: &ResourceVector, s: u32, f: u32) -> Result<ResourceVector> {
    quota(&required.max(on_demand), on_demand, s, f)
}

impl Provision {
    pub fn new(mode: Mode, f: u32) -> Self {
        Provision {
            mode,
            f,
            on_demand: Vec::new(),
            groups: Vec::new(),
            orphans: Vec::new(),
        }
    }

    /// On-demand instances that count towards the provision.
    pub fn active_on_demand(&self) -> impl Iterator<Item = VmId> + '_ {
        self.on_demand.iter().filter(|m| !m.retiring).map(|m| m.vm)
    }

    pub fn active_on_demand_count(&self) -> u32 {
        self.on_demand.iter().filter(|m| !m.retiring).count() as u32
    }

    pub fn on_demand_capacity(&self, view: &CapacityView<'_>, vm_o: TypeIdx) -> ResourceVector {
        view.effective(vm_o).scale(self.active_on_demand_count() as f64)
    }

    pub fn group(&self, ty: TypeIdx) -> Option<&SpotGroup> {
        self.groups.iter().find(|g| g.group_type == ty)
    }

    pub fn group_mut(&mut self, ty: TypeIdx) -> Option<&mut SpotGroup> {
        self.groups.iter_mut().find(|g| g.group_type == ty)
    }

    pub fn group_types(&self) -> Vec<TypeIdx> {
        self.groups.iter().map(|g| g.group_type).collect()
    }

    pub fn add_group(&mut self, group: SpotGroup) -> Result<()> {
        if self.mode != Mode::Spot {
            return Err(Error::Mode(Mode::OnDemand.as_str()));
        }
        if self.group(group.group_type).is_some() {
            return Err(Error::InvalidPlan("duplicate spot group type".into()));
        }
        let pos = self.groups.partition_point(|g| g.group_type < group.group_type);
        self.groups.insert(pos, group);
        Ok(())
    }

    /// Removes a group; all its members become orphans.
    pub fn evict_group(&mut self, ty: TypeIdx) -> Option<SpotGroup> {
        let pos = self.groups.iter().position(|g| g.group_type == ty)?;
        let mut g = self.groups.remove(pos);
        self.orphans.append(&mut g.members);
        Some(g)
    }

    /// Drops every group (members become orphans) and enters on-demand mode.
    pub fn switch_to_on_demand(&mut self) {
        for g in std::mem::take(&mut self.groups) {
            self.orphans.extend(g.members);
        }
        self.mode = Mode::OnDemand;
    }

    pub fn switch_to_spot(&mut self) {
        self.mode = Mode::Spot;
    }

    pub fn locate(&self, vm: VmId) -> Option<Location> {
        if self.on_demand.iter().any(|m| m.vm == vm) {
            return Some(Location::OnDemand);
        }
        for g in &self.groups {
            if let Some(m) = g.members.iter().find(|m| m.vm == vm) {
                return Some(Location::Group {
                    group_type: g.group_type,
                    native: g.is_native(m),
                });
            }
        }
        self.orphans.iter().any(|m| m.vm == vm).then_some(Location::Orphan)
    }

    /// Removes `vm` from wherever it sits.
    pub fn remove_vm(&mut self, vm: VmId) -> Option<Location> {
        if let Some(pos) = self.on_demand.iter().position(|m| m.vm == vm) {
            self.on_demand.remove(pos);
            return Some(Location::OnDemand);
        }
        for g in &mut self.groups {
            if let Some(pos) = g.members.iter().position(|m| m.vm == vm) {
                let m = g.members.remove(pos);
                return Some(Location::Group {
                    group_type: g.group_type,
                    native: m.instance_type == g.group_type,
                });
            }
        }
        if let Some(pos) = self.orphans.iter().position(|m| m.vm == vm) {
            self.orphans.remove(pos);
            return Some(Location::Orphan);
        }
        None
    }

    /// Moves an orphan (queued, or hosted as a foreign member of another
    /// group) into the group of type `target`. An orphan of the target's own
    /// type becomes a native member.
    pub fn adopt_orphan(&mut self, vm: VmId, target: TypeIdx, view: &CapacityView<'_>) -> Result<()> {
        let host = self
            .group(target)
            .ok_or_else(|| Error::InvalidMove(format!("no spot group of type `{}`", view.catalog.name(target))))?;
        if host.is_satisfied(view) {
            return Err(Error::InvalidMove(format!(
                "group `{}` already satisfies its quota",
                view.catalog.name(target)
            )));
        }
        let member = match self.locate(vm) {
            Some(Location::Orphan) => {
                let pos = self.orphans.iter().position(|m| m.vm == vm).expect("located");
                self.orphans.remove(pos)
            }
            Some(Location::Group {
                native: false,
                group_type,
            }) if group_type != target => {
                let g = self.group_mut(group_type).expect("located");
                let pos = g.members.iter().position(|m| m.vm == vm).expect("located");
                g.members.remove(pos)
            }
            Some(Location::Group { .. }) => {
                return Err(Error::InvalidMove(format!("{vm} is already placed in a spot group")));
            }
            Some(Location::OnDemand) | None => {
                return Err(Error::InvalidMove(format!("{vm} is not an orphan")));
            }
        };
        self.group_mut(target).expect("checked").members.push(member);
        Ok(())
    }

    /// Safety check for spot mode: on-demand floor met and every group
    /// covers the quota implied by `required`.
    pub fn is_safe(&self, required: &ResourceVector, config: &ScalingConfig, view: &CapacityView<'_>) -> Result<bool> {
        if self.mode != Mode::Spot {
            return Err(Error::Mode(Mode::OnDemand.as_str()));
        }
        let vm_o = config.on_demand_type;
        let floor = view.num(&required.scale(config.on_demand_fraction), vm_o);
        if self.active_on_demand_count() < floor {
            return Ok(false);
        }
        let s = self.groups.len() as u32;
        if s <= self.f {
            return Ok(false);
        }
        let q = planning_quota(required, &self.on_demand_capacity(view, vm_o), s, self.f)?;
        Ok(self.groups.iter().all(|g| g.capacity(view).covers(&q)))
    }

    /// Capacity left after every instance of a `killed` type disappears.
    /// Termination is by instance type, so foreign members of a killed type
    /// are lost from their host group as well.
    pub fn surviving_capacity(&self, killed: &[TypeIdx], view: &CapacityView<'_>, vm_o: TypeIdx) -> ResourceVector {
        let mut total = self.on_demand_capacity(view, vm_o);
        for g in &self.groups {
            if killed.contains(&g.group_type) {
                continue;
            }
            total += g.capacity_where(view, |m| !killed.contains(&m.instance_type));
        }
        total
    }

    /// Every VM in `live` appears exactly once in the provision, and nothing
    /// else does.
    pub fn check_partition(&self, live: &[VmId]) -> std::result::Result<(), String> {
        let mut seen: Vec<VmId> = self
            .on_demand
            .iter()
            .map(|m| m.vm)
            .chain(self.groups.iter().flat_map(|g| g.members.iter().map(|m| m.vm)))
            .chain(self.orphans.iter().map(|m| m.vm))
            .collect();
        seen.sort();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("{} appears twice", w[0]));
        }
        let mut live = live.to_vec();
        live.sort();
        if seen != live {
            return Err(format!("provision holds {seen:?} but live instances are {live:?}"));
        }
        let mut types = self.group_types();
        types.dedup();
        if types.len() != self.groups.len() {
            return Err("duplicate group types".into());
        }
        if self.mode == Mode::OnDemand && !self.groups.is_empty() {
            return Err("on-demand mode with spot groups".into());
        }
        Ok(())
    }

    /// Plain-text dump used by golden-file tests and decision logs.
    pub fn snapshot(&self, catalog: &Catalog, vm_o: TypeIdx) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}", self.mode.as_str());
        let _ = writeln!(out, "fault_tolerance: {}", self.f);
        let _ = writeln!(
            out,
            "on_demand: {} x {}",
            self.active_on_demand_count(),
            catalog.name(vm_o)
        );
        for m in &self.on_demand {
            let _ = writeln!(out, "  {}{}", m.vm, if m.retiring { " retiring" } else { "" });
        }
        for g in &self.groups {
            let bid = g.truthful_bid.map_or_else(|| "-".to_string(), |b| format!("{b:.6}"));
            let _ = writeln!(
                out,
                "group {} quota={} truthful_bid={}",
                catalog.name(g.group_type),
                g.quota,
                bid
            );
            for m in &g.members {
                let _ = writeln!(
                    out,
                    "  {} {} bid={}{}",
                    m.vm,
                    catalog.name(m.instance_type),
                    fmt_bid(m.bid),
                    if g.is_native(m) { "" } else { " foreign" }
                );
            }
        }
        let _ = writeln!(out, "orphans: {}", self.orphans.len());
        for m in &self.orphans {
            let _ = writeln!(
                out,
                "  {} {} bid={}",
                m.vm,
                catalog.name(m.instance_type),
                fmt_bid(m.bid)
            );
        }
        out
    }
}

fn fmt_bid(bid: Option<f64>) -> String {
    bid.map_or_else(|| "-".to_string(), |b| format!("{b:.6}"))
}
