use std::collections::BTreeSet;

use super::billing::{bill, LedgerEntry, Role, Termination, HOUR};
use super::queue::{class, EventQueue};
use super::rng::{PositiveNormal, SimRng, Stream};
use super::server::{JobSlab, NextTimes, Outcome, PsServer};
use super::{Cluster, ControlEvent, Controller, SimConfig, VmInfo, VmState};
use crate::capacity::wrr::{weights_from_throughputs, WrrDispatcher};
use crate::capacity::{bottleneck_throughput, Catalog, Dimension, ResourceVector, TypeIdx};
use crate::error::{Error, Result};
use crate::market::{MarketState, SpotHolding};
use crate::provision::VmId;
use crate::trace_io::{
    ArrivalCursor, DecisionRecord, ExperimentResult, PriceTraces, ResponseHistogram, SecondStats, Totals, WorkloadTrace,
};

#[derive(Debug)]
enum Ev {
    Start,
    PriceChange,
    SpotTermination(Vec<VmId>),
    Acquired(VmId),
    Online(VmId),
    Offline(VmId),
    Billing(VmId, u32),
    Sample,
    Sweep,
    Wakeup(u64),
}

impl Ev {
    fn code(&self) -> (u64, u64) {
        match self {
            Ev::Start => (1, 0),
            Ev::PriceChange => (2, 0),
            Ev::SpotTermination(v) => (3, v.iter().fold(0, |h, id| mix(h, id.0 as u64))),
            Ev::Acquired(v) => (4, v.0 as u64),
            Ev::Online(v) => (5, v.0 as u64),
            Ev::Offline(v) => (6, v.0 as u64),
            Ev::Billing(v, k) => (7, ((*k as u64) << 32) | v.0 as u64),
            Ev::Sample => (8, 0),
            Ev::Sweep => (9, 0),
            Ev::Wakeup(t) => (10, *t),
        }
    }
}

const ARRIVAL_CODE: u64 = 11;
const SERVER_CODE: u64 = 12;

// FNV-1a over 64-bit words.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn mix(h: u64, word: u64) -> u64 {
    (h ^ word).wrapping_mul(FNV_PRIME)
}

struct World<'a> {
    cfg: &'a SimConfig,
    catalog: &'a Catalog,
    prices: &'a PriceTraces,
    market: MarketState,
    now: f64,
    rate: f64,
    required: ResourceVector,

    vms: Vec<VmInfo>,
    live: BTreeSet<u32>,
    online: BTreeSet<u32>,
    online_capacity: ResourceVector,
    servers: Vec<Option<PsServer>>,
    timers: NextTimes,
    slab: JobSlab,
    dispatcher: WrrDispatcher<u32>,
    dispatcher_dirty: bool,

    queue: EventQueue<Ev>,
    rng: SimRng,
    startup: PositiveNormal,
    shutdown_delay: PositiveNormal,
    spot_request: PositiveNormal,
    lengths: PositiveNormal,

    seconds: Vec<SecondStats>,
    shortfall: Vec<bool>,
    shortfall_since: Option<f64>,
    histogram: ResponseHistogram,
    totals: Totals,
    decisions: Vec<DecisionRecord>,
}

impl World<'_> {
    fn vm_mut(&mut self, id: VmId) -> &mut VmInfo {
        &mut self.vms[id.0 as usize - 1]
    }

    #[inline]
    fn second(&self, t: f64) -> usize {
        (t.max(0.0) as usize).min(self.seconds.len().saturating_sub(1))
    }

    fn new_vm(&mut self, ty: TypeIdx, role: Role, bid: Option<f64>, state: VmState) -> VmId {
        let id = VmId(self.vms.len() as u32 + 1);
        self.vms.push(VmInfo {
            id,
            instance_type: ty,
            role,
            bid,
            state,
            request_time: self.now,
            online_time: None,
            billing_anchor: None,
            end: None,
        });
        self.live.insert(id.0);
        id
    }

    fn start_billing(&mut self, id: VmId) {
        let now = self.now;
        self.vm_mut(id).billing_anchor = Some(now);
        self.queue
            .push(now + HOUR - self.cfg.billing_lead, class::BILLING, Ev::Billing(id, 1));
    }

    fn boot(&mut self, id: VmId) {
        let delay = self.startup.draw(self.rng.stream(Stream::StartupDelays));
        self.vm_mut(id).state = VmState::Booting;
        self.queue.push(self.now + delay, class::VM_STATUS, Ev::Online(id));
    }

    fn bring_online(&mut self, id: VmId) {
        let now = self.now;
        let cpu = {
            let vm = self.vm_mut(id);
            vm.state = VmState::Online;
            vm.online_time = Some(now);
            vm.instance_type
        };
        let rate = self.catalog.get(cpu).capacity.get(Dimension::Cpu);
        let idx = id.0 as usize;
        if self.servers.len() <= idx {
            self.servers.resize_with(idx + 1, || None);
        }
        self.servers[idx] = Some(PsServer::new(rate, now));
        self.online.insert(id.0);
        self.capacity_changed();
    }

    fn capacity_changed(&mut self) {
        self.online_capacity = self
            .online
            .iter()
            .map(|&id| self.catalog.get(self.vms[id as usize - 1].instance_type).capacity)
            .sum();
        self.dispatcher_dirty = true;
        self.update_shortfall();
    }

    fn update_shortfall(&mut self) {
        let short = !self.online_capacity.covers(&self.required);
        match (short, self.shortfall_since) {
            (true, None) => self.shortfall_since = Some(self.now),
            (false, Some(a)) => {
                self.mark_shortfall(a, self.now);
                self.shortfall_since = None;
            }
            _ => {}
        }
    }

    fn mark_shortfall(&mut self, a: f64, b: f64) {
        if b > a {
            let from = a.floor() as usize;
            let to = (b.ceil() as usize).min(self.shortfall.len());
            for s in &mut self.shortfall[from.min(to)..to] {
                *s = true;
            }
        }
    }

    fn rebuild_dispatcher(&mut self) {
        let demand = &self.cfg.profile.demand_per_request;
        let targets: Vec<u32> = self.online.iter().copied().collect();
        let throughputs: Vec<f64> = targets
            .iter()
            .map(|&id| {
                let t = self.catalog.get(self.vms[id as usize - 1].instance_type);
                bottleneck_throughput(&t.capacity, demand)
            })
            .collect();
        let weights = weights_from_throughputs(&throughputs);
        self.dispatcher = WrrDispatcher::new(targets, weights);
        self.dispatcher_dirty = false;
    }

    #[inline]
    fn pick_server(&mut self) -> Option<u32> {
        if self.dispatcher_dirty {
            self.rebuild_dispatcher();
        }
        self.dispatcher.pick()
    }

    #[inline]
    fn reschedule(&mut self, server: u32) {
        let s = self.servers[server as usize].as_mut().expect("online server");
        match s.next_time(&mut self.slab) {
            Some(t) => self.timers.set(server, t),
            None => self.timers.remove(server),
        }
    }

    #[inline]
    fn record_timeout(&mut self, t: f64) {
        let i = self.second(t);
        self.seconds[i].timeouts += 1;
        self.totals.timeouts += 1;
    }

    fn arrive(&mut self, t: f64) {
        self.totals.arrivals += 1;
        let length = self.lengths.draw(self.rng.stream(Stream::RequestLengths));
        match self.pick_server() {
            None => self.record_timeout(t),
            Some(server) => {
                let job = self.slab.insert(t, t + self.cfg.request_timeout, length);
                let s = self.servers[server as usize].as_mut().expect("online server");
                s.add(t, job, &mut self.slab);
                self.reschedule(server);
            }
        }
    }

    fn serve(&mut self, t: f64, server: u32) {
        let i = self.second(t);
        let World {
            servers,
            slab,
            seconds,
            histogram,
            totals,
            ..
        } = self;
        let s = servers[server as usize].as_mut().expect("online server");
        s.process(t, slab, &mut |o, slab| match o {
            Outcome::Completed(id) => {
                let rt = t - slab.get(id).arrival;
                seconds[i].rt_sum += rt;
                seconds[i].completions += 1;
                histogram.record(rt);
                totals.completions += 1;
            }
            Outcome::TimedOut(_) => {
                seconds[i].timeouts += 1;
                totals.timeouts += 1;
            }
        });
        self.reschedule(server);
    }

    /// Takes the server of `id` out of service and returns its unfinished
    /// jobs.
    fn retire_server(&mut self, id: VmId) -> Vec<u32> {
        let idx = id.0 as usize;
        self.timers.remove(id.0);
        match self.servers.get_mut(idx).and_then(Option::take) {
            Some(mut s) => s.evacuate(self.now, &mut self.slab),
            None => Vec::new(),
        }
    }

    /// Moves jobs of a lost instance to survivors, once per job.
    fn redispatch(&mut self, jobs: Vec<u32>) {
        let now = self.now;
        for job in jobs {
            let j = self.slab.get(job);
            if j.redispatched || j.deadline <= now {
                self.slab.finish(job);
                self.record_timeout(now);
                continue;
            }
            let Some(server) = self.pick_server() else {
                self.slab.finish(job);
                self.record_timeout(now);
                continue;
            };
            self.slab.get_mut(job).redispatched = true;
            self.totals.redispatched += 1;
            let s = self.servers[server as usize].as_mut().expect("online server");
            s.add(now, job, &mut self.slab);
            self.reschedule(server);
        }
    }

    fn price_change(&mut self) -> Result<()> {
        let now = self.now;
        for (i, tr) in self.prices.iter().enumerate() {
            if let Some(tr) = tr {
                self.market.set_price(TypeIdx(i as u16), tr.price_at(now)?);
            }
        }
        self.market.clock = now;
        let holdings: Vec<SpotHolding<VmId>> = self
            .live
            .iter()
            .map(|&id| &self.vms[id as usize - 1])
            .filter_map(|vm| {
                vm.bid.map(|bid| SpotHolding {
                    id: vm.id,
                    instance_type: vm.instance_type,
                    bid,
                })
            })
            .collect();
        let killed = crate::market::terminations_due(&self.market, &holdings);
        if !killed.is_empty() {
            self.queue
                .push(now, class::SPOT_TERMINATION, Ev::SpotTermination(killed));
        }
        Ok(())
    }

    fn provider_kill(&mut self, killed: &[VmId]) -> Vec<VmId> {
        let now = self.now;
        let mut done = Vec::with_capacity(killed.len());
        let mut orphaned_jobs = Vec::new();
        for &id in killed {
            if !self.live.remove(&id.0) {
                continue;
            }
            let vm = self.vm_mut(id);
            let was_online = vm.state == VmState::Online;
            vm.state = VmState::Terminated;
            vm.end = Some((now, Termination::Provider));
            self.totals.provider_terminations += 1;
            if was_online {
                self.online.remove(&id.0);
                orphaned_jobs.extend(self.retire_server(id));
            }
            done.push(id);
        }
        self.capacity_changed();
        self.redispatch(orphaned_jobs);
        done
    }

    fn go_offline(&mut self, id: VmId) {
        if self.vms[id.0 as usize - 1].state != VmState::Draining {
            return;
        }
        self.vm_mut(id).state = VmState::Terminated;
        let jobs = self.retire_server(id);
        self.redispatch(jobs);
    }

    fn live_ids(&self) -> Vec<VmId> {
        self.live.iter().map(|&id| VmId(id)).collect()
    }
}

impl Cluster for World<'_> {
    fn now(&self) -> f64 {
        self.now
    }

    fn catalog(&self) -> &Catalog {
        self.catalog
    }

    fn market(&self) -> &MarketState {
        &self.market
    }

    fn request_rate(&self) -> f64 {
        self.rate
    }

    fn required(&self) -> ResourceVector {
        self.required
    }

    fn launch_on_demand(&mut self, ty: TypeIdx) -> VmId {
        let id = self.new_vm(ty, Role::OnDemand, None, VmState::Booting);
        self.totals.on_demand_launches += 1;
        self.start_billing(id);
        self.boot(id);
        id
    }

    fn launch_spot(&mut self, ty: TypeIdx, bid: f64) -> Result<VmId> {
        let market = self.market.price_of(ty, self.catalog)?;
        if !(bid > market) {
            self.totals.rejected_bids += 1;
            return Err(Error::BidRejected {
                instance_type: self.catalog.name(ty).to_string(),
                bid,
                market,
            });
        }
        let id = self.new_vm(ty, Role::Spot, Some(bid), VmState::Requested);
        self.totals.spot_launches += 1;
        let delay = self.spot_request.draw(self.rng.stream(Stream::SpotRequestDelays));
        self.queue.push(self.now + delay, class::VM_STATUS, Ev::Acquired(id));
        Ok(id)
    }

    fn shutdown(&mut self, id: VmId) {
        let now = self.now;
        let Some(vm) = self.vms.get_mut((id.0 as usize).wrapping_sub(1)) else {
            return;
        };
        match vm.state {
            VmState::Requested | VmState::Booting => {
                vm.state = VmState::Terminated;
                vm.end = Some((now, Termination::User));
                self.live.remove(&id.0);
            }
            VmState::Online => {
                vm.state = VmState::Draining;
                vm.end = Some((now, Termination::User));
                self.live.remove(&id.0);
                self.online.remove(&id.0);
                let delay = self.shutdown_delay.draw(self.rng.stream(Stream::ShutdownDelays));
                self.queue.push(now + delay, class::VM_STATUS, Ev::Offline(id));
                self.capacity_changed();
            }
            VmState::Draining | VmState::Terminated => {}
        }
    }

    fn vm(&self, id: VmId) -> Option<&VmInfo> {
        self.vms.get((id.0 as usize).wrapping_sub(1))
    }

    fn online_capacity(&self) -> ResourceVector {
        self.online_capacity
    }

    fn schedule_wakeup(&mut self, at: f64, tag: u64) {
        self.queue.push(at.max(self.now), class::SWEEP, Ev::Wakeup(tag));
    }

    fn record(&mut self, decision: DecisionRecord) {
        self.decisions.push(decision);
    }
}

fn validate_inputs(cfg: &SimConfig, catalog: &Catalog, prices: &PriceTraces, workload: &WorkloadTrace) -> Result<()> {
    cfg.validate()?;
    if prices.len() != catalog.len() {
        return Err(Error::Trace(format!(
            "{} price traces for {} catalog types",
            prices.len(),
            catalog.len()
        )));
    }
    for ((ty, t), tr) in catalog.iter().zip(prices) {
        match tr {
            None if t.spot_eligible => {
                return Err(Error::Trace(format!(
                    "no price trace for spot type `{}`",
                    catalog.name(ty)
                )));
            }
            Some(tr) if tr.first_time() > 0.0 => {
                return Err(Error::Trace(format!(
                    "price trace for `{}` starts at {} s, after the start of the run",
                    catalog.name(ty),
                    tr.first_time()
                )));
            }
            _ => {}
        }
    }
    if workload.start() > 0.0 {
        return Err(Error::Trace(format!(
            "workload trace starts at {} s, after the start of the run",
            workload.start()
        )));
    }
    if workload.end() < cfg.duration {
        return Err(Error::Trace(format!(
            "workload trace covers {} s but the run lasts {} s",
            workload.end(),
            cfg.duration
        )));
    }
    if cfg.initial_on_demand > 0 {
        catalog.lookup(&cfg.initial_type)?;
    }
    Ok(())
}

/// Simulates `cfg.duration` seconds of the cluster driven by `controller`.
///
/// Inputs are validated before anything runs. Identical inputs give
/// identical results.
pub fn run(
    cfg: &SimConfig,
    catalog: &Catalog,
    prices: &PriceTraces,
    workload: &WorkloadTrace,
    controller: &mut dyn Controller,
) -> Result<ExperimentResult> {
    validate_inputs(cfg, catalog, prices, workload)?;
    if cfg.duration == 0.0 {
        return Ok(ExperimentResult::empty(0.0));
    }
    let duration = cfg.duration;
    let n_seconds = duration.ceil() as usize;
    let scale = cfg.workload_scale;
    let length = super::Gaussian::new(cfg.profile.mean_request_length, cfg.profile.request_length_stddev);

    let mut w = World {
        cfg,
        catalog,
        prices,
        market: MarketState::at(prices, 0.0)?,
        now: 0.0,
        rate: 0.0,
        required: ResourceVector::ZERO,
        vms: Vec::new(),
        live: BTreeSet::new(),
        online: BTreeSet::new(),
        online_capacity: ResourceVector::ZERO,
        servers: Vec::new(),
        timers: NextTimes::default(),
        slab: JobSlab::default(),
        dispatcher: WrrDispatcher::default(),
        dispatcher_dirty: true,
        queue: EventQueue::default(),
        rng: SimRng::new(cfg.seed),
        startup: cfg.on_demand_startup.sampler(),
        shutdown_delay: cfg.shutdown.sampler(),
        spot_request: cfg.spot_request.sampler(),
        lengths: length.sampler(),
        seconds: vec![SecondStats::default(); n_seconds],
        shortfall: vec![false; n_seconds],
        shortfall_since: None,
        histogram: ResponseHistogram::default(),
        totals: Totals::default(),
        decisions: Vec::new(),
    };

    w.rate = ArrivalCursor::rate_at(workload, scale, 0.0);
    w.required = crate::capacity::required_capacity(&cfg.profile, w.rate);

    let mut initial = Vec::new();
    if cfg.initial_on_demand > 0 {
        let ty = catalog.lookup(&cfg.initial_type)?;
        for _ in 0..cfg.initial_on_demand {
            let id = w.new_vm(ty, Role::OnDemand, None, VmState::Booting);
            w.start_billing(id);
            w.bring_online(id);
            initial.push(id);
        }
    }
    w.update_shortfall();

    let mut price_times: Vec<f64> = prices
        .iter()
        .flatten()
        .flat_map(|tr| tr.samples.iter().map(|s| s.0))
        .filter(|&t| t > 0.0 && t < duration)
        .collect();
    price_times.sort_by(f64::total_cmp);
    price_times.dedup();
    let mut next_price = 0usize;

    w.queue.push(0.0, class::SPOT_TERMINATION, Ev::Start);
    if let Some(&t) = price_times.first() {
        w.queue.push(t, class::PRICE_CHANGE, Ev::PriceChange);
        next_price = 1;
    }
    w.queue.push(cfg.sample_interval, class::SAMPLE, Ev::Sample);
    let sweep = controller.removal_interval();
    if let Some(iv) = sweep {
        w.queue.push(iv, class::SWEEP, Ev::Sweep);
    }

    let mut arrivals = workload.arrivals(scale, duration);
    let mut hash = FNV_OFFSET;

    macro_rules! control {
        ($ev:expr) => {{
            controller.handle($ev, &mut w)?;
            if cfg.check_invariants {
                let live = w.live_ids();
                controller
                    .check(&live)
                    .map_err(|m| Error::InvalidPlan(format!("inconsistent provision at t={}: {m}", w.now)))?;
            }
        }};
    }

    loop {
        let heap = w.queue.peek();
        let server = w.timers.peek();
        let arrival = arrivals.peek();
        // Control events first, then completions, then arrivals.
        let mut pick = 0u8;
        let mut t = f64::INFINITY;
        if let Some((ht, _)) = heap {
            t = ht;
        }
        if let Some((st, _)) = server {
            if st < t {
                t = st;
                pick = 1;
            }
        }
        if let Some(at) = arrival {
            if at < t {
                t = at;
                pick = 2;
            }
        }
        if !(t < duration) {
            break;
        }
        w.now = t;
        match pick {
            2 => {
                hash = mix(mix(hash, t.to_bits()), ARRIVAL_CODE);
                arrivals.advance();
                w.arrive(t);
            }
            1 => {
                let (_, s) = server.expect("picked");
                hash = mix(mix(mix(hash, t.to_bits()), SERVER_CODE), s as u64);
                w.serve(t, s);
            }
            _ => {
                let (_, c, ev) = w.queue.pop().expect("picked");
                let (code, arg) = ev.code();
                hash = mix(mix(mix(mix(hash, t.to_bits()), c as u64), code), arg);
                match ev {
                    Ev::Start => control!(ControlEvent::Start { initial: &initial }),
                    Ev::PriceChange => {
                        w.price_change()?;
                        if let Some(&t) = price_times.get(next_price) {
                            w.queue.push(t, class::PRICE_CHANGE, Ev::PriceChange);
                            next_price += 1;
                        }
                    }
                    Ev::SpotTermination(killed) => {
                        let killed = w.provider_kill(&killed);
                        if !killed.is_empty() {
                            control!(ControlEvent::ProviderTermination(&killed));
                        }
                    }
                    Ev::Acquired(id) => {
                        if w.vms[id.0 as usize - 1].state == VmState::Requested {
                            w.start_billing(id);
                            w.boot(id);
                        }
                    }
                    Ev::Online(id) => {
                        if w.vms[id.0 as usize - 1].state == VmState::Booting {
                            w.bring_online(id);
                            control!(ControlEvent::VmOnline(id));
                        }
                    }
                    Ev::Offline(id) => w.go_offline(id),
                    Ev::Billing(id, k) => {
                        if w.live.contains(&id.0) {
                            control!(ControlEvent::BillingBoundary(id));
                            if w.live.contains(&id.0) {
                                let anchor = w.vms[id.0 as usize - 1].billing_anchor.expect("billed");
                                let next = anchor + (k + 1) as f64 * HOUR - cfg.billing_lead;
                                w.queue.push(next, class::BILLING, Ev::Billing(id, k + 1));
                            }
                        }
                    }
                    Ev::Sample => {
                        w.rate = ArrivalCursor::rate_at(workload, scale, t);
                        w.required = crate::capacity::required_capacity(&cfg.profile, w.rate);
                        w.update_shortfall();
                        control!(ControlEvent::UtilizationSample);
                        w.queue.push(t + cfg.sample_interval, class::SAMPLE, Ev::Sample);
                    }
                    Ev::Sweep => {
                        control!(ControlEvent::RemovalSweep);
                        if let Some(iv) = sweep {
                            w.queue.push(t + iv, class::SWEEP, Ev::Sweep);
                        }
                    }
                    Ev::Wakeup(tag) => control!(ControlEvent::Wakeup(tag)),
                }
            }
        }
    }

    w.now = duration;
    if let Some(a) = w.shortfall_since.take() {
        w.mark_shortfall(a, duration);
    }

    let mut ledger = Vec::with_capacity(w.vms.len());
    for vm in &w.vms {
        let t = catalog.get(vm.instance_type);
        let (end, cause) = vm.end.unwrap_or((duration, Termination::User));
        let charges = match vm.billing_anchor {
            Some(anchor) => {
                let trace = prices[vm.instance_type.index()].as_ref();
                bill(vm.role, anchor, end.min(duration), cause, t.on_demand_price, |at| {
                    trace.and_then(|tr| tr.price_at(at).ok()).unwrap_or(t.on_demand_price)
                })
            }
            None => Vec::new(),
        };
        ledger.push(LedgerEntry {
            instance_id: vm.id.0,
            instance_type: t.name.clone(),
            role: vm.role,
            hours: charges.len() as u32,
            total: charges.iter().sum(),
            charges,
        });
    }

    let mut totals = w.totals;
    totals.in_flight_at_end = w.slab.live();
    Ok(ExperimentResult {
        duration,
        seconds: w.seconds,
        shortfall: w.shortfall,
        ledger,
        decisions: w.decisions,
        histogram: w.histogram,
        totals,
        event_hash: hash,
    })
}
