//! Deterministic discrete-event simulation of an auto-scaled web cluster.
//!
//! The engine replays a request trace against a cluster of VMs, each a
//! processor-sharing server, with requests spread by weighted round robin.
//! Spot prices replay from traces; an instance whose bid falls below the
//! market is terminated at that very sample. A [`Controller`] makes all
//! scaling decisions through the [`Cluster`] interface.

mod billing;
mod engine;
mod queue;
mod rng;
mod server;

use serde::{Deserialize, Serialize};

pub use billing::{bill, format_money, to_micros, LedgerEntry, Role, Termination, HOUR};
pub use engine::run;
pub use queue::{class, EventQueue};
pub use rng::{Gaussian, PositiveNormal, SimRng, Stream};

use crate::capacity::{AppProfile, Catalog, ResourceVector, TypeIdx};
use crate::error::{Error, Result};
use crate::market::MarketState;
use crate::provision::VmId;
use crate::trace_io::DecisionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmState {
    /// Spot request waiting to be fulfilled.
    Requested,
    Booting,
    Online,
    /// Shut down by the user; finishing in-flight requests.
    Draining,
    Terminated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmInfo {
    pub id: VmId,
    pub instance_type: TypeIdx,
    pub role: Role,
    pub bid: Option<f64>,
    pub state: VmState,
    pub request_time: f64,
    pub online_time: Option<f64>,
    /// First billable second; for spot instances known once the request is
    /// fulfilled.
    pub billing_anchor: Option<f64>,
    pub end: Option<(f64, Termination)>,
}

impl VmInfo {
    /// Still part of the cluster from the controller's point of view.
    pub fn is_live(&self) -> bool {
        matches!(self.state, VmState::Requested | VmState::Booting | VmState::Online)
    }
}

/// What a controller can observe and do.
pub trait Cluster {
    fn now(&self) -> f64;
    fn catalog(&self) -> &Catalog;
    fn market(&self) -> &MarketState;
    /// Request rate of the current monitoring interval, per second.
    fn request_rate(&self) -> f64;
    /// Capacity needed for the current request rate.
    fn required(&self) -> ResourceVector;
    fn launch_on_demand(&mut self, ty: TypeIdx) -> VmId;
    /// Fails with [`Error::BidRejected`] unless `bid` exceeds the market.
    fn launch_spot(&mut self, ty: TypeIdx, bid: f64) -> Result<VmId>;
    /// User termination. Pending instances are cancelled at once; online
    /// ones stop receiving requests and go offline after a shutdown delay.
    fn shutdown(&mut self, vm: VmId);
    fn vm(&self, vm: VmId) -> Option<&VmInfo>;
    /// Nominal capacity of online instances.
    fn online_capacity(&self) -> ResourceVector;
    /// Delivers [`ControlEvent::Wakeup`] with `tag` at time `at`.
    fn schedule_wakeup(&mut self, at: f64, tag: u64);
    fn record(&mut self, decision: DecisionRecord);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlEvent<'a> {
    /// First event of a run, listing the instances the cluster starts with.
    Start {
        initial: &'a [VmId],
    },
    UtilizationSample,
    /// The billing hour of `vm` ends soon.
    BillingBoundary(VmId),
    /// Instances just terminated by the provider.
    ProviderTermination(&'a [VmId]),
    RemovalSweep,
    VmOnline(VmId),
    Wakeup(u64),
}

pub trait Controller {
    fn handle(&mut self, event: ControlEvent<'_>, cluster: &mut dyn Cluster) -> Result<()>;

    /// Period of [`ControlEvent::RemovalSweep`], if wanted.
    fn removal_interval(&self) -> Option<f64> {
        None
    }

    /// Consistency check against the live instance set.
    fn check(&self, _live: &[VmId]) -> std::result::Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub duration: f64,
    pub seed: u64,
    /// Seconds between utilization samples.
    pub sample_interval: f64,
    /// Billing-boundary events fire this long before each hour mark.
    pub billing_lead: f64,
    pub request_timeout: f64,
    pub on_demand_startup: Gaussian,
    pub shutdown: Gaussian,
    /// Spot request fulfilment, followed by a normal startup.
    pub spot_request: Gaussian,
    /// On-demand instances online at time zero.
    pub initial_on_demand: u32,
    pub initial_type: String,
    pub profile: AppProfile,
    /// Multiplier applied to the workload trace.
    pub workload_scale: f64,
    /// Run [`Controller::check`] after every controller call.
    pub check_invariants: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 86_400.0,
            seed: 1,
            sample_interval: 10.0,
            billing_lead: 120.0,
            request_timeout: 30.0,
            on_demand_startup: Gaussian::new(100.0, 20.0),
            shutdown: Gaussian::new(100.0, 20.0),
            spot_request: Gaussian::new(550.0, 50.0),
            initial_on_demand: 5,
            initial_type: "c3.large".into(),
            profile: AppProfile::default(),
            workload_scale: 1.0,
            check_invariants: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return bad("duration must be a non-negative number of seconds");
        }
        if !(self.sample_interval > 0.0) {
            return bad("sample interval must be positive");
        }
        if !(self.billing_lead >= 0.0 && self.billing_lead < HOUR) {
            return bad("billing lead must lie in [0, 3600)");
        }
        if !(self.request_timeout > 0.0) {
            return bad("request timeout must be positive");
        }
        if ![self.on_demand_startup, self.shutdown, self.spot_request]
            .iter()
            .all(Gaussian::is_valid)
        {
            return bad("delay distributions need a positive mean and non-negative deviation");
        }
        if !(self.workload_scale > 0.0 && self.workload_scale.is_finite()) {
            return bad("workload scale must be positive");
        }
        self.profile.validate()
    }
}

/// One step of a [`ScriptedController`].
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptAction {
    LaunchOnDemand(String),
    LaunchSpot {
        instance_type: String,
        bid: f64,
    },
    /// Shut down the `n`-th instance launched by the script (from 0).
    Shutdown(usize),
}

/// Replays a fixed list of timed actions and otherwise does nothing.
#[derive(Debug, Clone, Default)]
pub struct ScriptedController {
    steps: Vec<(f64, ScriptAction)>,
    launched: Vec<VmId>,
}

impl ScriptedController {
    pub fn new(steps: Vec<(f64, ScriptAction)>) -> Self {
        ScriptedController {
            steps,
            launched: Vec::new(),
        }
    }

    /// Instances launched so far, in script order.
    pub fn launched(&self) -> &[VmId] {
        &self.launched
    }
}

impl Controller for ScriptedController {
    fn handle(&mut self, event: ControlEvent<'_>, cluster: &mut dyn Cluster) -> Result<()> {
        match event {
            ControlEvent::Start { .. } => {
                for (i, (t, _)) in self.steps.iter().enumerate() {
                    cluster.schedule_wakeup(*t, i as u64);
                }
            }
            ControlEvent::Wakeup(i) => match &self.steps[i as usize].1 {
                ScriptAction::LaunchOnDemand(name) => {
                    let ty = cluster.catalog().lookup(name)?;
                    let vm = cluster.launch_on_demand(ty);
                    self.launched.push(vm);
                }
                ScriptAction::LaunchSpot { instance_type, bid } => {
                    let ty = cluster.catalog().lookup(instance_type)?;
                    let vm = cluster.launch_spot(ty, *bid)?;
                    self.launched.push(vm);
                }
                ScriptAction::Shutdown(n) => {
                    let vm = *self
                        .launched
                        .get(*n)
                        .ok_or_else(|| Error::InvalidArgument(format!("script has no instance #{n}")))?;
                    cluster.shutdown(vm);
                }
            },
            _ => {}
        }
        Ok(())
    }
}
