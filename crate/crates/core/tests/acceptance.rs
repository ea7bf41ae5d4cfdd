//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and fails if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spotscale::capacity::{num, Catalog, InstanceType, MarginMode, ResourceVector, TypeIdx, DIMENSIONS};
use spotscale::experiment::{ExperimentSpec, Prepared};
use spotscale::market::MarketState;
use spotscale::policy::{scale_up, AutoScaler, PlanContext, PolicyKind};
use spotscale::provision::{
    BiddingStrategy, CapacityView, Member, Mode, OnDemandMember, Provision, ScalingConfig, SpotGroup, VmId,
};
use spotscale::sim::{self, SimConfig};
use spotscale::trace_io::synth::{diurnal_workload, synthetic_prices, PriceRegime};
use spotscale::trace_io::{write_cost, ExperimentResult};

type Outcome = Result<String, String>;

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("safety under f failures", safety_under_failures),
        ("cost-bound identity", cost_bound_identity),
        ("planner oracle equivalence", planner_oracle),
        ("fault injection", fault_injection),
        ("cost ordering", cost_ordering),
        ("dynamic margin saving", dynamic_margin_saving),
        ("billing correctness", billing_correctness),
        ("determinism", determinism),
        ("desk-scale performance", performance),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: {name}: PASS ({detail}; {secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: {name}: FAIL ({detail}; {secs:.1} s)", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bundled_catalog() -> Catalog {
    Catalog::load(common::data_dir().join("catalog.csv")).unwrap()
}

fn random_requirement(rng: &mut ChaCha8Rng) -> ResourceVector {
    ResourceVector::new(
        rng.random_range(1.0..400.0),
        rng.random_range(0.1..200.0),
        rng.random_range(10.0..3000.0),
        rng.random_range(0.0..500.0),
    )
}

fn add_members(group: &mut SpotGroup, count: u32, next_id: &mut u32) {
    for _ in 0..count {
        group.members.push(Member {
            vm: VmId(*next_id),
            instance_type: group.group_type,
            bid: Some(1.0),
        });
        *next_id += 1;
    }
}

/// Sum of effective capacities of the on-demand pool and every group not
/// in `killed`.
fn survivors(view: &CapacityView<'_>, p: &Provision, vm_o: TypeIdx, killed: &[TypeIdx]) -> ResourceVector {
    let mut total = [0.0; DIMENSIONS];
    let mut add = |ty: TypeIdx, n: usize| {
        let e = view.effective(ty);
        for (d, t) in total.iter_mut().enumerate() {
            *t += e.0[d] * n as f64;
        }
    };
    add(vm_o, p.on_demand.len());
    for g in p.groups.iter().filter(|g| !killed.contains(&g.group_type)) {
        add(g.group_type, g.members.len());
    }
    ResourceVector(total)
}

fn covers_rel(have: &ResourceVector, need: &ResourceVector) -> bool {
    have.0
        .iter()
        .zip(need.0.iter())
        .all(|(h, n)| *h >= *n - 1e-9 * n.abs().max(1.0))
}

fn subsets_up_to(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

fn safety_under_failures() -> Outcome {
    let catalog = bundled_catalog();
    let vm_o = catalog.lookup("c3.large").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut subsets = 0u64;
    let start = Instant::now();
    for case in 0..1000 {
        let r = random_requirement(&mut rng);
        let o = [0.0, 0.2, 0.4][rng.random_range(0..3)];
        let f = rng.random_range(0..=3u32);
        let s = rng.random_range(f + 1..=6);
        let mut cfg = ScalingConfig::new(vm_o);
        cfg.f = f;
        cfg.max_groups = 6;
        cfg.on_demand_fraction = o;
        let view = CapacityView::new(&catalog, cfg.active_margin(Mode::Spot));
        let mut p = Provision::new(Mode::Spot, f);
        let n = view.num(&r.scale(o), vm_o);
        for i in 0..n {
            p.on_demand.push(OnDemandMember {
                vm: VmId(i),
                retiring: false,
            });
        }
        let r_o = view.effective(vm_o).scale(n as f64);
        // Q = (R - r_o) / (s - f), clamped at zero where on-demand suffices
        let q: [f64; DIMENSIONS] = std::array::from_fn(|d| (r.0[d] - r_o.0[d]).max(0.0) / (s - f) as f64);
        let quota = ResourceVector(q);
        let mut next = 1000;
        for idx in sample(&mut rng, catalog.len(), s as usize).into_iter() {
            let ty = TypeIdx(idx as u16);
            let mut g = SpotGroup::new(ty, quota, None);
            let extra = rng.random_range(0..=1);
            add_members(&mut g, view.num(&quota, ty) + extra, &mut next);
            p.add_group(g).unwrap();
        }
        ensure(p.is_safe(&r, &cfg, &view).unwrap(), || {
            format!("case {case}: constructed provision is not safe")
        })?;
        let types = p.group_types();
        for killed in subsets_up_to(types.len(), f as usize) {
            subsets += 1;
            let killed: Vec<TypeIdx> = killed.iter().map(|&i| types[i]).collect();
            let left = survivors(&view, &p, vm_o, &killed);
            ensure(covers_rel(&left, &r), || {
                format!("case {case}: losing {killed:?} leaves {left} for requirement {r}")
            })?;
            let lib = p.surviving_capacity(&killed, &view, vm_o);
            ensure(lib.covers(&r), || {
                format!("case {case}: library survivors {lib} miss {r}")
            })?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("1000 provisions, {subsets} failure subsets, all covered"))
}

fn random_market(rng: &mut ChaCha8Rng, catalog: &Catalog, lo: f64, hi: f64) -> MarketState {
    MarketState::from_prices(
        catalog
            .iter()
            .map(|(_, t)| t.spot_eligible.then(|| t.on_demand_price * rng.random_range(lo..hi)))
            .collect(),
    )
}

fn cost_bound_identity() -> Outcome {
    let catalog = bundled_catalog();
    let vm_o = catalog.lookup("c3.large").unwrap();
    let c_o_price = catalog.get(vm_o).on_demand_price;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut plans = 0;
    let mut attempts = 0;
    let mut worst: f64 = 0.0;
    while plans < 1000 && attempts < 50_000 {
        attempts += 1;
        let mut cfg = ScalingConfig::new(vm_o);
        cfg.f = rng.random_range(0..=3);
        cfg.max_groups = rng.random_range(cfg.f + 1..=6);
        cfg.on_demand_fraction = [0.0, 0.2, 0.4][rng.random_range(0..3)];
        cfg.margin.mode = if rng.random_bool(0.5) {
            MarginMode::Static
        } else {
            MarginMode::Dynamic
        };
        let r = random_requirement(&mut rng);
        let market = random_market(&mut rng, &catalog, 0.05, 0.6);
        let ctx = PlanContext::new(r, &cfg, &catalog, &market);
        let out = scale_up(&ctx, &Provision::new(Mode::Spot, cfg.f));
        let plan = out.plan;
        if plan.mode != Mode::Spot {
            continue;
        }
        plans += 1;
        let m = cfg.active_margin(Mode::Spot);
        let baseline = num(&r, catalog.get(vm_o), m) as f64 * c_o_price;
        let total = plan.on_demand_count as f64 * c_o_price
            + plan.groups.iter().map(|g| g.count as f64 * g.truthful_bid).sum::<f64>();
        let rel = (total - baseline).abs() / baseline;
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || {
            format!("plan {plans}: bids sum to {total}, on-demand baseline {baseline}")
        })?;
        ensure(plan.hourly_cost <= baseline * (1.0 + 1e-9), || {
            format!(
                "plan {plans}: market cost {} above baseline {baseline}",
                plan.hourly_cost
            )
        })?;
    }
    ensure(plans == 1000, || {
        format!("only {plans} spot plans in {attempts} attempts")
    })?;
    Ok(format!("1000 plans, worst relative error {worst:.1e}"))
}

fn random_small_catalog(rng: &mut ChaCha8Rng) -> Catalog {
    let n = rng.random_range(2..=5);
    let types = (0..n)
        .map(|i| {
            let ecu: f64 = rng.random_range(1.0..16.0);
            let cap = ResourceVector::new(
                ecu,
                rng.random_range(1.0..30.0),
                rng.random_range(100.0..2000.0),
                rng.random_range(50.0..400.0),
            );
            InstanceType::new(
                format!("t{i}"),
                cap,
                (ecu * rng.random_range(0.01..0.03) * 1e4).round() / 1e4,
            )
        })
        .collect();
    Catalog::new(types).unwrap()
}

/// Exhaustive minimum hourly cost of a provision reachable from `current`:
/// at least `n_c` and at least the floor of on-demand instances, every
/// current group kept, new groups only where both bids beat the market.
fn brute_force_cost(
    catalog: &Catalog,
    cfg: &ScalingConfig,
    market: &MarketState,
    r: &ResourceVector,
    current: &Provision,
) -> f64 {
    let vm_o = cfg.on_demand_type;
    let c_o = catalog.get(vm_o).on_demand_price;
    let m = cfg.active_margin(Mode::Spot);
    let eff = |ty: TypeIdx| catalog.get(ty).capacity.scale(1.0 - m);
    let n_c = current.active_on_demand_count();
    let floor = num(&r.scale(cfg.on_demand_fraction), catalog.get(vm_o), m);
    let need_spot_margin = num(r, catalog.get(vm_o), m);
    let c_base = need_spot_margin as f64 * c_o;
    let spot: Vec<TypeIdx> = catalog.spot_types().filter(|&t| market.price(t).is_some()).collect();
    let cur = current.group_types();
    let lo_n = n_c.max(floor);
    let mut best: Option<f64> = None;
    for n in lo_n..=need_spot_margin.max(lo_n) {
        let r_o = eff(vm_o).scale(n as f64);
        if r_o.covers(r) {
            continue;
        }
        for mask in 0u32..(1 << spot.len()) {
            let chosen: Vec<TypeIdx> = (0..spot.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| spot[i])
                .collect();
            let s = chosen.len() as u32;
            if !cur.iter().all(|t| chosen.contains(t)) || s < cfg.f + 1 || s > cfg.max_groups {
                continue;
            }
            let q: [f64; DIMENSIONS] = std::array::from_fn(|d| (r.0[d].max(r_o.0[d]) - r_o.0[d]) / (s - cfg.f) as f64);
            let quota = ResourceVector(q);
            let mut cost = n as f64 * c_o;
            let mut ok = true;
            for &ty in &chosen {
                let t = catalog.get(ty);
                let n_q = num(&quota, t, m);
                if n_q == 0 {
                    ok = false;
                    break;
                }
                let price = market.price(ty).unwrap();
                if !cur.contains(&ty) {
                    let tb = (c_base - n as f64 * c_o) / (s as f64 * n_q as f64);
                    let bid = match cfg.bidding {
                        BiddingStrategy::Truthful => tb,
                        BiddingStrategy::OnDemandPrice => t.on_demand_price,
                    };
                    if !(tb > price && bid > price) {
                        ok = false;
                        break;
                    }
                }
                cost += n_q as f64 * price;
            }
            if ok && best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
    }
    best.unwrap_or_else(|| {
        let need = num(r, catalog.get(vm_o), cfg.active_margin(Mode::OnDemand));
        need.max(n_c) as f64 * c_o
    })
}

fn planner_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut states = 0;
    let mut spot_plans = 0;
    let mut retained = 0;
    while states < 200 {
        let catalog = random_small_catalog(&mut rng);
        let vm_o = TypeIdx(rng.random_range(0..catalog.len()) as u16);
        let mut cfg = ScalingConfig::new(vm_o);
        cfg.f = rng.random_range(0..=2);
        cfg.max_groups = rng.random_range(cfg.f + 1..=4);
        cfg.on_demand_fraction = [0.0, 0.2, 0.4][rng.random_range(0..3)];
        cfg.bidding = if rng.random_bool(0.8) {
            BiddingStrategy::Truthful
        } else {
            BiddingStrategy::OnDemandPrice
        };
        cfg.margin.mode = if rng.random_bool(0.5) {
            MarginMode::Static
        } else {
            MarginMode::Dynamic
        };
        let market = random_market(&mut rng, &catalog, 0.05, 1.2);
        let r = ResourceVector::new(
            rng.random_range(2.0..60.0),
            rng.random_range(0.5..40.0),
            rng.random_range(10.0..1500.0),
            rng.random_range(0.0..200.0),
        );
        let mut current = Provision::new(Mode::Spot, cfg.f);
        for i in 0..rng.random_range(0..=3u32) {
            current.on_demand.push(OnDemandMember {
                vm: VmId(i),
                retiring: false,
            });
        }
        let keep = rng.random_range(0..=cfg.max_groups.min(catalog.len() as u32) as usize);
        let mut next = 100;
        for idx in sample(&mut rng, catalog.len(), keep).into_iter() {
            let mut g = SpotGroup::new(TypeIdx(idx as u16), ResourceVector::ZERO, None);
            add_members(&mut g, rng.random_range(0..=2), &mut next);
            current.add_group(g).unwrap();
        }
        let ctx = PlanContext::new(r, &cfg, &catalog, &market);
        let out = scale_up(&ctx, &current);
        if out.unchanged {
            continue;
        }
        states += 1;
        let expected = brute_force_cost(&catalog, &cfg, &market, &r, &current);
        let got = out.plan.hourly_cost;
        ensure((got - expected).abs() <= 1e-12 * expected.abs().max(1.0), || {
            format!("state {states}: planner cost {got}, exhaustive minimum {expected}")
        })?;
        ensure(out.plan.on_demand_count >= current.active_on_demand_count(), || {
            format!("state {states}: on-demand count went down")
        })?;
        if out.plan.mode == Mode::Spot {
            spot_plans += 1;
            ensure(
                current.group_types().iter().all(|t| out.plan.group_types().contains(t)),
                || format!("state {states}: a current group was dropped"),
            )?;
            if !current.groups.is_empty() {
                retained += 1;
            }
        }
    }
    Ok(format!(
        "200 states ({spot_plans} spot plans, {retained} with retained groups) match the exhaustive minimum"
    ))
}

fn run_spec(spec: &ExperimentSpec) -> ExperimentResult {
    Prepared::new(spec).unwrap().run().unwrap()
}

fn fault_injection() -> Outcome {
    let spike = common::bundled_spec("prices_spike.csv");
    let f1 = ExperimentSpec {
        f: 1,
        on_demand_pct: 0.0,
        ..spike.clone()
    };
    let one = ExperimentSpec {
        policy: PolicyKind::OneSpotType,
        ..spike.clone()
    };
    let start = Instant::now();
    let a = run_spec(&f1);
    let b = run_spec(&one);
    let elapsed = start.elapsed();
    let window = (common::SPIKE_AT, common::SPIKE_AT + common::SPIKE_LENGTH);
    ensure(a.totals.provider_terminations > 0, || {
        "spike did not hit the f=1 cluster".into()
    })?;
    ensure(b.totals.provider_terminations > 0, || {
        "spike did not hit the one-spot cluster".into()
    })?;
    ensure(a.shortfall_seconds() == 0, || {
        format!("f=1 shortfall {} s", a.shortfall_seconds())
    })?;
    let a_to = a.timeouts_between(window.0, window.1 + 3600.0);
    ensure(a_to == 0, || format!("f=1 timeouts after the kill: {a_to}"))?;
    let b_secs = b.timeout_seconds_between(window.0, window.1);
    ensure(b_secs > 0, || "one-spot cluster saw no timeouts".into())?;
    let again = run_spec(&f1);
    ensure(again == a, || "rerun with the same seed differs".into())?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "f=1: 0 shortfall s, 0 timeouts; one spot type: {b_secs} timeout s, {} shortfall s",
        b.shortfall_seconds()
    ))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Cell {
    OnDemand,
    OneSpot,
    Proposed { f: u32, pct: u32, dynamic: bool },
}

fn cell_spec(prices: &str, cell: Cell) -> ExperimentSpec {
    let base = common::bundled_spec(prices);
    match cell {
        Cell::OnDemand => ExperimentSpec {
            policy: PolicyKind::OnDemandOnly,
            ..base
        },
        Cell::OneSpot => ExperimentSpec {
            policy: PolicyKind::OneSpotType,
            f: 0,
            ..base
        },
        Cell::Proposed { f, pct, dynamic } => ExperimentSpec {
            f,
            on_demand_pct: pct as f64,
            margin: if dynamic {
                MarginMode::Dynamic
            } else {
                MarginMode::Static
            },
            ..base
        },
    }
}

const DAY_TRACES: [&str; 2] = ["prices_stable.csv", "prices_mixed.csv"];

type CellKey = (&'static str, Cell);

thread_local! {
    static RESULTS: std::cell::RefCell<BTreeMap<CellKey, (i64, f64)>> = Default::default();
}

/// (total cost in micros, availability), memoized across criteria.
fn cell(prices: &'static str, c: Cell) -> (i64, f64) {
    if let Some(v) = RESULTS.with(|r| r.borrow().get(&(prices, c)).copied()) {
        return v;
    }
    let r = run_spec(&cell_spec(prices, c));
    let v = (r.total_cost_micros(), r.availability());
    RESULTS.with(|m| m.borrow_mut().insert((prices, c), v));
    v
}

fn usd(micros: i64) -> String {
    format!("{:.2}", micros as f64 / 1e6)
}

fn cost_ordering() -> Outcome {
    let mut notes = Vec::new();
    for prices in DAY_TRACES {
        let od = cell(prices, Cell::OnDemand).0;
        let one = cell(prices, Cell::OneSpot).0;
        let p = |f, pct| cell(prices, Cell::Proposed { f, pct, dynamic: true }).0;
        let (f0, f1) = (p(0, 0), p(1, 0));
        ensure(one < f0 && f0 < f1 && f1 < od, || {
            format!(
                "{prices}: one spot {}, f0 {}, f1 {}, on-demand {}",
                usd(one),
                usd(f0),
                usd(f1),
                usd(od)
            )
        })?;
        for f in [0, 1] {
            let costs: Vec<i64> = [0, 20, 40].iter().map(|&o| p(f, o)).collect();
            ensure(costs.windows(2).all(|w| w[0] <= w[1]), || {
                format!("{prices}: f{f} cost decreases with on-demand share: {costs:?}")
            })?;
        }
        notes.push(format!(
            "{}: {} < {} < {} < {}",
            prices.trim_end_matches(".csv"),
            usd(one),
            usd(f0),
            usd(f1),
            usd(od)
        ));
    }
    Ok(notes.join("; "))
}

fn dynamic_margin_saving() -> Outcome {
    let mut notes = Vec::new();
    for prices in DAY_TRACES {
        for f in [1, 2] {
            let dynamic = cell(
                prices,
                Cell::Proposed {
                    f,
                    pct: 0,
                    dynamic: true,
                },
            );
            let fixed = cell(
                prices,
                Cell::Proposed {
                    f,
                    pct: 0,
                    dynamic: false,
                },
            );
            ensure(dynamic.0 <= fixed.0, || {
                format!("{prices} f{f}: dynamic {} > static {}", usd(dynamic.0), usd(fixed.0))
            })?;
            ensure(dynamic.1 == fixed.1, || {
                format!("{prices} f{f}: availability {} vs {}", dynamic.1, fixed.1)
            })?;
            notes.push(format!("f{f} {} vs {}", usd(dynamic.0), usd(fixed.0)));
        }
    }
    Ok(notes.join(", "))
}

fn billing_correctness() -> Outcome {
    let r = common::billing_scenario();
    let mut buf = Vec::new();
    write_cost(&r, &mut buf).unwrap();
    let expected = fs::read(common::fixture("billing_cost.csv")).unwrap();
    ensure(buf == expected, || {
        format!("ledger differs:\n{}", String::from_utf8_lossy(&buf))
    })?;
    Ok("ledger matches the expected file byte for byte".into())
}

fn read_dir_bytes(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let base = ExperimentSpec {
        duration: 6.0 * 3600.0,
        ..common::bundled_spec("prices_mixed.csv")
    };
    let mut outputs = Vec::new();
    for (name, seed) in [("a", 7), ("b", 7), ("c", 8)] {
        let spec = ExperimentSpec {
            seed,
            out: Some(tmp.path().join(name)),
            ..base.clone()
        };
        let mut prepared = Prepared::new(&spec).unwrap();
        prepared.sim.check_invariants = true;
        let result = prepared.run().map_err(|e| format!("seed {seed}: {e}"))?;
        prepared.write_outputs(&result, spec.out.as_ref().unwrap()).unwrap();
        let t = &result.totals;
        ensure(t.arrivals == t.completions + t.timeouts + t.in_flight_at_end, || {
            format!("seed {seed}: requests not conserved: {t:?}")
        })?;
        let charged: i64 = result.ledger.iter().flat_map(|e| e.charges.iter()).sum();
        ensure(charged == result.total_cost_micros(), || {
            format!("seed {seed}: ledger totals disagree")
        })?;
        outputs.push((read_dir_bytes(spec.out.as_ref().unwrap()), result.event_hash));
    }
    let (a, b, c) = (&outputs[0], &outputs[1], &outputs[2]);
    ensure(a.0.len() >= 5, || {
        format!("expected five report files, got {:?}", a.0.keys())
    })?;
    for (name, bytes) in &a.0 {
        let other = &b.0[name];
        let same = if name == "config.json" {
            // the echo names its own output directory
            let a_dir = tmp.path().join("a").display().to_string();
            let b_dir = tmp.path().join("b").display().to_string();
            String::from_utf8_lossy(bytes).replace(&a_dir, &b_dir) == String::from_utf8_lossy(other)
        } else {
            other == bytes
        };
        ensure(same, || format!("{name} differs between identical runs"))?;
    }
    ensure(a.1 == b.1, || "event hashes differ".into())?;
    ensure(a.0["response_time.csv"] != c.0["response_time.csv"], || {
        "changing the seed did not change request outcomes".into()
    })?;
    Ok(format!(
        "{} files identical; new seed changes outcomes with invariants intact",
        a.0.len()
    ))
}

fn performance() -> Outcome {
    let week = 7.0 * 86_400.0;
    let catalog = bundled_catalog();
    let spot = catalog.spot_types().count();
    ensure(spot == 13, || format!("catalog has {spot} spot types"))?;
    let workload = diurnal_workload(500.0, 0.4, 10.0, week, 9).unwrap();
    let prices = synthetic_prices(&catalog, &PriceRegime::Mixed, week, 9).unwrap();
    let cfg = SimConfig {
        duration: week,
        ..SimConfig::default()
    };
    let scaling = ScalingConfig::new(catalog.lookup("c3.large").unwrap());
    let mut scaler = AutoScaler::new(PolicyKind::Proposed, &scaling, &catalog).unwrap();
    let start = Instant::now();
    let r = sim::run(&cfg, &catalog, &prices, &workload, &mut scaler).unwrap();
    let t = start.elapsed();
    ensure(t < Duration::from_secs(300), || format!("one week took {t:?}"))?;
    Ok(format!(
        "{} requests over one week, mean {:.0}/s",
        r.totals.arrivals,
        r.totals.arrivals as f64 / week
    ))
}
