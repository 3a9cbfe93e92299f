//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run alone with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{delivery_log, lone_packet, modular_search, quiet_mesh};
use dvc_noc::allocator::{SwitchAllocator, VcAllocator, EMPTY_REQUESTS};
use dvc_noc::arbiter::RoundRobinArbiter;
use dvc_noc::config::SimConfig;
use dvc_noc::experiment::{self, Axis};
use dvc_noc::flit::Coord;
use dvc_noc::mesh::TraceKind;
use dvc_noc::metrics::{ControlLayout, TableStorage};
use dvc_noc::router::{route_compute, BufferMode, Port, Router, RouterParams, NUM_PORTS};
use dvc_noc::sim::Simulation;
use dvc_noc::traffic::TrafficPattern;

// Pinned tolerances.
const STRUCTURE_BUDGET: Duration = Duration::from_secs(1);
const CONSERVATION_CYCLES: u64 = 100_000;
const CONSERVATION_RATES: [f64; 3] = [0.05, 0.2, 0.4];
const CONSERVATION_BUDGET: Duration = Duration::from_secs(60);
const ARBITER_BUDGET: Duration = Duration::from_secs(10);
const FAIRNESS_SLACK: i64 = 1;
const MATCHING_CYCLES: usize = 10_000;
const WATCHDOG_LIMIT: u64 = 80;
const MATCHING_BUDGET: Duration = Duration::from_secs(30);
const LAYOUT_BUDGET: Duration = Duration::from_secs(60);
const BENEFIT_BUDGET: Duration = Duration::from_secs(300);
const BENEFIT_MARGIN: f64 = 0.0;
const BUFFER_SHARE_RANGE: (f64, f64) = (0.40, 0.80);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= budget, || format!("took {t:.1?}, budget {budget:?}"))
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get()).clamp(2, 8)
}

fn structural_fidelity() -> Outcome {
    let start = Instant::now();
    let r = Router::new(Coord::new(1, 1), RouterParams::default(), [true; NUM_PORTS]);
    let s = r.structure();
    let got = [
        s.va_stage1, s.va_stage2, s.sa_stage1, s.sa_stage2, s.slots_per_port, s.rows_per_port, s.ports,
    ];
    ensure(got == [25, 5, 5, 5, 16, 16, 5], || format!("counts {got:?}"))?;
    let widths = [s.va_stage1_width, s.va_stage2_width, s.sa_stage1_width, s.sa_stage2_width];
    ensure(widths == [16, 5, 16, 5], || format!("arbiter widths {widths:?}"))?;
    for p in Port::ALL {
        let unit = r.input(p);
        ensure(unit.ubs.num_slots() == 16 && unit.table.num_rows() == 16 && unit.dispenser.free_count() == 16, || {
            format!("{p:?} not 16 slots / 16 rows")
        })?;
    }
    within(STRUCTURE_BUDGET, start)?;
    Ok("25+5 VA, 5+5 SA arbiters (16:1, 5:1), 5 ports x 16 slots x 16 rows".into())
}

fn conservation() -> Outcome {
    let start = Instant::now();
    let results: Vec<Result<(f64, u64), String>> = CONSERVATION_RATES
        .par_iter()
        .map(|&rate| {
            let mut c = SimConfig::default();
            c.traffic.rate = rate;
            c.sim.warmup = 0;
            c.sim.measure = CONSERVATION_CYCLES;
            c.sim.check_invariants = true;
            c.sim.seed = 2024;
            let r = Simulation::new(&c, 1).map_err(|e| e.to_string())?.run().map_err(|e| format!("rate {rate}: {e}"))?;
            let r = r.report;
            ensure(!r.drain_timed_out && r.delivered_packets == r.measured_packets, || {
                format!("rate {rate}: {} of {} packets delivered", r.delivered_packets, r.measured_packets)
            })?;
            Ok((rate, r.delivered_packets))
        })
        .collect();
    let mut detail = Vec::new();
    for r in results {
        let (rate, n) = r?;
        detail.push(format!("{rate}: {n} pkts"));
    }
    within(CONSERVATION_BUDGET, start)?;
    Ok(format!("every ledger held each cycle for {CONSERVATION_CYCLES} cycles ({})", detail.join(", ")))
}

fn zero_load_latency() -> Outcome {
    let mut by_hops = [0usize; 7];
    for s in 0..16u16 {
        for d in 0..16u16 {
            if s == d {
                continue;
            }
            let (src, dest) = (Coord::new(s % 4, s / 4), Coord::new(d % 4, d / 4));
            let mut mesh = quiet_mesh(4, 4, RouterParams::default());
            let (latency, trace) = lone_packet(&mut mesh, src, dest, 4);
            let h = src.hops_to(dest);
            // Oracle from the trace: the header leaves each router on the XY port,
            // successive departures 5 cycles apart, ejection 2 cycles after the last.
            let sends: Vec<_> = trace.iter().filter(|e| e.seq == 0 && matches!(e.kind, TraceKind::Send(_))).collect();
            ensure(sends.len() == h as usize, || format!("{src}->{dest}: {} header hops", sends.len()))?;
            for e in &sends {
                let TraceKind::Send(p) = e.kind else { unreachable!() };
                ensure(p == route_compute(dest, e.node), || format!("{src}->{dest}: {p:?} at {}", e.node))?;
            }
            let inject = trace.iter().find(|e| e.kind == TraceKind::Inject && e.seq == 0).map(|e| e.cycle).unwrap();
            let mut expected = inject + 3;
            for e in &sends {
                ensure(e.cycle == expected, || format!("{src}->{dest}: header left {} at {}", e.node, e.cycle))?;
                expected += 5;
            }
            let tail_eject = trace.iter().find(|e| e.kind == TraceKind::Eject && e.seq == 3).map(|e| e.cycle).unwrap();
            let oracle = (expected - 5 + 2 + 3) - inject;
            ensure(tail_eject - inject == oracle && latency == oracle, || {
                format!("{src}->{dest}: latency {latency}, trace oracle {oracle}")
            })?;
            ensure(latency == 5 * u64::from(h) + 3, || format!("{src}->{dest}: {latency} != 5*{h}+3"))?;
            by_hops[h as usize] += 1;
        }
    }
    ensure(by_hops[1..].iter().all(|&n| n > 0), || format!("hop coverage {by_hops:?}"))?;
    Ok(format!("all 240 pairs, h=1..6 ({:?} pairs), latency = 5h+3", &by_hops[1..]))
}

fn arbiter_fairness() -> Outcome {
    let start = Instant::now();
    let mut pairs = 0u64;
    for width in 2..=8usize {
        for last in std::iter::once(None).chain((0..width).map(Some)) {
            for req in 0..(1u64 << width) {
                let mut arb = RoundRobinArbiter::new(width).unwrap();
                if let Some(g) = last {
                    arb.commit(g);
                }
                let expect = modular_search(last, width, req);
                let got = arb.grant(req);
                ensure(got == expect, || format!("w={width} last={last:?} req={req:b}: {got:?} vs {expect:?}"))?;
                let next_last = expect.or(last);
                ensure(arb.last_grant() == next_last, || format!("w={width} state after {req:b}"))?;
                pairs += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for width in [5usize, 16] {
        // every window of `width` grants under full load holds each index once
        let mut arb = RoundRobinArbiter::new(width).unwrap();
        let all = (1u64 << width) - 1;
        let grants: Vec<usize> = (0..width * 200).map(|_| arb.grant(all).unwrap()).collect();
        for w in grants.windows(width) {
            let mut seen = vec![false; width];
            w.iter().for_each(|&g| seen[g] = true);
            ensure(seen.iter().all(|&s| s), || format!("w={width}: window {w:?}"))?;
        }
        // persistent subsets: shares of 1/k within one grant per window
        for _ in 0..50 {
            let subset = rng.gen_range(1..=all);
            let k = subset.count_ones() as i64;
            let window = 40 * k as usize;
            let mut arb = RoundRobinArbiter::new(width).unwrap();
            if rng.gen_bool(0.5) {
                arb.commit(rng.gen_range(0..width));
            }
            let mut count = vec![0i64; width];
            for _ in 0..window {
                count[arb.grant(subset).unwrap()] += 1;
            }
            for i in 0..width {
                let share = if subset & (1 << i) != 0 { 40 } else { 0 };
                ensure((count[i] - share).abs() <= FAIRNESS_SLACK, || {
                    format!("w={width} subset {subset:b}: index {i} got {} of {window}", count[i])
                })?;
            }
        }
    }
    within(ARBITER_BUDGET, start)?;
    Ok(format!("{pairs} (state, request) pairs match modular search; 1/N shares at widths 5, 16"))
}

/// Random VA/SA rounds: grants form a partial matching and never overdraw tokens or credits.
fn allocation_matching() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rows = 16;
    let mut va = VcAllocator::new(rows);
    let mut sa = SwitchAllocator::new(rows);
    let (mut va_grants, mut sa_grants) = (0u64, 0u64);
    for cycle in 0..MATCHING_CYCLES {
        let mut req = EMPTY_REQUESTS;
        for row_reqs in req.iter_mut() {
            for r in 0..rows {
                if rng.gen_bool(0.3) {
                    row_reqs[rng.gen_range(0..NUM_PORTS)] |= 1 << r;
                }
            }
        }
        let mut budget = [0u16; NUM_PORTS];
        for b in &mut budget {
            *b = if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..=16) };
        }
        for (name, grants) in [("VA", va.allocate(&req, &budget)), ("SA", sa.allocate(&req, &budget))] {
            let mut out_used = [0u16; NUM_PORTS];
            let mut in_used = [0u16; NUM_PORTS];
            for g in &grants {
                let (i, o) = (g.in_port.index(), g.out_port.index());
                ensure(req[i][o] & (1 << g.row) != 0, || format!("{name} cycle {cycle}: unrequested grant {g:?}"))?;
                out_used[o] += 1;
                in_used[i] += 1;
            }
            for o in 0..NUM_PORTS {
                ensure(out_used[o] <= 1 && out_used[o] <= budget[o], || {
                    format!("{name} cycle {cycle}: output {o} granted {} with budget {}", out_used[o], budget[o])
                })?;
            }
            if name == "SA" {
                ensure(in_used.iter().all(|&n| n <= 1), || format!("SA cycle {cycle}: input granted twice"))?;
                sa_grants += grants.len() as u64;
            } else {
                va_grants += grants.len() as u64;
            }
        }
    }
    let waits = watchdog()?;
    within(MATCHING_BUDGET, start)?;
    Ok(format!(
        "{MATCHING_CYCLES} random rounds valid ({va_grants} VA, {sa_grants} SA grants); longest wait {} VA / {} SA cycles",
        waits.0, waits.1
    ))
}

/// Persistent requests under full resources: no row waits more than the limit.
fn watchdog() -> Result<(u64, u64), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    let rows = 16;
    let mut longest = (0u64, 0u64);
    for sa_mode in [false, true] {
        let mut va = VcAllocator::new(rows);
        let mut sa = SwitchAllocator::new(rows);
        // waiting[i][r] = Some((out, since))
        let mut waiting = [[None::<(usize, u64)>; 16]; NUM_PORTS];
        for t in 0..MATCHING_CYCLES as u64 {
            for row_waits in &mut waiting {
                for w in row_waits.iter_mut() {
                    if w.is_none() && rng.gen_bool(0.5) {
                        // skewed outputs create hot spots
                        let out = if rng.gen_bool(0.7) { 1 } else { rng.gen_range(0..NUM_PORTS) };
                        *w = Some((out, t));
                    }
                }
            }
            let mut req = EMPTY_REQUESTS;
            for (i, row_waits) in waiting.iter().enumerate() {
                for (r, w) in row_waits.iter().enumerate() {
                    if let Some((o, _)) = w {
                        req[i][*o] |= 1 << r;
                    }
                }
            }
            let full = [16u16; NUM_PORTS];
            let grants = if sa_mode { sa.allocate(&req, &full) } else { va.allocate(&req, &full) };
            for g in grants {
                let (_, since) = waiting[g.in_port.index()][g.row].take().unwrap();
                let slot = if sa_mode { &mut longest.1 } else { &mut longest.0 };
                *slot = (*slot).max(t - since);
            }
            for row_waits in &waiting {
                for &(_, since) in row_waits.iter().flatten() {
                    ensure(t - since < WATCHDOG_LIMIT, || {
                        format!("{} row starved {} cycles", if sa_mode { "SA" } else { "VA" }, t - since)
                    })?;
                }
            }
        }
    }
    Ok(longest)
}

fn layout_equivalence() -> Outcome {
    let start = Instant::now();
    let mut cases = Vec::new();
    for (pattern, rate, mode) in [
        (TrafficPattern::UniformRandom, 0.1, BufferMode::Dynamic),
        (TrafficPattern::UniformRandom, 0.45, BufferMode::Dynamic),
        (TrafficPattern::Transpose, 0.25, BufferMode::Dynamic),
        (TrafficPattern::Hotspot { node: Coord::new(2, 1), fraction: 0.2 }, 0.3, BufferMode::Dynamic),
        (TrafficPattern::UniformRandom, 0.3, BufferMode::Static { vcs: 4, depth: 4 }),
    ] {
        let mut c = SimConfig::default();
        c.traffic.pattern = pattern;
        c.traffic.rate = rate;
        c.router.buffer_mode = mode;
        c.sim.measure = 4000;
        cases.push(c);
    }
    let results: Vec<Result<(f64, f64, f64), String>> = cases
        .par_iter()
        .map(|base| {
            let variant = |layout, storage| {
                let mut c = base.clone();
                c.router.control_layout = layout;
                c.router.table_storage = storage;
                let (log, report) = delivery_log(&c, 1);
                (serde_json::to_vec(&log).unwrap(), report)
            };
            let (log_p, rep_p) = variant(ControlLayout::Proposed, TableStorage::Register);
            let (log_b, rep_b) = variant(ControlLayout::VicharBaseline, TableStorage::Register);
            let (log_m, rep_m) = variant(ControlLayout::Proposed, TableStorage::Memory);
            let label = format!("{} @ {}", base.traffic.pattern.label(), base.traffic.rate);
            ensure(!log_p.is_empty() && log_p == log_b && log_p == log_m, || format!("{label}: delivery logs differ"))?;
            let (p, b, m) = (rep_p.energy.per_flit.unwrap(), rep_b.energy.per_flit.unwrap(), rep_m.energy.per_flit.unwrap());
            ensure(p < b, || format!("{label}: proposed {p:.3} !< baseline {b:.3}"))?;
            ensure(m < p, || format!("{label}: memory {m:.3} !< register {p:.3}"))?;
            ensure(rep_p.events.cross_module_signal == 0 && rep_b.events.cross_module_signal > 0, || {
                format!("{label}: cross-module accounting")
            })?;
            Ok((100.0 * (b - p) / b, 100.0 * (p - m) / p, p))
        })
        .collect();
    let mut gains = Vec::new();
    for r in results {
        let (layout_gain, mem_gain, _) = r?;
        gains.push(format!("-{layout_gain:.1}%/-{mem_gain:.1}%"));
    }
    within(LAYOUT_BUDGET, start)?;
    Ok(format!("{} matched runs, identical logs; proxy/flit layout/memory reductions {}", cases.len(), gains.join(" ")))
}

struct Curve {
    /// (rate, saturated, accepted, avg latency)
    points: Vec<(f64, bool, f64, Option<f64>)>,
}

impl Curve {
    /// Highest offered rate below the first saturated one, with its accepted throughput.
    fn saturation(&self) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for &(rate, sat, acc, _) in &self.points {
            if sat {
                break;
            }
            best = (rate, acc);
        }
        best
    }
}

fn benefit_config(pattern: TrafficPattern, mode: BufferMode) -> SimConfig {
    let mut c = SimConfig::default();
    c.traffic.pattern = pattern;
    c.router.buffer_mode = mode;
    c.sim.warmup = 2000;
    c.sim.measure = 20_000;
    c
}

fn curve(pattern: TrafficPattern, mode: BufferMode) -> Result<Curve, String> {
    let rates: Vec<f64> = (1..=30).map(|i| f64::from(i) * 0.02).collect();
    let reports = experiment::sweep(&benefit_config(pattern, mode), &rates, threads()).map_err(|e| e.to_string())?;
    Ok(Curve { points: reports.iter().map(|r| (r.rate, r.saturated, r.accepted_tput, r.latency.avg)).collect() })
}

fn dynamic_vs_static() -> Outcome {
    let start = Instant::now();
    let static_mode = BufferMode::Static { vcs: 4, depth: 4 };
    let mut detail = Vec::new();
    let mut failures = Vec::new();
    for pattern in [TrafficPattern::Transpose, TrafficPattern::Hotspot { node: Coord::new(1, 1), fraction: 0.2 }] {
        let dynamic = curve(pattern, BufferMode::Dynamic)?;
        let fixed = curve(pattern, static_mode)?;
        let (dyn_rate, dyn_tput) = dynamic.saturation();
        let (st_rate, st_tput) = fixed.saturation();
        let probe = 0.8 * st_tput;
        let mut lat = Vec::new();
        for mode in [BufferMode::Dynamic, static_mode] {
            let mut c = benefit_config(pattern, mode);
            c.traffic.rate = probe;
            c.sim.measure = 50_000;
            let r = experiment::run(&c, 1).map_err(|e| e.to_string())?;
            lat.push(r.latency.avg.unwrap_or(f64::INFINITY));
        }
        let label = pattern.label();
        detail.push(format!(
            "{label}: sat tput dyn {dyn_tput:.3} (rate {dyn_rate:.2}) vs static {st_tput:.3} (rate {st_rate:.2}); \
             latency at {probe:.3}: dyn {:.2} vs static {:.2}",
            lat[0], lat[1]
        ));
        if dyn_tput + BENEFIT_MARGIN < st_tput {
            failures.push(format!("{label}: dynamic saturation throughput below static"));
        }
        if lat[0] > lat[1] + BENEFIT_MARGIN {
            failures.push(format!("{label}: dynamic latency above static at 80% of static saturation"));
        }
    }
    within(BENEFIT_BUDGET, start)?;
    if failures.is_empty() {
        Ok(detail.join("; "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), detail.join("; ")))
    }
}

fn buffer_share_report() -> Outcome {
    let mut shares = Vec::new();
    for (pattern, rate) in [
        (TrafficPattern::UniformRandom, 0.1),
        (TrafficPattern::UniformRandom, 0.4),
        (TrafficPattern::Transpose, 0.2),
    ] {
        let mut c = SimConfig::default();
        c.traffic.pattern = pattern;
        c.traffic.rate = rate;
        let r = experiment::run(&c, 1).map_err(|e| e.to_string())?;
        let share = r.energy.buffer_share.ok_or("no buffer share reported")?;
        let csv = experiment::sweep_csv(std::slice::from_ref(&r));
        ensure(csv.lines().next().unwrap().ends_with("buffer_share"), || "CSV lacks buffer_share".into())?;
        ensure((BUFFER_SHARE_RANGE.0..=BUFFER_SHARE_RANGE.1).contains(&share), || {
            format!("{} @ {rate}: share {share:.3} outside {BUFFER_SHARE_RANGE:?}", pattern.label())
        })?;
        shares.push(format!("{:.1}%", 100.0 * share));
    }
    Ok(format!("buffer share of proxy {} (hardware reference ~65%)", shares.join(", ")))
}

fn determinism() -> Outcome {
    let mut c = SimConfig::default();
    c.sim.measure = 3000;
    c.traffic.pattern = TrafficPattern::Hotspot { node: Coord::new(3, 0), fraction: 0.3 };
    let rates = [0.05, 0.2, 0.4, 0.9];
    let sweep = |t| experiment::sweep(&c, &rates, t).map(|r| experiment::sweep_csv(&r)).map_err(|e| e.to_string());
    let a = sweep(1)?;
    ensure(a == sweep(1)? && a == sweep(4)?, || "sweep CSV differs between invocations or thread counts".into())?;
    let json = |t| {
        let mut c = c.clone();
        c.traffic.rate = 0.35;
        experiment::run(&c, t).map(|r| serde_json::to_string(&r).unwrap()).map_err(|e| e.to_string())
    };
    let j = json(1)?;
    ensure(j == json(1)? && j == json(3)? && j == json(8)?, || "JSON report differs across thread counts".into())?;
    let cmp = |t| {
        experiment::compare(&c, Axis::BufferMode, &[0.1, 0.3], t)
            .map(|rows| experiment::compare_csv(Axis::BufferMode, &rows))
            .map_err(|e| e.to_string())
    };
    ensure(cmp(1)? == cmp(3)?, || "compare CSV differs across thread counts".into())?;
    let mut lc = c.clone();
    lc.traffic.rate = 0.3;
    let (log1, _) = delivery_log(&lc, 1);
    let (log4, _) = delivery_log(&lc, 4);
    ensure(log1 == log4, || "delivery log differs between 1 and 4 stepping threads".into())?;
    Ok(format!("sweep/compare CSV ({} bytes), JSON report and delivery log identical across runs and 1/3/4/8 threads", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("structural fidelity", structural_fidelity),
        ("conservation suite", conservation),
        ("zero-load latency", zero_load_latency),
        ("arbiter fairness", arbiter_fairness),
        ("allocation matching", allocation_matching),
        ("layout equivalence + proxy direction", layout_equivalence),
        ("dynamic vs static benefit", dynamic_vs_static),
        ("buffer-power share report", buffer_share_report),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({secs:.1}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({secs:.1}s) {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
