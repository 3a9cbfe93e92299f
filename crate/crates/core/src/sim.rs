//! One simulation run: warmup, measurement window, drain.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{ProtocolError, SimError};
use crate::flit::{Coord, Flit};
use crate::mesh::Mesh;
use crate::metrics::{finalize, ControlEventCounts, MetricsReport, RunData};
use crate::router::Port;
use crate::traffic::Injector;

/// Cycles per router hop at zero load (4 pipeline stages + 1 link cycle).
pub const HOP_CYCLES: u64 = 5;

/// Zero-load latency from injection to tail delivery.
pub fn zero_load_latency(hops: u32, packet_len: usize) -> u64 {
    HOP_CYCLES * u64::from(hops) + packet_len as u64 - 1
}

/// A flit reaching its destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub cycle: u64,
    pub node: Coord,
    pub packet_id: u64,
    pub seq: u16,
}

/// Destination-side checker: order, integrity, no duplicates.
#[derive(Debug, Default)]
pub struct Sink {
    next_seq: HashMap<u64, u16>,
    completed: HashSet<u64>,
}

impl Sink {
    /// Returns the packet latency when `flit` is a tail.
    pub fn accept(&mut self, node: Coord, flit: &Flit, cycle: u64) -> Result<Option<u64>, ProtocolError> {
        let id = flit.packet_id;
        if flit.dest != node {
            return Err(ProtocolError::Invariant(format!("packet {id:#x} for {} delivered at {node}", flit.dest)));
        }
        if self.completed.contains(&id) {
            return Err(ProtocolError::Duplicate { packet: id, seq: flit.seq });
        }
        let expected = self.next_seq.entry(id).or_insert(0);
        if flit.seq < *expected {
            return Err(ProtocolError::Duplicate { packet: id, seq: flit.seq });
        }
        if flit.seq > *expected {
            return Err(ProtocolError::OutOfOrder { packet: id, seq: flit.seq, expected: *expected });
        }
        if flit.payload != Flit::expected_payload(id, flit.seq, flit.width) {
            return Err(ProtocolError::Corrupted { packet: id, seq: flit.seq });
        }
        *expected += 1;
        if !flit.is_tail() {
            return Ok(None);
        }
        self.next_seq.remove(&id);
        self.completed.insert(id);
        let latency = cycle - flit.inject_cycle;
        let bound = zero_load_latency(flit.src.hops_to(flit.dest), usize::from(flit.seq) + 1);
        if latency < bound {
            return Err(ProtocolError::Invariant(format!("packet {id:#x} latency {latency} below bound {bound}")));
        }
        Ok(Some(latency))
    }

    pub fn in_flight(&self) -> usize {
        self.next_seq.len()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: MetricsReport,
    /// Every delivered flit, when requested.
    pub deliveries: Vec<Delivery>,
}

pub struct Simulation {
    config: SimConfig,
    mesh: Mesh,
    pool: Option<rayon::ThreadPool>,
    keep_log: bool,
}

impl Simulation {
    /// `threads > 1` steps the routers of each cycle on a worker pool.
    pub fn new(config: &SimConfig, threads: usize) -> Result<Self, crate::error::ConfigError> {
        config.validate()?;
        let (w, h) = (config.mesh.width, config.mesh.height);
        let t = &config.traffic;
        let mesh = Mesh::new(w, h, config.router_params(), |c| {
            Injector::new(c, w, h, t.pattern, t.rate, t.packet_len, config.flit_width(), config.sim.seed)
        })?;
        let pool = (threads > 1)
            .then(|| rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok())
            .flatten();
        Ok(Self { config: config.clone(), mesh, pool, keep_log: false })
    }

    pub fn with_delivery_log(mut self) -> Self {
        self.keep_log = true;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        let cfg = &self.config;
        let (warmup, measure) = (cfg.sim.warmup, cfg.sim.measure);
        let end = warmup + measure;
        let nodes = usize::from(cfg.mesh.width) * usize::from(cfg.mesh.height);
        let params = cfg.router_params();
        let check = cfg.sim.check_invariants;
        let mut data = RunData {
            rate: cfg.traffic.rate,
            nodes,
            packet_len: cfg.traffic.packet_len,
            measure_cycles: measure,
            layout: cfg.router.control_layout,
            table_storage: cfg.router.table_storage,
            weights: cfg.cost_weights(),
            occupancy_histogram: vec![vec![0; params.num_slots + 1]; Port::ALL.len()],
            active_vc_histogram: vec![0; params.rows_per_port() + 1],
            ..RunData::default()
        };
        let mut sink = Sink::default();
        let mut deliveries = Vec::new();
        let mut measured_delivered = 0u64;
        let (mut queue_first, mut queue_second) = (0u64, 0u64);
        let half = warmup + measure / 2;
        loop {
            let cycle = self.mesh.cycle();
            if cycle == warmup {
                self.mesh.set_counting(true);
            }
            if cycle == end {
                self.mesh.set_counting(false);
            }
            if cycle >= end {
                if measured_delivered == data.measured_packets {
                    break;
                }
                if cycle >= end + cfg.sim.drain_limit {
                    data.drain_timed_out = true;
                    break;
                }
            }
            let in_window = (warmup..end).contains(&cycle);
            let summary = self.mesh.step(self.pool.as_ref())?;
            self.mesh.watch_progress(&summary)?;
            if check {
                self.mesh.check_invariants()?;
            }
            if in_window {
                for &(_, len) in &summary.created {
                    data.measured_packets += 1;
                    data.flits_offered += len as u64;
                }
            }
            for (node, flit) in &summary.delivered {
                let latency = sink
                    .accept(*node, flit, cycle)
                    .map_err(|source| SimError { cycle, router: *node, source })?;
                if self.keep_log {
                    deliveries.push(Delivery { cycle, node: *node, packet_id: flit.packet_id, seq: flit.seq });
                }
                if in_window {
                    data.flits_accepted += 1;
                }
                if let Some(latency) = latency {
                    if (warmup..end).contains(&flit.inject_cycle) {
                        data.latencies.push(latency);
                        measured_delivered += 1;
                    }
                }
            }
            if in_window {
                let queued = self.mesh.source_queue_flits();
                if cycle < half {
                    queue_first += queued;
                } else {
                    queue_second += queued;
                }
                for node in self.mesh.nodes() {
                    for p in Port::ALL {
                        let unit = node.router.input(p);
                        data.occupancy_histogram[p.index()][unit.ubs.occupied()] += 1;
                        data.active_vc_histogram[unit.table.active_count()] += 1;
                    }
                }
            }
        }
        let first_cycles = (half - warmup).max(1) as f64 * nodes as f64;
        let second_cycles = (end - half).max(1) as f64 * nodes as f64;
        data.queue_first_half = queue_first as f64 / first_cycles;
        data.queue_second_half = queue_second as f64 / second_cycles;
        let mut events = ControlEventCounts::default();
        for node in self.mesh.nodes_mut() {
            events.merge(&node.router.take_events());
        }
        data.events = events;
        Ok(RunOutcome { report: finalize(data), deliveries })
    }
}
