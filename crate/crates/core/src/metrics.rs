//! Latency/throughput statistics and the control-event energy proxy.
//!
//! The proxy is a weighted count of microarchitectural events. Both control
//! organizations execute the same events; the external-combinational layout
//! additionally pays two cross-module signals (request out, result back) for
//! every control-table access made by an allocator.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlLayout {
    /// Control table, tracers and dispenser live inside the allocators.
    #[default]
    Proposed,
    /// Control units are separate combinational modules the allocators talk to.
    VicharBaseline,
}

impl ControlLayout {
    pub fn label(self) -> &'static str {
        match self {
            ControlLayout::Proposed => "proposed",
            ControlLayout::VicharBaseline => "vichar_baseline",
        }
    }
}

/// Where the control table lives, which sets the table-access weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableStorage {
    #[default]
    Register,
    Memory,
}

impl TableStorage {
    pub fn label(self) -> &'static str {
        match self {
            TableStorage::Register => "register",
            TableStorage::Memory => "memory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TableRead,
    TableWrite,
    /// Control-table read issued by an allocator.
    AllocTableRead,
    /// Control-table write issued by an allocator.
    AllocTableWrite,
    TracerUpdate,
    DispenserUpdate,
    CrossModuleSignal,
    RegisterWrite,
    BufferRead,
    BufferWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlEventCounts {
    pub table_read: u64,
    pub table_write: u64,
    pub tracer_update: u64,
    pub dispenser_update: u64,
    pub cross_module_signal: u64,
    pub register_write: u64,
    pub buffer_read: u64,
    pub buffer_write: u64,
    /// Subset of table reads/writes made by the allocators.
    pub allocator_table_accesses: u64,
}

impl ControlEventCounts {
    #[inline]
    pub fn record_event(&mut self, kind: EventKind, layout: ControlLayout) {
        match kind {
            EventKind::TableRead => self.table_read += 1,
            EventKind::TableWrite => self.table_write += 1,
            EventKind::AllocTableRead | EventKind::AllocTableWrite => {
                if kind == EventKind::AllocTableRead {
                    self.table_read += 1;
                } else {
                    self.table_write += 1;
                }
                self.allocator_table_accesses += 1;
                if layout == ControlLayout::VicharBaseline {
                    self.cross_module_signal += 2;
                }
            }
            EventKind::TracerUpdate => self.tracer_update += 1,
            EventKind::DispenserUpdate => self.dispenser_update += 1,
            EventKind::CrossModuleSignal => self.cross_module_signal += 1,
            EventKind::RegisterWrite => self.register_write += 1,
            EventKind::BufferRead => self.buffer_read += 1,
            EventKind::BufferWrite => self.buffer_write += 1,
        }
    }

    pub fn merge(&mut self, other: &ControlEventCounts) {
        self.table_read += other.table_read;
        self.table_write += other.table_write;
        self.tracer_update += other.tracer_update;
        self.dispenser_update += other.dispenser_update;
        self.cross_module_signal += other.cross_module_signal;
        self.register_write += other.register_write;
        self.buffer_read += other.buffer_read;
        self.buffer_write += other.buffer_write;
        self.allocator_table_accesses += other.allocator_table_accesses;
    }

    /// The same functional event stream as accounted under `layout`.
    pub fn as_layout(&self, layout: ControlLayout) -> ControlEventCounts {
        let mut c = *self;
        c.cross_module_signal = match layout {
            ControlLayout::Proposed => 0,
            ControlLayout::VicharBaseline => 2 * self.allocator_table_accesses,
        };
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub table_read: f64,
    pub table_write: f64,
    pub tracer_update: f64,
    pub dispenser_update: f64,
    pub cross_module_signal: f64,
    pub register_write: f64,
    pub buffer_read: f64,
    pub buffer_write: f64,
}

impl CostWeights {
    pub const fn register_backed() -> Self {
        Self {
            table_read: 1.0,
            table_write: 1.0,
            tracer_update: 1.0,
            dispenser_update: 1.0,
            cross_module_signal: 2.0,
            register_write: 1.0,
            buffer_read: 4.0,
            buffer_write: 4.0,
        }
    }

    /// Control table in embedded memory: table accesses cost half.
    pub const fn memory_backed() -> Self {
        let mut w = Self::register_backed();
        w.table_read = 0.5;
        w.table_write = 0.5;
        w
    }

    pub const fn preset(storage: TableStorage) -> Self {
        match storage {
            TableStorage::Register => Self::register_backed(),
            TableStorage::Memory => Self::memory_backed(),
        }
    }

    /// Scales buffer slot weights linearly with flit width (128 bits = 1x).
    pub fn scaled_for_flit_bits(mut self, bits: u32) -> Self {
        let k = f64::from(bits) / 128.0;
        self.buffer_read *= k;
        self.buffer_write *= k;
        self
    }

    pub fn all_positive(&self) -> bool {
        [
            self.table_read,
            self.table_write,
            self.tracer_update,
            self.dispenser_update,
            self.cross_module_signal,
            self.register_write,
            self.buffer_read,
            self.buffer_write,
        ]
        .iter()
        .all(|&w| w > 0.0 && w.is_finite())
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self::register_backed()
    }
}

pub fn energy_proxy(c: &ControlEventCounts, w: &CostWeights) -> f64 {
    w.table_read * c.table_read as f64
        + w.table_write * c.table_write as f64
        + w.tracer_update * c.tracer_update as f64
        + w.dispenser_update * c.dispenser_update as f64
        + w.cross_module_signal * c.cross_module_signal as f64
        + w.register_write * c.register_write as f64
        + w.buffer_read * c.buffer_read as f64
        + w.buffer_write * c.buffer_write as f64
}

/// Buffer slot reads and writes as a fraction of the whole proxy.
pub fn buffer_share(c: &ControlEventCounts, w: &CostWeights) -> Option<f64> {
    let total = energy_proxy(c, w);
    (total > 0.0).then(|| (w.buffer_read * c.buffer_read as f64 + w.buffer_write * c.buffer_write as f64) / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub avg: Option<f64>,
    pub median: Option<f64>,
    pub p99: Option<f64>,
    pub min: Option<u64>,
    pub max: Option<u64>,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the given samples.
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self { count: 0, avg: None, median: None, p99: None, min: None, max: None };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let rank = |q: f64| sorted[((q * n as f64).ceil() as usize).clamp(1, n) - 1] as f64;
        Self {
            count: n,
            avg: Some(sorted.iter().sum::<u64>() as f64 / n as f64),
            median: Some(rank(0.5)),
            p99: Some(rank(0.99)),
            min: sorted.first().copied(),
            max: sorted.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub layout: ControlLayout,
    pub table_storage: TableStorage,
    pub weights: CostWeights,
    pub total: f64,
    pub per_flit: Option<f64>,
    /// Buffer share of the proxy, set beside the ~65% buffer power share seen on hardware.
    pub buffer_share: Option<f64>,
    pub proposed_per_flit: Option<f64>,
    pub vichar_baseline_per_flit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueGrowth {
    pub first_half_mean: f64,
    pub second_half_mean: f64,
}

impl QueueGrowth {
    /// Source queues (flits per node) rising across the measurement window.
    pub fn is_unstable(&self, packet_len: usize) -> bool {
        self.second_half_mean > 1.25 * self.first_half_mean + packet_len as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rate: f64,
    pub offered_tput: f64,
    pub accepted_tput: f64,
    pub measured_packets: u64,
    pub delivered_packets: u64,
    pub latency: LatencyStats,
    pub saturated: bool,
    pub drain_timed_out: bool,
    pub no_measured_packets: bool,
    pub queue_growth: QueueGrowth,
    /// `[port][occupied slots]`, ports in N, E, S, W, Local order.
    pub occupancy_histogram: Vec<Vec<u64>>,
    /// `[active VC rows]` over all input ports.
    pub active_vc_histogram: Vec<u64>,
    pub events: ControlEventCounts,
    pub energy: EnergyReport,
}

/// Everything gathered by a run, ready to be summarised.
#[derive(Debug, Clone, Default)]
pub struct RunData {
    pub rate: f64,
    pub nodes: usize,
    pub packet_len: usize,
    pub measure_cycles: u64,
    pub layout: ControlLayout,
    pub table_storage: TableStorage,
    pub weights: CostWeights,
    pub latencies: Vec<u64>,
    pub measured_packets: u64,
    pub flits_offered: u64,
    pub flits_accepted: u64,
    pub queue_first_half: f64,
    pub queue_second_half: f64,
    pub occupancy_histogram: Vec<Vec<u64>>,
    pub active_vc_histogram: Vec<u64>,
    pub events: ControlEventCounts,
    pub drain_timed_out: bool,
}

pub fn finalize(data: RunData) -> MetricsReport {
    let denom = (data.nodes as u64 * data.measure_cycles).max(1) as f64;
    let queue_growth =
        QueueGrowth { first_half_mean: data.queue_first_half, second_half_mean: data.queue_second_half };
    let per_flit = |total: f64| (data.flits_accepted > 0).then(|| total / data.flits_accepted as f64);
    let proxy_for = |layout| per_flit(energy_proxy(&data.events.as_layout(layout), &data.weights));
    let total = energy_proxy(&data.events, &data.weights);
    let energy = EnergyReport {
        layout: data.layout,
        table_storage: data.table_storage,
        weights: data.weights,
        total,
        per_flit: per_flit(total),
        buffer_share: buffer_share(&data.events, &data.weights),
        proposed_per_flit: proxy_for(ControlLayout::Proposed),
        vichar_baseline_per_flit: proxy_for(ControlLayout::VicharBaseline),
    };
    MetricsReport {
        rate: data.rate,
        offered_tput: data.flits_offered as f64 / denom,
        accepted_tput: data.flits_accepted as f64 / denom,
        measured_packets: data.measured_packets,
        delivered_packets: data.latencies.len() as u64,
        latency: LatencyStats::from_samples(&data.latencies),
        saturated: data.drain_timed_out || queue_growth.is_unstable(data.packet_len),
        drain_timed_out: data.drain_timed_out,
        no_measured_packets: data.measured_packets == 0,
        queue_growth,
        occupancy_histogram: data.occupancy_histogram,
        active_vc_histogram: data.active_vc_histogram,
        events: data.events,
        energy,
    }
}
