//! Experiment configuration: JSON file, defaults for every key, and flag overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::flit::FlitWidth;
use crate::metrics::{ControlLayout, CostWeights, TableStorage};
use crate::router::{BufferMode, RouterParams};
use crate::traffic::TrafficPattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub width: u16,
    pub height: u16,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { width: 4, height: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub num_slots: usize,
    pub flit_bits: u32,
    pub buffer_mode: BufferMode,
    pub control_layout: ControlLayout,
    pub table_storage: TableStorage,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self {
            num_slots: 16,
            flit_bits: 128,
            buffer_mode: BufferMode::Dynamic,
            control_layout: ControlLayout::Proposed,
            table_storage: TableStorage::Register,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub pattern: TrafficPattern,
    /// Offered load, flits/node/cycle.
    pub rate: f64,
    pub packet_len: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { pattern: TrafficPattern::UniformRandom, rate: 0.1, packet_len: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub warmup: u64,
    pub measure: u64,
    /// Cycles allowed after the window for measured packets to arrive.
    pub drain_limit: u64,
    /// Scan every ledger after each cycle (slow).
    pub check_invariants: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 1, warmup: 1000, measure: 5000, drain_limit: 20_000, check_invariants: false }
    }
}

/// Per-event weight overrides applied on top of the storage preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightOverrides {
    pub table_read: Option<f64>,
    pub table_write: Option<f64>,
    pub tracer_update: Option<f64>,
    pub dispenser_update: Option<f64>,
    pub cross_module_signal: Option<f64>,
    pub register_write: Option<f64>,
    pub buffer_read: Option<f64>,
    pub buffer_write: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mesh: MeshConfig,
    pub router: RouterConfig,
    pub traffic: TrafficConfig,
    pub sim: RunConfig,
    pub weights: WeightOverrides,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub rate: Option<f64>,
    pub seed: Option<u64>,
    pub width: Option<u16>,
    pub height: Option<u16>,
    pub num_slots: Option<usize>,
    pub flit_bits: Option<u32>,
    pub packet_len: Option<usize>,
    pub warmup: Option<u64>,
    pub measure: Option<u64>,
    pub drain_limit: Option<u64>,
    pub buffer_mode: Option<BufferMode>,
    pub control_layout: Option<ControlLayout>,
    pub table_storage: Option<TableStorage>,
    pub pattern: Option<TrafficPattern>,
    pub check_invariants: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, c: &mut SimConfig) {
        macro_rules! set {
            ($field:ident => $($path:tt)+) => {
                if let Some(v) = self.$field.clone() {
                    c.$($path)+ = v;
                }
            };
        }
        set!(rate => traffic.rate);
        set!(seed => sim.seed);
        set!(width => mesh.width);
        set!(height => mesh.height);
        set!(num_slots => router.num_slots);
        set!(flit_bits => router.flit_bits);
        set!(packet_len => traffic.packet_len);
        set!(warmup => sim.warmup);
        set!(measure => sim.measure);
        set!(drain_limit => sim.drain_limit);
        set!(buffer_mode => router.buffer_mode);
        set!(control_layout => router.control_layout);
        set!(table_storage => router.table_storage);
        set!(pattern => traffic.pattern);
        set!(check_invariants => sim.check_invariants);
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        use ConfigError as E;
        let MeshConfig { width, height } = self.mesh;
        if width < 2 {
            return Err(E::invalid("mesh.width", format!("must be >= 2, got {width}")));
        }
        if height < 2 {
            return Err(E::invalid("mesh.height", format!("must be >= 2, got {height}")));
        }
        if u32::from(width) * u32::from(height) > 1 << 16 {
            return Err(E::invalid("mesh", "at most 65536 nodes"));
        }
        let n = self.router.num_slots;
        if !(4..=64).contains(&n) || !n.is_power_of_two() {
            return Err(E::invalid("router.num_slots", format!("must be a power of two in 4..=64, got {n}")));
        }
        FlitWidth::try_from(self.router.flit_bits)
            .map_err(|_| E::invalid("router.flit_bits", format!("must be 16, 32, 64 or 128, got {}", self.router.flit_bits)))?;
        if let BufferMode::Static { vcs, depth } = self.router.buffer_mode {
            if vcs == 0 || depth == 0 {
                return Err(E::invalid("router.buffer_mode", "static vcs and depth must be positive"));
            }
            if usize::from(vcs) * usize::from(depth) != n {
                return Err(E::invalid(
                    "router.buffer_mode",
                    format!("static vcs*depth must equal num_slots: {vcs}*{depth} != {n}"),
                ));
            }
        }
        let rate = self.traffic.rate;
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(E::invalid("traffic.rate", format!("must be in (0, 1], got {rate}")));
        }
        let len = self.traffic.packet_len;
        if !(2..=4096).contains(&len) {
            return Err(E::invalid("traffic.packet_len", format!("must be in 2..=4096, got {len}")));
        }
        if let TrafficPattern::Hotspot { node, fraction } = self.traffic.pattern {
            if !node.within(width, height) {
                return Err(E::invalid("traffic.pattern.node", format!("{node} outside {width}x{height} mesh")));
            }
            if !(0.0..=1.0).contains(&fraction) {
                return Err(E::invalid("traffic.pattern.fraction", format!("must be in [0, 1], got {fraction}")));
            }
        }
        if self.sim.measure == 0 {
            return Err(E::invalid("sim.measure", "must be positive"));
        }
        if self.sim.drain_limit == 0 {
            return Err(E::invalid("sim.drain_limit", "must be positive"));
        }
        let w = &self.weights;
        for (key, v) in [
            ("weights.table_read", w.table_read),
            ("weights.table_write", w.table_write),
            ("weights.tracer_update", w.tracer_update),
            ("weights.dispenser_update", w.dispenser_update),
            ("weights.cross_module_signal", w.cross_module_signal),
            ("weights.register_write", w.register_write),
            ("weights.buffer_read", w.buffer_read),
            ("weights.buffer_write", w.buffer_write),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(E::invalid(key, format!("must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    pub fn flit_width(&self) -> FlitWidth {
        FlitWidth::try_from(self.router.flit_bits).unwrap_or_default()
    }

    pub fn router_params(&self) -> RouterParams {
        RouterParams {
            num_slots: self.router.num_slots,
            buffer_mode: self.router.buffer_mode,
            layout: self.router.control_layout,
        }
    }

    /// Storage preset, scaled for flit width, then explicit overrides.
    pub fn cost_weights(&self) -> CostWeights {
        let mut w = CostWeights::preset(self.router.table_storage).scaled_for_flit_bits(self.router.flit_bits);
        let o = &self.weights;
        let fields = [
            (&mut w.table_read, o.table_read),
            (&mut w.table_write, o.table_write),
            (&mut w.tracer_update, o.tracer_update),
            (&mut w.dispenser_update, o.dispenser_update),
            (&mut w.cross_module_signal, o.cross_module_signal),
            (&mut w.register_write, o.register_write),
            (&mut w.buffer_read, o.buffer_read),
            (&mut w.buffer_write, o.buffer_write),
        ];
        for (slot, v) in fields {
            if let Some(v) = v {
                *slot = v;
            }
        }
        w
    }
}

/// Parses and validates a JSON document. An empty document yields the defaults.
pub fn parse_config(text: &str, overrides: &Overrides) -> Result<SimConfig, ConfigError> {
    let mut config: SimConfig = if text.trim().is_empty() { SimConfig::default() } else { serde_json::from_str(text)? };
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<SimConfig, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?,
        None => String::new(),
    };
    parse_config(&text, overrides)
}
