//! Five-port input-buffered router with a four-stage pipeline:
//! buffer write + route compute, VC allocation, switch allocation, and
//! switch traversal (the flit is put on the output link, which adds one
//! more cycle before the neighbour sees it).
//!
//! Flits addressed to this router's node leave the network as soon as they
//! arrive on a network port; they never occupy a buffer slot here.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::allocator::{Grant, RequestMatrix, SwitchAllocator, VcAllocator, EMPTY_REQUESTS};
use crate::error::ProtocolError;
use crate::flit::{Coord, Flit};
use crate::metrics::{ControlEventCounts, ControlLayout, EventKind};
use crate::ubs::UnifiedBuffer;
use crate::vc_control::{StaticVcTracker, TokenDispenser, VcAvailabilityTracer, VcControlTable};

pub const NUM_PORTS: usize = 5;

/// Router ports. North is the neighbour with the smaller `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    North,
    East,
    South,
    West,
    Local,
}

impl Port {
    pub const ALL: [Port; NUM_PORTS] = [Port::North, Port::East, Port::South, Port::West, Port::Local];
    pub const NETWORK: [Port; 4] = [Port::North, Port::East, Port::South, Port::West];

    #[inline]
    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Port {
        Port::ALL[i]
    }

    /// The port on the neighbouring router that faces this one.
    pub const fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            Port::Local => Port::Local,
        }
    }

    /// Neighbour coordinates through this port, if inside a `width`x`height` mesh.
    pub fn neighbour(self, at: Coord, width: u16, height: u16) -> Option<Coord> {
        let (x, y) = (at.x, at.y);
        match self {
            Port::North => y.checked_sub(1).map(|y| Coord::new(x, y)),
            Port::South => (y + 1 < height).then(|| Coord::new(x, y + 1)),
            Port::West => x.checked_sub(1).map(|x| Coord::new(x, y)),
            Port::East => (x + 1 < width).then(|| Coord::new(x + 1, y)),
            Port::Local => None,
        }
    }
}

/// XY dimension-order routing.
pub fn route_compute(dest: Coord, at: Coord) -> Port {
    use std::cmp::Ordering::*;
    match (dest.x.cmp(&at.x), dest.y.cmp(&at.y)) {
        (Greater, _) => Port::East,
        (Less, _) => Port::West,
        (Equal, Greater) => Port::South,
        (Equal, Less) => Port::North,
        (Equal, Equal) => Port::Local,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferMode {
    /// One shared slot pool per port; a VC row per slot.
    Dynamic,
    /// `vcs` fixed queues of `depth` slots each.
    Static { vcs: u16, depth: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouterParams {
    pub num_slots: usize,
    pub buffer_mode: BufferMode,
    pub layout: ControlLayout,
}

impl RouterParams {
    pub fn rows_per_port(&self) -> usize {
        match self.buffer_mode {
            BufferMode::Dynamic => self.num_slots,
            BufferMode::Static { vcs, .. } => usize::from(vcs),
        }
    }

    /// Credit pools per output: one shared pool, or one per downstream VC.
    pub fn credit_pools(&self) -> usize {
        match self.buffer_mode {
            BufferMode::Dynamic => 1,
            BufferMode::Static { vcs, .. } => usize::from(vcs),
        }
    }

    /// Initial credits held for one downstream pool.
    pub fn pool_capacity(&self) -> u16 {
        match self.buffer_mode {
            BufferMode::Dynamic => self.num_slots as u16,
            BufferMode::Static { depth, .. } => depth,
        }
    }

    /// Downstream VC resources per link (tokens or static VCs).
    pub fn vc_capacity(&self) -> u16 {
        self.rows_per_port() as u16
    }
}

impl Default for RouterParams {
    fn default() -> Self {
        Self { num_slots: 16, buffer_mode: BufferMode::Dynamic, layout: ControlLayout::Proposed }
    }
}

/// A flit on a link. `vc` names the downstream VC under static buffering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireFlit {
    pub flit: Flit,
    pub vc: Option<u16>,
}

/// Reverse-channel flow-control signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    /// One buffer slot freed (in VC `vc` under static buffering).
    Credit { vc: Option<u16> },
    /// A packet's tail left the downstream VC row.
    VcRetired { vc: Option<u16> },
}

pub type Signals = SmallVec<[Signal; 4]>;

#[derive(Debug, Clone, Default)]
pub struct RouterInputs {
    /// Flit arriving on each input port.
    pub flits: [Option<WireFlit>; NUM_PORTS],
    /// Signals from the downstream side of each output port.
    pub signals: [Signals; NUM_PORTS],
}

#[derive(Debug, Clone, Default)]
pub struct RouterOutputs {
    /// Flit leaving on each output port.
    pub flits: [Option<WireFlit>; NUM_PORTS],
    /// Signals toward the upstream side of each input port.
    pub signals: [Signals; NUM_PORTS],
    /// Flits that reached their destination node this cycle.
    pub ejected: SmallVec<[Flit; 4]>,
}

impl RouterOutputs {
    pub fn is_empty(&self) -> bool {
        self.flits.iter().all(Option::is_none) && self.signals.iter().all(|s| s.is_empty()) && self.ejected.is_empty()
    }
}

/// A switch-allocation result latched for the traversal stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transfer {
    pub in_port: Port,
    pub row: usize,
    pub slot: usize,
    pub out_port: Port,
    pub packet_id: u64,
    pub downstream_vc: Option<u16>,
    pub retired: bool,
}

#[derive(Debug, Clone)]
pub struct InputUnit {
    pub ubs: UnifiedBuffer,
    pub table: VcControlTable,
    pub dispenser: TokenDispenser,
}

/// Counts of the allocation hardware, for structural checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RouterStructure {
    pub ports: usize,
    pub slots_per_port: usize,
    pub rows_per_port: usize,
    pub va_stage1: usize,
    pub va_stage1_width: usize,
    pub va_stage2: usize,
    pub va_stage2_width: usize,
    pub sa_stage1: usize,
    pub sa_stage1_width: usize,
    pub sa_stage2: usize,
    pub sa_stage2_width: usize,
}

#[derive(Debug, Clone)]
pub struct Router {
    coords: Coord,
    params: RouterParams,
    /// Input `p` has an upstream sender (neighbour or the node's injector).
    linked_in: [bool; NUM_PORTS],
    /// Output `p` leads to a neighbour.
    linked_out: [bool; NUM_PORTS],
    inputs: Vec<InputUnit>,
    tracer: VcAvailabilityTracer,
    static_vcs: StaticVcTracker,
    /// `credits[out][pool]`.
    credits: Vec<Vec<u16>>,
    va: VcAllocator,
    sa: SwitchAllocator,
    pending_st: SmallVec<[Transfer; NUM_PORTS]>,
    events: ControlEventCounts,
    counting: bool,
}

impl Router {
    /// `neighbours[p]` tells whether network port `p` has a neighbour; the local port is always connected.
    pub fn new(coords: Coord, params: RouterParams, neighbours: [bool; NUM_PORTS]) -> Self {
        let rows = params.rows_per_port();
        let mut linked_in = neighbours;
        linked_in[Port::Local.index()] = true;
        let mut linked_out = neighbours;
        linked_out[Port::Local.index()] = false;
        Self {
            coords,
            params,
            linked_in,
            linked_out,
            inputs: (0..NUM_PORTS)
                .map(|_| InputUnit {
                    ubs: UnifiedBuffer::new(params.num_slots),
                    table: VcControlTable::new(rows, params.num_slots),
                    dispenser: TokenDispenser::new(rows),
                })
                .collect(),
            tracer: VcAvailabilityTracer::new(params.vc_capacity()),
            static_vcs: StaticVcTracker::new(params.vc_capacity()),
            credits: (0..NUM_PORTS).map(|_| vec![params.pool_capacity(); params.credit_pools()]).collect(),
            va: VcAllocator::new(rows),
            sa: SwitchAllocator::new(rows),
            pending_st: SmallVec::new(),
            events: ControlEventCounts::default(),
            counting: false,
        }
    }

    pub fn coords(&self) -> Coord {
        self.coords
    }

    pub fn params(&self) -> &RouterParams {
        &self.params
    }

    pub fn input(&self, port: Port) -> &InputUnit {
        &self.inputs[port.index()]
    }

    pub fn is_linked_out(&self, port: Port) -> bool {
        self.linked_out[port.index()]
    }

    pub fn is_linked_in(&self, port: Port) -> bool {
        self.linked_in[port.index()]
    }

    pub fn credits(&self, out: Port) -> &[u16] {
        &self.credits[out.index()]
    }

    /// Free downstream VC resources for `out` (tokens, or idle static VCs).
    pub fn free_downstream_vcs(&self, out: Port) -> u16 {
        match self.params.buffer_mode {
            BufferMode::Dynamic => self.tracer.available(out),
            BufferMode::Static { .. } => self.static_vcs.free_count(out),
        }
    }

    pub fn pending_transfers(&self) -> &[Transfer] {
        &self.pending_st
    }

    pub fn events(&self) -> &ControlEventCounts {
        &self.events
    }

    pub fn set_counting(&mut self, on: bool) {
        self.counting = on;
    }

    pub fn take_events(&mut self) -> ControlEventCounts {
        std::mem::take(&mut self.events)
    }

    pub fn occupied_slots(&self) -> usize {
        self.inputs.iter().map(|u| u.ubs.occupied()).sum()
    }

    pub fn structure(&self) -> RouterStructure {
        RouterStructure {
            ports: self.inputs.len(),
            slots_per_port: self.params.num_slots,
            rows_per_port: self.params.rows_per_port(),
            va_stage1: self.va.stage1().len(),
            va_stage1_width: self.va.stage1()[0].width(),
            va_stage2: self.va.stage2().len(),
            va_stage2_width: self.va.stage2()[0].width(),
            sa_stage1: self.sa.stage1().len(),
            sa_stage1_width: self.sa.stage1()[0].width(),
            sa_stage2: self.sa.stage2().len(),
            sa_stage2_width: self.sa.stage2()[0].width(),
        }
    }

    /// Nothing buffered, nothing latched, all credits and VC resources home.
    pub fn is_quiescent(&self) -> bool {
        self.pending_st.is_empty()
            && self.inputs.iter().all(|u| u.ubs.occupied() == 0 && u.table.active_count() == 0)
            && Port::NETWORK.iter().filter(|p| self.linked_out[p.index()]).all(|&p| {
                self.free_downstream_vcs(p) == self.params.vc_capacity()
                    && self.credits[p.index()].iter().all(|&c| c == self.params.pool_capacity())
            })
    }

    #[inline]
    fn record(&mut self, kind: EventKind) {
        if self.counting {
            self.events.record_event(kind, self.params.layout);
        }
    }

    fn slot_region(&self, vc: Option<u16>) -> Result<u64, ProtocolError> {
        match self.params.buffer_mode {
            BufferMode::Dynamic => Ok(u64::MAX),
            BufferMode::Static { vcs, depth } => {
                let vc = vc.ok_or(ProtocolError::MissingVcId)?;
                if vc >= vcs {
                    return Err(ProtocolError::BadVcId { vc });
                }
                let d = u32::from(depth);
                let ones = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
                Ok(ones << (u32::from(vc) * d))
            }
        }
    }

    /// VC id of an input-side slot, as named in credits (static buffering only).
    fn slot_vc(&self, slot: usize) -> Option<u16> {
        match self.params.buffer_mode {
            BufferMode::Dynamic => None,
            BufferMode::Static { depth, .. } => Some((slot / usize::from(depth)) as u16),
        }
    }

    fn row_vc(&self, row: usize) -> Option<u16> {
        match self.params.buffer_mode {
            BufferMode::Dynamic => None,
            BufferMode::Static { .. } => Some(row as u16),
        }
    }

    /// Advances the router by one cycle.
    pub fn cycle(&mut self, now: u64, inputs: RouterInputs) -> Result<RouterOutputs, ProtocolError> {
        let mut out = RouterOutputs::default();
        let RouterInputs { flits, signals } = inputs;
        self.apply_signals(&signals)?;
        for port in Port::ALL {
            if let Some(wf) = flits[port.index()] {
                self.buffer_write(now, port, wf, &mut out)?;
            }
        }
        self.vc_allocate(now)?;
        let scheduled = self.switch_allocate(now)?;
        self.switch_traverse(&mut out)?;
        self.pending_st = scheduled;
        Ok(out)
    }

    fn apply_signals(&mut self, signals: &[Signals; NUM_PORTS]) -> Result<(), ProtocolError> {
        for port in Port::ALL {
            for &sig in &signals[port.index()] {
                match sig {
                    Signal::Credit { vc } => {
                        let pool = usize::from(vc.unwrap_or(0));
                        let cap = self.params.pool_capacity();
                        let c = self.credits[port.index()]
                            .get_mut(pool)
                            .ok_or(ProtocolError::BadVcId { vc: pool as u16 })?;
                        if *c >= cap {
                            return Err(ProtocolError::CreditOverflow { port, capacity: cap });
                        }
                        *c += 1;
                        self.record(EventKind::RegisterWrite);
                    }
                    Signal::VcRetired { vc } => {
                        match (self.params.buffer_mode, vc) {
                            (BufferMode::Dynamic, _) => self.tracer.release_token(port)?,
                            (BufferMode::Static { .. }, Some(vc)) => self.static_vcs.release(port, vc)?,
                            (BufferMode::Static { .. }, None) => return Err(ProtocolError::MissingVcId),
                        }
                        self.record(EventKind::TracerUpdate);
                    }
                }
            }
        }
        Ok(())
    }

    fn buffer_write(&mut self, now: u64, port: Port, wf: WireFlit, out: &mut RouterOutputs) -> Result<(), ProtocolError> {
        if !self.linked_in[port.index()] {
            return Err(ProtocolError::UnconnectedInput { port });
        }
        let flit = wf.flit;
        let upstream = &mut out.signals[port.index()];
        if port != Port::Local && flit.dest == self.coords {
            // Ejection: the slot credit and, after the tail, the VC go straight back.
            upstream.push(Signal::Credit { vc: wf.vc });
            if flit.is_tail() {
                upstream.push(Signal::VcRetired { vc: wf.vc });
            }
            out.ejected.push(flit);
            return Ok(());
        }
        let region = self.slot_region(wf.vc)?;
        let unit = &mut self.inputs[port.index()];
        let slot = unit.ubs.write_flit_in(flit, region, now)?;
        self.record(EventKind::BufferWrite);
        self.record(EventKind::TracerUpdate);
        if flit.is_header() {
            let unit = &mut self.inputs[port.index()];
            let row = match wf.vc {
                Some(vc) => {
                    unit.table.admit_header_at(&mut unit.dispenser, usize::from(vc), flit.packet_id, slot)?;
                    usize::from(vc)
                }
                None => unit.table.admit_header(&mut unit.dispenser, flit.packet_id, slot)?,
            };
            let route = route_compute(flit.dest, self.coords);
            if !self.linked_out[route.index()] {
                return Err(ProtocolError::DeadPort { packet: flit.packet_id, port: route });
            }
            self.inputs[port.index()].table.row_mut(row).out_port = Some(route);
            self.record(EventKind::TableWrite);
            self.record(EventKind::DispenserUpdate);
        } else {
            let unit = &mut self.inputs[port.index()];
            let row = unit.table.append_follower(flit.packet_id, flit.seq, flit.is_tail(), slot)?;
            if let Some(vc) = wf.vc {
                if usize::from(vc) != row {
                    return Err(ProtocolError::BadVcId { vc });
                }
            }
            self.record(EventKind::TableRead);
            self.record(EventKind::TableWrite);
        }
        Ok(())
    }

    fn vc_allocate(&mut self, now: u64) -> Result<(), ProtocolError> {
        let mut requests: RequestMatrix = EMPTY_REQUESTS;
        let mut any = false;
        for (i, unit) in self.inputs.iter().enumerate() {
            for (r, row) in unit.table.rows().iter().enumerate() {
                if !row.header_waiting() || row.downstream_granted {
                    continue;
                }
                let (Some(o), Some(head)) = (row.out_port, row.head_slot()) else { continue };
                if unit.ubs.written_at(head) < now {
                    requests[i][o.index()] |= 1 << r;
                    any = true;
                }
            }
        }
        if !any {
            return Ok(());
        }
        let mut available = [0u16; NUM_PORTS];
        for p in Port::ALL {
            available[p.index()] = self.free_downstream_vcs(p);
        }
        for Grant { in_port, row, out_port } in self.va.allocate(&requests, &available) {
            let vc = match self.params.buffer_mode {
                BufferMode::Dynamic => {
                    self.tracer.consume_token(out_port)?;
                    None
                }
                BufferMode::Static { .. } => Some(self.static_vcs.acquire_lowest(out_port)?),
            };
            let r = self.inputs[in_port.index()].table.row_mut(row);
            r.downstream_granted = true;
            r.downstream_vc = vc;
            r.granted_at = now;
            self.record(EventKind::AllocTableWrite);
            self.record(EventKind::TracerUpdate);
            self.record(EventKind::DispenserUpdate);
        }
        Ok(())
    }

    fn switch_allocate(&mut self, now: u64) -> Result<SmallVec<[Transfer; NUM_PORTS]>, ProtocolError> {
        let mut requests: RequestMatrix = EMPTY_REQUESTS;
        let mut any = false;
        for (i, unit) in self.inputs.iter().enumerate() {
            for (r, row) in unit.table.rows().iter().enumerate() {
                if !row.is_active() || !row.downstream_granted || row.granted_at >= now {
                    continue;
                }
                let (Some(o), Some(head)) = (row.out_port, row.head_slot()) else { continue };
                let pool = usize::from(row.downstream_vc.unwrap_or(0));
                if unit.ubs.written_at(head) < now && self.credits[o.index()][pool] > 0 {
                    requests[i][o.index()] |= 1 << r;
                    any = true;
                }
            }
        }
        let mut scheduled = SmallVec::new();
        if !any {
            return Ok(scheduled);
        }
        // Per-VC credits were already checked row by row above.
        let mut budget = [1u16; NUM_PORTS];
        if self.params.buffer_mode == BufferMode::Dynamic {
            for p in Port::ALL {
                budget[p.index()] = self.credits[p.index()][0];
            }
        }
        for Grant { in_port, row, out_port } in self.sa.allocate(&requests, &budget) {
            let unit = &mut self.inputs[in_port.index()];
            let r = unit.table.row(row);
            let downstream_vc = r.downstream_vc;
            let packet_id = r.packet_id;
            let dq = unit.table.dequeue_head(&mut unit.dispenser, row)?;
            let c = &mut self.credits[out_port.index()][usize::from(downstream_vc.unwrap_or(0))];
            *c = c.checked_sub(1).ok_or(ProtocolError::CreditUnderflow { port: out_port })?;
            self.record(EventKind::AllocTableRead);
            self.record(EventKind::AllocTableWrite);
            self.record(EventKind::RegisterWrite);
            if dq.retired {
                self.record(EventKind::DispenserUpdate);
            }
            scheduled.push(Transfer {
                in_port,
                row,
                slot: dq.slot,
                out_port,
                packet_id,
                downstream_vc,
                retired: dq.retired,
            });
        }
        Ok(scheduled)
    }

    fn switch_traverse(&mut self, out: &mut RouterOutputs) -> Result<(), ProtocolError> {
        let transfers = std::mem::take(&mut self.pending_st);
        for t in &transfers {
            let flit = self.inputs[t.in_port.index()].ubs.read_and_free(t.slot)?;
            self.record(EventKind::BufferRead);
            self.record(EventKind::TracerUpdate);
            let lane = &mut out.flits[t.out_port.index()];
            if lane.is_some() {
                return Err(ProtocolError::Invariant(format!("two flits scheduled on output {:?}", t.out_port)));
            }
            *lane = Some(WireFlit { flit, vc: t.downstream_vc });
            let upstream = &mut out.signals[t.in_port.index()];
            upstream.push(Signal::Credit { vc: self.slot_vc(t.slot) });
            if t.retired {
                upstream.push(Signal::VcRetired { vc: self.row_vc(t.row) });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xy_routes() {
        assert_eq!(route_compute(Coord::new(3, 1), Coord::new(1, 1)), Port::East);
        assert_eq!(route_compute(Coord::new(2, 0), Coord::new(2, 2)), Port::North);
        assert_eq!(route_compute(Coord::new(2, 3), Coord::new(2, 2)), Port::South);
        assert_eq!(route_compute(Coord::new(0, 3), Coord::new(2, 2)), Port::West);
        assert_eq!(route_compute(Coord::new(2, 2), Coord::new(2, 2)), Port::Local);
    }

    #[test]
    fn port_geometry() {
        for p in Port::ALL {
            assert_eq!(p.opposite().opposite(), p);
            assert_eq!(Port::from_index(p.index()), p);
        }
        assert_eq!(Port::North.neighbour(Coord::new(0, 0), 4, 4), None);
        assert_eq!(Port::East.neighbour(Coord::new(0, 0), 4, 4), Some(Coord::new(1, 0)));
        assert_eq!(Port::South.neighbour(Coord::new(0, 3), 4, 4), None);
    }

    #[test]
    fn idle_router_stays_idle() {
        let mut r = Router::new(Coord::new(1, 1), RouterParams::default(), [true; NUM_PORTS]);
        for now in 0..10 {
            let out = r.cycle(now, RouterInputs::default()).unwrap();
            assert!(out.is_empty());
        }
        assert!(r.is_quiescent());
    }

    #[test]
    fn structure_counts() {
        let r = Router::new(Coord::new(0, 0), RouterParams::default(), [true; NUM_PORTS]);
        let s = r.structure();
        assert_eq!((s.va_stage1, s.va_stage1_width, s.va_stage2, s.va_stage2_width), (25, 16, 5, 5));
        assert_eq!((s.sa_stage1, s.sa_stage1_width, s.sa_stage2, s.sa_stage2_width), (5, 16, 5, 5));
        assert_eq!((s.ports, s.slots_per_port, s.rows_per_port), (5, 16, 16));
    }
}
