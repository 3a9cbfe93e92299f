//! k×k mesh of routers stepped in two phases per cycle.
//!
//! Phase A runs every node (injector, network interface, router) against
//! its latched inputs only. Phase B moves the produced flits and signals
//! into the registers of the neighbours. A flit put on a link in cycle `t`
//! spends cycle `t+1` traversing it and is written at the receiver in cycle
//! `t+2`; reverse signals are applied one cycle after they are emitted.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;

use crate::error::{ProtocolError, SimError};
use crate::flit::{Coord, Flit, FlitType, Packet};
use crate::router::{BufferMode, Port, Router, RouterInputs, RouterOutputs, RouterParams, Signal, Signals, WireFlit, NUM_PORTS};
use crate::traffic::Injector;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkRegs {
    pub in_transit: Option<WireFlit>,
    pub arriving: Option<WireFlit>,
}

impl LinkRegs {
    fn flits(&self) -> impl Iterator<Item = &WireFlit> {
        self.in_transit.iter().chain(self.arriving.iter())
    }
}

/// Source queue plus the injection side of the node's local link. It obeys
/// the same credit and VC rules as a router output port.
#[derive(Debug, Clone)]
pub struct NetworkInterface {
    params: RouterParams,
    queue: VecDeque<Packet>,
    /// Flits of the front packet already handed to the router.
    sent: usize,
    /// VC used by the front packet (static buffering).
    vc: Option<u16>,
    credits: Vec<u16>,
    tokens: u16,
    busy_vcs: u64,
}

impl NetworkInterface {
    pub fn new(params: RouterParams) -> Self {
        Self {
            params,
            queue: VecDeque::new(),
            sent: 0,
            vc: None,
            credits: vec![params.pool_capacity(); params.credit_pools()],
            tokens: params.vc_capacity(),
            busy_vcs: 0,
        }
    }

    pub fn enqueue(&mut self, packet: Packet) {
        self.queue.push_back(packet);
    }

    pub fn queued_packets(&self) -> usize {
        self.queue.len()
    }

    pub fn queued_flits(&self) -> usize {
        self.queue.iter().map(Packet::len).sum::<usize>() - self.sent
    }

    /// Packet whose header is in the router but whose tail is still queued here.
    pub fn in_progress(&self) -> Option<u64> {
        (self.sent > 0).then(|| self.queue.front().map(|p| p.id)).flatten()
    }

    pub fn credits(&self) -> &[u16] {
        &self.credits
    }

    pub fn free_vcs(&self) -> u16 {
        match self.params.buffer_mode {
            BufferMode::Dynamic => self.tokens,
            BufferMode::Static { .. } => self.params.vc_capacity() - self.busy_vcs.count_ones() as u16,
        }
    }

    fn apply(&mut self, signals: &Signals) -> Result<(), ProtocolError> {
        for sig in signals {
            match *sig {
                Signal::Credit { vc } => {
                    let cap = self.params.pool_capacity();
                    let c = self
                        .credits
                        .get_mut(usize::from(vc.unwrap_or(0)))
                        .ok_or(ProtocolError::BadVcId { vc: vc.unwrap_or(0) })?;
                    if *c >= cap {
                        return Err(ProtocolError::CreditOverflow { port: Port::Local, capacity: cap });
                    }
                    *c += 1;
                }
                Signal::VcRetired { vc } => match (self.params.buffer_mode, vc) {
                    (BufferMode::Dynamic, _) => {
                        if self.tokens >= self.params.vc_capacity() {
                            return Err(ProtocolError::TokenOverflow {
                                port: Port::Local,
                                capacity: self.params.vc_capacity(),
                            });
                        }
                        self.tokens += 1;
                    }
                    (BufferMode::Static { .. }, Some(vc)) => {
                        if self.busy_vcs & (1 << vc) == 0 {
                            return Err(ProtocolError::TokenOverflow {
                                port: Port::Local,
                                capacity: self.params.vc_capacity(),
                            });
                        }
                        self.busy_vcs &= !(1 << vc);
                    }
                    (BufferMode::Static { .. }, None) => return Err(ProtocolError::MissingVcId),
                },
            }
        }
        Ok(())
    }

    /// Next flit for the router's local input, if flow control allows one.
    fn next_flit(&mut self) -> Option<WireFlit> {
        let packet = self.queue.front()?;
        if self.sent == 0 {
            self.vc = match self.params.buffer_mode {
                BufferMode::Dynamic => {
                    if self.tokens == 0 || self.credits[0] == 0 {
                        return None;
                    }
                    None
                }
                BufferMode::Static { vcs, .. } => {
                    let all = if vcs == 64 { u64::MAX } else { (1u64 << vcs) - 1 };
                    let free = all & !self.busy_vcs;
                    let vc = (free != 0).then(|| free.trailing_zeros() as u16)?;
                    if self.credits[usize::from(vc)] == 0 {
                        return None;
                    }
                    Some(vc)
                }
            };
            match self.vc {
                None => self.tokens -= 1,
                Some(vc) => self.busy_vcs |= 1 << vc,
            }
        }
        let pool = usize::from(self.vc.unwrap_or(0));
        if self.credits[pool] == 0 {
            return None;
        }
        self.credits[pool] -= 1;
        let flit = packet.flits[self.sent];
        self.sent += 1;
        if self.sent == packet.len() {
            self.queue.pop_front();
            self.sent = 0;
        }
        Some(WireFlit { flit, vc: self.vc })
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub router: Router,
    pub injector: Injector,
    pub ni: NetworkInterface,
    /// Registers of the links into each input port (local unused).
    pub in_links: [LinkRegs; NUM_PORTS],
    /// Signals to apply next cycle, per output port.
    pub inbound: [Signals; NUM_PORTS],
    pub ni_inbound: Signals,
    outbox: RouterOutputs,
    injected_now: Option<Flit>,
    created_now: Option<(u64, usize)>,
}

impl Node {
    fn phase_a(&mut self, now: u64) -> Result<(), ProtocolError> {
        self.created_now = None;
        if let Some(packet) = self.injector.maybe_inject(now) {
            self.created_now = Some((packet.inject_cycle(), packet.len()));
            self.ni.enqueue(packet);
        }
        let ni_signals = std::mem::take(&mut self.ni_inbound);
        self.ni.apply(&ni_signals)?;
        let mut inputs = RouterInputs { flits: Default::default(), signals: std::mem::take(&mut self.inbound) };
        for p in Port::NETWORK {
            inputs.flits[p.index()] = self.in_links[p.index()].arriving.take();
        }
        let local = self.ni.next_flit();
        self.injected_now = local.map(|w| w.flit);
        inputs.flits[Port::Local.index()] = local;
        self.outbox = self.router.cycle(now, inputs)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Inject,
    Send(Port),
    Eject,
}

/// One flit movement, written as a line of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub node: Coord,
    pub kind: TraceKind,
    pub packet_id: u64,
    pub seq: u16,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TraceKind::Inject => "inject".to_string(),
            TraceKind::Send(p) => format!("send:{p:?}"),
            TraceKind::Eject => "eject".to_string(),
        };
        write!(f, "{} {} {} {:#x} {}", self.cycle, self.node, kind, self.packet_id, self.seq)
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepSummary {
    pub cycle: u64,
    /// Flits that reached their destination, in node order.
    pub delivered: Vec<(Coord, Flit)>,
    /// `(inject_cycle, flits)` for each packet created this cycle.
    pub created: Vec<(u64, usize)>,
    pub moved: bool,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    width: u16,
    height: u16,
    params: RouterParams,
    nodes: Vec<Node>,
    cycle: u64,
    injected_flits: u64,
    delivered_flits: u64,
    idle_cycles: u64,
    trace: Option<Vec<TraceEvent>>,
}

impl Mesh {
    /// `injector_for` builds the traffic source of each node.
    pub fn new(
        width: u16,
        height: u16,
        params: RouterParams,
        mut injector_for: impl FnMut(Coord) -> Injector,
    ) -> Result<Self, crate::error::ConfigError> {
        if width < 2 || height < 2 {
            return Err(crate::error::ConfigError::invalid("mesh", format!("{width}x{height} mesh needs width, height >= 2")));
        }
        let mut nodes = Vec::with_capacity(usize::from(width) * usize::from(height));
        for y in 0..height {
            for x in 0..width {
                let at = Coord::new(x, y);
                let mut neighbours = [false; NUM_PORTS];
                for p in Port::NETWORK {
                    neighbours[p.index()] = p.neighbour(at, width, height).is_some();
                }
                nodes.push(Node {
                    router: Router::new(at, params, neighbours),
                    injector: injector_for(at),
                    ni: NetworkInterface::new(params),
                    in_links: Default::default(),
                    inbound: Default::default(),
                    ni_inbound: Signals::new(),
                    outbox: RouterOutputs::default(),
                    injected_now: None,
                    created_now: None,
                });
            }
        }
        Ok(Self {
            width,
            height,
            params,
            nodes,
            cycle: 0,
            injected_flits: 0,
            delivered_flits: 0,
            idle_cycles: 0,
            trace: None,
        })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    fn index(&self, c: Coord) -> usize {
        usize::from(c.y) * usize::from(self.width) + usize::from(c.x)
    }

    pub fn node(&self, c: Coord) -> &Node {
        &self.nodes[self.index(c)]
    }

    pub fn node_mut(&mut self, c: Coord) -> &mut Node {
        let i = self.index(c);
        &mut self.nodes[i]
    }

    /// Router-to-router links, each a pair of opposing channels.
    pub fn link_count(&self) -> usize {
        let (w, h) = (usize::from(self.width), usize::from(self.height));
        2 * w * h - w - h
    }

    /// Unidirectional router-to-router channels.
    pub fn channel_count(&self) -> usize {
        2 * self.link_count()
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Enqueues a hand-made packet at its source node (bypasses the injector).
    pub fn inject_packet(&mut self, packet: Packet) {
        self.injected_flits += packet.len() as u64;
        self.node_mut(packet.src).ni.enqueue(packet);
    }

    pub fn injected_flits(&self) -> u64 {
        self.injected_flits
    }

    pub fn delivered_flits(&self) -> u64 {
        self.delivered_flits
    }

    pub fn source_queue_flits(&self) -> u64 {
        self.nodes.iter().map(|n| n.ni.queued_flits() as u64).sum()
    }

    /// Flits in router buffers and on links.
    pub fn in_network_flits(&self) -> u64 {
        self.nodes
            .iter()
            .map(|n| {
                n.router.occupied_slots() as u64 + n.in_links.iter().map(|l| l.flits().count() as u64).sum::<u64>()
            })
            .sum()
    }

    pub fn is_idle(&self) -> bool {
        self.source_queue_flits() == 0
            && self.in_network_flits() == 0
            && self.nodes.iter().all(|n| n.router.is_quiescent() && n.inbound.iter().all(|s| s.is_empty()))
    }

    pub fn set_counting(&mut self, on: bool) {
        for n in &mut self.nodes {
            n.router.set_counting(on);
        }
    }

    /// Advances one cycle. With a pool, phase A fans out across its workers.
    pub fn step(&mut self, pool: Option<&rayon::ThreadPool>) -> Result<StepSummary, SimError> {
        let now = self.cycle;
        let results: Vec<Result<(), ProtocolError>> = match pool {
            Some(pool) => pool.install(|| self.nodes.par_iter_mut().map(|n| n.phase_a(now)).collect()),
            None => self.nodes.iter_mut().map(|n| n.phase_a(now)).collect(),
        };
        for (i, r) in results.into_iter().enumerate() {
            if let Err(source) = r {
                return Err(SimError { cycle: now, router: self.nodes[i].router.coords(), source });
            }
        }
        let summary = self.phase_b(now);
        self.cycle += 1;
        Ok(summary)
    }

    fn phase_b(&mut self, now: u64) -> StepSummary {
        let mut summary = StepSummary { cycle: now, ..StepSummary::default() };
        for node in &mut self.nodes {
            for link in &mut node.in_links {
                debug_assert!(link.arriving.is_none(), "arriving flit left unconsumed");
                link.arriving = link.in_transit.take();
                summary.moved |= link.arriving.is_some();
            }
        }
        let outboxes: Vec<(RouterOutputs, Option<Flit>, Option<(u64, usize)>)> = self
            .nodes
            .iter_mut()
            .map(|n| (std::mem::take(&mut n.outbox), n.injected_now.take(), n.created_now.take()))
            .collect();
        for (i, (mut out, injected, created)) in outboxes.into_iter().enumerate() {
            let at = self.nodes[i].router.coords();
            if let Some((cycle, len)) = created {
                self.injected_flits += len as u64;
                summary.created.push((cycle, len));
            }
            if let Some(f) = injected {
                summary.moved = true;
                self.log(now, at, TraceKind::Inject, &f);
            }
            for p in Port::NETWORK {
                let signals = std::mem::take(&mut out.signals[p.index()]);
                let flit = out.flits[p.index()].take();
                let Some(nb) = p.neighbour(at, self.width, self.height) else {
                    debug_assert!(flit.is_none() && signals.is_empty());
                    continue;
                };
                let j = self.index(nb);
                if let Some(wf) = flit {
                    summary.moved = true;
                    self.log(now, at, TraceKind::Send(p), &wf.flit);
                    self.nodes[j].in_links[p.opposite().index()].in_transit = Some(wf);
                }
                self.nodes[j].inbound[p.opposite().index()].extend(signals);
            }
            let local = std::mem::take(&mut out.signals[Port::Local.index()]);
            self.nodes[i].ni_inbound.extend(local);
            for f in out.ejected {
                summary.moved = true;
                self.delivered_flits += 1;
                self.log(now, at, TraceKind::Eject, &f);
                summary.delivered.push((at, f));
            }
        }
        summary
    }

    fn log(&mut self, cycle: u64, node: Coord, kind: TraceKind, f: &Flit) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { cycle, node, kind, packet_id: f.packet_id, seq: f.seq });
        }
    }

    /// Deadlock sentinel; returns an error once nothing has moved for
    /// `10 * (w + h) * slots` cycles while flits sit in the network.
    pub fn watch_progress(&mut self, summary: &StepSummary) -> Result<(), SimError> {
        if summary.moved {
            self.idle_cycles = 0;
            return Ok(());
        }
        let in_network = self.in_network_flits();
        if in_network == 0 {
            self.idle_cycles = 0;
            return Ok(());
        }
        self.idle_cycles += 1;
        let limit = 10 * (u64::from(self.width) + u64::from(self.height)) * self.params.num_slots as u64;
        if self.idle_cycles >= limit {
            return Err(SimError {
                cycle: summary.cycle,
                router: Coord::new(0, 0),
                source: ProtocolError::Deadlock { idle: self.idle_cycles, in_network },
            });
        }
        Ok(())
    }

    /// Full-scan check of every conservation ledger at a cycle boundary.
    pub fn check_invariants(&self) -> Result<(), SimError> {
        self.check_ledgers().map_err(|(router, msg)| SimError {
            cycle: self.cycle,
            router,
            source: ProtocolError::Invariant(msg),
        })
    }

    fn check_ledgers(&self) -> Result<(), (Coord, String)> {
        for node in &self.nodes {
            check_router_tables(&node.router).map_err(|m| (node.router.coords(), m))?;
        }
        for node in &self.nodes {
            let at = node.router.coords();
            for p in Port::NETWORK {
                if let Some(nb) = p.neighbour(at, self.width, self.height) {
                    self.check_link(node, p, self.node(nb)).map_err(|m| (at, m))?;
                }
            }
            self.check_injection_link(node).map_err(|m| (at, m))?;
        }
        let accounted = self.delivered_flits + self.source_queue_flits() + self.in_network_flits();
        if accounted != self.injected_flits {
            return Err((
                Coord::new(0, 0),
                format!("flit conservation: injected {} != delivered+queued+in-network {}", self.injected_flits, accounted),
            ));
        }
        Ok(())
    }

    /// Ledgers of the link from `up`'s output `out` into `down`'s input.
    fn check_link(&self, up: &Node, out: Port, down: &Node) -> Result<(), String> {
        let input = out.opposite();
        let link = &down.in_links[input.index()];
        let params = &self.params;
        let reverse = &up.inbound[out.index()];
        let pending: Vec<_> = up.router.pending_transfers().iter().filter(|t| t.out_port == out).collect();
        let link_flits: Vec<&WireFlit> = link.flits().collect();
        let down_unit = down.router.input(input);
        for pool in 0..params.credit_pools() {
            let pool_vc = match params.buffer_mode {
                BufferMode::Dynamic => None,
                BufferMode::Static { .. } => Some(pool as u16),
            };
            let in_pool = |vc: Option<u16>| pool_vc.is_none() || vc == pool_vc;
            let occupied = match params.buffer_mode {
                BufferMode::Dynamic => down_unit.ubs.occupied(),
                BufferMode::Static { depth, .. } => {
                    let lo = pool * usize::from(depth);
                    down_unit.ubs.iter_occupied().filter(|(s, _)| (lo..lo + usize::from(depth)).contains(s)).count()
                }
            };
            let total = usize::from(up.router.credits(out)[pool])
                + pending.iter().filter(|t| in_pool(t.downstream_vc)).count()
                + link_flits.iter().filter(|w| in_pool(w.vc)).count()
                + occupied
                + reverse.iter().filter(|s| matches!(s, Signal::Credit { vc } if in_pool(*vc))).count();
            if total != usize::from(params.pool_capacity()) {
                return Err(format!("credit ledger on {out:?} pool {pool}: {total} != {}", params.pool_capacity()));
            }
        }
        let mut holders: Vec<u64> = Vec::new();
        for p in Port::ALL {
            holders.extend(
                up.router
                    .input(p)
                    .table
                    .rows()
                    .iter()
                    .filter(|r| r.is_active() && r.downstream_granted && r.out_port == Some(out))
                    .map(|r| r.packet_id),
            );
        }
        holders.extend(pending.iter().map(|t| t.packet_id));
        holders.extend(link_flits.iter().map(|w| w.flit.packet_id));
        holders.extend(self.downstream_holders(down, input));
        let retiring = reverse.iter().filter(|s| matches!(s, Signal::VcRetired { .. })).count();
        self.check_tokens(up.router.free_downstream_vcs(out), holders, retiring, &format!("{out:?}"))
    }

    fn check_injection_link(&self, node: &Node) -> Result<(), String> {
        let unit = node.router.input(Port::Local);
        let params = &self.params;
        for pool in 0..params.credit_pools() {
            let occupied = match params.buffer_mode {
                BufferMode::Dynamic => unit.ubs.occupied(),
                BufferMode::Static { depth, .. } => {
                    let lo = pool * usize::from(depth);
                    unit.ubs.iter_occupied().filter(|(s, _)| (lo..lo + usize::from(depth)).contains(s)).count()
                }
            };
            let returning = node
                .ni_inbound
                .iter()
                .filter(|s| match s {
                    Signal::Credit { vc } => usize::from(vc.unwrap_or(0)) == pool,
                    _ => false,
                })
                .count();
            let total = usize::from(node.ni.credits()[pool]) + occupied + returning;
            if total != usize::from(params.pool_capacity()) {
                return Err(format!("injection credit ledger pool {pool}: {total} != {}", params.pool_capacity()));
            }
        }
        let mut holders: Vec<u64> = node.ni.in_progress().into_iter().collect();
        holders.extend(self.downstream_holders(node, Port::Local));
        let retiring = node.ni_inbound.iter().filter(|s| matches!(s, Signal::VcRetired { .. })).count();
        self.check_tokens(node.ni.free_vcs(), holders, retiring, "injection")
    }

    /// Packets holding a VC at `down`'s input `input`: active rows, plus
    /// tails scheduled out whose release signal is not yet sent.
    fn downstream_holders<'a>(&self, down: &'a Node, input: Port) -> impl Iterator<Item = u64> + 'a {
        let rows = down.router.input(input).table.rows().iter().filter(|r| r.is_active()).map(|r| r.packet_id);
        let retiring = down
            .router
            .pending_transfers()
            .iter()
            .filter(move |t| t.in_port == input && t.retired)
            .map(|t| t.packet_id);
        rows.chain(retiring)
    }

    fn check_tokens(&self, free: u16, mut holders: Vec<u64>, retiring: usize, what: &str) -> Result<(), String> {
        holders.sort_unstable();
        holders.dedup();
        let total = usize::from(free) + holders.len() + retiring;
        if total != usize::from(self.params.vc_capacity()) {
            return Err(format!(
                "token ledger on {what}: free {free} + held {} + retiring {retiring} != {}",
                holders.len(),
                self.params.vc_capacity()
            ));
        }
        Ok(())
    }
}

/// Per-port consistency of the unified buffer and the control table.
fn check_router_tables(router: &Router) -> Result<(), String> {
    for p in Port::ALL {
        let unit = router.input(p);
        if !unit.ubs.tracer_coherent() {
            return Err(format!("slot tracer incoherent on {p:?}"));
        }
        let queued: usize = unit.table.rows().iter().filter(|r| r.is_active()).map(|r| r.queue_len()).sum();
        let scheduled = router.pending_transfers().iter().filter(|t| t.in_port == p).count();
        if queued + scheduled != unit.ubs.occupied() {
            return Err(format!(
                "{p:?}: {queued} queued + {scheduled} scheduled != {} occupied slots",
                unit.ubs.occupied()
            ));
        }
        if unit.table.active_count() + unit.dispenser.free_count() != unit.table.num_rows() {
            return Err(format!("{p:?}: dispenser disagrees with the control table"));
        }
        for (r, row) in unit.table.rows().iter().enumerate() {
            if !row.is_active() {
                if row.queue_len() != 0 || row.downstream_granted || !unit.dispenser.is_free(r) {
                    return Err(format!("{p:?} row {r}: free row carries state"));
                }
                continue;
            }
            let mut last_seq = None;
            for slot in row.queue() {
                let f = unit.ubs.peek(slot).ok_or_else(|| format!("{p:?} row {r}: slot {slot} empty"))?;
                if f.packet_id != row.packet_id || f.kind == FlitType::Empty {
                    return Err(format!("{p:?} row {r}: slot {slot} holds a foreign flit"));
                }
                if last_seq.is_some_and(|s| f.seq <= s) {
                    return Err(format!("{p:?} row {r}: sequence not increasing"));
                }
                last_seq = Some(f.seq);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flit::FlitWidth;
    use crate::traffic::TrafficPattern;

    fn quiet(w: u16, h: u16) -> Mesh {
        Mesh::new(w, h, RouterParams::default(), |c| {
            Injector::new(c, w, h, TrafficPattern::UniformRandom, 0.0, 4, FlitWidth::W128, 0)
        })
        .unwrap()
    }

    #[test]
    fn link_counts() {
        assert_eq!(quiet(4, 4).link_count(), 24);
        assert_eq!(quiet(4, 4).channel_count(), 48);
        assert_eq!(quiet(2, 2).link_count(), 4);
        assert!(Mesh::new(1, 4, RouterParams::default(), |c| {
            Injector::new(c, 1, 4, TrafficPattern::UniformRandom, 0.1, 4, FlitWidth::W128, 0)
        })
        .is_err());
    }

    #[test]
    fn idle_mesh_has_no_events() {
        let mut m = quiet(4, 4);
        m.enable_trace();
        for _ in 0..50 {
            let s = m.step(None).unwrap();
            assert!(!s.moved && s.delivered.is_empty());
            m.check_invariants().unwrap();
        }
        assert!(m.take_trace().is_empty());
        assert!(m.is_idle());
    }
}
