//! VC control table, token dispenser and VC availability tracers.
//!
//! Each row of the control table is one virtual channel. A row serves one
//! packet from header admission until its tail departs, and keeps the
//! packet's buffer slots as an ordered queue: the head is the departing
//! pointer, the tail the arriving pointer.

use std::collections::{HashMap, VecDeque};

use crate::error::ProtocolError;
use crate::router::{Port, NUM_PORTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowState {
    Free,
    Active,
}

#[derive(Debug, Clone)]
pub struct VcRow {
    pub state: RowState,
    pub packet_id: u64,
    pub out_port: Option<Port>,
    slot_queue: VecDeque<u8>,
    pub downstream_granted: bool,
    pub tail_seen: bool,
    /// Downstream VC held by this packet (static buffering only).
    pub downstream_vc: Option<u16>,
    /// Cycle the VA grant was made.
    pub granted_at: u64,
    next_seq: u16,
}

impl VcRow {
    fn new(capacity: usize) -> Self {
        Self {
            state: RowState::Free,
            packet_id: 0,
            out_port: None,
            slot_queue: VecDeque::with_capacity(capacity),
            downstream_granted: false,
            tail_seen: false,
            downstream_vc: None,
            granted_at: 0,
            next_seq: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == RowState::Active
    }

    pub fn head_slot(&self) -> Option<usize> {
        self.slot_queue.front().map(|&s| usize::from(s))
    }

    pub fn queue(&self) -> impl Iterator<Item = usize> + '_ {
        self.slot_queue.iter().map(|&s| usize::from(s))
    }

    pub fn queue_len(&self) -> usize {
        self.slot_queue.len()
    }

    /// True while the header has not left this row.
    pub fn header_waiting(&self) -> bool {
        self.is_active() && self.next_seq > 0 && self.dequeued() == 0
    }

    fn dequeued(&self) -> usize {
        usize::from(self.next_seq) - self.slot_queue.len()
    }
}

/// Set of free rows for one input port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDispenser {
    free_rows: u64,
}

impl TokenDispenser {
    pub fn new(rows: usize) -> Self {
        let free_rows = if rows == 64 { u64::MAX } else { (1u64 << rows) - 1 };
        Self { free_rows }
    }

    pub fn free_rows(&self) -> u64 {
        self.free_rows
    }

    pub fn free_count(&self) -> usize {
        self.free_rows.count_ones() as usize
    }

    pub fn lowest_free(&self) -> Option<usize> {
        (self.free_rows != 0).then(|| self.free_rows.trailing_zeros() as usize)
    }

    fn take(&mut self, row: usize) {
        self.free_rows &= !(1u64 << row);
    }

    fn give_back(&mut self, row: usize) {
        self.free_rows |= 1u64 << row;
    }

    pub fn is_free(&self, row: usize) -> bool {
        self.free_rows & (1u64 << row) != 0
    }
}

/// Outcome of [`VcControlTable::dequeue_head`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dequeued {
    pub slot: usize,
    /// The row served its packet's tail and is free again.
    pub retired: bool,
}

#[derive(Debug, Clone)]
pub struct VcControlTable {
    rows: Vec<VcRow>,
    packet_index: HashMap<u64, usize>,
}

impl VcControlTable {
    pub fn new(num_rows: usize, slots: usize) -> Self {
        Self { rows: (0..num_rows).map(|_| VcRow::new(slots)).collect(), packet_index: HashMap::new() }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, row: usize) -> &VcRow {
        &self.rows[row]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut VcRow {
        &mut self.rows[row]
    }

    pub fn rows(&self) -> &[VcRow] {
        &self.rows
    }

    pub fn active_count(&self) -> usize {
        self.packet_index.len()
    }

    pub fn row_of(&self, packet_id: u64) -> Option<usize> {
        self.packet_index.get(&packet_id).copied()
    }

    /// Admits a header into the lowest free row.
    pub fn admit_header(
        &mut self,
        dispenser: &mut TokenDispenser,
        packet_id: u64,
        slot: usize,
    ) -> Result<usize, ProtocolError> {
        let row = dispenser.lowest_free().ok_or(ProtocolError::NoFreeRow { packet: packet_id })?;
        self.admit_header_at(dispenser, row, packet_id, slot)?;
        Ok(row)
    }

    /// Admits a header into a specific row (static buffering, where the row is the VC named on the wire).
    pub fn admit_header_at(
        &mut self,
        dispenser: &mut TokenDispenser,
        row: usize,
        packet_id: u64,
        slot: usize,
    ) -> Result<(), ProtocolError> {
        if row >= self.rows.len() {
            return Err(ProtocolError::NoSuchRow { row });
        }
        if !dispenser.is_free(row) {
            return Err(ProtocolError::RowBusy { row });
        }
        if let Some(&existing) = self.packet_index.get(&packet_id) {
            return Err(ProtocolError::DuplicatePacket { packet: packet_id, row: existing });
        }
        dispenser.take(row);
        let r = &mut self.rows[row];
        debug_assert!(r.slot_queue.is_empty());
        r.state = RowState::Active;
        r.packet_id = packet_id;
        r.out_port = None;
        r.downstream_granted = false;
        r.downstream_vc = None;
        r.tail_seen = false;
        r.next_seq = 1;
        r.slot_queue.push_back(slot as u8);
        self.packet_index.insert(packet_id, row);
        Ok(())
    }

    /// Appends a body or tail flit to its packet's row.
    pub fn append_follower(
        &mut self,
        packet_id: u64,
        seq: u16,
        is_tail: bool,
        slot: usize,
    ) -> Result<usize, ProtocolError> {
        let row = self.row_of(packet_id).ok_or(ProtocolError::MissingHeader { packet: packet_id, seq })?;
        let r = &mut self.rows[row];
        if seq != r.next_seq || r.tail_seen {
            return Err(ProtocolError::OutOfOrder { packet: packet_id, seq, expected: r.next_seq });
        }
        r.next_seq += 1;
        r.tail_seen = is_tail;
        r.slot_queue.push_back(slot as u8);
        Ok(row)
    }

    /// Advances the departing pointer of `row`; retires the row after its tail.
    pub fn dequeue_head(&mut self, dispenser: &mut TokenDispenser, row: usize) -> Result<Dequeued, ProtocolError> {
        let r = self.rows.get_mut(row).ok_or(ProtocolError::NoSuchRow { row })?;
        if !r.is_active() {
            return Err(ProtocolError::DequeueEmpty { row });
        }
        let slot = usize::from(r.slot_queue.pop_front().ok_or(ProtocolError::DequeueEmpty { row })?);
        let retired = r.tail_seen && r.slot_queue.is_empty();
        if retired {
            r.state = RowState::Free;
            r.downstream_granted = false;
            r.downstream_vc = None;
            r.out_port = None;
            r.tail_seen = false;
            r.next_seq = 0;
            self.packet_index.remove(&r.packet_id);
            dispenser.give_back(row);
        }
        Ok(Dequeued { slot, retired })
    }
}

/// Per-output count of free downstream VC rows (dynamic buffering).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcAvailabilityTracer {
    free: [u16; NUM_PORTS],
    capacity: u16,
}

impl VcAvailabilityTracer {
    pub fn new(capacity: u16) -> Self {
        Self { free: [capacity; NUM_PORTS], capacity }
    }

    pub fn capacity(&self) -> u16 {
        self.capacity
    }

    pub fn available(&self, port: Port) -> u16 {
        self.free[port.index()]
    }

    pub fn consume_token(&mut self, port: Port) -> Result<(), ProtocolError> {
        let f = &mut self.free[port.index()];
        if *f == 0 {
            return Err(ProtocolError::TokenUnderflow { port });
        }
        *f -= 1;
        Ok(())
    }

    pub fn release_token(&mut self, port: Port) -> Result<(), ProtocolError> {
        let f = &mut self.free[port.index()];
        if *f >= self.capacity {
            return Err(ProtocolError::TokenOverflow { port, capacity: self.capacity });
        }
        *f += 1;
        Ok(())
    }
}

/// Per-output busy bitmap of downstream VCs (static buffering).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticVcTracker {
    busy: [u64; NUM_PORTS],
    vcs: u16,
}

impl StaticVcTracker {
    pub fn new(vcs: u16) -> Self {
        Self { busy: [0; NUM_PORTS], vcs }
    }

    fn all(&self) -> u64 {
        if self.vcs == 64 {
            u64::MAX
        } else {
            (1u64 << self.vcs) - 1
        }
    }

    pub fn free_count(&self, port: Port) -> u16 {
        (self.all() & !self.busy[port.index()]).count_ones() as u16
    }

    pub fn acquire_lowest(&mut self, port: Port) -> Result<u16, ProtocolError> {
        let free = self.all() & !self.busy[port.index()];
        if free == 0 {
            return Err(ProtocolError::TokenUnderflow { port });
        }
        let vc = free.trailing_zeros();
        self.busy[port.index()] |= 1 << vc;
        Ok(vc as u16)
    }

    pub fn release(&mut self, port: Port, vc: u16) -> Result<(), ProtocolError> {
        if vc >= self.vcs {
            return Err(ProtocolError::BadVcId { vc });
        }
        let b = &mut self.busy[port.index()];
        if *b & (1 << vc) == 0 {
            return Err(ProtocolError::TokenOverflow { port, capacity: self.vcs });
        }
        *b &= !(1 << vc);
        Ok(())
    }
}
