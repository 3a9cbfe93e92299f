//! Unified buffer: one slot pool per input port plus the slot availability
//! tracer whose free count is exported upstream as flow-control credits.

use crate::error::ProtocolError;
use crate::flit::Flit;

#[derive(Debug, Clone)]
pub struct UnifiedBuffer {
    slots: Vec<Option<Flit>>,
    /// Cycle each occupied slot was written, used for stage timing.
    written_at: Vec<u64>,
    /// Bit `i` set = slot `i` free.
    tracer: u64,
}

impl UnifiedBuffer {
    /// `num_slots` must be in 1..=64; the config layer enforces the narrower 4..=64 power-of-two rule.
    pub fn new(num_slots: usize) -> Self {
        assert!((1..=64).contains(&num_slots), "unified buffer supports 1..=64 slots");
        let tracer = if num_slots == 64 { u64::MAX } else { (1u64 << num_slots) - 1 };
        Self { slots: vec![None; num_slots], written_at: vec![0; num_slots], tracer }
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    /// Raw slot tracer (1 = free).
    pub fn tracer(&self) -> u64 {
        self.tracer
    }

    pub fn free_count(&self) -> usize {
        self.tracer.count_ones() as usize
    }

    pub fn occupied(&self) -> usize {
        self.num_slots() - self.free_count()
    }

    fn all_mask(&self) -> u64 {
        if self.num_slots() == 64 {
            u64::MAX
        } else {
            (1u64 << self.num_slots()) - 1
        }
    }

    /// Stores `flit` in the lowest free slot.
    pub fn write_flit(&mut self, flit: Flit, cycle: u64) -> Result<usize, ProtocolError> {
        let region = self.all_mask();
        self.write_flit_in(flit, region, cycle)
    }

    /// Stores `flit` in the lowest free slot whose bit is set in `region`.
    pub fn write_flit_in(&mut self, flit: Flit, region: u64, cycle: u64) -> Result<usize, ProtocolError> {
        let candidates = self.tracer & region;
        if candidates == 0 {
            return Err(ProtocolError::BufferFull { packet: flit.packet_id, seq: flit.seq });
        }
        let slot = candidates.trailing_zeros() as usize;
        self.tracer &= !(1u64 << slot);
        self.slots[slot] = Some(flit);
        self.written_at[slot] = cycle;
        Ok(slot)
    }

    /// Removes and returns the flit in `slot`; the caller emits the credit.
    pub fn read_and_free(&mut self, slot: usize) -> Result<Flit, ProtocolError> {
        let flit = self
            .slots
            .get_mut(slot)
            .and_then(Option::take)
            .ok_or(ProtocolError::EmptySlot { slot })?;
        self.tracer |= 1u64 << slot;
        Ok(flit)
    }

    pub fn peek(&self, slot: usize) -> Option<&Flit> {
        self.slots.get(slot).and_then(Option::as_ref)
    }

    pub fn written_at(&self, slot: usize) -> u64 {
        self.written_at[slot]
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = (usize, &Flit)> {
        self.slots.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|f| (i, f)))
    }

    /// Full scan: tracer bit `i` set exactly when slot `i` is empty.
    pub fn tracer_coherent(&self) -> bool {
        self.slots
            .iter()
            .enumerate()
            .all(|(i, s)| s.is_none() == (self.tracer & (1 << i) != 0))
    }
}
