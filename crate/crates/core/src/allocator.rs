//! Separable two-stage VC and switch allocators.
//!
//! Requests arrive as a 5x5 matrix of row bitmasks indexed `[input][output]`:
//! bit `r` of `requests[i][o]` means row `r` of input `i` wants output `o`.
//! A row appears in at most one output column. Stage-1 winners feed stage 2
//! in the same cycle; a stage-1 arbiter only advances when its candidate also
//! wins stage 2.

use smallvec::SmallVec;

use crate::arbiter::RoundRobinArbiter;
use crate::router::{Port, NUM_PORTS};

pub type RequestMatrix = [[u64; NUM_PORTS]; NUM_PORTS];

pub const EMPTY_REQUESTS: RequestMatrix = [[0; NUM_PORTS]; NUM_PORTS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub in_port: Port,
    pub row: usize,
    pub out_port: Port,
}

pub type Grants = SmallVec<[Grant; NUM_PORTS]>;

/// Stage 2: one input per output among the stage-1 survivors.
fn resolve_outputs(
    stage2: &mut [RoundRobinArbiter],
    candidates: &[[Option<usize>; NUM_PORTS]; NUM_PORTS],
    mut on_win: impl FnMut(usize, usize),
) -> Grants {
    let mut grants = Grants::new();
    for (out, arb) in stage2.iter_mut().enumerate() {
        let inputs = (0..NUM_PORTS)
            .filter(|&i| candidates[i][out].is_some())
            .fold(0u64, |acc, i| acc | (1 << i));
        if let Some(winner) = arb.grant(inputs) {
            let row = candidates[winner][out].expect("stage-2 winner has a candidate");
            on_win(winner, out);
            grants.push(Grant { in_port: Port::from_index(winner), row, out_port: Port::from_index(out) });
        }
    }
    grants
}

/// VC allocator: one stage-1 arbiter per (input, output) pair over that
/// input's rows, one stage-2 arbiter per output over the five inputs.
#[derive(Debug, Clone)]
pub struct VcAllocator {
    stage1: Vec<RoundRobinArbiter>,
    stage2: Vec<RoundRobinArbiter>,
}

impl VcAllocator {
    pub fn new(rows: usize) -> Self {
        let arb = |w| RoundRobinArbiter::new(w).expect("arbiter width validated by config");
        Self {
            stage1: (0..NUM_PORTS * NUM_PORTS).map(|_| arb(rows)).collect(),
            stage2: (0..NUM_PORTS).map(|_| arb(NUM_PORTS)).collect(),
        }
    }

    pub fn stage1(&self) -> &[RoundRobinArbiter] {
        &self.stage1
    }

    pub fn stage2(&self) -> &[RoundRobinArbiter] {
        &self.stage2
    }

    /// One allocation round. Outputs with `available[o] == 0` receive no grant.
    pub fn allocate(&mut self, requests: &RequestMatrix, available: &[u16; NUM_PORTS]) -> Grants {
        let mut candidates = [[None; NUM_PORTS]; NUM_PORTS];
        for (i, row_reqs) in requests.iter().enumerate() {
            for (o, &bits) in row_reqs.iter().enumerate() {
                if bits != 0 && available[o] > 0 {
                    candidates[i][o] = self.stage1[i * NUM_PORTS + o].peek(bits);
                }
            }
        }
        let stage1 = &mut self.stage1;
        resolve_outputs(&mut self.stage2, &candidates, |i, o| {
            let row = candidates[i][o].expect("winner has candidate");
            stage1[i * NUM_PORTS + o].commit(row);
        })
    }
}

/// Switch allocator: one stage-1 arbiter per input over all of its rows, one
/// stage-2 arbiter per output.
#[derive(Debug, Clone)]
pub struct SwitchAllocator {
    stage1: Vec<RoundRobinArbiter>,
    stage2: Vec<RoundRobinArbiter>,
}

impl SwitchAllocator {
    pub fn new(rows: usize) -> Self {
        let arb = |w| RoundRobinArbiter::new(w).expect("arbiter width validated by config");
        Self {
            stage1: (0..NUM_PORTS).map(|_| arb(rows)).collect(),
            stage2: (0..NUM_PORTS).map(|_| arb(NUM_PORTS)).collect(),
        }
    }

    pub fn stage1(&self) -> &[RoundRobinArbiter] {
        &self.stage1
    }

    pub fn stage2(&self) -> &[RoundRobinArbiter] {
        &self.stage2
    }

    /// One allocation round; outputs with no credits are masked off before stage 1.
    pub fn allocate(&mut self, requests: &RequestMatrix, credits: &[u16; NUM_PORTS]) -> Grants {
        let mut candidates = [[None; NUM_PORTS]; NUM_PORTS];
        for (i, row_reqs) in requests.iter().enumerate() {
            let eligible = row_reqs
                .iter()
                .enumerate()
                .filter(|&(o, _)| credits[o] > 0)
                .fold(0u64, |acc, (_, &bits)| acc | bits);
            if let Some(row) = self.stage1[i].peek(eligible) {
                let out = row_reqs
                    .iter()
                    .position(|&bits| bits & (1 << row) != 0)
                    .expect("stage-1 winner belongs to an output column");
                candidates[i][out] = Some(row);
            }
        }
        let stage1 = &mut self.stage1;
        resolve_outputs(&mut self.stage2, &candidates, |i, o| {
            stage1[i].commit(candidates[i][o].expect("winner has candidate"));
        })
    }
}
