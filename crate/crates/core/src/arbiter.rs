//! Masked round-robin arbiter.
//!
//! Two fixed-priority (lowest index wins) passes run side by side: one over
//! the requests filtered by a rotating mask, one over the raw requests. The
//! masked pass wins whenever it has a candidate. After a grant `g` the mask
//! admits exactly the indices above `g`.

use thiserror::Error;

pub const MAX_WIDTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArbiterError {
    #[error("request vector has {got} entries, arbiter width is {width}")]
    WidthMismatch { width: usize, got: usize },
    #[error("arbiter width {0} is outside 1..={MAX_WIDTH}")]
    BadWidth(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRobinArbiter {
    width: usize,
    last_grant: Option<usize>,
}

/// Fixed-priority encoder: lowest set bit.
#[inline]
fn lowest(bits: u64) -> Option<usize> {
    (bits != 0).then(|| bits.trailing_zeros() as usize)
}

impl RoundRobinArbiter {
    pub fn new(width: usize) -> Result<Self, ArbiterError> {
        if width == 0 || width > MAX_WIDTH {
            return Err(ArbiterError::BadWidth(width));
        }
        Ok(Self { width, last_grant: None })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn last_grant(&self) -> Option<usize> {
        self.last_grant
    }

    fn width_mask(&self) -> u64 {
        if self.width == MAX_WIDTH {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    /// Eligibility mask of the masked pass.
    pub fn mask(&self) -> u64 {
        match self.last_grant {
            None => self.width_mask(),
            Some(g) if g + 1 >= MAX_WIDTH => 0,
            Some(g) => self.width_mask() & !((1u64 << (g + 1)) - 1),
        }
    }

    /// Winner for `requests` without updating state.
    #[inline]
    pub fn peek(&self, requests: u64) -> Option<usize> {
        debug_assert_eq!(requests & !self.width_mask(), 0, "request bit beyond arbiter width");
        lowest(requests & self.mask()).or_else(|| lowest(requests))
    }

    /// Records `grant` as the latest winner.
    #[inline]
    pub fn commit(&mut self, grant: usize) {
        debug_assert!(grant < self.width);
        self.last_grant = Some(grant);
    }

    /// Arbitrates over a request bitmask (bit `i` = requester `i`).
    #[inline]
    pub fn grant(&mut self, requests: u64) -> Option<usize> {
        let g = self.peek(requests)?;
        self.commit(g);
        Some(g)
    }

    /// Width-checked arbitration over an explicit request vector.
    pub fn arbitrate(&mut self, requests: &[bool]) -> Result<Option<usize>, ArbiterError> {
        if requests.len() != self.width {
            return Err(ArbiterError::WidthMismatch { width: self.width, got: requests.len() });
        }
        let bits = requests
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| if r { acc | (1 << i) } else { acc });
        Ok(self.grant(bits))
    }

    pub fn reset(&mut self) {
        self.last_grant = None;
    }
}
