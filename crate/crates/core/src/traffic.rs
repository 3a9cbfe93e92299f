//! Synthetic traffic: destination patterns and Bernoulli packet injection.
//!
//! Each node draws from its own ChaCha8 stream: the master seed selects the
//! key, the node's coordinates select the stream (`x << 32 | y`), and every
//! cycle starts at word offset `cycle * 16`. Injection decisions are thus a
//! pure function of (seed, node, cycle), and growing the mesh leaves the
//! streams of existing nodes untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flit::{make_packet, Coord, FlitWidth, Packet};

const WORDS_PER_CYCLE: u128 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    UniformRandom,
    /// (x, y) -> (y, x); diagonal nodes send uniformly at random.
    Transpose,
    /// (x, y) -> (w-1-x, h-1-y).
    BitComplement,
    /// With probability `fraction` send to `node`, otherwise uniformly.
    Hotspot { node: Coord, fraction: f64 },
}

impl TrafficPattern {
    pub fn label(&self) -> String {
        match self {
            TrafficPattern::UniformRandom => "uniform_random".into(),
            TrafficPattern::Transpose => "transpose".into(),
            TrafficPattern::BitComplement => "bit_complement".into(),
            TrafficPattern::Hotspot { node, fraction } => format!("hotspot{node}@{fraction}"),
        }
    }
}

fn uniform_other(src: Coord, width: u16, height: u16, rng: &mut impl Rng) -> Coord {
    let n = u32::from(width) * u32::from(height);
    let src_idx = u32::from(src.y) * u32::from(width) + u32::from(src.x);
    let mut idx = rng.gen_range(0..n - 1);
    if idx >= src_idx {
        idx += 1;
    }
    Coord::new((idx % u32::from(width)) as u16, (idx / u32::from(width)) as u16)
}

/// Destination for a packet from `src`; never returns `src`.
pub fn dest_for(pattern: &TrafficPattern, src: Coord, width: u16, height: u16, rng: &mut impl Rng) -> Coord {
    let fixed = match *pattern {
        TrafficPattern::UniformRandom => None,
        TrafficPattern::Transpose => Some(Coord::new(src.y, src.x)),
        TrafficPattern::BitComplement => Some(Coord::new(width - 1 - src.x, height - 1 - src.y)),
        TrafficPattern::Hotspot { node, fraction } => rng.gen_bool(fraction.clamp(0.0, 1.0)).then_some(node),
    };
    match fixed {
        Some(d) if d != src && d.within(width, height) => d,
        _ => uniform_other(src, width, height, rng),
    }
}

#[derive(Debug, Clone)]
pub struct Injector {
    node: Coord,
    node_index: u64,
    width: u16,
    height: u16,
    pattern: TrafficPattern,
    /// Offered load in flits/node/cycle.
    rate: f64,
    packet_len: usize,
    flit_width: FlitWidth,
    rng: ChaCha8Rng,
    created: u64,
}

impl Injector {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        node: Coord,
        width: u16,
        height: u16,
        pattern: TrafficPattern,
        rate: f64,
        packet_len: usize,
        flit_width: FlitWidth,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(node.x) << 32 | u64::from(node.y));
        Self {
            node,
            node_index: u64::from(node.y) * u64::from(width) + u64::from(node.x),
            width,
            height,
            pattern,
            rate,
            packet_len,
            flit_width,
            rng,
            created: 0,
        }
    }

    pub fn packets_created(&self) -> u64 {
        self.created
    }

    /// Bernoulli trial with probability `rate / packet_len`.
    pub fn maybe_inject(&mut self, cycle: u64) -> Option<Packet> {
        self.rng.set_word_pos(u128::from(cycle) * WORDS_PER_CYCLE);
        let p = (self.rate / self.packet_len as f64).clamp(0.0, 1.0);
        if !self.rng.gen_bool(p) {
            return None;
        }
        let dest = dest_for(&self.pattern, self.node, self.width, self.height, &mut self.rng);
        let id = self.node_index << 40 | self.created;
        self.created += 1;
        let packet = make_packet(id, self.node, dest, self.packet_len, cycle, self.flit_width)
            .expect("injector parameters validated by config");
        Some(packet)
    }
}
