//! Flit encoding and packet construction.
//!
//! Only the 2-bit TYPE field has a fixed wire position (bits 0 and 1). Routing
//! and bookkeeping fields (packet id, sequence, coordinates) travel as
//! simulator sideband metadata next to the type tag; the remaining
//! `width - 2` bits are an opaque payload.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of bits taken by the TYPE field at the start of every flit.
pub const TYPE_FIELD_BITS: u32 = 2;

/// Default packet length: one header, two body flits and a tail.
pub const DEFAULT_PACKET_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlitError {
    #[error("packet length {0} is too short, a packet needs a header and a tail (len >= 2)")]
    PacketTooShort(usize),
    #[error("packet length {0} exceeds the supported maximum of {max}", max = u16::MAX)]
    PacketTooLong(usize),
    #[error("source and destination are the same node {0}")]
    SelfAddressed(Coord),
    #[error("coordinate {coord} lies outside the {width}x{height} mesh")]
    OutOfBounds { coord: Coord, width: u16, height: u16 },
    #[error("unsupported flit width {0}, expected one of 16, 32, 64, 128")]
    BadWidth(u32),
}

/// Mesh coordinates. `y` grows southwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x: u16,
    pub y: u16,
}

impl Coord {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    /// Manhattan distance, which is also the XY hop count.
    pub fn hops_to(self, other: Coord) -> u32 {
        u32::from(self.x.abs_diff(other.x)) + u32::from(self.y.abs_diff(other.y))
    }

    pub fn within(self, width: u16, height: u16) -> bool {
        self.x < width && self.y < height
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// The TYPE field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitType {
    Empty,
    Header,
    Body,
    Tail,
}

impl FlitType {
    pub const ALL: [FlitType; 4] = [FlitType::Empty, FlitType::Header, FlitType::Body, FlitType::Tail];

    pub const fn encode(self) -> u8 {
        match self {
            FlitType::Empty => 0b00,
            FlitType::Header => 0b01,
            FlitType::Body => 0b10,
            FlitType::Tail => 0b11,
        }
    }

    /// Decodes the low two bits of `bits`; higher bits are ignored.
    pub const fn decode(bits: u8) -> FlitType {
        match bits & 0b11 {
            0b00 => FlitType::Empty,
            0b01 => FlitType::Header,
            0b10 => FlitType::Body,
            _ => FlitType::Tail,
        }
    }
}

pub fn encode_type(t: FlitType) -> u8 {
    t.encode()
}

pub fn decode_type(bits: u8) -> FlitType {
    FlitType::decode(bits)
}

/// Supported flit widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum FlitWidth {
    W16,
    W32,
    W64,
    #[default]
    W128,
}

impl FlitWidth {
    pub const fn bits(self) -> u32 {
        match self {
            FlitWidth::W16 => 16,
            FlitWidth::W32 => 32,
            FlitWidth::W64 => 64,
            FlitWidth::W128 => 128,
        }
    }

    pub const fn payload_bits(self) -> u32 {
        self.bits() - TYPE_FIELD_BITS
    }

    fn payload_mask(self) -> u128 {
        (1u128 << self.payload_bits()) - 1
    }
}

impl TryFrom<u32> for FlitWidth {
    type Error = FlitError;

    fn try_from(bits: u32) -> Result<Self, Self::Error> {
        match bits {
            16 => Ok(FlitWidth::W16),
            32 => Ok(FlitWidth::W32),
            64 => Ok(FlitWidth::W64),
            128 => Ok(FlitWidth::W128),
            other => Err(FlitError::BadWidth(other)),
        }
    }
}

impl From<FlitWidth> for u32 {
    fn from(w: FlitWidth) -> u32 {
        w.bits()
    }
}

/// Opaque payload, always masked to the payload width of its flit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Payload(u128);

impl Payload {
    pub fn new(raw: u128, width: FlitWidth) -> Self {
        Payload(raw & width.payload_mask())
    }

    pub fn raw(self) -> u128 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flit {
    pub kind: FlitType,
    pub packet_id: u64,
    pub seq: u16,
    pub src: Coord,
    pub dest: Coord,
    pub inject_cycle: u64,
    pub width: FlitWidth,
    pub payload: Payload,
}

impl Flit {
    pub fn is_header(&self) -> bool {
        self.kind == FlitType::Header
    }

    pub fn is_tail(&self) -> bool {
        self.kind == FlitType::Tail
    }

    /// Payload content stamped by [`make_packet`]; sinks use it to detect corruption.
    pub fn expected_payload(packet_id: u64, seq: u16, width: FlitWidth) -> Payload {
        let mixed = u128::from(packet_id.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15)
            << 64
            | u128::from(packet_id.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ u64::from(seq));
        Payload::new(mixed, width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub src: Coord,
    pub dest: Coord,
    pub flits: Vec<Flit>,
}

impl Packet {
    pub fn len(&self) -> usize {
        self.flits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flits.is_empty()
    }

    pub fn hops(&self) -> u32 {
        self.src.hops_to(self.dest)
    }

    pub fn inject_cycle(&self) -> u64 {
        self.flits[0].inject_cycle
    }
}

/// Type tag of flit `seq` in a packet of `len` flits.
pub fn flit_type_at(seq: usize, len: usize) -> FlitType {
    if seq == 0 {
        FlitType::Header
    } else if seq + 1 == len {
        FlitType::Tail
    } else {
        FlitType::Body
    }
}

/// Builds a packet without bounds checking the coordinates against a mesh.
pub fn make_packet(
    id: u64,
    src: Coord,
    dest: Coord,
    len: usize,
    inject_cycle: u64,
    width: FlitWidth,
) -> Result<Packet, FlitError> {
    if len < 2 {
        return Err(FlitError::PacketTooShort(len));
    }
    if len > usize::from(u16::MAX) {
        return Err(FlitError::PacketTooLong(len));
    }
    if src == dest {
        return Err(FlitError::SelfAddressed(src));
    }
    let flits = (0..len)
        .map(|seq| Flit {
            kind: flit_type_at(seq, len),
            packet_id: id,
            seq: seq as u16,
            src,
            dest,
            inject_cycle,
            width,
            payload: Flit::expected_payload(id, seq as u16, width),
        })
        .collect();
    Ok(Packet { id, src, dest, flits })
}

/// [`make_packet`] with both endpoints checked against a `width`x`height` mesh.
pub fn make_packet_in_mesh(
    id: u64,
    src: Coord,
    dest: Coord,
    len: usize,
    inject_cycle: u64,
    flit_width: FlitWidth,
    width: u16,
    height: u16,
) -> Result<Packet, FlitError> {
    for coord in [src, dest] {
        if !coord.within(width, height) {
            return Err(FlitError::OutOfBounds { coord, width, height });
        }
    }
    make_packet(id, src, dest, len, inject_cycle, flit_width)
}
