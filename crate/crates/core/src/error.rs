use thiserror::Error;

use crate::flit::{Coord, FlitError};
use crate::router::Port;

/// Broken flow-control or bookkeeping contract. Never a legal state: any
/// occurrence is a simulator bug and aborts the run.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("flit {seq} of packet {packet} arrived at a full buffer")]
    BufferFull { packet: u64, seq: u16 },
    #[error("read of empty buffer slot {slot}")]
    EmptySlot { slot: usize },
    #[error("no free VC row for header of packet {packet}")]
    NoFreeRow { packet: u64 },
    #[error("packet {packet} already owns VC row {row}")]
    DuplicatePacket { packet: u64, row: usize },
    #[error("flit {seq} of packet {packet} has no VC row (header missing)")]
    MissingHeader { packet: u64, seq: u16 },
    #[error("flit {seq} of packet {packet} out of order, expected seq {expected}")]
    OutOfOrder { packet: u64, seq: u16, expected: u16 },
    #[error("dequeue from VC row {row} which is free or empty")]
    DequeueEmpty { row: usize },
    #[error("VC row {row} is not free")]
    RowBusy { row: usize },
    #[error("VC row {row} does not exist")]
    NoSuchRow { row: usize },
    #[error("VC token release on port {port:?} exceeds capacity {capacity}")]
    TokenOverflow { port: Port, capacity: u16 },
    #[error("VC token consumed on port {port:?} with none available")]
    TokenUnderflow { port: Port },
    #[error("credit return on port {port:?} exceeds capacity {capacity}")]
    CreditOverflow { port: Port, capacity: u16 },
    #[error("flit sent on port {port:?} without a credit")]
    CreditUnderflow { port: Port },
    #[error("header of packet {packet} routed to {port:?}, which has no link")]
    DeadPort { packet: u64, port: Port },
    #[error("flit arrived on port {port:?}, which has no link")]
    UnconnectedInput { port: Port },
    #[error("flit arrived without the downstream VC id required by static buffering")]
    MissingVcId,
    #[error("downstream VC id {vc} out of range")]
    BadVcId { vc: u16 },
    #[error("sink received corrupted payload for packet {packet} seq {seq}")]
    Corrupted { packet: u64, seq: u16 },
    #[error("duplicate delivery of packet {packet} seq {seq}")]
    Duplicate { packet: u64, seq: u16 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no flit moved for {idle} cycles with {in_network} flits in the network")]
    Deadlock { idle: u64, in_network: u64 },
}

/// A protocol violation located in space and time.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cycle {cycle}, router {router}: {source}")]
pub struct SimError {
    pub cycle: u64,
    pub router: Coord,
    #[source]
    pub source: ProtocolError,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config key `{key}`: {constraint}")]
    Invalid { key: String, constraint: String },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Flit(#[from] FlitError),
}

impl ConfigError {
    pub fn invalid(key: &str, constraint: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), constraint: constraint.into() }
    }
}

/// Top-level error of a simulation or experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
