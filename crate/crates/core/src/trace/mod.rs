//! Packet traces: CSV loading, synthetic generators and the feature vector
//! used to steer design-space exploration.

mod features;
mod gen;
mod presets;

pub use features::{extract_features, TraceFeatures};
pub use gen::{gen_trace, GenParams, PayloadDist, TrafficModel};
pub use presets::{preset, PRESET_NAMES};

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: src_port {port} out of range for {port_count} ports")]
    PortOutOfRange {
        line: u64,
        port: usize,
        port_count: usize,
    },
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace spans {windows} windows, need at least {MIN_WINDOWS}")]
    TooFewWindows { windows: u64 },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
}

/// Minimum number of whole analysis windows for feature extraction.
pub const MIN_WINDOWS: u64 = 10;

/// Destination address of a packet. Broadcast is written `*` in CSV and maps
/// to the all-ones value of the routing key on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DstAddr {
    Unicast(u64),
    Broadcast,
}

impl DstAddr {
    /// Wire value for a routing key of `key_bits` bits.
    pub fn key(self, key_bits: u32) -> u64 {
        match self {
            DstAddr::Unicast(a) => a,
            DstAddr::Broadcast => broadcast_key(key_bits),
        }
    }
}

pub fn broadcast_key(key_bits: u32) -> u64 {
    if key_bits >= 64 {
        u64::MAX
    } else {
        (1u64 << key_bits) - 1
    }
}

impl fmt::Display for DstAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DstAddr::Unicast(a) => write!(f, "{a}"),
            DstAddr::Broadcast => f.write_str("*"),
        }
    }
}

impl FromStr for DstAddr {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "*" {
            Ok(DstAddr::Broadcast)
        } else {
            s.parse().map(DstAddr::Unicast)
        }
    }
}

impl Serialize for DstAddr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DstAddr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketEvent {
    pub time_ns: u64,
    pub src_port: usize,
    pub src_addr: u64,
    pub dst_addr: DstAddr,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub port_count: usize,
    pub link_rate_gbps: f64,
    pub events: Vec<PacketEvent>,
}

impl Trace {
    pub fn new(port_count: usize, link_rate_gbps: f64, mut events: Vec<PacketEvent>) -> Self {
        events.sort_by_key(|e| e.time_ns);
        Self {
            port_count,
            link_rate_gbps,
            events,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn duration_ns(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.time_ns - a.time_ns,
            _ => 0,
        }
    }

    pub fn end_ns(&self) -> u64 {
        self.events.last().map_or(0, |e| e.time_ns)
    }

    pub fn min_payload_bytes(&self) -> Option<u32> {
        self.events.iter().map(|e| e.payload_bytes).min()
    }

    /// Offered packets per port per slot of `slot_ns`, over the trace span.
    pub fn offered_load(&self, slot_ns: u64) -> f64 {
        if self.is_empty() || slot_ns == 0 {
            return 0.0;
        }
        let slots = (self.end_ns() / slot_ns + 1) as f64;
        self.len() as f64 / (slots * self.port_count as f64)
    }

    pub fn load_csv(
        path: impl AsRef<Path>,
        port_count: usize,
        link_rate_gbps: f64,
    ) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, port_count, link_rate_gbps)
    }

    pub fn read_csv(
        reader: impl Read,
        port_count: usize,
        link_rate_gbps: f64,
    ) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut events = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                match e.into_kind() {
                    csv::ErrorKind::Io(io) => TraceError::Io(io),
                    kind => TraceError::Parse {
                        line,
                        msg: format!("{kind:?}"),
                    },
                }
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let ev: PacketEvent = rec.deserialize(None).map_err(|e| TraceError::Parse {
                line,
                msg: e.to_string(),
            })?;
            if ev.src_port >= port_count {
                return Err(TraceError::PortOutOfRange {
                    line,
                    port: ev.src_port,
                    port_count,
                });
            }
            events.push(ev);
        }
        if events.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        Ok(Self::new(port_count, link_rate_gbps, events))
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(writer);
        for ev in &self.events {
            w.serialize(ev).map_err(|e| TraceError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "time_ns,src_port,src_addr,dst_addr,payload_bytes\n";

    #[test]
    fn reads_well_formed_rows() {
        let csv = format!("{HEADER}20,1,1,2,64\n10,0,0,*,16\n10,2,2,0,8\n");
        let t = Trace::read_csv(csv.as_bytes(), 4, 10.0).unwrap();
        assert_eq!(t.len(), 3);
        // stable sort: the two t=10 rows keep file order
        assert_eq!(t.events[0].dst_addr, DstAddr::Broadcast);
        assert_eq!(t.events[1].src_port, 2);
        assert_eq!(t.events[2].time_ns, 20);
    }

    #[test]
    fn port_out_of_range_reports_line() {
        let csv = format!("{HEADER}0,0,0,1,8\n5,8,8,1,8\n");
        match Trace::read_csv(csv.as_bytes(), 8, 10.0) {
            Err(TraceError::PortOutOfRange { line, port: 8, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_and_empty() {
        let csv = format!("{HEADER}0,0,0,x,8\n");
        assert!(matches!(
            Trace::read_csv(csv.as_bytes(), 8, 10.0),
            Err(TraceError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Trace::read_csv("".as_bytes(), 8, 10.0),
            Err(TraceError::EmptyTrace)
        ));
        assert!(matches!(
            Trace::read_csv(HEADER.as_bytes(), 8, 10.0),
            Err(TraceError::EmptyTrace)
        ));
    }

    #[test]
    fn csv_round_trip() {
        let csv = format!("{HEADER}0,0,0,*,8\n7,1,1,0,1500\n");
        let t = Trace::read_csv(csv.as_bytes(), 2, 10.0).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    #[test]
    fn broadcast_key_is_all_ones() {
        assert_eq!(DstAddr::Broadcast.key(4), 0xF);
        assert_eq!(DstAddr::Unicast(3).key(4), 3);
        assert_eq!(broadcast_key(64), u64::MAX);
    }
}
