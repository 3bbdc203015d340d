//! Custom protocol definitions: the line-oriented spec grammar, bit-exact
//! field layouts relative to flit boundaries, and the packet codec.
//!
//! Bit order is MSB-first (network order) with fields packed in declaration
//! order. The header region is zero-padded to the next byte boundary before
//! the payload so that payload bytes stay byte-addressable.

mod codec;
mod layout;
mod spec;

pub use codec::{
    deserialize_packet, extract_routing_key, header_overhead_ratio, serialize_packet,
    FieldValues, PacketBits,
};
pub use layout::{compute_layout, LayoutEntry, ParsePlan};
pub use spec::{
    parse_spec, ArchHint, ArchHints, FieldSpec, ProtocolSpec, Role, SemanticBinding,
    MAX_FIELD_BITS,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("role `{0}` assigned to more than one field")]
    DuplicateRole(Role),
    #[error("no field carries role=routing_key")]
    MissingRoutingKey,
    #[error("field `{0}` has zero width")]
    ZeroWidth(String),
    #[error("field `{name}` is {width} bits wide, limit is {MAX_FIELD_BITS}")]
    WidthTooLarge { name: String, width: u32 },
    #[error("value does not fit in field `{0}`")]
    ValueOverflow(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("truncated packet: need {expected} bits, got {got}")]
    Truncated { expected: usize, got: usize },
}

/// Names of the protocol definitions shipped with the crate.
pub const BUILTIN_SPECS: &[&str] = &["basic", "ethernet", "hft", "underwater"];

/// Text of a shipped protocol definition.
pub fn builtin_spec_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "basic" => include_str!("specs/basic.spac"),
        "ethernet" => include_str!("specs/ethernet.spac"),
        "hft" => include_str!("specs/hft.spac"),
        "underwater" => include_str!("specs/underwater.spac"),
        _ => return None,
    })
}

/// A shipped protocol definition, parsed.
pub fn builtin_spec(name: &str) -> Option<ProtocolSpec> {
    builtin_spec_text(name).map(|t| parse_spec(t).expect("shipped specs parse"))
}
