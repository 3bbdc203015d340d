use std::collections::BTreeMap;

use bitvec::field::BitField;
use bitvec::prelude::{BitSlice, BitVec, Msb0};

use super::{ProtocolError, ProtocolSpec, SemanticBinding};

pub type PacketBits = BitVec<u8, Msb0>;
pub type FieldValues = BTreeMap<String, u64>;

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Packs header fields MSB-first in declaration order, zero-pads the header
/// to a byte boundary and appends the payload bytes. Fields absent from
/// `values` are encoded as zero.
pub fn serialize_packet(
    spec: &ProtocolSpec,
    values: &FieldValues,
    payload: &[u8],
) -> Result<PacketBits, ProtocolError> {
    for name in values.keys() {
        match spec.field(name) {
            Some(f) if f.is_header() => {}
            _ => return Err(ProtocolError::UnknownField(name.clone())),
        }
    }
    let header = spec.padded_header_bits() as usize;
    let mut bits = PacketBits::repeat(false, header + 8 * payload.len());
    let mut off = 0usize;
    for f in spec.header_fields() {
        let w = f.width_bits as usize;
        let v = values.get(&f.name).copied().unwrap_or(0);
        if v & !mask(f.width_bits) != 0 {
            return Err(ProtocolError::ValueOverflow(f.name.clone()));
        }
        bits[off..off + w].store_be(v);
        off += w;
    }
    for (i, &b) in payload.iter().enumerate() {
        let start = header + 8 * i;
        bits[start..start + 8].store_be(b);
    }
    Ok(bits)
}

/// Inverse of [`serialize_packet`]. Trailing bits past the last whole byte of
/// payload are ignored.
pub fn deserialize_packet(
    spec: &ProtocolSpec,
    bits: &BitSlice<u8, Msb0>,
) -> Result<(FieldValues, Vec<u8>), ProtocolError> {
    let header = spec.padded_header_bits() as usize;
    if bits.len() < header {
        return Err(ProtocolError::Truncated {
            expected: header,
            got: bits.len(),
        });
    }
    let mut values = FieldValues::new();
    let mut off = 0usize;
    for f in spec.header_fields() {
        let w = f.width_bits as usize;
        values.insert(f.name.clone(), bits[off..off + w].load_be::<u64>());
        off += w;
    }
    let payload = bits[header..]
        .chunks_exact(8)
        .map(|c| c.load_be::<u8>())
        .collect();
    Ok((values, payload))
}

/// Reads the routing key straight from its bit offset without decoding the
/// rest of the packet.
pub fn extract_routing_key(
    spec: &ProtocolSpec,
    binding: &SemanticBinding,
    bits: &BitSlice<u8, Msb0>,
) -> Result<u64, ProtocolError> {
    let field = spec
        .field(&binding.routing_key)
        .ok_or_else(|| ProtocolError::UnknownField(binding.routing_key.clone()))?;
    let off = spec
        .field_offset(&field.name)
        .expect("routing key is a header field") as usize;
    let end = off + field.width_bits as usize;
    if bits.len() < end {
        return Err(ProtocolError::Truncated {
            expected: end,
            got: bits.len(),
        });
    }
    Ok(bits[off..end].load_be::<u64>())
}

/// Fraction of on-wire bytes spent on the (padded) header. Goodput is
/// `1 - ratio`.
pub fn header_overhead_ratio(spec: &ProtocolSpec, payload_bytes: u64) -> f64 {
    let h = spec.padded_header_bytes() as f64;
    if h == 0.0 && payload_bytes == 0 {
        return 1.0;
    }
    h / (h + payload_bytes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{compute_layout, parse_spec};

    fn nibbles() -> ProtocolSpec {
        parse_spec("protocol n\nfield dst 4 role=routing_key\nfield src 4 role=src_addr\n")
            .unwrap()
    }

    fn vals(pairs: &[(&str, u64)]) -> FieldValues {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn packs_msb_first() {
        let bits = serialize_packet(&nibbles(), &vals(&[("dst", 0xA), ("src", 0x5)]), &[]).unwrap();
        assert_eq!(bits.len(), 8);
        assert_eq!(bits.as_raw_slice(), &[0xA5]);
        let (v, p) = deserialize_packet(&nibbles(), &bits).unwrap();
        assert_eq!(v, vals(&[("dst", 0xA), ("src", 0x5)]));
        assert!(p.is_empty());
    }

    #[test]
    fn overflow_rejected() {
        let err = serialize_packet(&nibbles(), &vals(&[("dst", 16)]), &[]).unwrap_err();
        assert_eq!(err, ProtocolError::ValueOverflow("dst".into()));
        let err = serialize_packet(&nibbles(), &vals(&[("nope", 1)]), &[]).unwrap_err();
        assert_eq!(err, ProtocolError::UnknownField("nope".into()));
    }

    #[test]
    fn header_padded_before_payload() {
        let spec = parse_spec("protocol p\nfield k 3 role=routing_key\nfield x 2\n").unwrap();
        let bits = serialize_packet(&spec, &vals(&[("k", 0b101), ("x", 0b11)]), &[0xFF, 0x01]).unwrap();
        assert_eq!(bits.len(), 8 + 16);
        assert_eq!(bits.as_raw_slice(), &[0b1011_1000, 0xFF, 0x01]);
    }

    #[test]
    fn truncated_input() {
        let spec = parse_spec("protocol p\nfield k 12 role=routing_key\nfield x 4\n").unwrap();
        let bits = serialize_packet(&spec, &vals(&[("k", 7)]), &[]).unwrap();
        let short = &bits[..15];
        assert_eq!(
            deserialize_packet(&spec, short).unwrap_err(),
            ProtocolError::Truncated { expected: 16, got: 15 }
        );
        assert_eq!(
            extract_routing_key(&spec, &spec.binding(), &bits[..11]).unwrap_err(),
            ProtocolError::Truncated { expected: 12, got: 11 }
        );
    }

    #[test]
    fn routing_key_slice() {
        let bits = serialize_packet(&nibbles(), &vals(&[("dst", 0xA)]), &[]).unwrap();
        assert_eq!(extract_routing_key(&nibbles(), &nibbles().binding(), &bits).unwrap(), 10);
    }

    #[test]
    fn straddling_key_reassembled() {
        let spec = parse_spec("protocol p\nfield pad 13 \nfield key 9 role=routing_key\n").unwrap();
        assert!(compute_layout(&spec, 16).entry("key").unwrap().straddles_boundary);
        let bits = serialize_packet(&spec, &vals(&[("pad", 0x1ABC), ("key", 0x1F3)]), &[9]).unwrap();
        let (v, _) = deserialize_packet(&spec, &bits).unwrap();
        let key = extract_routing_key(&spec, &spec.binding(), &bits).unwrap();
        assert_eq!(key, 0x1F3);
        assert_eq!(key, v["key"]);
    }

    #[test]
    fn underwater_four_byte_packet() {
        let spec = parse_spec(
            "protocol uw\nfield dst 4 role=routing_key\nfield src 4 role=src_addr\nfield type 8\nfield body * role=payload\n",
        )
        .unwrap();
        let bits = serialize_packet(&spec, &vals(&[("dst", 6), ("src", 2), ("type", 1)]), &[0xBE, 0xEF]).unwrap();
        assert_eq!(bits.len(), 32);
        assert_eq!(extract_routing_key(&spec, &spec.binding(), &bits).unwrap(), 6);
    }

    #[test]
    fn overhead_ratios() {
        let eth = parse_spec("protocol e\nfield dst 48 role=routing_key\nfield src 48\nfield ty 16\n").unwrap();
        let tiny = parse_spec("protocol t\nfield dst 4 role=routing_key\nfield src 4\nfield ty 8\n").unwrap();
        let eth_r = header_overhead_ratio(&eth, 2);
        let tiny_r = header_overhead_ratio(&tiny, 2);
        assert!((eth_r - 0.875).abs() < 1e-12);
        assert!((tiny_r - 0.5).abs() < 1e-12);
        assert!(((1.0 - tiny_r) / (1.0 - eth_r) - 4.0).abs() < 1e-12);
        assert_eq!(header_overhead_ratio(&tiny, 0), 1.0);
    }
}
