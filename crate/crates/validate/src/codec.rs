use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spac_core::protocol::{
    compute_layout, deserialize_packet, serialize_packet, FieldSpec, FieldValues, ProtocolSpec, Role, MAX_FIELD_BITS,
};

use crate::{outcome, Outcome, ValidateError};

const ROUND_TRIPS: usize = 10_000;
const LAYOUTS: usize = 1_000;

fn random_spec(rng: &mut ChaCha8Rng) -> Result<ProtocolSpec, ValidateError> {
    let n = rng.gen_range(1..=12);
    let key = rng.gen_range(0..n);
    let mut fields: Vec<FieldSpec> = (0..n)
        .map(|i| {
            let role = if i == key { Role::RoutingKey } else { Role::None };
            FieldSpec::new(format!("f{i}"), rng.gen_range(1..=MAX_FIELD_BITS), role)
        })
        .collect();
    if rng.gen_bool(0.5) {
        fields.push(FieldSpec::new("data", 0, Role::Payload));
    }
    Ok(ProtocolSpec::new("rand", fields)?)
}

/// Bit-at-a-time MSB-first packing with the header padded to whole bytes.
fn naive_bits(spec: &ProtocolSpec, values: &FieldValues, payload: &[u8]) -> Vec<bool> {
    let mut out = Vec::new();
    for f in spec.header_fields() {
        let v = values[&f.name];
        for b in (0..f.width_bits).rev() {
            out.push((v >> b) & 1 == 1);
        }
    }
    while out.len() % 8 != 0 {
        out.push(false);
    }
    for byte in payload {
        for b in (0..8).rev() {
            out.push((byte >> b) & 1 == 1);
        }
    }
    out
}

fn round_trips(rng: &mut ChaCha8Rng) -> Result<Option<String>, ValidateError> {
    for case in 0..ROUND_TRIPS {
        let spec = random_spec(rng)?;
        let values: FieldValues = spec
            .header_fields()
            .map(|f| {
                let v: u64 = rng.gen();
                let v = if f.width_bits == 64 { v } else { v & ((1u64 << f.width_bits) - 1) };
                (f.name.clone(), v)
            })
            .collect();
        let len = rng.gen_range(0..64);
        let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let bits = serialize_packet(&spec, &values, &payload)?;
        let expect = naive_bits(&spec, &values, &payload);
        if bits.iter().by_vals().ne(expect.iter().copied()) {
            return Ok(Some(format!("case {case}: serialized bits differ from the naive packing")));
        }
        let (v, p) = deserialize_packet(&spec, &bits)?;
        if v != values || p != payload {
            return Ok(Some(format!("case {case}: round trip changed the packet")));
        }
    }
    Ok(None)
}

fn layouts(rng: &mut ChaCha8Rng) -> Result<(Option<String>, usize), ValidateError> {
    let mut straddles = 0;
    for case in 0..LAYOUTS {
        let spec = random_spec(rng)?;
        let w = if rng.gen_bool(0.5) {
            1 << rng.gen_range(3..=10)
        } else {
            rng.gen_range(1..=1024)
        };
        let plan = compute_layout(&spec, w);
        // walk every header bit and note which flit it lands in
        let mut bit = 0u32;
        for (f, e) in spec.header_fields().zip(&plan.entries) {
            let flits: Vec<u32> = (bit..bit + f.width_bits).map(|b| b / w).collect();
            let straddle = flits.iter().any(|&x| x != flits[0]);
            straddles += straddle as usize;
            if e.field != f.name || e.first_flit != flits[0] || e.bit_offset_in_flit != bit % w || e.straddles_boundary != straddle {
                return Ok((Some(format!("case {case}: field {} at width {w} disagrees", f.name)), straddles));
            }
            bit += f.width_bits;
        }
        if plan.entries.len() != spec.header_fields().count() {
            return Ok((Some(format!("case {case}: entry count differs")), straddles));
        }
    }
    Ok((None, straddles))
}

/// Randomized codec round trips and straddle flags against bit-level
/// oracles.
pub fn criterion_1() -> Outcome {
    outcome(1, "codec-soundness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0DEC);
        if let Some(e) = round_trips(&mut rng)? {
            return Ok((false, e));
        }
        let (bad, straddles) = layouts(&mut rng)?;
        if let Some(e) = bad {
            return Ok((false, e));
        }
        Ok((
            true,
            format!("{ROUND_TRIPS} round trips bit-exact; {LAYOUTS} layouts agree ({straddles} straddling fields)"),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use spac_core::protocol::parse_spec;

    #[test]
    fn oracle_packs_msb_first() {
        let s = parse_spec("protocol n\nfield a 4 role=routing_key\nfield b 3\n").unwrap();
        let v: FieldValues = [("a".to_string(), 0b1010), ("b".to_string(), 0b011)].into();
        let bits = naive_bits(&s, &v, &[0x80]);
        let s: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        assert_eq!(s, "1010011010000000");
    }
}
