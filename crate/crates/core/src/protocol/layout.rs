use serde::{Deserialize, Serialize};

use super::ProtocolSpec;

/// Placement of one header field relative to flit boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub field: String,
    pub first_flit: u32,
    pub bit_offset_in_flit: u32,
    pub width_bits: u32,
    pub straddles_boundary: bool,
}

impl LayoutEntry {
    /// Absolute bit offset from the start of the packet.
    pub fn absolute_offset(&self, flit_width_bits: u32) -> u32 {
        self.first_flit * flit_width_bits + self.bit_offset_in_flit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsePlan {
    pub flit_width_bits: u32,
    pub entries: Vec<LayoutEntry>,
}

impl ParsePlan {
    pub fn header_bits(&self) -> u32 {
        self.entries.iter().map(|e| e.width_bits).sum()
    }

    /// Flits that must arrive before every header field is available.
    pub fn header_flits(&self) -> u32 {
        self.header_bits().div_ceil(self.flit_width_bits).max(1)
    }

    pub fn straddle_count(&self) -> usize {
        self.entries.iter().filter(|e| e.straddles_boundary).count()
    }

    pub fn entry(&self, field: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.field == field)
    }
}

/// Assigns each header field its flit index and in-flit offset under
/// MSB-first packing. A field straddles when it runs past the end of the
/// flit it starts in.
///
/// Panics if `flit_width_bits` is zero.
pub fn compute_layout(spec: &ProtocolSpec, flit_width_bits: u32) -> ParsePlan {
    assert!(flit_width_bits > 0, "flit width must be positive");
    let mut offset = 0u32;
    let entries = spec
        .header_fields()
        .map(|f| {
            let first_flit = offset / flit_width_bits;
            let in_flit = offset % flit_width_bits;
            offset += f.width_bits;
            LayoutEntry {
                field: f.name.clone(),
                first_flit,
                bit_offset_in_flit: in_flit,
                width_bits: f.width_bits,
                straddles_boundary: in_flit + f.width_bits > flit_width_bits,
            }
        })
        .collect();
    ParsePlan {
        flit_width_bits,
        entries,
    }
}
