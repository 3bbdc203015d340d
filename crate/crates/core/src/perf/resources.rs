use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ArchConfig, VoqKind};

/// One 36 Kb block RAM.
pub const BRAM_BLOCK_BITS: u64 = 36 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub lut_k: f64,
    pub ff_k: f64,
    pub bram_blocks: u64,
    pub freq_mhz: f64,
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("calibration profile has no {table} coefficient for `{key}`")]
    Missing { table: &'static str, key: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogicCoefficients {
    pub base: f64,
    pub per_port: BTreeMap<String, f64>,
    #[serde(default)]
    pub quadratic: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqCoefficients {
    pub base: BTreeMap<String, f64>,
    pub per_port: f64,
    pub floor: f64,
}

/// Fitted resource-model coefficients, keyed by architecture component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationProfile {
    pub name: String,
    pub lut: LogicCoefficients,
    pub ff: LogicCoefficients,
    pub freq: FreqCoefficients,
}

const SPAC_BASIC: &str = include_str!("profiles/spac_basic.toml");

impl CalibrationProfile {
    pub fn from_toml(text: &str) -> Result<Self, CalibrationError> {
        let p: Self = toml::from_str(text)?;
        p.check()?;
        Ok(p)
    }

    /// The shipped profile.
    pub fn builtin() -> &'static CalibrationProfile {
        static P: OnceLock<CalibrationProfile> = OnceLock::new();
        P.get_or_init(|| CalibrationProfile::from_toml(SPAC_BASIC).expect("shipped profile parses"))
    }

    fn check(&self) -> Result<(), CalibrationError> {
        let parts = component_keys();
        for (table, c) in [("lut", &self.lut), ("ff", &self.ff)] {
            for k in &parts {
                if !c.per_port.contains_key(*k) {
                    return Err(CalibrationError::Missing { table, key: k.to_string() });
                }
            }
        }
        for s in crate::sim::SchedulerKind::ALL {
            if !self.freq.base.contains_key(s.as_str()) {
                return Err(CalibrationError::Missing { table: "freq.base", key: s.to_string() });
            }
        }
        Ok(())
    }

    fn logic(c: &LogicCoefficients, config: &ArchConfig) -> f64 {
        let keys = [config.fwd_table.as_str(), config.voq.as_str(), config.scheduler.as_str()];
        let lin: f64 = keys.iter().map(|k| c.per_port[*k]).sum();
        let quad: f64 = keys.iter().filter_map(|k| c.quadratic.get(*k)).sum();
        let n = config.ports as f64;
        c.base + lin * n * config.data_width_bits as f64 / 256.0 + quad * n * n
    }

    pub fn freq_mhz(&self, config: &ArchConfig) -> f64 {
        let f = &self.freq;
        (f.base[config.scheduler.as_str()] - f.per_port * config.ports as f64).max(f.floor)
    }

    /// Estimate for `config` with its configured buffer depths. Unbounded
    /// buffers contribute no blocks.
    pub fn estimate(&self, config: &ArchConfig, key_bits: u32) -> ResourceEstimate {
        ResourceEstimate {
            lut_k: Self::logic(&self.lut, config),
            ff_k: Self::logic(&self.ff, config),
            bram_blocks: buffer_blocks(config) + table_blocks(config, key_bits),
            freq_mhz: self.freq_mhz(config),
        }
    }
}

fn component_keys() -> Vec<&'static str> {
    use crate::sim::{SchedulerKind, TableKind};
    TableKind::ALL
        .iter()
        .map(|t| t.as_str())
        .chain(VoqKind::ALL.iter().map(|v| v.as_str()))
        .chain(SchedulerKind::ALL.iter().map(|s| s.as_str()))
        .collect()
}

/// Estimate with the shipped calibration profile.
pub fn estimate_resources(config: &ArchConfig, key_bits: u32) -> ResourceEstimate {
    CalibrationProfile::builtin().estimate(config, key_bits)
}

/// Rounds a queue of `depth_flits` words of `width_bits` up to whole blocks.
/// Returns the depth those blocks hold and the block count.
pub fn align_to_bram(depth_flits: u32, width_bits: u32) -> (u32, u64) {
    let bits = depth_flits.max(1) as u64 * width_bits as u64;
    let blocks = bits.div_ceil(BRAM_BLOCK_BITS);
    ((blocks * BRAM_BLOCK_BITS / width_bits as u64) as u32, blocks)
}

fn buffer_blocks(config: &ArchConfig) -> u64 {
    let n = config.ports;
    let w = config.data_width_bits;
    let blocks = |d: Option<u32>| d.map_or(0, |d| align_to_bram(d, w).1);
    match config.voq {
        // index queues live in distributed RAM
        VoqKind::Shared => blocks(config.shared_buffer_slots),
        VoqKind::Nxn => (0..n * n)
            .map(|q| blocks(config.voq_depth.depth(n, q / n, q % n)))
            .sum(),
        VoqKind::InputFifo => (0..n)
            .map(|i| blocks((0..n).map(|j| config.voq_depth.depth(n, i, j)).sum()))
            .sum(),
    }
}

/// Entries of `key_bits` addresses (multibank) or direct-indexed port
/// numbers (full lookup), packed into blocks per bank.
fn table_blocks(config: &ArchConfig, key_bits: u32) -> u64 {
    let port_bits = usize::BITS - (config.ports - 1).leading_zeros() + 1;
    match config.fwd_table {
        crate::sim::TableKind::FullLookup => ((1u64 << key_bits) * port_bits as u64).div_ceil(BRAM_BLOCK_BITS),
        crate::sim::TableKind::MultibankHash => {
            let banks = config.table_banks as u64;
            let entries = (1u64 << config.hash_bits.min(key_bits)).div_ceil(banks);
            let entry_bits = (key_bits + port_bits) as u64;
            banks * (entries * entry_bits).div_ceil(BRAM_BLOCK_BITS)
        }
    }
}

/// Peak datapath throughput in Gbps: `W * F / II`.
pub fn max_throughput(config: &ArchConfig) -> f64 {
    config.data_width_bits as f64 * config.clock_mhz / (1000.0 * config.pipeline_ii as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{QueueDepths, SchedulerKind, TableKind};
    use proptest::prelude::*;

    fn basic(n: usize) -> ArchConfig {
        ArchConfig::reference(n)
    }

    #[test]
    fn align_examples() {
        assert_eq!(align_to_bram(1000, 256), (1008, 7));
        assert_eq!(align_to_bram(1, 512), (72, 1));
        assert_eq!(align_to_bram(144, 256), (144, 1));
    }

    proptest! {
        #[test]
        fn align_is_minimal_cover(d in 1u32..200_000, wi in 0usize..4) {
            let w = crate::sim::DATA_WIDTHS[wi];
            let (aligned, blocks) = align_to_bram(d, w);
            prop_assert!(aligned >= d);
            prop_assert!(blocks * BRAM_BLOCK_BITS >= d as u64 * w as u64);
            prop_assert!((blocks - 1) * BRAM_BLOCK_BITS < d as u64 * w as u64);
        }
    }

    #[test]
    fn throughput_formula() {
        let mut c = basic(8);
        c.clock_mhz = 350.0;
        assert!((max_throughput(&c) - 89.6).abs() < 1e-9);
        c.pipeline_ii = 2;
        assert!((max_throughput(&c) - 44.8).abs() < 1e-9);
        c.data_width_bits = 512;
        c.clock_mhz = 146.0;
        c.pipeline_ii = 1;
        assert!((max_throughput(&c) - 74.752).abs() < 1e-9);
    }

    #[test]
    fn profile_rejects_missing_keys() {
        let text = SPAC_BASIC.replace("edrrm = 0.70\n", "");
        assert!(matches!(
            CalibrationProfile::from_toml(&text),
            Err(CalibrationError::Missing { table: "lut", .. })
        ));
    }

    #[test]
    fn monotone_in_ports_width_and_depth() {
        for t in TableKind::ALL {
            for v in [VoqKind::Nxn, VoqKind::Shared] {
                for s in SchedulerKind::ALL {
                    let c8 = ArchConfig::new(8, 256, *t, v, *s);
                    let c16 = ArchConfig::new(16, 256, *t, v, *s);
                    let (a, b) = (estimate_resources(&c8, 8), estimate_resources(&c16, 8));
                    assert!(b.lut_k >= a.lut_k && b.ff_k >= a.ff_k && b.bram_blocks >= a.bram_blocks);
                    let w = estimate_resources(&ArchConfig::new(8, 512, *t, v, *s), 8);
                    assert!(w.lut_k >= a.lut_k && w.bram_blocks >= a.bram_blocks);
                    let deep = c8.clone().with_buffers(QueueDepths::Uniform(4096), Some(65536));
                    assert!(estimate_resources(&deep, 8).bram_blocks >= a.bram_blocks);
                }
            }
        }
    }
}
