//! Switch model: configuration, forwarding tables, buffers, arbiters and the
//! cycle-level simulator.

mod annotate;
mod buffers;
mod config;
mod cycle;
mod result;
pub mod sched;
mod table;

pub use annotate::{back_annotate, Annotation};
pub use config::{
    scheduler_overhead_cycles, ArchConfig, QueueDepths, SchedulerKind, StageLatencies, Stages, TableKind, VoqKind,
    DATA_WIDTHS, FULL_LOOKUP_MAX_KEY_BITS,
};
pub use cycle::run_cycle_sim;
pub use result::{percentile, select_percentile, Conservation, Fidelity, LatencySummary, OccupancyHist, SimResult};
pub use table::ForwardingTable;

pub(crate) use buffers::Buffers;
pub(crate) use result::ResultAcc;

use thiserror::Error;

use crate::protocol::{compute_layout, ParsePlan, ProtocolError, ProtocolSpec, SemanticBinding};
use crate::trace::{broadcast_key, DstAddr, Trace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("full lookup table cannot index a {key_bits}-bit routing key")]
    IncompatibleTable { key_bits: u32 },
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error("trace has {trace} ports but the switch has {switch}")]
    ConfigTraceMismatch { trace: usize, switch: usize },
    #[error("packet {index}: address {addr} does not fit a {key_bits}-bit key")]
    KeyOutOfRange { index: usize, addr: u64, key_bits: u32 },
    #[error("bad annotation: {0}")]
    BadAnnotation(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Packets arriving before this cycle are excluded from latency and
    /// throughput statistics.
    pub warmup_cycles: u64,
    /// Stop at this cycle instead of draining the switch.
    pub max_cycles: Option<u64>,
    /// Allows unbounded buffers.
    pub profiling: bool,
}

impl SimOptions {
    pub fn profiling() -> Self {
        Self {
            profiling: true,
            ..Self::default()
        }
    }
}

/// A configured switch bound to one protocol.
#[derive(Debug, Clone)]
pub struct SwitchModel {
    config: ArchConfig,
    spec: ProtocolSpec,
    binding: SemanticBinding,
    plan: ParsePlan,
    annotation: Option<Annotation>,
}

pub fn build_switch(config: ArchConfig, spec: ProtocolSpec, binding: SemanticBinding) -> Result<SwitchModel, SimError> {
    config.validate()?;
    binding.validate(&spec)?;
    let key_bits = spec.routing_key_bits();
    if config.fwd_table == TableKind::FullLookup && key_bits > FULL_LOOKUP_MAX_KEY_BITS {
        return Err(SimError::IncompatibleTable { key_bits });
    }
    let plan = compute_layout(&spec, config.data_width_bits);
    Ok(SwitchModel {
        config,
        spec,
        binding,
        plan,
        annotation: None,
    })
}

impl SwitchModel {
    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn binding(&self) -> &SemanticBinding {
        &self.binding
    }

    pub fn plan(&self) -> &ParsePlan {
        &self.plan
    }

    pub fn annotation(&self) -> Option<&Annotation> {
        self.annotation.as_ref()
    }

    pub fn clear_annotation(&self) -> SwitchModel {
        SwitchModel {
            annotation: None,
            ..self.clone()
        }
    }

    pub fn key_bits(&self) -> u32 {
        self.spec.routing_key_bits()
    }

    pub fn new_table(&self) -> ForwardingTable {
        let c = &self.config;
        ForwardingTable::new(c.fwd_table, self.key_bits(), c.ports, c.table_banks, c.hash_bits)
            .expect("checked in build_switch")
    }

    pub fn stages(&self) -> StageLatencies {
        match &self.annotation {
            Some(a) => a.stage_cycles(self.config.cycle_ns()),
            None => self.config.stages,
        }
    }

    pub fn ii(&self) -> u32 {
        self.annotation
            .as_ref()
            .and_then(|a| a.ii)
            .unwrap_or(self.config.pipeline_ii)
    }

    pub fn cycle_ns(&self) -> f64 {
        self.config.cycle_ns()
    }

    /// Bits on the wire: padded header plus payload.
    pub fn packet_bits(&self, payload_bytes: u32) -> u64 {
        self.spec.padded_header_bits() as u64 + 8 * payload_bytes as u64
    }

    pub fn packet_flits(&self, payload_bytes: u32) -> u32 {
        self.packet_bits(payload_bytes)
            .div_ceil(self.config.data_width_bits as u64)
            .max(1) as u32
    }

    pub fn header_flits(&self) -> u32 {
        self.plan.header_flits()
    }

    /// Cycles from first ingress flit to last egress flit with no contention.
    pub fn nominal_cycles(&self, flits: u32) -> u64 {
        self.stages().total() as u64 + 2 * (flits as u64 - 1) * self.ii() as u64
    }

    /// Unloaded latency in ns for a packet of `flits` flits.
    pub fn pipeline_ns(&self, flits: u32) -> f64 {
        let stream = 2.0 * (flits as f64 - 1.0) * self.ii() as f64 * self.cycle_ns();
        let base = match &self.annotation {
            Some(a) => a.total_ns(),
            None => self.config.stages.total() as f64 * self.cycle_ns(),
        };
        base + stream
    }

    /// Latency of a packet that arrived at cycle `arrival` and left the
    /// egress with its last flit at cycle `exit`.
    pub fn latency_ns(&self, arrival: u64, exit: u64, flits: u32) -> f64 {
        let queued = exit - arrival - self.nominal_cycles(flits);
        queued as f64 * self.cycle_ns() + self.pipeline_ns(flits)
    }

    pub fn arrival_cycle(&self, time_ns: u64) -> u64 {
        (time_ns as f64 * self.config.clock_mhz / 1000.0 + 1e-9).floor() as u64
    }

    /// Checks port count and address widths.
    pub fn check_trace(&self, trace: &Trace) -> Result<(), SimError> {
        if trace.port_count != self.config.ports {
            return Err(SimError::ConfigTraceMismatch {
                trace: trace.port_count,
                switch: self.config.ports,
            });
        }
        let key_bits = self.key_bits();
        let bcast = broadcast_key(key_bits);
        let learns = self.binding.src_addr.is_some();
        for (index, e) in trace.events.iter().enumerate() {
            let check = |addr: u64| {
                if addr >= bcast {
                    Err(SimError::KeyOutOfRange { index, addr, key_bits })
                } else {
                    Ok(())
                }
            };
            if let DstAddr::Unicast(a) = e.dst_addr {
                check(a)?;
            }
            if learns {
                check(e.src_addr)?;
            }
        }
        Ok(())
    }

    pub fn learns(&self) -> bool {
        self.binding.src_addr.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_spec;

    pub(crate) fn spec(key_bits: u32) -> ProtocolSpec {
        parse_spec(&format!(
            "protocol t\nfield dst {key_bits} role=routing_key\nfield src {key_bits} role=src_addr\nfield data * role=payload\n"
        ))
        .unwrap()
    }

    #[test]
    fn build_checks_table_width() {
        let cfg = ArchConfig::new(8, 256, TableKind::FullLookup, VoqKind::Nxn, SchedulerKind::Rr);
        let s = spec(32);
        let b = s.binding();
        assert!(matches!(
            build_switch(cfg.clone(), s, b),
            Err(SimError::IncompatibleTable { key_bits: 32 })
        ));
        let s = spec(8);
        let m = build_switch(cfg, s.clone(), s.binding()).unwrap();
        assert_eq!(m.config().voq_count(), 64);
        assert_eq!(m.packet_flits(0), 1);
        assert_eq!(m.packet_flits(30), 1);
        assert_eq!(m.packet_flits(31), 2);
        assert_eq!(m.nominal_cycles(1), 7);
    }
}
