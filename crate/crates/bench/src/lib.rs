//! Shared fixtures for the benchmarks.

use spac_core::protocol::{builtin_spec, ProtocolSpec};
use spac_core::sim::{build_switch, ArchConfig, SchedulerKind, SwitchModel, TableKind, VoqKind};
use spac_core::trace::{gen_trace, preset, Trace};

pub fn basic() -> ProtocolSpec {
    builtin_spec("basic").expect("builtin spec")
}

/// The MTU benchmark preset cut to `slots` slots.
pub fn mtu_trace(slots: u64) -> Trace {
    let mut p = preset("bench").expect("preset");
    p.slots = slots;
    gen_trace(&p, 1).expect("trace")
}

/// A preset's trace with its default size.
pub fn preset_trace(name: &str) -> Trace {
    gen_trace(&preset(name).expect("preset"), 1).expect("trace")
}

pub fn switch(voq: VoqKind, scheduler: SchedulerKind) -> SwitchModel {
    let cfg = ArchConfig::new(8, 256, TableKind::FullLookup, voq, scheduler)
        .with_islip_iterations(2)
        .unbounded();
    let s = basic();
    build_switch(cfg, s.clone(), s.binding()).expect("switch")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        let t = mtu_trace(100);
        assert!(!t.is_empty());
        assert_eq!(switch(VoqKind::Nxn, SchedulerKind::Islip).config().ports, t.port_count);
    }
}
