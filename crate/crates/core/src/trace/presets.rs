//! Named generator presets standing in for the workloads the switch is tuned
//! against. Each preset fixes every generator parameter; only the seed varies.
//!
//! The `uniform`, `bursty` and `incast` presets emit single-flit cells on a
//! 4 ns slot (one 256-bit flit per cycle at 250 MHz, i.e. 64 Gbps per port).

use super::{GenParams, PayloadDist, TrafficModel};

pub const PRESET_NAMES: &[&str] = &[
    "uniform",
    "bursty",
    "incast",
    "poisson",
    "hft",
    "underwater",
    "rl",
    "datacenter",
    "industry",
    "bench",
];

fn cells(model: TrafficModel, load: f64, slots: u64) -> GenParams {
    GenParams {
        model,
        ports: 8,
        link_rate_gbps: 64.0,
        load,
        slots,
        slot_ns: Some(4),
        header_bytes: 2,
        payload: PayloadDist::Fixed { bytes: 16 },
        self_traffic: true,
        ..Default::default()
    }
}

pub fn preset(name: &str) -> Option<GenParams> {
    let p = match name {
        "uniform" => cells(TrafficModel::UniformBernoulli, 0.8, 15_000),
        "bursty" => GenParams {
            mean_burst: 32.0,
            ..cells(TrafficModel::OnoffBursty, 0.8, 15_000)
        },
        "incast" => GenParams {
            incast_fanin: 6,
            incast_burst: 8,
            background_load: 0.2,
            self_traffic: false,
            // 18 Gbps: one cell per 8 ns keeps every template clock above line rate
            link_rate_gbps: 18.0,
            slot_ns: Some(8),
            ..cells(TrafficModel::Incast, 0.8, 15_000)
        },
        "poisson" => GenParams {
            slot_ns: Some(10),
            ..cells(TrafficModel::UniformBernoulli, 0.02, 500_000)
        },
        // small, bursty order traffic on 10G links
        "hft" => GenParams {
            model: TrafficModel::OnoffBursty,
            ports: 8,
            link_rate_gbps: 10.0,
            load: 0.3,
            slots: 20_000,
            header_bytes: 2,
            payload: PayloadDist::Uniform { min: 16, max: 32 },
            mean_burst: 8.0,
            ..Default::default()
        },
        // periodic 2-byte telemetry between eight robots over a slow link
        "underwater" => GenParams {
            model: TrafficModel::ConstantRate,
            ports: 8,
            link_rate_gbps: 0.01,
            load: 1.0,
            slots: 2_000,
            slot_ns: Some(10_000),
            header_bytes: 2,
            payload: PayloadDist::Fixed { bytes: 2 },
            ..Default::default()
        },
        // all-reduce style synchronized incast with large gradients
        "rl" => GenParams {
            model: TrafficModel::Incast,
            ports: 8,
            link_rate_gbps: 100.0,
            load: 0.7,
            slots: 4_000,
            header_bytes: 2,
            payload: PayloadDist::Uniform { min: 1400, max: 1500 },
            incast_fanin: 7,
            incast_burst: 4,
            background_load: 0.05,
            ..Default::default()
        },
        // RPC mice with an occasional elephant across 32 nodes
        "datacenter" => GenParams {
            model: TrafficModel::Hotspot,
            ports: 32,
            link_rate_gbps: 100.0,
            load: 0.4,
            slots: 5_000,
            header_bytes: 4,
            payload: PayloadDist::Choice {
                sizes: vec![64, 256, 1024, 1500],
                weights: vec![0.4, 0.2, 0.1, 0.3],
            },
            hotspot_fraction: 0.2,
            hotspot_port: 0,
            broadcast_fraction: 0.001,
            ..Default::default()
        },
        // SCADA polling: regular, small, mostly to the controller
        "industry" => GenParams {
            model: TrafficModel::Hotspot,
            ports: 10,
            link_rate_gbps: 1.0,
            load: 0.2,
            slots: 10_000,
            header_bytes: 2,
            payload: PayloadDist::Uniform { min: 40, max: 80 },
            hotspot_fraction: 0.7,
            hotspot_port: 0,
            ..Default::default()
        },
        // 10^6 MTU-sized packets for fidelity/speed comparisons
        "bench" => GenParams {
            model: TrafficModel::UniformBernoulli,
            ports: 8,
            link_rate_gbps: 64.0,
            load: 0.8,
            slots: 156_250,
            header_bytes: 2,
            payload: PayloadDist::Fixed { bytes: 1500 },
            ..Default::default()
        },
        _ => return None,
    };
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::gen_trace;

    #[test]
    fn all_presets_generate() {
        for name in PRESET_NAMES.iter().filter(|n| **n != "bench") {
            let mut p = preset(name).unwrap();
            p.slots = p.slots.min(2_000);
            let t = gen_trace(&p, 1).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!t.is_empty(), "{name}");
        }
        assert!(preset("nope").is_none());
    }
}
