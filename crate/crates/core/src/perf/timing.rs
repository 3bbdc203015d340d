use serde::{Deserialize, Serialize};

use crate::sim::ArchConfig;

/// Per-packet processing time against the back-to-back arrival interval of
/// the smallest packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub t_arrival_ns: f64,
    pub t_proc_ns: f64,
    pub delta: f64,
}

impl TimingBudget {
    pub fn new(config: &ArchConfig, min_packet_bytes: u32, link_rate_gbps: f64, delta: f64) -> Self {
        Self {
            t_arrival_ns: min_packet_bytes as f64 * 8.0 / link_rate_gbps,
            t_proc_ns: config.pipeline_ii as f64 * 1000.0 / config.clock_mhz,
            delta,
        }
    }

    /// False exactly when `t_proc > (1 + delta) * t_arrival`.
    pub fn feasible(&self) -> bool {
        self.t_proc_ns <= (1.0 + self.delta) * self.t_arrival_ns
    }
}

/// Line-rate test for `config`. `min_packet_bytes` is the smallest packet on
/// the wire, padded header included.
pub fn timing_feasible(config: &ArchConfig, min_packet_bytes: u32, link_rate_gbps: f64, delta: f64) -> (bool, TimingBudget) {
    let b = TimingBudget::new(config, min_packet_bytes, link_rate_gbps, delta);
    (b.feasible(), b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(mhz: f64, ii: u32) -> ArchConfig {
        let mut c = ArchConfig::reference(8);
        c.clock_mhz = mhz;
        c.pipeline_ii = ii;
        c
    }

    #[test]
    fn examples() {
        let (ok, b) = timing_feasible(&at(350.0, 1), 64, 100.0, 0.1);
        assert!(ok);
        assert!((b.t_arrival_ns - 5.12).abs() < 1e-9);
        assert!((b.t_proc_ns - 2.857).abs() < 1e-3);
        let (ok, b) = timing_feasible(&at(350.0, 1), 4, 100.0, 0.1);
        assert!(!ok);
        assert!((b.t_arrival_ns - 0.32).abs() < 1e-9);
    }

    #[test]
    fn equality_is_feasible() {
        // 8 B at 64 Gbps is 1 ns; 1000 MHz at II 1 is 1 ns
        let (ok, b) = timing_feasible(&at(1000.0, 1), 8, 64.0, 0.0);
        assert_eq!(b.t_proc_ns, b.t_arrival_ns);
        assert!(ok);
    }
}
