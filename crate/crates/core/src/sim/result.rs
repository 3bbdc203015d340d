use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Occupancy samples indexed by depth in flits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OccupancyHist {
    counts: Vec<u64>,
}

impl OccupancyHist {
    pub fn record(&mut self, depth: u32) {
        let d = depth as usize;
        if d >= self.counts.len() {
            self.counts.resize(d + 1, 0);
        }
        self.counts[d] += 1;
    }

    pub fn add(&mut self, depth: u32, count: u64) {
        if count > 0 {
            self.record(depth);
            self.counts[depth as usize] += count - 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn max(&self) -> Option<u32> {
        self.counts.iter().rposition(|&c| c > 0).map(|d| d as u32)
    }

    pub fn min(&self) -> Option<u32> {
        self.counts.iter().position(|&c| c > 0).map(|d| d as u32)
    }

    /// Samples strictly deeper than `depth`.
    pub fn count_above(&self, depth: u32) -> u64 {
        self.counts.iter().skip(depth as usize + 1).sum()
    }

    pub fn tail_above(&self, depth: u32) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.count_above(depth) as f64 / total as f64
        }
    }

    /// Smallest depth whose tail mass above it is at most `eps`.
    pub fn depth_for_tail(&self, eps: f64) -> Option<u32> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let allowed = (eps * total as f64).floor() as u64;
        let mut above = 0u64;
        for d in (0..self.counts.len()).rev() {
            // `above` counts samples deeper than d
            if above > allowed {
                return Some(d as u32 + 1);
            }
            above += self.counts[d];
        }
        Some(0)
    }

    pub fn merge(&mut self, other: &OccupancyHist) {
        for (d, &c) in other.counts.iter().enumerate() {
            self.add(d as u32, c);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(d, &c)| (d as u32, c))
    }
}

impl Serialize for OccupancyHist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<u32, u64> = self.iter().collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for OccupancyHist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<u32, u64>::deserialize(d)?;
        let mut h = OccupancyHist::default();
        for (depth, count) in map {
            h.add(depth, count);
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub p50: f64,
    pub p99: f64,
    pub max: f64,
    pub mean: f64,
    pub count: u64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Nearest-rank percentile of unordered samples. Reorders `samples`.
pub fn select_percentile(samples: &mut [f64], p: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let rank = (p * samples.len() as f64).ceil() as usize;
    let k = rank.clamp(1, samples.len()) - 1;
    *samples.select_nth_unstable_by(k, f64::total_cmp).1
}

impl LatencySummary {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        Self {
            p99: select_percentile(&mut v, 0.99),
            p50: select_percentile(&mut v, 0.50),
            max: v.iter().copied().fold(f64::MIN, f64::max),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            count: v.len() as u64,
        }
    }
}

/// Counted in packet-destination copies. Packets stopped before their
/// destination set was known count once, as residual.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conservation {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub residual: u64,
}

impl Conservation {
    pub fn balances(&self) -> bool {
        self.injected == self.delivered + self.dropped + self.residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Cycle,
    Surrogate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub fidelity: Fidelity,
    pub ports: usize,
    pub cycle_ns: f64,
    pub sim_cycles: u64,
    pub latency_ns: LatencySummary,
    /// p99 per output port; 0 where nothing was delivered.
    pub per_port_p99_ns: Vec<f64>,
    pub throughput_gbps: f64,
    /// Delivered flits per output per flit slot over the measurement window.
    pub egress_utilization: f64,
    pub delivered: u64,
    pub dropped: u64,
    pub drop_rate: f64,
    pub worst_voq_drop_rate: f64,
    pub qmax: Vec<Vec<u32>>,
    pub q_hist: Vec<Vec<OccupancyHist>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pool_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pool_hist: Option<OccupancyHist>,
    pub conservation: Conservation,
    /// Per-copy latencies, kept in memory only.
    #[serde(skip)]
    pub latencies_ns: Vec<f64>,
}

impl SimResult {
    pub fn worst_port_p99_ns(&self) -> f64 {
        self.per_port_p99_ns.iter().copied().fold(0.0, f64::max)
    }

    /// Occupancy histogram summed over every queue.
    pub fn aggregate_hist(&self) -> OccupancyHist {
        let mut h = OccupancyHist::default();
        for row in &self.q_hist {
            for q in row {
                h.merge(q);
            }
        }
        h
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SimResult serializes")
    }
}

/// Builder shared by both fidelities.
#[derive(Debug)]
pub(crate) struct ResultAcc {
    pub ports: usize,
    pub per_port: Vec<Vec<f64>>,
    pub qmax: Vec<u32>,
    pub q_hist: Vec<OccupancyHist>,
    pub offered: Vec<u64>,
    pub dropped_q: Vec<u64>,
    pub pool_max: u32,
    pub pool_hist: Option<OccupancyHist>,
    pub ledger: Conservation,
    pub window_bits: u64,
    pub window_flits: u64,
}

impl ResultAcc {
    pub fn new(ports: usize, shared: bool) -> Self {
        let q = ports * ports;
        Self {
            ports,
            per_port: vec![Vec::new(); ports],
            qmax: vec![0; q],
            q_hist: vec![OccupancyHist::default(); q],
            offered: vec![0; q],
            dropped_q: vec![0; q],
            pool_max: 0,
            pool_hist: shared.then(OccupancyHist::default),
            ledger: Conservation::default(),
            window_bits: 0,
            window_flits: 0,
        }
    }

    pub fn finish(self, fidelity: Fidelity, cycle_ns: f64, sim_cycles: u64, window_cycles: u64, ii: u32) -> SimResult {
        let n = self.ports;
        let mut latencies = Vec::with_capacity(self.per_port.iter().map(Vec::len).sum());
        let mut per_port_p99_ns = Vec::with_capacity(n);
        for mut v in self.per_port {
            latencies.extend_from_slice(&v);
            per_port_p99_ns.push(select_percentile(&mut v, 0.99));
        }
        let worst_voq_drop_rate = self
            .offered
            .iter()
            .zip(&self.dropped_q)
            .filter(|(o, _)| **o > 0)
            .map(|(o, d)| *d as f64 / *o as f64)
            .fold(0.0, f64::max);
        let offered: u64 = self.offered.iter().sum();
        let window_ns = window_cycles as f64 * cycle_ns;
        let slots = n as f64 * window_cycles as f64 / ii as f64;
        SimResult {
            fidelity,
            ports: n,
            cycle_ns,
            sim_cycles,
            latency_ns: LatencySummary::from_samples(&latencies),
            per_port_p99_ns,
            throughput_gbps: if window_ns > 0.0 { self.window_bits as f64 / window_ns } else { 0.0 },
            egress_utilization: if slots > 0.0 { self.window_flits as f64 / slots } else { 0.0 },
            delivered: self.ledger.delivered,
            dropped: self.ledger.dropped,
            drop_rate: if offered > 0 { self.ledger.dropped as f64 / offered as f64 } else { 0.0 },
            worst_voq_drop_rate,
            qmax: self.qmax.chunks(n).map(<[u32]>::to_vec).collect(),
            q_hist: self.q_hist.chunks(n).map(<[OccupancyHist]>::to_vec).collect(),
            pool_max: self.pool_hist.as_ref().map(|_| self.pool_max),
            pool_hist: self.pool_hist,
            conservation: self.ledger,
            latencies_ns: latencies,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(samples: &[u32]) -> OccupancyHist {
        let mut h = OccupancyHist::default();
        samples.iter().for_each(|&d| h.record(d));
        h
    }

    #[test]
    fn tail_sizing() {
        let h = hist(&[1, 2, 3, 4, 5, 6, 7, 8, 8, 8]);
        assert_eq!(h.depth_for_tail(0.0), Some(8));
        // one sample allowed above: depth 8 still, since 3 samples sit at 8
        assert_eq!(h.depth_for_tail(0.1), Some(8));
        assert_eq!(h.depth_for_tail(0.3), Some(7));
        assert_eq!(h.depth_for_tail(0.35), Some(7));
        assert_eq!(h.depth_for_tail(0.99), Some(1));
        assert_eq!(h.count_above(6), 4);
        assert_eq!(OccupancyHist::default().depth_for_tail(0.0), None);
    }

    #[test]
    fn tail_sizing_matches_brute_force() {
        let h = hist(&[3, 3, 5, 9, 9, 9, 12, 40, 41, 41, 2, 2, 2, 2]);
        for eps in [0.0, 0.01, 0.1, 0.2, 0.3, 0.5, 0.9] {
            let d = h.depth_for_tail(eps).unwrap();
            assert!(h.tail_above(d) <= eps);
            if d > 0 {
                assert!(h.tail_above(d - 1) > eps, "eps {eps} d {d}");
            }
        }
    }

    #[test]
    fn hist_serializes_as_sparse_map() {
        let h = hist(&[0, 4, 4]);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"0":1,"4":2}"#);
        let back: OccupancyHist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencySummary::from_samples(&v);
        assert_eq!((s.p50, s.p99, s.max, s.mean), (50.0, 99.0, 100.0, 50.5));
        assert_eq!(percentile(&[7.0], 0.99), 7.0);
        let mut r: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(select_percentile(&mut r, 0.99), 99.0);
    }
}
