use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DstAddr, PacketEvent, Trace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficModel {
    /// iid per-slot arrivals with uniform destinations.
    UniformBernoulli,
    /// Two-state ON/OFF source per port; each ON period is a back-to-back
    /// burst to a single destination. Dwell times are geometric.
    OnoffBursty,
    /// `incast_fanin` sources hit one destination in synchronized epochs,
    /// optionally over uniform background traffic.
    Incast,
    /// A fraction of traffic goes to one hot destination, the rest uniform.
    Hotspot,
    /// Every port sends one packet per slot, rotating destinations.
    ConstantRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayloadDist {
    Fixed { bytes: u32 },
    Uniform { min: u32, max: u32 },
    /// Weighted discrete sizes.
    Choice { sizes: Vec<u32>, weights: Vec<f64> },
}

impl PayloadDist {
    pub fn max_bytes(&self) -> u32 {
        match self {
            PayloadDist::Fixed { bytes } => *bytes,
            PayloadDist::Uniform { max, .. } => *max,
            PayloadDist::Choice { sizes, .. } => sizes.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn mean_bytes(&self) -> f64 {
        match self {
            PayloadDist::Fixed { bytes } => *bytes as f64,
            PayloadDist::Uniform { min, max } => (*min as f64 + *max as f64) / 2.0,
            PayloadDist::Choice { sizes, weights } => {
                let total: f64 = weights.iter().sum();
                sizes
                    .iter()
                    .zip(weights)
                    .map(|(&s, &w)| s as f64 * w / total)
                    .sum()
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            PayloadDist::Fixed { .. } => Ok(()),
            PayloadDist::Uniform { min, max } if min <= max => Ok(()),
            PayloadDist::Uniform { .. } => Err("payload min > max".into()),
            PayloadDist::Choice { sizes, weights } => {
                if sizes.is_empty() || sizes.len() != weights.len() {
                    return Err("payload choice needs matching non-empty sizes/weights".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err("payload weights must be non-negative with a positive sum".into());
                }
                Ok(())
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            PayloadDist::Fixed { bytes } => *bytes,
            PayloadDist::Uniform { min, max } => rng.gen_range(*min..=*max),
            PayloadDist::Choice { sizes, weights } => {
                let total: f64 = weights.iter().sum();
                let mut x = rng.gen::<f64>() * total;
                for (s, w) in sizes.iter().zip(weights) {
                    if x < *w {
                        return *s;
                    }
                    x -= w;
                }
                *sizes.last().unwrap()
            }
        }
    }
}

/// Generator parameters. Time is slotted; `slot_ns` defaults to the
/// serialization time of the largest packet at the link rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub model: TrafficModel,
    pub ports: usize,
    pub link_rate_gbps: f64,
    /// Per-port probability of a packet in a slot (uniform, hotspot), the
    /// busy fraction (on/off), or the offered load at the incast target.
    pub load: f64,
    pub slots: u64,
    pub slot_ns: Option<u64>,
    /// Header size used only to derive the default slot length.
    pub header_bytes: u32,
    pub payload: PayloadDist,
    /// Mean ON-period length in packets (on/off).
    pub mean_burst: f64,
    pub incast_fanin: usize,
    /// Packets per source per incast epoch.
    pub incast_burst: u32,
    /// Fixed incast target; rotates through ports when unset.
    pub incast_target: Option<usize>,
    pub background_load: f64,
    pub hotspot_fraction: f64,
    pub hotspot_port: usize,
    pub broadcast_fraction: f64,
    /// Allow a port to address its own host.
    pub self_traffic: bool,
    /// Host address of port 0; port `p` owns `addr_base + p`.
    pub addr_base: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            model: TrafficModel::UniformBernoulli,
            ports: 8,
            link_rate_gbps: 100.0,
            load: 0.5,
            slots: 10_000,
            slot_ns: None,
            header_bytes: 14,
            payload: PayloadDist::Fixed { bytes: 64 },
            mean_burst: 16.0,
            incast_fanin: 4,
            incast_burst: 8,
            incast_target: None,
            background_load: 0.0,
            hotspot_fraction: 0.5,
            hotspot_port: 0,
            broadcast_fraction: 0.0,
            self_traffic: false,
            addr_base: 0,
        }
    }
}

impl GenParams {
    pub fn slot_ns(&self) -> u64 {
        self.slot_ns.unwrap_or_else(|| {
            let bits = (self.header_bytes + self.payload.max_bytes()) as f64 * 8.0;
            ((bits / self.link_rate_gbps).ceil() as u64).max(1)
        })
    }

    fn validate(&self) -> Result<(), String> {
        if self.ports == 0 || self.ports > 64 {
            return Err(format!("ports must be in 1..=64, got {}", self.ports));
        }
        if !self.self_traffic && self.ports < 2 {
            return Err("need at least 2 ports without self traffic".into());
        }
        if !(self.link_rate_gbps > 0.0) {
            return Err("link_rate_gbps must be positive".into());
        }
        if !(self.load > 0.0 && self.load <= 1.0) {
            return Err(format!("load must be in (0, 1], got {}", self.load));
        }
        if self.slots == 0 || self.slot_ns == Some(0) {
            return Err("duration must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.broadcast_fraction)
            || !(0.0..=1.0).contains(&self.hotspot_fraction)
            || !(0.0..1.0).contains(&self.background_load)
        {
            return Err("fractions must lie in [0, 1]".into());
        }
        match self.model {
            TrafficModel::OnoffBursty if !(self.mean_burst >= 1.0) => {
                return Err("mean_burst must be >= 1".into())
            }
            TrafficModel::Incast => {
                if self.incast_fanin == 0 || self.incast_fanin >= self.ports {
                    return Err("incast_fanin must be in 1..ports".into());
                }
                if self.incast_burst == 0 {
                    return Err("incast_burst must be positive".into());
                }
                if self.incast_target.is_some_and(|t| t >= self.ports) {
                    return Err("incast_target out of range".into());
                }
            }
            TrafficModel::Hotspot if self.hotspot_port >= self.ports => {
                return Err("hotspot_port out of range".into())
            }
            _ => {}
        }
        self.payload.validate()
    }
}

struct Emitter<'a> {
    p: &'a GenParams,
    slot_ns: u64,
    rng: ChaCha8Rng,
    events: Vec<PacketEvent>,
}

impl Emitter<'_> {
    fn uniform_dst(&mut self, src: usize) -> usize {
        let n = self.p.ports;
        if self.p.self_traffic {
            self.rng.gen_range(0..n)
        } else {
            let d = self.rng.gen_range(0..n - 1);
            if d >= src {
                d + 1
            } else {
                d
            }
        }
    }

    fn emit(&mut self, slot: u64, src: usize, dst: usize) {
        let dst_addr = if self.p.broadcast_fraction > 0.0
            && self.rng.gen::<f64>() < self.p.broadcast_fraction
        {
            DstAddr::Broadcast
        } else {
            DstAddr::Unicast(self.p.addr_base + dst as u64)
        };
        let payload_bytes = self.p.payload.sample(&mut self.rng);
        self.events.push(PacketEvent {
            time_ns: slot * self.slot_ns,
            src_port: src,
            src_addr: self.p.addr_base + src as u64,
            dst_addr,
            payload_bytes,
        });
    }

    /// Geometric on {1, 2, ...} with the given mean.
    fn geometric_ge1(&mut self, mean: f64) -> u64 {
        if mean <= 1.0 {
            return 1;
        }
        let q = 1.0 - 1.0 / mean;
        let u: f64 = 1.0 - self.rng.gen::<f64>();
        1 + (u.ln() / q.ln()).floor() as u64
    }

    /// Geometric on {0, 1, ...} with the given mean.
    fn geometric_ge0(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let q = mean / (1.0 + mean);
        let u: f64 = 1.0 - self.rng.gen::<f64>();
        (u.ln() / q.ln()).floor() as u64
    }
}

/// Generates a synthetic trace. Output is a pure function of
/// `(params, seed)`.
pub fn gen_trace(params: &GenParams, seed: u64) -> Result<Trace, TraceError> {
    params.validate().map_err(TraceError::BadParams)?;
    let mut em = Emitter {
        p: params,
        slot_ns: params.slot_ns(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        events: Vec::new(),
    };
    let n = params.ports;
    match params.model {
        TrafficModel::UniformBernoulli => {
            for slot in 0..params.slots {
                for src in 0..n {
                    if em.rng.gen::<f64>() < params.load {
                        let dst = em.uniform_dst(src);
                        em.emit(slot, src, dst);
                    }
                }
            }
        }
        TrafficModel::Hotspot => {
            for slot in 0..params.slots {
                for src in 0..n {
                    if em.rng.gen::<f64>() < params.load {
                        let hot = em.rng.gen::<f64>() < params.hotspot_fraction
                            && (params.self_traffic || src != params.hotspot_port);
                        let dst = if hot {
                            params.hotspot_port
                        } else {
                            em.uniform_dst(src)
                        };
                        em.emit(slot, src, dst);
                    }
                }
            }
        }
        TrafficModel::ConstantRate => {
            for slot in 0..params.slots {
                for src in 0..n {
                    let k = slot as usize;
                    let dst = if params.self_traffic {
                        (src + k) % n
                    } else {
                        (src + 1 + k % (n - 1)) % n
                    };
                    em.emit(slot, src, dst);
                }
            }
        }
        TrafficModel::OnoffBursty => {
            let mean_off = params.mean_burst * (1.0 - params.load) / params.load;
            // (remaining packets in burst, burst destination, remaining idle slots)
            let mut state: Vec<(u64, usize, u64)> = Vec::with_capacity(n);
            for src in 0..n {
                let start_on = em.rng.gen::<f64>() < params.load;
                if start_on {
                    let len = em.geometric_ge1(params.mean_burst);
                    let dst = em.uniform_dst(src);
                    state.push((len, dst, 0));
                } else {
                    let off = em.geometric_ge0(mean_off);
                    state.push((0, 0, off));
                }
            }
            for slot in 0..params.slots {
                for src in 0..n {
                    loop {
                        let (on, dst, off) = state[src];
                        if on > 0 {
                            em.emit(slot, src, dst);
                            state[src].0 -= 1;
                            if state[src].0 == 0 {
                                state[src].2 = em.geometric_ge0(mean_off);
                                // an empty OFF period chains straight into the next burst
                            }
                            break;
                        } else if off > 0 {
                            state[src].2 -= 1;
                            if state[src].2 == 0 {
                                let len = em.geometric_ge1(params.mean_burst);
                                let d = em.uniform_dst(src);
                                state[src] = (len, d, 0);
                            }
                            break;
                        } else {
                            let len = em.geometric_ge1(params.mean_burst);
                            let d = em.uniform_dst(src);
                            state[src] = (len, d, 0);
                        }
                    }
                }
            }
        }
        TrafficModel::Incast => {
            let per_epoch = params.incast_fanin as u64 * params.incast_burst as u64;
            let epoch_slots = ((per_epoch as f64 / params.load).ceil() as u64)
                .max(params.incast_burst as u64);
            let mut busy_until = vec![0u64; n];
            let mut epoch = 0u64;
            for slot in 0..params.slots {
                if slot % epoch_slots == 0 {
                    let target = params
                        .incast_target
                        .unwrap_or((epoch % n as u64) as usize);
                    let mut candidates: Vec<usize> = (0..n).filter(|&p| p != target).collect();
                    for i in 0..params.incast_fanin {
                        let j = em.rng.gen_range(i..candidates.len());
                        candidates.swap(i, j);
                        let src = candidates[i];
                        let start = slot.max(busy_until[src]);
                        for k in 0..params.incast_burst as u64 {
                            if start + k < params.slots {
                                em.emit(start + k, src, target);
                            }
                        }
                        busy_until[src] = start + params.incast_burst as u64;
                    }
                    epoch += 1;
                }
                if params.background_load > 0.0 {
                    for src in 0..n {
                        if busy_until[src] <= slot
                            && em.rng.gen::<f64>() < params.background_load
                        {
                            let dst = em.uniform_dst(src);
                            em.emit(slot, src, dst);
                        }
                    }
                }
            }
        }
    }
    let Emitter { events, .. } = em;
    Ok(Trace::new(params.ports, params.link_rate_gbps, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_exact_counts() {
        let p = GenParams {
            model: TrafficModel::ConstantRate,
            ports: 4,
            slot_ns: Some(100),
            slots: 10,
            ..Default::default()
        };
        let t = gen_trace(&p, 1).unwrap();
        for port in 0..4 {
            let evs: Vec<_> = t.events.iter().filter(|e| e.src_port == port).collect();
            assert_eq!(evs.len(), 10);
            assert!(evs.iter().all(|e| e.time_ns < 1000));
            assert!(evs.iter().all(|e| e.dst_addr != DstAddr::Unicast(port as u64)));
        }
    }

    #[test]
    fn deterministic_in_seed() {
        for model in [
            TrafficModel::UniformBernoulli,
            TrafficModel::OnoffBursty,
            TrafficModel::Incast,
            TrafficModel::Hotspot,
        ] {
            let p = GenParams {
                model,
                slots: 2000,
                payload: PayloadDist::Uniform { min: 16, max: 256 },
                broadcast_fraction: 0.01,
                ..Default::default()
            };
            assert_eq!(gen_trace(&p, 7).unwrap(), gen_trace(&p, 7).unwrap());
            assert_ne!(gen_trace(&p, 7).unwrap(), gen_trace(&p, 8).unwrap());
        }
    }

    #[test]
    fn bernoulli_offered_load() {
        let p = GenParams {
            load: 0.9,
            ports: 8,
            slots: 100_000,
            ..Default::default()
        };
        let t = gen_trace(&p, 42).unwrap();
        let est = t.offered_load(p.slot_ns());
        assert!((est - 0.9).abs() <= 0.02 * 0.9, "{est}");
    }

    #[test]
    fn onoff_busy_fraction_and_bursts() {
        let p = GenParams {
            model: TrafficModel::OnoffBursty,
            load: 0.6,
            mean_burst: 10.0,
            slots: 200_000,
            ..Default::default()
        };
        let t = gen_trace(&p, 3).unwrap();
        let est = t.offered_load(p.slot_ns());
        assert!((est - 0.6).abs() < 0.03, "{est}");
        // consecutive packets of one port mostly share a destination
        let port0: Vec<_> = t.events.iter().filter(|e| e.src_port == 0).collect();
        let same = port0.windows(2).filter(|w| w[0].dst_addr == w[1].dst_addr).count();
        assert!(same as f64 / port0.len() as f64 > 0.8);
    }

    #[test]
    fn incast_targets_one_port() {
        let p = GenParams {
            model: TrafficModel::Incast,
            incast_fanin: 5,
            incast_burst: 4,
            incast_target: Some(3),
            load: 0.5,
            slots: 4000,
            ..Default::default()
        };
        let t = gen_trace(&p, 1).unwrap();
        assert!(t.events.iter().all(|e| e.dst_addr == DstAddr::Unicast(3)));
        assert!(t.events.iter().all(|e| e.src_port != 3));
        // 20 packets every 40 slots
        assert_eq!(t.len(), 100 * 20);
    }

    #[test]
    fn bad_params() {
        let p = GenParams {
            load: 0.0,
            ..Default::default()
        };
        assert!(matches!(gen_trace(&p, 0), Err(TraceError::BadParams(_))));
        let p = GenParams {
            model: TrafficModel::Incast,
            incast_fanin: 8,
            ..Default::default()
        };
        assert!(matches!(gen_trace(&p, 0), Err(TraceError::BadParams(_))));
    }
}
