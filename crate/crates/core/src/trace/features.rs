use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DstAddr, Trace, TraceError, MIN_WINDOWS};

/// `f = [I_burst, H_addr, S_min]` plus the window the IDC was measured on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFeatures {
    /// Index of dispersion for counts of aggregate arrivals per window.
    pub idc_burst: f64,
    /// Shannon entropy (bits) of the destination address distribution.
    pub addr_entropy_bits: f64,
    pub min_payload_bytes: u32,
    pub window_ns: u64,
    pub distinct_destinations: usize,
}

/// Default IDC window: 100 mean per-port inter-arrival times.
pub fn default_window_ns(trace: &Trace) -> Option<u64> {
    let mut per_port: BTreeMap<usize, (u64, u64, u64)> = BTreeMap::new();
    for e in &trace.events {
        let entry = per_port
            .entry(e.src_port)
            .or_insert((e.time_ns, e.time_ns, 0));
        entry.1 = e.time_ns;
        entry.2 += 1;
    }
    let gaps: Vec<f64> = per_port
        .values()
        .filter(|(_, _, n)| *n > 1)
        .map(|(first, last, n)| (last - first) as f64 / (n - 1) as f64)
        .collect();
    if gaps.is_empty() {
        return None;
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Some(((100.0 * mean).round() as u64).max(1))
}

pub fn extract_features(trace: &Trace, window_ns: Option<u64>) -> Result<TraceFeatures, TraceError> {
    if trace.is_empty() {
        return Err(TraceError::EmptyTrace);
    }
    let window = match window_ns {
        Some(w) if w > 0 => w,
        Some(_) => return Err(TraceError::BadParams("window_ns must be positive".into())),
        None => default_window_ns(trace).ok_or(TraceError::TooFewWindows { windows: 0 })?,
    };
    let t0 = trace.events[0].time_ns;
    let windows = trace.duration_ns() / window;
    if windows < MIN_WINDOWS {
        return Err(TraceError::TooFewWindows { windows });
    }

    let mut counts = vec![0u64; windows as usize];
    for e in &trace.events {
        let idx = (e.time_ns - t0) / window;
        if idx < windows {
            counts[idx as usize] += 1;
        }
    }
    let k = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / k;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / k;
    let idc_burst = if mean > 0.0 { var / mean } else { 0.0 };

    let mut hist: BTreeMap<DstAddr, u64> = BTreeMap::new();
    for e in &trace.events {
        *hist.entry(e.dst_addr).or_default() += 1;
    }
    let n = trace.len() as f64;
    let addr_entropy_bits = hist
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);

    Ok(TraceFeatures {
        idc_burst,
        addr_entropy_bits,
        min_payload_bytes: trace.min_payload_bytes().expect("non-empty"),
        window_ns: window,
        distinct_destinations: hist.len(),
    })
}
