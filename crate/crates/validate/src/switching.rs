use spac_core::protocol::{builtin_spec, ProtocolSpec};
use spac_core::sim::{build_switch, ArchConfig, SchedulerKind, SimOptions, SwitchModel, TableKind, VoqKind};
use spac_core::trace::{gen_trace, preset, GenParams, Trace};

use crate::{outcome, Audit, Engine, Outcome, ValidateError};

pub(crate) fn basic_spec() -> Result<ProtocolSpec, ValidateError> {
    builtin_spec("basic").ok_or_else(|| ValidateError::Setup("builtin spec `basic` missing".into()))
}

pub(crate) fn preset_params(name: &str) -> Result<GenParams, ValidateError> {
    preset(name).ok_or_else(|| ValidateError::Setup(format!("preset `{name}` missing")))
}

pub(crate) fn model(cfg: ArchConfig, spec: &ProtocolSpec) -> Result<SwitchModel, ValidateError> {
    Ok(build_switch(cfg, spec.clone(), spec.binding())?)
}

/// Single-flit cell switch at 250 MHz: one 4 ns slot per cycle.
fn cell_switch(voq: VoqKind, sched: SchedulerKind, iterations: usize) -> ArchConfig {
    ArchConfig::new(8, 256, TableKind::FullLookup, voq, sched)
        .with_islip_iterations(iterations)
        .unbounded()
}

const SATURATION_CELLS: u64 = 100_000;

pub fn criterion_3(audit: &mut Audit) -> Outcome {
    outcome(3, "hol-vs-voq", || {
        let spec = basic_spec()?;
        let mut p = preset_params("uniform")?;
        p.load = 1.0;
        p.slots = SATURATION_CELLS / p.ports as u64;
        let trace = gen_trace(&p, 1)?;
        // one slot per cycle; stop when arrivals stop so the backlog is not drained
        let opts = SimOptions {
            warmup_cycles: 1_000,
            max_cycles: Some(p.slots),
            profiling: true,
        };
        let fifo = model(cell_switch(VoqKind::InputFifo, SchedulerKind::Rr, 1), &spec)?;
        let voq = model(cell_switch(VoqKind::Nxn, SchedulerKind::Islip, 4), &spec)?;
        let (hol, _) = audit.sim(3, "input fifo", Engine::Cycle, &fifo, &trace, &opts)?;
        let (vq, _) = audit.sim(3, "nxn islip4", Engine::Cycle, &voq, &trace, &opts)?;
        let analytic = 2.0 - 2f64.sqrt();
        // exact saturation throughput of an 8x8 FIFO switch, from the Markov chain
        let finite_n = 0.6184;
        let h = hol.egress_utilization;
        let v = vq.egress_utilization;
        let pass = (h - analytic).abs() <= 0.03 && v >= 0.95;
        Ok((
            pass,
            format!(
                "{} cells: input fifo {h:.4} (2-sqrt2 = {analytic:.4}, tol 0.03; finite N=8 value {finite_n}), nxn+islip4 {v:.4} (>= 0.95)",
                trace.len()
            ),
        ))
    })
}

const ORDER_PACKETS: f64 = 1e5;
const ORDER_LOAD: f64 = 0.85;
const ORDER_ISLIP_ITERATIONS: usize = 2;

pub fn criterion_4(audit: &mut Audit) -> Outcome {
    outcome(4, "traffic-sensitivity", || {
        let spec = basic_spec()?;
        let islip = model(cell_switch(VoqKind::Nxn, SchedulerKind::Islip, ORDER_ISLIP_ITERATIONS), &spec)?;
        let edrrm = model(cell_switch(VoqKind::Nxn, SchedulerKind::Edrrm, 1), &spec)?;
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, islip_first) in [("uniform", true), ("bursty", false)] {
            for seed in 1..=3 {
                let mut p = preset_params(name)?;
                p.load = ORDER_LOAD;
                p.slots = (ORDER_PACKETS / (p.ports as f64 * ORDER_LOAD)).ceil() as u64;
                let trace = gen_trace(&p, seed)?;
                let opts = SimOptions::profiling();
                let label = format!("{name} s{seed}");
                let (a, _) = audit.sim(4, format!("{label} islip"), Engine::Cycle, &islip, &trace, &opts)?;
                let (b, _) = audit.sim(4, format!("{label} edrrm"), Engine::Cycle, &edrrm, &trace, &opts)?;
                let (li, le) = (a.latency_ns.mean, b.latency_ns.mean);
                let ok = if islip_first { li < le } else { le < li };
                pass &= ok;
                parts.push(format!("{label} islip {li:.1} edrrm {le:.1}{}", if ok { "" } else { " (wrong order)" }));
            }
        }
        Ok((pass, parts.join("; ")))
    })
}

const FIDELITY_PRESETS: [&str; 3] = ["uniform", "bursty", "incast"];
const MAPE_LIMIT: f64 = 0.10;
const SPEEDUP_TARGET: f64 = 50.0;

fn scenarios() -> Vec<ArchConfig> {
    let mut out = Vec::new();
    for voq in [VoqKind::Nxn, VoqKind::Shared] {
        for (s, it) in [(SchedulerKind::Rr, 1), (SchedulerKind::Islip, 2), (SchedulerKind::Edrrm, 1)] {
            out.push(cell_switch(voq, s, it));
        }
    }
    out
}

fn mape(trace: &Trace, spec: &ProtocolSpec, audit: &mut Audit, label: &str) -> Result<(Vec<f64>, Vec<String>), ValidateError> {
    let mut errs = Vec::new();
    let mut worst = Vec::new();
    for cfg in scenarios() {
        let key = cfg.arch_key();
        let m = model(cfg, spec)?;
        let opts = SimOptions::profiling();
        let (c, _) = audit.sim(5, format!("{label} {key} cycle"), Engine::Cycle, &m, trace, &opts)?;
        let (s, _) = audit.sim(5, format!("{label} {key} surrogate"), Engine::Surrogate, &m, trace, &opts)?;
        let e = (s.latency_ns.mean - c.latency_ns.mean).abs() / c.latency_ns.mean;
        if e > MAPE_LIMIT {
            worst.push(format!("{label} {key} {:.1}%", e * 100.0));
        }
        errs.push(e);
    }
    Ok((errs, worst))
}

pub fn criterion_5(audit: &mut Audit) -> Outcome {
    outcome(5, "surrogate-fidelity", || {
        let spec = basic_spec()?;
        let mut errs = Vec::new();
        let mut over = Vec::new();
        for name in FIDELITY_PRESETS {
            let p = preset_params(name)?;
            if p.load > 0.8 {
                return Err(ValidateError::Setup(format!("preset {name} exceeds load 0.8")));
            }
            let trace = gen_trace(&p, 1)?;
            let (e, w) = mape(&trace, &spec, audit, name)?;
            errs.extend(e);
            over.extend(w);
        }
        let mape = errs.iter().sum::<f64>() / errs.len() as f64;

        let bench = gen_trace(&preset_params("bench")?, 1)?;
        let m = model(cell_switch(VoqKind::Nxn, SchedulerKind::Islip, 2), &spec)?;
        let opts = SimOptions::profiling();
        let (_, tc) = audit.sim(5, "bench cycle", Engine::Cycle, &m, &bench, &opts)?;
        let (_, ts) = audit.sim(5, "bench surrogate", Engine::Surrogate, &m, &bench, &opts)?;
        let speedup = tc.as_secs_f64() / ts.as_secs_f64();

        let pass = mape <= MAPE_LIMIT && speedup >= SPEEDUP_TARGET;
        let mut detail = format!(
            "MAPE {:.2}% over {} scenarios (<= 10%); speedup {speedup:.1}x on {} packets (cycle {:.2} s, surrogate {:.2} s; >= 50x)",
            mape * 100.0,
            errs.len(),
            bench.len(),
            tc.as_secs_f64(),
            ts.as_secs_f64()
        );
        if !over.is_empty() {
            detail += &format!("; above 10%: {}", over.join(", "));
        }
        Ok((pass, detail))
    })
}
