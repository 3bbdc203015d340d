use spac_core::dse::{
    brute_force_enumerate, depth_grid, epsilon_depths, point_key, run_dse, template_space, BruteForce, Constraints,
    DesignPoint, DseReport, Objectives, DEFAULT_SPACE_CAP,
};
use spac_core::protocol::{builtin_spec, ProtocolSpec};
use spac_core::sim::{
    back_annotate, build_switch, run_cycle_sim, Annotation, ArchConfig, OccupancyHist, QueueDepths, SchedulerKind,
    SimOptions, TableKind, VoqKind,
};
use spac_core::trace::{gen_trace, DstAddr, PacketEvent, Trace};

use crate::switching::{basic_spec, model, preset_params};
use crate::{outcome, Audit, Engine, Outcome, ValidateError};

fn spec_named(name: &str) -> Result<ProtocolSpec, ValidateError> {
    builtin_spec(name).ok_or_else(|| ValidateError::Setup(format!("builtin spec `{name}` missing")))
}

/// Reruns a DSE and checks the report is byte-identical; re-simulates every
/// verified point to check its ledger balances.
fn audit_dse(
    audit: &mut Audit,
    criterion: u8,
    label: &str,
    report: &DseReport,
    rerun: impl FnOnce() -> Result<DseReport, ValidateError>,
    spec: &ProtocolSpec,
    trace: &Trace,
) -> Result<(), ValidateError> {
    let again = rerun()?;
    audit.record(criterion, format!("{label} dse report"), true, report.to_json_stable() == again.to_json_stable());
    audit_points(audit, criterion, label, report.evaluated.iter().map(|e| &e.point), spec, trace)
}

fn audit_points<'a>(
    audit: &mut Audit,
    criterion: u8,
    label: &str,
    points: impl Iterator<Item = &'a DesignPoint>,
    spec: &ProtocolSpec,
    trace: &Trace,
) -> Result<(), ValidateError> {
    for p in points.filter(|p| p.verified_latency_p99_ns.is_some()) {
        let m = build_switch(p.config.clone(), spec.clone(), spec.binding())?;
        let r = run_cycle_sim(&m, trace, &SimOptions::default())?;
        audit.record(
            criterion,
            format!("{label} {}", p.key()),
            r.conservation.balances(),
            r.worst_port_p99_ns() == p.p99_ns() && Some(r.drop_rate) == p.verified_drop_rate,
        );
    }
    Ok(())
}

fn brute_force_json(bf: &BruteForce) -> String {
    serde_json::to_string(&bf.evaluated).expect("points serialize")
}

/// Template widths kept in the oracle space.
const ORACLE_MAX_WIDTH: u32 = 512;
const ORACLE_BLOCKS: [u64; 4] = [1, 2, 3, 4];
/// Worst-port p99 bound for the incast comparison.
const INCAST_SLA_NS: f64 = 200.0;

pub fn criterion_6(audit: &mut Audit) -> Outcome {
    outcome(6, "pareto-containment", || {
        let spec = basic_spec()?;
        let trace = gen_trace(&preset_params("incast")?, 1)?;
        let templates: Vec<ArchConfig> = template_space(&spec, 8)?
            .into_iter()
            .filter(|c| c.data_width_bits <= ORACLE_MAX_WIDTH)
            .collect();
        let space = depth_grid(&templates, &ORACLE_BLOCKS);
        let cons = Constraints {
            sla_latency_p99_ns: INCAST_SLA_NS,
            ..Constraints::default()
        };
        let bf = brute_force_enumerate(&space, &spec, &trace, &cons, DEFAULT_SPACE_CAP)?;
        let report = run_dse(&spec, &trace, &templates, &cons)?;

        let bf2 = brute_force_enumerate(&space, &spec, &trace, &cons, DEFAULT_SPACE_CAP)?;
        audit.record(6, "brute force", true, brute_force_json(&bf) == brute_force_json(&bf2));
        audit_points(audit, 6, "oracle", bf.evaluated.iter().map(|e| &e.point), &spec, &trace)?;
        audit_dse(audit, 6, "incast", &report, || Ok(run_dse(&spec, &trace, &templates, &cons)?), &spec, &trace)?;

        let accepted: Vec<&DesignPoint> = bf.accepted().collect();
        let mut problems = Vec::new();
        let mut returned: Vec<&ArchConfig> = report.pareto.iter().map(|r| &r.2).collect();
        returned.push(&report.optimal.config);
        for c in &returned {
            let key = point_key(c);
            match bf.evaluated.iter().find(|e| e.point.key() == key) {
                None => problems.push(format!("{key} outside the oracle space")),
                Some(e) if !e.accepted => problems.push(format!("{key} rejected by the oracle")),
                Some(e) => {
                    if let Some(d) = accepted.iter().find(|q| q.dominates(&e.point)) {
                        problems.push(format!("{key} dominated by {}", d.key()));
                    }
                }
            }
        }
        let min_bram = accepted.iter().map(|p| p.resources.bram_blocks).min();
        let opt_bram = report.optimal.resources.bram_blocks;
        if min_bram != Some(opt_bram) {
            problems.push(format!("optimal uses {opt_bram} BRAM, oracle minimum {min_bram:?}"));
        }
        let detail = format!(
            "{} points, {} accepted, oracle front {}; dse returned {} (optimal {} at {opt_bram} BRAM, {:.1} ns)",
            space.len(),
            accepted.len(),
            bf.front.len(),
            returned.len(),
            report.optimal.key(),
            report.optimal.p99_ns()
        );
        if problems.is_empty() {
            Ok((space.len() == 96, detail))
        } else {
            Ok((false, format!("{detail}; {}", problems.join("; "))))
        }
    })
}

const EPSILONS: [f64; 3] = [0.0, 1e-3, 1e-2];

/// Smallest legal depth: the histogram floor, and never below one slot.
fn floor(h: &OccupancyHist) -> u32 {
    h.min().unwrap_or(0).max(1)
}

/// Lowers every queue that sits above its floor by one slot.
fn minus_one(c: &ArchConfig, hists: &[&OccupancyHist]) -> ArchConfig {
    let mut m = c.clone();
    match c.voq {
        VoqKind::Shared => m.shared_buffer_slots = c.shared_buffer_slots.map(|d| if d > floor(hists[0]) { d - 1 } else { d }),
        _ => {
            if let QueueDepths::PerQueue(v) = &mut m.voq_depth {
                for (d, h) in v.iter_mut().zip(hists) {
                    if *d > floor(h) {
                        *d -= 1;
                    }
                }
            }
        }
    }
    m
}

fn depths(c: &ArchConfig) -> Vec<u32> {
    match (&c.voq, &c.voq_depth, c.shared_buffer_slots) {
        (VoqKind::Shared, _, Some(d)) => vec![d],
        (_, QueueDepths::PerQueue(v), _) => v.clone(),
        _ => Vec::new(),
    }
}

pub fn criterion_7(audit: &mut Audit) -> Outcome {
    outcome(7, "epsilon-sizing", || {
        let spec = basic_spec()?;
        let trace = gen_trace(&preset_params("bursty")?, 1)?;
        let mut pass = true;
        let mut parts = Vec::new();
        for voq in [VoqKind::Nxn, VoqKind::Shared] {
            let base = ArchConfig::new(8, 256, TableKind::FullLookup, voq, SchedulerKind::Islip)
                .with_islip_iterations(2)
                .unbounded();
            let m = model(base.clone(), &spec)?;
            let (prof, _) = audit.sim(7, format!("{voq} profile"), Engine::Cycle, &m, &trace, &SimOptions::profiling())?;
            let hists: Vec<&OccupancyHist> = match voq {
                VoqKind::Shared => prof.pool_hist.iter().collect(),
                _ => prof.q_hist.iter().flatten().collect(),
            };
            for eps in EPSILONS {
                let sized = epsilon_depths(&base, &prof, eps);
                let label = format!("{voq} eps {eps}");
                let (r, _) = audit.sim(7, &label, Engine::Cycle, &model(sized.clone(), &spec)?, &trace, &SimOptions::default())?;
                let lower = minus_one(&sized, &hists);
                let (r1, _) = audit.sim(7, format!("{label} minus one"), Engine::Cycle, &model(lower, &spec)?, &trace, &SimOptions::default())?;
                // tail mass the profile puts above d - 1, per queue above its floor
                let mut minimal = true;
                let mut checked = 0;
                for (d, h) in depths(&sized).into_iter().zip(&hists) {
                    if d > floor(h) {
                        checked += 1;
                        minimal &= h.tail_above(d - 1) > eps;
                    }
                }
                let ok = r.drop_rate <= eps && minimal;
                pass &= ok;
                let top = depths(&sized).into_iter().max().unwrap_or(0);
                parts.push(format!(
                    "{label}: max depth {top}, drop {:.5}{}, d-1 tail > eps on {checked} queues{} (simulated d-1 drop {:.5})",
                    r.drop_rate,
                    if r.drop_rate <= eps { "" } else { " > eps" },
                    if minimal { "" } else { " FAILED" },
                    r1.drop_rate
                ));
            }
        }
        Ok((pass, parts.join("; ")))
    })
}

/// Worst-port p99 bound for the trading workload; only the fastest
/// architecture meets it at predicted clocks.
const HFT_SLA_NS: f64 = 29.0;
const OPTIMIZED_NS: f64 = 64.0;
const BASELINE_NS: f64 = 103.9;
const REDUCTION: f64 = 0.384;

fn arch_triple(c: &ArchConfig) -> (TableKind, VoqKind, SchedulerKind) {
    (c.fwd_table, c.voq, c.scheduler)
}

/// Learns host 1's port first, then times one packet to it.
fn unloaded_trace() -> Trace {
    let ev = |t, port: usize, dst| PacketEvent {
        time_ns: t,
        src_port: port,
        src_addr: port as u64,
        dst_addr: DstAddr::Unicast(dst),
        payload_bytes: 16,
    };
    Trace::new(8, 10.0, vec![ev(0, 1, 0), ev(2_000, 0, 1)])
}

fn annotated_p50(
    audit: &mut Audit,
    label: &str,
    cfg: ArchConfig,
    spec: &ProtocolSpec,
    total_ns: f64,
) -> Result<f64, ValidateError> {
    let m = model(cfg, spec)?;
    let a = Annotation::from_total_ns(total_ns, &m.config().stages);
    let am = back_annotate(&m, a)?;
    let opts = SimOptions {
        warmup_cycles: 100,
        ..SimOptions::default()
    };
    let (r, _) = audit.sim(8, label, Engine::Cycle, &am, &unloaded_trace(), &opts)?;
    Ok(r.latency_ns.p50)
}

pub fn criterion_8(audit: &mut Audit) -> Outcome {
    outcome(8, "workload-architectures", || {
        let mut parts = Vec::new();
        let mut pass = true;
        let run = |name: &str, sla: f64| -> Result<(ProtocolSpec, Trace, DseReport), ValidateError> {
            let spec = spec_named(name)?;
            let trace = gen_trace(&preset_params(name)?, 1)?;
            let cons = Constraints {
                sla_latency_p99_ns: sla,
                ..Constraints::default()
            };
            let report = run_dse(&spec, &trace, &template_space(&spec, 8)?, &cons)?;
            Ok((spec, trace, report))
        };

        let (hft_spec, hft_trace, hft) = run("hft", HFT_SLA_NS)?;
        audit_dse(audit, 8, "hft", &hft, || Ok(run("hft", HFT_SLA_NS)?.2), &hft_spec, &hft_trace)?;
        let want = (TableKind::FullLookup, VoqKind::Nxn, SchedulerKind::Rr);
        let ok = arch_triple(&hft.optimal.config) == want;
        pass &= ok;
        parts.push(format!("hft -> {}{}", hft.optimal.key(), if ok { "" } else { " (expected full_lookup/nxn/rr)" }));

        let (uw_spec, uw_trace, uw) = run("underwater", f64::INFINITY)?;
        audit_dse(audit, 8, "underwater", &uw, || Ok(run("underwater", f64::INFINITY)?.2), &uw_spec, &uw_trace)?;
        let want = (TableKind::FullLookup, VoqKind::Shared, SchedulerKind::Rr);
        let sizes: Vec<u32> = uw_trace
            .events
            .iter()
            .map(|e| uw_spec.padded_header_bytes() + e.payload_bytes)
            .collect();
        let four_bytes = sizes.iter().all(|&s| s == 4);
        let ok = arch_triple(&uw.optimal.config) == want && four_bytes;
        pass &= ok;
        parts.push(format!(
            "underwater -> {}{}, packets {} B",
            uw.optimal.key(),
            if arch_triple(&uw.optimal.config) == want { "" } else { " (expected full_lookup/shared/rr)" },
            if four_bytes { "4".to_string() } else { format!("{sizes:?}") }
        ));

        let opt = annotated_p50(audit, "optimized unloaded", hft.optimal.config.clone(), &hft_spec, OPTIMIZED_NS)?;
        let mut base = ArchConfig::new(8, 512, TableKind::MultibankHash, VoqKind::Nxn, SchedulerKind::Islip)
            .with_islip_iterations(2);
        let eth = spec_named("ethernet")?;
        base.clock_mhz = spac_core::perf::estimate_resources(&base, eth.routing_key_bits()).freq_mhz;
        let baseline = annotated_p50(audit, "baseline unloaded", base, &eth, BASELINE_NS)?;
        let reduction = 1.0 - opt / baseline;
        let ok = (reduction - REDUCTION).abs() <= 0.005;
        pass &= ok;
        parts.push(format!(
            "unloaded {opt:.1} ns vs {baseline:.1} ns: reduction {:.1}% (38.4 +/- 0.5)",
            reduction * 100.0
        ));
        Ok((pass, parts.join("; ")))
    })
}
