use rayon::prelude::*;

use crate::perf::{estimate_resources, BRAM_BLOCK_BITS};
use crate::protocol::ProtocolSpec;
use crate::sim::{ArchConfig, QueueDepths, SimError, VoqKind};
use crate::trace::Trace;

use super::stages::{static_violation, verify};
use super::{in_pool, Constraints, DesignPoint, DseError, Evaluated, ParetoFront};

pub const DEFAULT_SPACE_CAP: usize = 512;

#[derive(Debug, Clone)]
pub struct BruteForce {
    /// Every point, in space order. Points failing the static checks are
    /// not simulated and carry no verified fields.
    pub evaluated: Vec<Evaluated>,
    pub front: ParetoFront,
}

impl BruteForce {
    pub fn accepted(&self) -> impl Iterator<Item = &DesignPoint> {
        self.evaluated.iter().filter(|e| e.accepted).map(|e| &e.point)
    }
}

/// Expands each template with uniform buffers of `blocks` BRAM blocks per
/// N*N queue, or per shared pool.
pub fn depth_grid(templates: &[ArchConfig], blocks: &[u64]) -> Vec<ArchConfig> {
    let mut out = Vec::with_capacity(templates.len() * blocks.len());
    for t in templates {
        for &b in blocks {
            let d = (b * BRAM_BLOCK_BITS / t.data_width_bits as u64) as u32;
            out.push(match t.voq {
                VoqKind::Shared => t.clone().with_buffers(QueueDepths::Infinite, Some(d)),
                _ => t.clone().with_buffers(QueueDepths::Uniform(d), None),
            });
        }
    }
    out
}

/// Cycle-simulates every point of an explicit space with its own finite
/// buffers and returns the exact front of the points that pass the static
/// checks, the SLA and the drop bound.
pub fn brute_force_enumerate(
    space: &[ArchConfig],
    spec: &ProtocolSpec,
    trace: &Trace,
    constraints: &Constraints,
    cap: usize,
) -> Result<BruteForce, DseError> {
    constraints.validate()?;
    if space.len() > cap {
        return Err(DseError::SpaceTooLarge {
            size: space.len(),
            cap,
        });
    }
    let min_payload = trace.min_payload_bytes().unwrap_or(0);
    let link = constraints.link_rate_gbps.unwrap_or(trace.link_rate_gbps);
    let key_bits = spec.routing_key_bits();
    let runs: Vec<Result<Evaluated, SimError>> = in_pool(|| {
        space
            .par_iter()
            .map(|c| {
                let mut point = DesignPoint {
                    config: c.clone(),
                    resources: estimate_resources(c, key_bits),
                    verified_latency_p99_ns: None,
                    verified_drop_rate: None,
                };
                if static_violation(c, spec, min_payload, link, constraints.delta).is_some() {
                    return Ok(Evaluated { point, accepted: false });
                }
                let (p99, drop) = verify(c, spec, trace)?;
                point.verified_latency_p99_ns = Some(p99);
                point.verified_drop_rate = Some(drop);
                let accepted = p99 <= constraints.sla_latency_p99_ns
                    && drop <= constraints.drop_epsilon
                    && point.resources.bram_blocks <= constraints.bram_budget_blocks;
                Ok(Evaluated { point, accepted })
            })
            .collect()
    });
    let evaluated = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let accepted: Vec<DesignPoint> = evaluated.iter().filter(|e| e.accepted).map(|e| e.point.clone()).collect();
    Ok(BruteForce {
        front: ParetoFront::from_points(&accepted),
        evaluated,
    })
}
