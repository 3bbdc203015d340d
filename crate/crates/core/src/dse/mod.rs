//! Progressive constraint-satisfaction design space exploration.
//!
//! Templates pass through three filters of increasing cost: a static
//! line-rate check, a surrogate run with unbounded buffers against the
//! latency SLA, and finally buffer sizing plus cycle-level verification of
//! the lowest-latency survivors.

mod oracle;
mod pareto;
mod space;
mod stages;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perf::ResourceEstimate;
use crate::sim::{ArchConfig, QueueDepths, SimError, VoqKind};
use crate::trace::{TraceError, TraceFeatures};

pub use oracle::{brute_force_enumerate, depth_grid, BruteForce, DEFAULT_SPACE_CAP};
pub use pareto::{pareto_front, Objectives, ParetoFront};
pub use space::{template_space, TEMPLATE_ISLIP_ITERATIONS, TEMPLATE_WIDTHS};
pub use stages::{
    align_buffers, epsilon_depths, run_dse, stage1_prune, stage2_profile, stage3_size_and_verify, Profiled,
    Stage3Outcome,
};

#[derive(Debug, Error)]
pub enum DseError {
    #[error("invalid constraints: {0}")]
    InvalidConstraints(String),
    #[error("empty template space")]
    EmptySpace,
    #[error("bad arch hint `{key}={value}`")]
    BadHint { key: String, value: String },
    #[error("every template failed static pruning ({} records)", ledger.len())]
    AllPruned { ledger: Vec<PruneRecord> },
    #[error("no feasible design ({} candidates eliminated)", ledger.len())]
    NoFeasibleDesign { ledger: Vec<PruneRecord> },
    #[error("space of {size} points exceeds the cap of {cap}")]
    SpaceTooLarge { size: usize, cap: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl DseError {
    /// Elimination records carried by the infeasibility errors.
    pub fn ledger(&self) -> Option<&[PruneRecord]> {
        match self {
            DseError::AllPruned { ledger } | DseError::NoFeasibleDesign { ledger } => Some(ledger),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub sla_latency_p99_ns: f64,
    pub bram_budget_blocks: u64,
    pub drop_epsilon: f64,
    pub delta: f64,
    pub top_k: usize,
    /// Overrides the trace's link rate in the line-rate check.
    #[serde(default)]
    pub link_rate_gbps: Option<f64>,
}

impl Default for Constraints {
    fn default() -> Self {
        Self {
            sla_latency_p99_ns: f64::INFINITY,
            // a VU9P-class part
            bram_budget_blocks: 2160,
            drop_epsilon: 1e-3,
            delta: 0.1,
            top_k: 5,
            link_rate_gbps: None,
        }
    }
}

impl Constraints {
    pub fn validate(&self) -> Result<(), DseError> {
        let bad = |m: &str| Err(DseError::InvalidConstraints(m.into()));
        if !(self.sla_latency_p99_ns > 0.0) {
            return bad("sla_latency_p99_ns must be positive");
        }
        if !(0.0..1.0).contains(&self.drop_epsilon) {
            return bad("drop_epsilon must be in [0, 1)");
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad("delta must be a finite non-negative number");
        }
        if self.top_k == 0 {
            return bad("top_k must be positive");
        }
        if self.link_rate_gbps.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("link_rate_gbps must be positive");
        }
        Ok(())
    }
}

/// A sized configuration. The verified fields come from the cycle
/// simulator and are set only after verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub config: ArchConfig,
    pub resources: ResourceEstimate,
    pub verified_latency_p99_ns: Option<f64>,
    pub verified_drop_rate: Option<f64>,
}

impl DesignPoint {
    /// Verified worst-port p99, or infinity before verification.
    pub fn p99_ns(&self) -> f64 {
        self.verified_latency_p99_ns.unwrap_or(f64::INFINITY)
    }

    /// Architecture key plus buffer sizes.
    pub fn key(&self) -> String {
        point_key(&self.config)
    }
}

/// `arch_key` extended with the buffer sizes; uniform per-queue vectors
/// print like a uniform depth.
pub fn point_key(c: &ArchConfig) -> String {
    let buf = match c.voq {
        VoqKind::Shared => match c.shared_buffer_slots {
            Some(s) => format!("pool{s}"),
            None => "pool_inf".into(),
        },
        _ => match &c.voq_depth {
            QueueDepths::Infinite => "d_inf".into(),
            QueueDepths::Uniform(d) => format!("d{d}"),
            QueueDepths::PerQueue(v) if v.windows(2).all(|w| w[0] == w[1]) => format!("d{}", v[0]),
            QueueDepths::PerQueue(v) => {
                let parts: Vec<String> = v.iter().map(u32::to_string).collect();
                format!("d[{}]", parts.join(","))
            }
        },
    };
    format!("{}/{}", c.arch_key(), buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Static,
    Profile,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Static => "static",
            Stage::Profile => "profile",
            Stage::Verify => "verify",
        })
    }
}

/// Why a template or sized point left the exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRecord {
    pub config: String,
    pub stage: Stage,
    pub reason: String,
}

/// One `[bram, p99_ns, config]` row of the reported front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontRow(pub u64, pub f64, pub ArchConfig);

/// A point that reached cycle-level verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluated {
    pub point: DesignPoint,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseReport {
    pub features: TraceFeatures,
    pub constraints: Constraints,
    pub ledger: Vec<PruneRecord>,
    pub pareto: Vec<FrontRow>,
    pub optimal: DesignPoint,
    pub evaluated: Vec<Evaluated>,
    /// Wall-clock milliseconds per stage.
    pub timing: BTreeMap<String, f64>,
}

impl DseReport {
    pub fn front(&self) -> ParetoFront {
        let pts: Vec<DesignPoint> = self
            .evaluated
            .iter()
            .filter(|e| e.accepted)
            .map(|e| e.point.clone())
            .collect();
        ParetoFront::from_points(&pts)
    }

    /// JSON without the wall-clock fields, for reproducibility checks.
    pub fn to_json_stable(&self) -> String {
        let mut r = self.clone();
        r.timing.clear();
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

/// Runs `f` on a pool capped by `SPAC_THREADS` when that is set.
pub(crate) fn in_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var("SPAC_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    match threads.filter(|&t| t > 0) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}
