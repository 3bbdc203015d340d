//! Acceptance suite. Each criterion returns an [`Outcome`]; simulations run
//! through an [`Audit`] that repeats them and records conservation and
//! byte-level reproducibility for the final criterion.

mod codec;
mod explore;
mod matching;
mod switching;

use std::time::{Duration, Instant};

use spac_core::dse::DseError;
use spac_core::perf::run_surrogate;
use spac_core::protocol::ProtocolError;
use spac_core::sim::{run_cycle_sim, SimError, SimOptions, SimResult, SwitchModel};
use spac_core::trace::{Trace, TraceError};
use thiserror::Error;

pub use codec::criterion_1;
pub use explore::{criterion_6, criterion_7, criterion_8};
pub use matching::criterion_2;
pub use switching::{criterion_3, criterion_4, criterion_5};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Dse(#[from] DseError),
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Outcome {
    /// One summary line, `[PASS] 3 hol-vs-voq (1.2 s): ...`.
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {} ({:.1} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub(crate) fn outcome(
    id: u8,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, String), ValidateError>,
) -> Outcome {
    let t = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        name,
        passed,
        detail,
        elapsed: t.elapsed(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Cycle,
    Surrogate,
}

#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub criterion: u8,
    pub label: String,
    pub balanced: bool,
    pub identical: bool,
}

/// Every simulation of criteria 3 to 8, run twice.
#[derive(Debug, Default)]
pub struct Audit {
    pub records: Vec<AuditRecord>,
}

impl Audit {
    pub fn record(&mut self, criterion: u8, label: impl Into<String>, balanced: bool, identical: bool) {
        self.records.push(AuditRecord {
            criterion,
            label: label.into(),
            balanced,
            identical,
        });
    }

    /// Runs a simulation twice and returns the first result with the faster
    /// of the two wall-clock times.
    pub fn sim(
        &mut self,
        criterion: u8,
        label: impl Into<String>,
        engine: Engine,
        model: &SwitchModel,
        trace: &Trace,
        opts: &SimOptions,
    ) -> Result<(SimResult, Duration), ValidateError> {
        let run = || -> Result<(SimResult, Duration), SimError> {
            let t = Instant::now();
            let r = match engine {
                Engine::Cycle => run_cycle_sim(model, trace, opts)?,
                Engine::Surrogate => run_surrogate(model, trace, opts)?.result,
            };
            Ok((r, t.elapsed()))
        };
        let (a, ta) = run()?;
        let (b, tb) = run()?;
        let balanced = a.conservation.balances() && b.conservation.balances();
        self.record(criterion, label, balanced, a.to_json() == b.to_json());
        Ok((a, ta.min(tb)))
    }
}

/// Summarizes the audit trail gathered by the other criteria.
pub fn criterion_9(audit: &Audit) -> Outcome {
    outcome(9, "conservation-determinism", || {
        if audit.records.is_empty() {
            return Ok((false, "no simulations were audited".into()));
        }
        let unbalanced: Vec<&AuditRecord> = audit.records.iter().filter(|r| !r.balanced).collect();
        let differing: Vec<&AuditRecord> = audit.records.iter().filter(|r| !r.identical).collect();
        let mut detail = format!(
            "{} audited runs, {} unbalanced, {} not reproducible",
            audit.records.len(),
            unbalanced.len(),
            differing.len()
        );
        for r in unbalanced.iter().chain(&differing).take(5) {
            detail += &format!("; c{} {}", r.criterion, r.label);
        }
        Ok((unbalanced.is_empty() && differing.is_empty(), detail))
    })
}

/// Criteria 1 to 9 in order. `quick` runs the sub-minute subset
/// (1, 2, 3, 4 and 9).
pub fn run_suite(quick: bool, mut report: impl FnMut(&Outcome)) -> Vec<Outcome> {
    let mut audit = Audit::default();
    let mut out = Vec::new();
    let mut push = |o: Outcome, out: &mut Vec<Outcome>| {
        report(&o);
        out.push(o);
    };
    push(criterion_1(), &mut out);
    push(criterion_2(), &mut out);
    push(criterion_3(&mut audit), &mut out);
    push(criterion_4(&mut audit), &mut out);
    if !quick {
        push(criterion_5(&mut audit), &mut out);
        push(criterion_6(&mut audit), &mut out);
        push(criterion_7(&mut audit), &mut out);
        push(criterion_8(&mut audit), &mut out);
    }
    push(criterion_9(&audit), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn audit_flags_failures() {
        let mut a = Audit::default();
        a.record(3, "ok", true, true);
        assert!(criterion_9(&a).passed);
        a.record(4, "bad", true, false);
        let o = criterion_9(&a);
        assert!(!o.passed);
        assert!(o.detail.contains("c4 bad"), "{}", o.detail);
        assert!(!criterion_9(&Audit::default()).passed);
    }
}
