use serde::{Deserialize, Serialize};

use super::config::{StageLatencies, Stages};
use super::{SimError, SwitchModel};

/// Measured stage latencies that override the model's timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub stage_ns: Stages<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ii: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    total_ns: Option<f64>,
    stage_ns: Option<Stages<f64>>,
    ii: Option<u32>,
}

impl Annotation {
    /// Splits a measured end-to-end latency over the stages in proportion to
    /// `weights`.
    pub fn from_total_ns(total_ns: f64, weights: &StageLatencies) -> Self {
        let sum = weights.total().max(1) as f64;
        Self {
            stage_ns: weights.map(|w| total_ns * w as f64 / sum),
            ii: None,
        }
    }

    /// Reads `total_ns = ...` or a `[stage_ns]` table, plus optional `ii`.
    pub fn from_toml(text: &str, weights: &StageLatencies) -> Result<Self, SimError> {
        let f: AnnotationFile = toml::from_str(text).map_err(|e| SimError::BadAnnotation(e.to_string()))?;
        let mut a = match (f.total_ns, f.stage_ns) {
            (Some(t), None) => Self::from_total_ns(t, weights),
            (None, Some(s)) => Self { stage_ns: s, ii: None },
            _ => return Err(SimError::BadAnnotation("give exactly one of total_ns or [stage_ns]".into())),
        };
        a.ii = f.ii;
        Ok(a)
    }

    pub fn total_ns(&self) -> f64 {
        self.stage_ns.total()
    }

    /// Stage delays rounded to whole cycles.
    pub fn stage_cycles(&self, cycle_ns: f64) -> StageLatencies {
        self.stage_ns.map(|ns| (ns / cycle_ns).round().max(0.0) as u32)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let s = &self.stage_ns;
        let all = [s.parser, s.table, s.voq, s.scheduler, s.deparser];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SimError::BadAnnotation("stage latencies must be finite and non-negative".into()));
        }
        if self.total_ns() <= 0.0 {
            return Err(SimError::BadAnnotation("total latency must be positive".into()));
        }
        if self.ii == Some(0) {
            return Err(SimError::BadAnnotation("II must be positive".into()));
        }
        Ok(())
    }
}

pub fn back_annotate(model: &SwitchModel, annotation: Annotation) -> Result<SwitchModel, SimError> {
    annotation.validate()?;
    let mut m = model.clone();
    m.annotation = Some(annotation);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_split() {
        let w = Stages { parser: 2, table: 2, voq: 2, scheduler: 2, deparser: 1 };
        let a = Annotation::from_total_ns(57.3, &w);
        assert!((a.total_ns() - 57.3).abs() < 1e-9);
        assert_eq!(a.stage_cycles(1000.0 / 165.0).total(), 2 + 2 + 2 + 2 + 1);
    }

    #[test]
    fn toml_forms() {
        let w = Stages { parser: 1, table: 1, voq: 1, scheduler: 1, deparser: 1 };
        let a = Annotation::from_toml("total_ns = 42.0\nii = 2\n", &w).unwrap();
        assert_eq!(a.ii, Some(2));
        assert!((a.stage_ns.voq - 8.4).abs() < 1e-9);
        let b = Annotation::from_toml(
            "[stage_ns]\nparser = 1.0\ntable = 2.0\nvoq = 3.0\nscheduler = 4.0\ndeparser = 5.0\n",
            &w,
        )
        .unwrap();
        assert_eq!(b.total_ns(), 15.0);
        assert!(Annotation::from_toml("", &w).is_err());
        assert!(Annotation::from_toml("total_ns = 1.0\nbogus = 1\n", &w).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let w = Stages { parser: 1, table: 1, voq: 1, scheduler: 1, deparser: 1 };
        assert!(Annotation::from_total_ns(0.0, &w).validate().is_err());
        assert!(Annotation::from_total_ns(-3.0, &w).validate().is_err());
        let mut a = Annotation::from_total_ns(10.0, &w);
        a.ii = Some(0);
        assert!(a.validate().is_err());
    }
}
