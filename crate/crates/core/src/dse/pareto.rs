use serde::{Deserialize, Serialize};

use super::DesignPoint;

/// The two minimized objectives: BRAM blocks and p99 latency in ns.
pub trait Objectives {
    fn objectives(&self) -> (u64, f64);

    /// `self` is no worse in both objectives and better in at least one.
    fn dominates(&self, other: &impl Objectives) -> bool {
        let (b1, l1) = self.objectives();
        let (b2, l2) = other.objectives();
        b1 <= b2 && l1 <= l2 && (b1 < b2 || l1 < l2)
    }
}

impl Objectives for (u64, f64) {
    fn objectives(&self) -> (u64, f64) {
        *self
    }
}

impl Objectives for DesignPoint {
    fn objectives(&self) -> (u64, f64) {
        (self.resources.bram_blocks, self.p99_ns())
    }
}

/// Non-dominated subset, in input order. Points tied on both objectives are
/// all kept.
pub fn pareto_front<T: Objectives + Clone>(points: &[T]) -> Vec<T> {
    points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(*p)))
        .cloned()
        .collect()
}

/// Non-dominated design points sorted by (BRAM, p99, key).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub points: Vec<DesignPoint>,
}

impl ParetoFront {
    pub fn from_points(points: &[DesignPoint]) -> Self {
        let mut points = pareto_front(points);
        points.sort_by(|a, b| {
            a.resources
                .bram_blocks
                .cmp(&b.resources.bram_blocks)
                .then(a.p99_ns().total_cmp(&b.p99_ns()))
                .then_with(|| a.key().cmp(&b.key()))
        });
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.points.iter().any(|p| p.key() == key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn drops_dominated() {
        let pts = [(10u64, 100.0), (20, 80.0), (15, 120.0)];
        assert_eq!(pareto_front(&pts), vec![(10, 100.0), (20, 80.0)]);
        assert_eq!(pareto_front(&[(3u64, 1.0)]), vec![(3, 1.0)]);
    }

    #[test]
    fn ties_are_kept() {
        let pts = [(5u64, 50.0), (5, 50.0), (6, 50.0)];
        assert_eq!(pareto_front(&pts), vec![(5, 50.0), (5, 50.0)]);
    }

    proptest! {
        #[test]
        fn front_is_idempotent_and_exact(pts in prop::collection::vec((0u64..20, 0u32..20), 1..40)) {
            let pts: Vec<(u64, f64)> = pts.into_iter().map(|(b, l)| (b, l as f64)).collect();
            let f = pareto_front(&pts);
            prop_assert!(!f.is_empty());
            prop_assert_eq!(pareto_front(&f), f.clone());
            // every dropped point has a dominator in the front
            for p in &pts {
                if !f.contains(p) {
                    prop_assert!(f.iter().any(|q| q.dominates(p)));
                }
            }
        }
    }
}
