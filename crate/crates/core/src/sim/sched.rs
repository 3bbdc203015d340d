//! Crossbar arbiters. Requests arrive as one output bitmask per input.

use std::fmt::Debug;

use super::config::SchedulerKind;

/// Partial injective map from inputs to outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    out_of: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n: usize) -> Self {
        Self { out_of: vec![None; n] }
    }

    pub fn clear(&mut self) {
        self.out_of.iter_mut().for_each(|o| *o = None);
    }

    pub fn ports(&self) -> usize {
        self.out_of.len()
    }

    pub fn output_of(&self, input: usize) -> Option<usize> {
        self.out_of[input]
    }

    pub fn input_of(&self, output: usize) -> Option<usize> {
        self.out_of.iter().position(|o| *o == Some(output))
    }

    pub fn insert(&mut self, input: usize, output: usize) {
        self.out_of[input] = Some(output);
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_of
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.map(|j| (i, j)))
    }

    pub fn len(&self) -> usize {
        self.out_of.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn matched_outputs(&self) -> u64 {
        self.pairs().fold(0, |m, (_, j)| m | (1u64 << j))
    }

    /// Every pair was requested and no output is used twice.
    pub fn is_valid_for(&self, requests: &[u64]) -> bool {
        let mut seen = 0u64;
        for (i, j) in self.pairs() {
            if requests[i] & (1u64 << j) == 0 || seen & (1u64 << j) != 0 {
                return false;
            }
            seen |= 1u64 << j;
        }
        true
    }

    /// No request joins an unmatched input to an unmatched output.
    pub fn is_maximal_for(&self, requests: &[u64]) -> bool {
        let free_out = !self.matched_outputs();
        requests
            .iter()
            .enumerate()
            .all(|(i, r)| self.out_of[i].is_some() || r & free_out == 0)
    }
}

/// Lowest set bit of `mask` at or after `start`, wrapping around.
pub fn first_at_or_after(mask: u64, start: usize) -> Option<usize> {
    if mask == 0 {
        return None;
    }
    let hi = if start >= 64 { 0 } else { mask & (u64::MAX << start) };
    Some(if hi != 0 { hi.trailing_zeros() } else { mask.trailing_zeros() } as usize)
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(b)
        }
    })
}

pub trait Arbiter: Debug + Send {
    /// Overwrites `m` with this slot's matching.
    fn arbitrate_into(&mut self, requests: &[u64], m: &mut Matching);

    fn arbitrate(&mut self, requests: &[u64]) -> Matching {
        let mut m = Matching::empty(requests.len());
        self.arbitrate_into(requests, &mut m);
        m
    }

    /// Notification that a transfer on `(input, output)` finished.
    /// `backlogged` is true when that VOQ still holds packets.
    fn transfer_done(&mut self, _input: usize, _output: usize, _backlogged: bool) {}
}

pub fn make_arbiter(kind: SchedulerKind, ports: usize, iterations: usize) -> Box<dyn Arbiter> {
    match kind {
        SchedulerKind::Rr => Box::new(RoundRobin::new(ports)),
        SchedulerKind::Islip => Box::new(Islip::new(ports, iterations)),
        SchedulerKind::Edrrm => Box::new(Edrrm::new(ports)),
    }
}

/// Iterative request/grant/accept with per-output grant and per-input accept
/// pointers, updated only by first-iteration matches.
#[derive(Debug, Clone)]
pub struct Islip {
    n: usize,
    iterations: usize,
    grant_idx: Vec<usize>,
    accept_idx: Vec<usize>,
    cols: Vec<u64>,
    grants: Vec<u64>,
}

impl Islip {
    pub fn new(n: usize, iterations: usize) -> Self {
        Self {
            n,
            iterations: iterations.max(1),
            grant_idx: vec![0; n],
            accept_idx: vec![0; n],
            cols: vec![0; n],
            grants: vec![0; n],
        }
    }

    pub fn with_indices(mut self, grant: Vec<usize>, accept: Vec<usize>) -> Self {
        self.grant_idx = grant;
        self.accept_idx = accept;
        self
    }
}

impl Arbiter for Islip {
    fn arbitrate_into(&mut self, requests: &[u64], m: &mut Matching) {
        m.clear();
        let mut free_in = 0u64;
        let mut free_out = 0u64;
        for (i, r) in requests.iter().enumerate() {
            if *r != 0 {
                free_in |= 1u64 << i;
                free_out |= r;
            }
        }
        let Self { n, cols, grants, .. } = self;
        let n = *n;
        for it in 0..self.iterations {
            for j in bits(free_out) {
                cols[j] = 0;
            }
            for i in bits(free_in) {
                for j in bits(requests[i] & free_out) {
                    cols[j] |= 1u64 << i;
                }
            }
            let mut granted = 0u64;
            for j in bits(free_out) {
                if let Some(i) = first_at_or_after(cols[j], self.grant_idx[j]) {
                    if granted & (1u64 << i) == 0 {
                        grants[i] = 0;
                        granted |= 1u64 << i;
                    }
                    grants[i] |= 1u64 << j;
                }
            }
            let mut progressed = false;
            for i in bits(granted) {
                if let Some(j) = first_at_or_after(grants[i], self.accept_idx[i]) {
                    m.insert(i, j);
                    free_in &= !(1u64 << i);
                    free_out &= !(1u64 << j);
                    progressed = true;
                    if it == 0 {
                        self.accept_idx[i] = (j + 1) % n;
                        self.grant_idx[j] = (i + 1) % n;
                    }
                }
            }
            if !progressed || free_in == 0 || free_out == 0 {
                break;
            }
        }
    }
}

/// Single-pass request/grant/accept with rotating priority.
#[derive(Debug, Clone)]
pub struct RoundRobin(Islip);

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        Self(Islip::new(n, 1))
    }

    pub fn with_indices(self, grant: Vec<usize>, accept: Vec<usize>) -> Self {
        Self(self.0.with_indices(grant, accept))
    }
}

impl Arbiter for RoundRobin {
    fn arbitrate_into(&mut self, requests: &[u64], m: &mut Matching) {
        self.0.arbitrate_into(requests, m)
    }
}

/// Exhaustive-service dual round robin: each unheld input sends one request,
/// matched pairs stay held until their VOQ drains. An input whose request is
/// refused moves its pointer past that output.
#[derive(Debug, Clone)]
pub struct Edrrm {
    n: usize,
    request_idx: Vec<usize>,
    grant_idx: Vec<usize>,
    held: Vec<Option<usize>>,
    cols: Vec<u64>,
}

impl Edrrm {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            request_idx: vec![0; n],
            grant_idx: vec![0; n],
            held: vec![None; n],
            cols: vec![0; n],
        }
    }

    pub fn held(&self, input: usize) -> Option<usize> {
        self.held[input]
    }

    pub fn release(&mut self, input: usize) {
        self.held[input] = None;
    }
}

impl Arbiter for Edrrm {
    fn arbitrate_into(&mut self, requests: &[u64], m: &mut Matching) {
        m.clear();
        let n = self.n;
        let mut held_out = 0u64;
        for (i, h) in self.held.iter().enumerate() {
            if let Some(j) = *h {
                held_out |= 1u64 << j;
                if requests[i] & (1u64 << j) != 0 {
                    m.insert(i, j);
                }
            }
        }
        let mut asked = 0u64;
        for i in 0..n {
            if self.held[i].is_some() {
                continue;
            }
            if let Some(j) = first_at_or_after(requests[i] & !held_out, self.request_idx[i]) {
                if asked & (1u64 << j) == 0 {
                    self.cols[j] = 0;
                    asked |= 1u64 << j;
                }
                self.cols[j] |= 1u64 << i;
            }
        }
        for j in bits(asked) {
            let col = self.cols[j];
            if let Some(i) = first_at_or_after(col, self.grant_idx[j]) {
                m.insert(i, j);
                self.held[i] = Some(j);
                self.grant_idx[j] = (i + 1) % n;
                self.request_idx[i] = (j + 1) % n;
                // refused inputs move past the contended output
                for l in bits(col & !(1u64 << i)) {
                    self.request_idx[l] = (j + 1) % n;
                }
            }
        }
    }

    fn transfer_done(&mut self, input: usize, output: usize, backlogged: bool) {
        if !backlogged && self.held[input] == Some(output) {
            self.held[input] = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rotation_helper() {
        assert_eq!(first_at_or_after(0b1010, 0), Some(1));
        assert_eq!(first_at_or_after(0b1010, 2), Some(3));
        assert_eq!(first_at_or_after(0b1010, 4), Some(1));
        assert_eq!(first_at_or_after(0, 3), None);
        assert_eq!(first_at_or_after(1 << 63, 63), Some(63));
    }

    #[test]
    fn rr_lone_request_and_rotation() {
        let mut rr = RoundRobin::new(2);
        let m = rr.arbitrate(&[0b10, 0]);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 1)]);

        let mut rr = RoundRobin::new(2).with_indices(vec![1, 0], vec![0, 0]);
        let m = rr.arbitrate(&[0b01, 0b01]);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(1, 0)]);
    }

    #[test]
    fn rr_all_ones_reaches_full_permutation() {
        let mut rr = RoundRobin::new(4);
        let all = [0xF; 4];
        let rounds = (1..=4).find(|_| rr.arbitrate(&all).len() == 4);
        assert!(rounds.is_some());
    }

    #[test]
    fn islip_two_iterations_fill_2x2() {
        let mut s = Islip::new(2, 2);
        let m = s.arbitrate(&[0b11, 0b11]);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 0), (1, 1)]);
        let mut s = Islip::new(2, 1);
        assert_eq!(s.arbitrate(&[0b11, 0b11]).len(), 1);
        assert!(Islip::new(3, 3).arbitrate(&[0, 0, 0]).is_empty());
    }

    #[test]
    fn edrrm_holds_until_drained() {
        let mut e = Edrrm::new(2);
        let m = e.arbitrate(&[0b01, 0b01]);
        assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 0)]);
        // loser stays unmatched; the pair persists while backlogged
        for _ in 0..3 {
            e.transfer_done(0, 0, true);
            let m = e.arbitrate(&[0b01, 0b01]);
            assert_eq!(m.pairs().collect::<Vec<_>>(), vec![(0, 0)]);
        }
        e.transfer_done(0, 0, false);
        assert_eq!(e.held(0), None);
        // next request from input 0 goes past output 0
        let m = e.arbitrate(&[0b11, 0b01]);
        assert_eq!(m.output_of(0), Some(1));
        assert_eq!(m.output_of(1), Some(0));
    }

    fn arb_requests(max_n: usize) -> impl Strategy<Value = (usize, Vec<u64>)> {
        (2..=max_n).prop_flat_map(|n| {
            let mask = crate::trace::broadcast_key(n as u32);
            (Just(n), prop::collection::vec(any::<u64>().prop_map(move |r| r & mask), n))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn matchings_are_valid((n, reqs) in arb_requests(16)) {
            for kind in SchedulerKind::ALL {
                let mut a = make_arbiter(*kind, n, 2);
                let m = a.arbitrate(&reqs);
                prop_assert!(m.is_valid_for(&reqs), "{kind}");
            }
        }

        #[test]
        fn islip_n_iterations_is_maximal((n, reqs) in arb_requests(16)) {
            let m = Islip::new(n, n).arbitrate(&reqs);
            prop_assert!(m.is_maximal_for(&reqs));
        }
    }
}
