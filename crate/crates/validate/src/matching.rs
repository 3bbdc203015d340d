use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spac_core::sim::sched::{make_arbiter, Arbiter, Islip, Matching};
use spac_core::sim::SchedulerKind;

use crate::{outcome, Outcome};

const MATRICES: usize = 10_000;
const MAX_PORTS: usize = 16;

/// Requested pairs only, no input or output used twice.
fn valid(m: &Matching, req: &[u64]) -> bool {
    let n = req.len();
    let mut out_used = vec![false; n];
    for i in 0..n {
        if let Some(j) = m.output_of(i) {
            if j >= n || req[i] >> j & 1 == 0 || out_used[j] {
                return false;
            }
            out_used[j] = true;
        }
    }
    true
}

/// Tries to grow the matching by one request between a free input and a free
/// output; a maximal matching admits none.
fn augmentable(m: &Matching, req: &[u64]) -> Option<(usize, usize)> {
    let n = req.len();
    let mut out_used = vec![false; n];
    for i in 0..n {
        if let Some(j) = m.output_of(i) {
            out_used[j] = true;
        }
    }
    (0..n)
        .filter(|&i| m.output_of(i).is_none())
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| !out_used[j] && req[i] >> j & 1 == 1)
}

fn random_requests(rng: &mut ChaCha8Rng, n: usize, keep: &[u64]) -> Vec<u64> {
    let p = rng.gen_range(0.05..0.95);
    (0..n)
        .map(|i| {
            let row = (0..n).filter(|_| rng.gen_bool(p)).fold(0u64, |r, j| r | 1 << j);
            row | keep.get(i).copied().unwrap_or(0)
        })
        .collect()
}

struct Bank {
    arbiters: Vec<(String, Box<dyn Arbiter>)>,
    backlog: Vec<u64>,
}

impl Bank {
    fn new(n: usize) -> Self {
        let mut arbiters: Vec<(String, Box<dyn Arbiter>)> = SchedulerKind::ALL
            .iter()
            .map(|&k| (k.to_string(), make_arbiter(k, n, 1)))
            .collect();
        arbiters.push((format!("islip{n}"), Box::new(Islip::new(n, n))));
        Self {
            arbiters,
            backlog: vec![0; n],
        }
    }
}

/// Stateful arbiters of every kind and size see the same random request
/// sequence, including transfer completions that keep or drain a VOQ.
pub fn criterion_2() -> Outcome {
    outcome(2, "matching-validity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5C4ED);
        let mut banks: Vec<Bank> = (2..=MAX_PORTS).map(Bank::new).collect();
        let mut matched = 0usize;
        for case in 0..MATRICES {
            let n = rng.gen_range(2..=MAX_PORTS);
            let bank = &mut banks[n - 2];
            let req = random_requests(&mut rng, n, &bank.backlog);
            let mut next_backlog = vec![0u64; n];
            for (idx, (name, arb)) in bank.arbiters.iter_mut().enumerate() {
                let m = arb.arbitrate(&req);
                if !valid(&m, &req) {
                    return Ok((false, format!("case {case}: {name} at N={n} returned an invalid matching")));
                }
                let full_islip = idx == SchedulerKind::ALL.len();
                if full_islip {
                    if let Some((i, j)) = augmentable(&m, &req) {
                        return Ok((false, format!("case {case}: islip{n} leaves {i}->{j} unmatched")));
                    }
                    matched += m.len();
                }
                for (i, j) in m.pairs() {
                    let backlogged = rng.gen_bool(0.5);
                    arb.transfer_done(i, j, backlogged);
                    if backlogged {
                        next_backlog[i] |= 1 << j;
                    }
                }
            }
            bank.backlog = next_backlog;
        }
        Ok((
            true,
            format!("{MATRICES} matrices, N in 2..={MAX_PORTS}: rr, islip, edrrm valid; islip(N) maximal ({matched} pairs)"),
        ))
    })
}
