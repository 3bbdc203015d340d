use std::collections::VecDeque;

use super::config::{ArchConfig, VoqKind};
use super::ResultAcc;

/// A stored packet. N*N buffers store one slot per destination copy; the
/// shared pool and the input FIFO store one slot with a destination bitmap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Slot {
    pub pkt: u32,
    pub pending: u64,
    pub flits: u32,
}

#[derive(Debug)]
pub(crate) struct Buffers {
    kind: VoqKind,
    n: usize,
    /// Slot ids; indexed `i * n + j`, or by input for the FIFO.
    queues: Vec<VecDeque<u32>>,
    /// Flits per queue; for the shared pool, flits referenced by each index queue.
    occ: Vec<u32>,
    cap: Vec<Option<u32>>,
    pool_used: u32,
    pool_cap: Option<u32>,
    slots: Vec<Slot>,
    free: Vec<u32>,
    live: usize,
    nonempty: Vec<u64>,
}

fn bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        (m != 0).then(|| {
            let b = m.trailing_zeros() as usize;
            m &= m - 1;
            b
        })
    })
}

impl Buffers {
    pub fn new(config: &ArchConfig) -> Self {
        let n = config.ports;
        let queues = config.voq_count();
        let cap = match config.voq {
            VoqKind::Shared => vec![None; queues],
            VoqKind::Nxn => (0..queues)
                .map(|q| config.voq_depth.depth(n, q / n, q % n))
                .collect(),
            // single FIFO per input: its depth is the sum of the row
            VoqKind::InputFifo => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| config.voq_depth.depth(n, i, j))
                        .sum::<Option<u32>>()
                })
                .collect(),
        };
        Self {
            kind: config.voq,
            n,
            queues: vec![VecDeque::new(); queues],
            occ: vec![0; queues],
            cap,
            pool_used: 0,
            pool_cap: match config.voq {
                VoqKind::Shared => config.shared_buffer_slots,
                _ => None,
            },
            slots: Vec::new(),
            free: Vec::new(),
            live: 0,
            nonempty: vec![0; n],
        }
    }

    fn alloc(&mut self, slot: Slot) -> u32 {
        self.live += 1;
        match self.free.pop() {
            Some(id) => {
                self.slots[id as usize] = slot;
                id
            }
            None => {
                self.slots.push(slot);
                (self.slots.len() - 1) as u32
            }
        }
    }

    fn release(&mut self, id: u32) {
        self.live -= 1;
        self.free.push(id);
    }

    fn push(&mut self, i: usize, j: usize, id: u32) {
        self.queues[i * self.n + j].push_back(id);
        self.nonempty[i] |= 1u64 << j;
    }

    /// Stores `pkt` for every destination in `mask`, recording occupancy
    /// samples, drops and the injected copies.
    pub fn enqueue(&mut self, pkt: u32, input: usize, mask: u64, flits: u32, acc: &mut ResultAcc) {
        let n = self.n;
        let copies = mask.count_ones() as u64;
        acc.ledger.injected += copies;
        for j in bits(mask) {
            acc.offered[input * n + j] += 1;
        }
        match self.kind {
            VoqKind::Nxn => {
                for j in bits(mask) {
                    let q = input * n + j;
                    let need = self.occ[q] + flits;
                    acc.q_hist[q].record(need);
                    if self.cap[q].is_some_and(|c| need > c) {
                        acc.dropped_q[q] += 1;
                        acc.ledger.dropped += 1;
                        continue;
                    }
                    let id = self.alloc(Slot { pkt, pending: 1u64 << j, flits });
                    self.push(input, j, id);
                    self.occ[q] = need;
                    acc.qmax[q] = acc.qmax[q].max(need);
                }
            }
            VoqKind::Shared => {
                let need = self.pool_used + flits;
                if let Some(h) = acc.pool_hist.as_mut() {
                    h.record(need);
                }
                for j in bits(mask) {
                    let q = input * n + j;
                    acc.q_hist[q].record(self.occ[q] + flits);
                }
                if self.pool_cap.is_some_and(|c| need > c) {
                    for j in bits(mask) {
                        acc.dropped_q[input * n + j] += 1;
                    }
                    acc.ledger.dropped += copies;
                    return;
                }
                let id = self.alloc(Slot { pkt, pending: mask, flits });
                for j in bits(mask) {
                    let q = input * n + j;
                    self.push(input, j, id);
                    self.occ[q] += flits;
                    acc.qmax[q] = acc.qmax[q].max(self.occ[q]);
                }
                self.pool_used = need;
                acc.pool_max = acc.pool_max.max(need);
            }
            VoqKind::InputFifo => {
                let need = self.occ[input] + flits;
                let q = input * n;
                acc.q_hist[q].record(need);
                if self.cap[input].is_some_and(|c| need > c) {
                    for j in bits(mask) {
                        acc.dropped_q[input * n + j] += 1;
                    }
                    acc.ledger.dropped += copies;
                    return;
                }
                let id = self.alloc(Slot { pkt, pending: mask, flits });
                self.queues[input].push_back(id);
                self.occ[input] = need;
                acc.qmax[q] = acc.qmax[q].max(need);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn slot(&self, id: u32) -> &Slot {
        &self.slots[id as usize]
    }

    /// Head packet of VOQ `(i, j)`, or of input `i`'s FIFO if it still owes
    /// a copy to `j`.
    pub fn head(&self, i: usize, j: usize) -> Option<u32> {
        match self.kind {
            VoqKind::InputFifo => {
                let id = *self.queues[i].front()?;
                let s = &self.slots[id as usize];
                (s.pending & (1u64 << j) != 0).then_some(s.pkt)
            }
            _ => self.queues[i * self.n + j].front().map(|&id| self.slots[id as usize].pkt),
        }
    }

    /// Outputs in `free_out` whose head packet at input `i` satisfies `ready`.
    pub fn requests(&self, i: usize, free_out: u64, ready: impl Fn(u32) -> bool) -> u64 {
        match self.kind {
            VoqKind::InputFifo => match self.queues[i].front() {
                Some(&id) => {
                    let s = &self.slots[id as usize];
                    if ready(s.pkt) {
                        s.pending & free_out
                    } else {
                        0
                    }
                }
                None => 0,
            },
            _ => {
                let mut r = 0;
                for j in bits(self.nonempty[i] & free_out) {
                    let id = self.queues[i * self.n + j][0];
                    if ready(self.slots[id as usize].pkt) {
                        r |= 1u64 << j;
                    }
                }
                r
            }
        }
    }

    /// Begins the transfer of the head of `(i, j)`; returns its slot.
    pub fn start(&mut self, i: usize, j: usize) -> u32 {
        match self.kind {
            VoqKind::InputFifo => self.queues[i][0],
            _ => {
                let q = i * self.n + j;
                let id = self.queues[q].pop_front().expect("transfer from empty VOQ");
                if self.queues[q].is_empty() {
                    self.nonempty[i] &= !(1u64 << j);
                }
                id
            }
        }
    }

    /// Finishes a transfer and frees space. Returns whether `(i, j)` still
    /// holds packets.
    pub fn complete(&mut self, i: usize, j: usize, id: u32) -> bool {
        let n = self.n;
        let slot = &mut self.slots[id as usize];
        slot.pending &= !(1u64 << j);
        let (flits, done) = (slot.flits, slot.pending == 0);
        match self.kind {
            VoqKind::Nxn => {
                self.occ[i * n + j] -= flits;
                self.release(id);
                !self.queues[i * n + j].is_empty()
            }
            VoqKind::Shared => {
                self.occ[i * n + j] -= flits;
                if done {
                    self.pool_used -= flits;
                    self.release(id);
                }
                !self.queues[i * n + j].is_empty()
            }
            VoqKind::InputFifo => {
                if done {
                    self.queues[i].pop_front();
                    self.occ[i] -= flits;
                    self.release(id);
                }
                self.head(i, j).is_some()
            }
        }
    }

    /// Destination copies still owed by stored packets.
    pub fn pending_copies(&self) -> u64 {
        let mut dead = vec![false; self.slots.len()];
        for &f in &self.free {
            dead[f as usize] = true;
        }
        self.slots
            .iter()
            .zip(&dead)
            .filter(|(_, d)| !**d)
            .map(|(s, _)| s.pending.count_ones() as u64)
            .sum()
    }

    /// Stored packet bodies.
    #[cfg(test)]
    pub fn stored_packets(&self) -> usize {
        self.live
    }

    #[cfg(test)]
    pub fn pool_used(&self) -> u32 {
        self.pool_used
    }

    /// Checks the shared-pool bookkeeping: one body per packet, index
    /// queues referencing exactly the pending destinations.
    #[cfg(test)]
    pub fn check_shared_invariants(&self) -> bool {
        let mut refs = vec![0u64; self.slots.len()];
        for (q, queue) in self.queues.iter().enumerate() {
            for &id in queue {
                refs[id as usize] |= 1u64 << (q % self.n);
            }
        }
        let live: Vec<bool> = {
            let mut v = vec![true; self.slots.len()];
            self.free.iter().for_each(|&f| v[f as usize] = false);
            v
        };
        let pool: u32 = (0..self.slots.len())
            .filter(|&s| live[s])
            .map(|s| self.slots[s].flits)
            .sum();
        (0..self.slots.len()).all(|s| !live[s] || (self.slots[s].pending != 0 && refs[s] & !self.slots[s].pending == 0))
            && live.iter().filter(|l| **l).count() == self.live
            && (self.kind != VoqKind::Shared || pool == self.pool_used)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{QueueDepths, SchedulerKind, TableKind};

    fn cfg(voq: VoqKind, depth: QueueDepths, pool: Option<u32>) -> ArchConfig {
        ArchConfig::new(4, 256, TableKind::FullLookup, voq, SchedulerKind::Rr).with_buffers(depth, pool)
    }

    #[test]
    fn broadcast_copies_vs_pointer() {
        let mut acc = ResultAcc::new(4, false);
        let mut b = Buffers::new(&cfg(VoqKind::Nxn, QueueDepths::Infinite, None));
        b.enqueue(0, 0, 0b1110, 1, &mut acc);
        assert_eq!(b.stored_packets(), 3);
        assert_eq!(b.pending_copies(), 3);

        let mut acc = ResultAcc::new(4, true);
        let mut b = Buffers::new(&cfg(VoqKind::Shared, QueueDepths::Infinite, None));
        b.enqueue(0, 0, 0b1110, 1, &mut acc);
        assert_eq!(b.stored_packets(), 1);
        assert_eq!(b.pending_copies(), 3);
        assert!(b.check_shared_invariants());
        for j in [1, 2] {
            let id = b.start(0, j);
            b.complete(0, j, id);
            assert_eq!(b.stored_packets(), 1);
            assert!(b.check_shared_invariants());
        }
        let id = b.start(0, 3);
        b.complete(0, 3, id);
        assert!(b.is_empty());
        assert_eq!(b.pool_used(), 0);
    }

    #[test]
    fn tail_drop_on_full_queue() {
        let mut acc = ResultAcc::new(4, false);
        let mut b = Buffers::new(&cfg(VoqKind::Nxn, QueueDepths::Uniform(2), None));
        b.enqueue(0, 1, 0b0001, 3, &mut acc);
        assert_eq!(acc.ledger.dropped, 1);
        assert!(b.is_empty());
        assert_eq!(acc.q_hist[4].max(), Some(3));
    }

    #[test]
    fn shared_pool_drops_whole_packet() {
        let mut acc = ResultAcc::new(4, true);
        let mut b = Buffers::new(&cfg(VoqKind::Shared, QueueDepths::Infinite, Some(4)));
        b.enqueue(0, 0, 0b0110, 3, &mut acc);
        b.enqueue(1, 1, 0b1101, 2, &mut acc);
        assert_eq!(acc.ledger.injected, 5);
        assert_eq!(acc.ledger.dropped, 3);
        assert_eq!(b.pool_used(), 3);
    }

    #[test]
    fn fifo_head_blocks() {
        let mut acc = ResultAcc::new(4, false);
        let mut b = Buffers::new(&cfg(VoqKind::InputFifo, QueueDepths::Infinite, None));
        b.enqueue(0, 0, 0b0010, 1, &mut acc);
        b.enqueue(1, 0, 0b0100, 1, &mut acc);
        assert_eq!(b.requests(0, 0b1111, |_| true), 0b0010);
        assert_eq!(b.head(0, 2), None);
        let id = b.start(0, 1);
        assert!(b.complete(0, 1, id) == false);
        assert_eq!(b.requests(0, 0b1111, |_| true), 0b0100);
    }
}
