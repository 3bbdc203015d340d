use crate::trace::broadcast_key;

use super::config::{TableKind, FULL_LOOKUP_MAX_KEY_BITS};
use super::SimError;

/// Odd multiplier for the multiply-shift hash (64-bit golden ratio).
const HASH_MULT: u64 = 0x9E37_79B9_7F4A_7C15;

/// Address-learning forwarding table. Entries hold the full key so that hash
/// collisions are detected on lookup and treated as misses.
#[derive(Debug, Clone)]
pub struct ForwardingTable {
    kind: TableKind,
    key_bits: u32,
    hash_bits: u32,
    banks: u32,
    ports: usize,
    entries: Vec<Option<(u64, u16)>>,
}

fn low_mask(bits: u32) -> u64 {
    broadcast_key(bits)
}

impl ForwardingTable {
    pub fn new(kind: TableKind, key_bits: u32, ports: usize, banks: u32, hash_bits: u32) -> Result<Self, SimError> {
        let slots = match kind {
            TableKind::FullLookup => {
                if key_bits > FULL_LOOKUP_MAX_KEY_BITS {
                    return Err(SimError::IncompatibleTable { key_bits });
                }
                1usize << key_bits
            }
            TableKind::MultibankHash => 1usize << hash_bits.min(key_bits),
        };
        Ok(Self {
            kind,
            key_bits,
            hash_bits: hash_bits.min(key_bits),
            banks,
            ports,
            entries: vec![None; slots],
        })
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    /// `h(k) = (k * A mod 2^keybits) >> (keybits - hash_bits)`.
    pub fn hash(&self, key: u64) -> u64 {
        let prod = key.wrapping_mul(HASH_MULT) & low_mask(self.key_bits);
        prod >> (self.key_bits - self.hash_bits)
    }

    /// Bank touched by an access to `key`; direct-indexed tables have none.
    pub fn bank_of(&self, key: u64) -> Option<u32> {
        match self.kind {
            TableKind::FullLookup => None,
            TableKind::MultibankHash => Some((self.hash(key) % self.banks as u64) as u32),
        }
    }

    fn slot(&self, key: u64) -> usize {
        match self.kind {
            TableKind::FullLookup => key as usize,
            TableKind::MultibankHash => self.hash(key) as usize,
        }
    }

    fn flood(&self, in_port: usize) -> u64 {
        low_mask(self.ports as u32) & !(1u64 << in_port)
    }

    /// Output port mask for `dst` arriving on `in_port`.
    pub fn lookup(&self, dst: u64, in_port: usize) -> u64 {
        if dst == broadcast_key(self.key_bits) {
            return self.flood(in_port);
        }
        match self.entries[self.slot(dst)] {
            Some((k, port)) if k == dst => 1u64 << port,
            _ => self.flood(in_port),
        }
    }

    pub fn learn(&mut self, src: u64, in_port: usize) {
        let slot = self.slot(src);
        self.entries[slot] = Some((src, in_port as u16));
    }

    pub fn lookup_and_learn(&mut self, dst: u64, src: u64, in_port: usize) -> u64 {
        let out = self.lookup(dst, in_port);
        self.learn(src, in_port);
        out
    }

    pub fn learned(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }
}
