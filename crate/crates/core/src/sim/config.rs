use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Widest routing key a direct-indexed table supports.
pub const FULL_LOOKUP_MAX_KEY_BITS: u32 = 16;

pub const DATA_WIDTHS: [u32; 4] = [128, 256, 512, 1024];

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

named_enum!(
    /// Forwarding table organization.
    TableKind { FullLookup => "full_lookup", MultibankHash => "multibank_hash" }
);

named_enum!(
    /// Buffer organization. `InputFifo` is a diagnostic mode with one FIFO
    /// per input and is never part of an exploration space.
    VoqKind { Nxn => "nxn", Shared => "shared", InputFifo => "input_fifo" }
);

named_enum!(
    SchedulerKind { Rr => "rr", Islip => "islip", Edrrm => "edrrm" }
);

/// One value per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stages<T> {
    pub parser: T,
    pub table: T,
    pub voq: T,
    pub scheduler: T,
    pub deparser: T,
}

impl<T: Copy + std::iter::Sum<T>> Stages<T> {
    pub fn total(&self) -> T {
        [self.parser, self.table, self.voq, self.scheduler, self.deparser]
            .into_iter()
            .sum()
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Stages<U> {
        Stages {
            parser: f(self.parser),
            table: f(self.table),
            voq: f(self.voq),
            scheduler: f(self.scheduler),
            deparser: f(self.deparser),
        }
    }
}

pub type StageLatencies = Stages<u32>;

impl StageLatencies {
    /// Unannotated stage latencies in cycles. The reference configuration
    /// (multibank, N*N, single-iteration iSLIP) totals 9 cycles.
    pub fn for_arch(table: TableKind, voq: VoqKind, sched: SchedulerKind, iterations: usize) -> Self {
        Stages {
            parser: 2,
            table: match table {
                TableKind::FullLookup => 1,
                TableKind::MultibankHash => 2,
            },
            voq: match voq {
                VoqKind::Nxn => 2,
                VoqKind::Shared => 3,
                VoqKind::InputFifo => 1,
            },
            scheduler: scheduler_overhead_cycles(sched, iterations),
            deparser: 1,
        }
    }
}

/// Arbitration latency per scheduler: rr 1, edrrm 2, islip 2 per iteration.
pub fn scheduler_overhead_cycles(sched: SchedulerKind, iterations: usize) -> u32 {
    match sched {
        SchedulerKind::Rr => 1,
        SchedulerKind::Edrrm => 2,
        SchedulerKind::Islip => 2 * iterations.max(1) as u32,
    }
}

/// Per-(input, output) queue depths in flits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueDepths {
    /// Unbounded; only legal in profiling runs.
    Infinite,
    Uniform(u32),
    /// Row-major `ports x ports` depths.
    PerQueue(Vec<u32>),
}

impl QueueDepths {
    pub fn depth(&self, ports: usize, input: usize, output: usize) -> Option<u32> {
        match self {
            QueueDepths::Infinite => None,
            QueueDepths::Uniform(d) => Some(*d),
            QueueDepths::PerQueue(v) => Some(v[input * ports + output]),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, QueueDepths::Infinite)
    }
}

/// One point in the switch design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub ports: usize,
    pub data_width_bits: u32,
    pub fwd_table: TableKind,
    pub voq: VoqKind,
    pub scheduler: SchedulerKind,
    pub islip_iterations: usize,
    pub clock_mhz: f64,
    pub pipeline_ii: u32,
    pub stages: StageLatencies,
    /// Used by N*N and input-FIFO buffers.
    pub voq_depth: QueueDepths,
    /// Central pool size in flits for shared buffers; `None` is unbounded.
    pub shared_buffer_slots: Option<u32>,
    pub table_banks: u32,
    pub hash_bits: u32,
}

impl ArchConfig {
    pub fn new(ports: usize, data_width_bits: u32, fwd_table: TableKind, voq: VoqKind, scheduler: SchedulerKind) -> Self {
        let iterations = 1;
        Self {
            ports,
            data_width_bits,
            fwd_table,
            voq,
            scheduler,
            islip_iterations: iterations,
            clock_mhz: 250.0,
            pipeline_ii: 1,
            stages: StageLatencies::for_arch(fwd_table, voq, scheduler, iterations),
            voq_depth: QueueDepths::Uniform(512),
            shared_buffer_slots: Some(4096),
            table_banks: (ports as u32).next_power_of_two(),
            hash_bits: 12,
        }
    }

    /// The general-purpose reference: multibank hash, N*N VOQs, iSLIP.
    pub fn reference(ports: usize) -> Self {
        Self {
            clock_mhz: 165.0,
            ..Self::new(ports, 256, TableKind::MultibankHash, VoqKind::Nxn, SchedulerKind::Islip)
        }
    }

    pub fn with_islip_iterations(mut self, iterations: usize) -> Self {
        self.islip_iterations = iterations;
        self.stages.scheduler = scheduler_overhead_cycles(self.scheduler, iterations);
        self
    }

    pub fn with_buffers(mut self, depth: QueueDepths, shared_slots: Option<u32>) -> Self {
        self.voq_depth = depth;
        self.shared_buffer_slots = shared_slots;
        self
    }

    pub fn unbounded(self) -> Self {
        self.with_buffers(QueueDepths::Infinite, None)
    }

    pub fn cycle_ns(&self) -> f64 {
        1000.0 / self.clock_mhz
    }

    pub fn voq_count(&self) -> usize {
        match self.voq {
            VoqKind::InputFifo => self.ports,
            _ => self.ports * self.ports,
        }
    }

    /// True when any buffer is unbounded.
    pub fn has_infinite_buffers(&self) -> bool {
        match self.voq {
            VoqKind::Shared => self.shared_buffer_slots.is_none(),
            _ => self.voq_depth.is_infinite(),
        }
    }

    /// Stable identifier of the architecture (buffers excluded).
    pub fn arch_key(&self) -> String {
        let sched = match self.scheduler {
            SchedulerKind::Islip => format!("islip{}", self.islip_iterations),
            s => s.to_string(),
        };
        format!(
            "{}/{}/{}/w{}/n{}",
            self.fwd_table, self.voq, sched, self.data_width_bits, self.ports
        )
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::BadConfig(m));
        if !(2..=64).contains(&self.ports) {
            return bad(format!("ports must be in 2..=64, got {}", self.ports));
        }
        if !DATA_WIDTHS.contains(&self.data_width_bits) {
            return bad(format!("data width {} not in {:?}", self.data_width_bits, DATA_WIDTHS));
        }
        if !(1..=self.ports).contains(&self.islip_iterations) {
            return bad("islip_iterations must be in 1..=ports".into());
        }
        if !(self.clock_mhz > 0.0 && self.clock_mhz.is_finite()) {
            return bad("clock must be positive".into());
        }
        if self.pipeline_ii == 0 {
            return bad("pipeline II must be positive".into());
        }
        if !self.table_banks.is_power_of_two() {
            return bad("table_banks must be a power of two".into());
        }
        if !(1..=32).contains(&self.hash_bits) || (1u64 << self.hash_bits) < self.table_banks as u64 {
            return bad("hash_bits must be in 1..=32 and cover every bank".into());
        }
        match &self.voq_depth {
            QueueDepths::Uniform(0) => return bad("queue depth must be positive".into()),
            QueueDepths::PerQueue(v) => {
                if v.len() != self.ports * self.ports {
                    return bad(format!("expected {} per-queue depths", self.ports * self.ports));
                }
                if v.contains(&0) {
                    return bad("queue depth must be positive".into());
                }
            }
            _ => {}
        }
        if self.shared_buffer_slots == Some(0) {
            return bad("shared buffer must hold at least one flit".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_path_is_nine_cycles() {
        let c = ArchConfig::reference(8);
        assert_eq!(c.stages.total(), 9);
        // 9 cycles at 165 MHz = 54.5 ns, within 15% of the 57.3 ns anchor
        let ns = c.stages.total() as f64 * c.cycle_ns();
        assert!((ns - 57.3).abs() / 57.3 < 0.15, "{ns}");
    }

    #[test]
    fn names_round_trip() {
        for k in TableKind::ALL {
            assert_eq!(k.as_str().parse::<TableKind>().unwrap(), *k);
        }
        for k in SchedulerKind::ALL {
            assert_eq!(k.as_str().parse::<SchedulerKind>().unwrap(), *k);
        }
        assert!("fifo".parse::<VoqKind>().is_err());
    }

    #[test]
    fn validation() {
        let ok = ArchConfig::new(8, 256, TableKind::FullLookup, VoqKind::Nxn, SchedulerKind::Rr);
        assert!(ok.validate().is_ok());
        assert!(ArchConfig { ports: 1, ..ok.clone() }.validate().is_err());
        assert!(ArchConfig { data_width_bits: 200, ..ok.clone() }.validate().is_err());
        assert!(ArchConfig { table_banks: 3, ..ok.clone() }.validate().is_err());
        assert!(ok.clone().with_islip_iterations(9).validate().is_err());
        assert!(ok.clone().with_buffers(QueueDepths::PerQueue(vec![4; 63]), None).validate().is_err());
        assert_eq!(ok.clone().with_islip_iterations(3).stages.scheduler, 1);
        let islip = ArchConfig::new(8, 256, TableKind::FullLookup, VoqKind::Nxn, SchedulerKind::Islip);
        assert_eq!(islip.with_islip_iterations(3).stages.scheduler, 6);
    }
}
