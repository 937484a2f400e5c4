//! Simulation counters.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Counters for one core. SLLC counters are attributed to the core whose
/// request or eviction caused them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreStats {
    pub instructions: u64,
    pub accesses: u64,
    pub write_accesses: u64,
    pub l1_hits: u64,
    pub l2_hits: u64,
    /// Demand hits in the SLLC (H).
    pub sllc_hits: u64,
    /// Demand misses in the SLLC (M).
    pub sllc_misses: u64,
    pub peer_supplies: u64,
    /// Writes into the SLLC array, insertions plus updates (W).
    pub sllc_writes: u64,
    pub sllc_inserts: u64,
    pub sllc_updates: u64,
    /// Private evictions that skipped the SLLC (clean discards and dirty
    /// write-backs to memory alike).
    pub bypasses: u64,
    /// Clean private evictions dropped because the SLLC already had the block.
    pub discards: u64,
    pub private_evictions: u64,
    pub mm_reads: u64,
    pub mm_writes: u64,
    pub cycles: u64,
    pub sllc_bank_stall_cycles: u64,
}

impl CoreStats {
    pub fn sllc_lookups(&self) -> u64 {
        self.sllc_hits + self.sllc_misses
    }
}

impl AddAssign for CoreStats {
    fn add_assign(&mut self, o: Self) {
        self.instructions += o.instructions;
        self.accesses += o.accesses;
        self.write_accesses += o.write_accesses;
        self.l1_hits += o.l1_hits;
        self.l2_hits += o.l2_hits;
        self.sllc_hits += o.sllc_hits;
        self.sllc_misses += o.sllc_misses;
        self.peer_supplies += o.peer_supplies;
        self.sllc_writes += o.sllc_writes;
        self.sllc_inserts += o.sllc_inserts;
        self.sllc_updates += o.sllc_updates;
        self.bypasses += o.bypasses;
        self.discards += o.discards;
        self.private_evictions += o.private_evictions;
        self.mm_reads += o.mm_reads;
        self.mm_writes += o.mm_writes;
        self.cycles += o.cycles;
        self.sllc_bank_stall_cycles += o.sllc_bank_stall_cycles;
    }
}

impl Add for CoreStats {
    type Output = CoreStats;

    fn add(mut self, o: Self) -> CoreStats {
        self += o;
        self
    }
}

/// SLLC lines bucketed by the demand hits they received while resident.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseBreakdown {
    pub no_reuse: u64,
    pub one_reuse: u64,
    pub multiple_reuse: u64,
}

impl ReuseBreakdown {
    pub fn record(&mut self, hits: u32) {
        match hits {
            0 => self.no_reuse += 1,
            1 => self.one_reuse += 1,
            _ => self.multiple_reuse += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.no_reuse + self.one_reuse + self.multiple_reuse
    }

    /// Fraction of lines that were never hit; `None` when empty.
    pub fn no_reuse_fraction(&self) -> Option<f64> {
        let t = self.total();
        (t > 0).then(|| self.no_reuse as f64 / t as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub cores: Vec<CoreStats>,
    /// Lines evicted from the SLLC, by reuse count.
    pub sllc_evicted_reuse: ReuseBreakdown,
    /// Bank-busy cycles spent on SLLC writes.
    pub sllc_write_occupancy_cycles: u64,
    /// Largest core clock: the run's wall time in cycles.
    pub elapsed_cycles: u64,
}

impl SimStats {
    pub fn new(cores: usize) -> Self {
        SimStats {
            cores: vec![CoreStats::default(); cores],
            ..SimStats::default()
        }
    }

    pub fn total(&self) -> CoreStats {
        self.cores
            .iter()
            .copied()
            .fold(CoreStats::default(), Add::add)
    }
}
