//! SLLC energy model and the additive timing model with per-bank occupancy.
//!
//! Dynamic energy is `H * HE + W * WE + M * ME` over SLLC demand hits, array
//! writes and demand misses. Static energy is the per-bank leakage times the
//! number of banks (one 1 MB bank per core) times the elapsed time.
//!
//! No miss energy is published for the reference STT-RAM part, so `ME`
//! defaults to the read energy: a miss still performs a tag and data lookup.

use serde::{Deserialize, Serialize};

use crate::cache::CacheConfig;
use crate::error::ConfigError;
use crate::stats::CoreStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub hit_energy_nj: f64,
    pub write_energy_nj: f64,
    pub miss_energy_nj: f64,
    pub leakage_mw_per_bank: f64,
    pub clock_ghz: f64,
    pub banks: u32,
}

impl EnergyParams {
    /// 22 nm STT-RAM 1 MB bank: 0.32 nJ read, 1.31 nJ write, 3.09 mW leakage.
    pub fn stt_ram(banks: u32) -> Self {
        EnergyParams {
            hit_energy_nj: 0.32,
            write_energy_nj: 1.31,
            miss_energy_nj: 0.32,
            leakage_mw_per_bank: 3.09,
            clock_ghz: 2.0,
            banks,
        }
    }

    /// 22 nm SRAM 1 MB bank: 0.56 nJ read and write, 190.58 mW leakage.
    pub fn sram(banks: u32) -> Self {
        EnergyParams {
            hit_energy_nj: 0.56,
            write_energy_nj: 0.56,
            miss_energy_nj: 0.56,
            leakage_mw_per_bank: 190.58,
            clock_ghz: 2.0,
            banks,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let vals = [
            self.hit_energy_nj,
            self.write_energy_nj,
            self.miss_energy_nj,
            self.leakage_mw_per_bank,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ConfigError::Invalid(
                "energy parameters must be finite and >= 0".into(),
            ));
        }
        if !(self.clock_ghz.is_finite() && self.clock_ghz > 0.0) {
            return Err(ConfigError::Invalid("clock must be > 0 GHz".into()));
        }
        if self.banks == 0 {
            return Err(ConfigError::Invalid("need at least one SLLC bank".into()));
        }
        Ok(())
    }
}

/// Dynamic SLLC energy in joules.
pub fn dynamic_energy(stats: &CoreStats, p: &EnergyParams) -> f64 {
    let nj = stats.sllc_hits as f64 * p.hit_energy_nj
        + stats.sllc_writes as f64 * p.write_energy_nj
        + stats.sllc_misses as f64 * p.miss_energy_nj;
    nj * 1e-9
}

/// Static SLLC energy in joules over `elapsed_cycles` at `p.clock_ghz`.
pub fn static_energy(elapsed_cycles: u64, p: &EnergyParams) -> f64 {
    let seconds = elapsed_cycles as f64 / (p.clock_ghz * 1e9);
    p.leakage_mw_per_bank * 1e-3 * f64::from(p.banks) * seconds
}

/// Cycle costs used by the additive timing model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingParams {
    pub l1_cycles: u32,
    pub l2_cycles: u32,
    pub sllc_read_cycles: u32,
    pub sllc_write_cycles: u32,
    pub network_cycles: u32,
    pub mm_cycles: u32,
    pub bank_contention: bool,
}

impl TimingParams {
    pub fn from_caches(
        l1: &CacheConfig,
        l2: Option<&CacheConfig>,
        sllc: &CacheConfig,
        network_cycles: u32,
        mm_cycles: u32,
        bank_contention: bool,
    ) -> Self {
        TimingParams {
            l1_cycles: l1.read_latency_cycles,
            l2_cycles: l2.map_or(0, |c| c.read_latency_cycles),
            sllc_read_cycles: sllc.read_latency_cycles,
            sllc_write_cycles: sllc.write_latency_cycles,
            network_cycles,
            mm_cycles,
            bank_contention,
        }
    }
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            l1_cycles: 2,
            l2_cycles: 5,
            sllc_read_cycles: 6,
            sllc_write_cycles: 17,
            network_cycles: 3,
            mm_cycles: 200,
            bank_contention: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankOp {
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BankAccess {
    pub latency_cycles: u64,
    pub stall_cycles: u64,
}

/// Busy-until timestamps for the SLLC banks.
#[derive(Debug, Clone)]
pub struct BankTimer {
    busy_until: Vec<u64>,
    read_cycles: u64,
    write_cycles: u64,
    contention: bool,
}

impl BankTimer {
    pub fn new(banks: usize, timing: &TimingParams) -> Self {
        BankTimer {
            busy_until: vec![0; banks.max(1)],
            read_cycles: u64::from(timing.sllc_read_cycles),
            write_cycles: u64::from(timing.sllc_write_cycles),
            contention: timing.bank_contention,
        }
    }

    pub fn banks(&self) -> usize {
        self.busy_until.len()
    }

    /// An access arriving at `now` waits for the bank to free up, then holds
    /// it for the operation's latency.
    pub fn account_access(&mut self, op: BankOp, bank: usize, now: u64) -> BankAccess {
        let latency = match op {
            BankOp::Read => self.read_cycles,
            BankOp::Write => self.write_cycles,
        };
        if !self.contention {
            return BankAccess {
                latency_cycles: latency,
                stall_cycles: 0,
            };
        }
        let busy = &mut self.busy_until[bank];
        let start = now.max(*busy);
        *busy = start + latency;
        BankAccess {
            latency_cycles: latency,
            stall_cycles: start - now,
        }
    }
}
