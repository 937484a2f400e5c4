//! Derived metrics: trace-IPC, instruction throughput, weighted speedup,
//! per-kilo-instruction rates, energy and ratios against a baseline run.
//!
//! "trace-IPC" is instructions over cycles of the additive latency model. It
//! is a coarse relative indicator and not comparable to an out-of-order core's
//! IPC.

use serde::{Deserialize, Serialize};

use crate::energy::{dynamic_energy, static_energy, EnergyParams};
use crate::error::MetricsError;
use crate::stats::SimStats;

/// Ratios of a run against a baseline run of the same trace. `None` where
/// the baseline value is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalized {
    pub writes: Option<f64>,
    pub hits: Option<f64>,
    pub dynamic_energy: Option<f64>,
    pub total_energy: Option<f64>,
    pub it: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_core_ipc: Vec<f64>,
    /// Instruction throughput: sum of per-core trace-IPC.
    pub it: f64,
    /// Weighted speedup, when alone-run IPCs were supplied.
    pub ws: Option<f64>,
    pub instructions: u64,
    pub elapsed_cycles: u64,
    pub sllc_hits: u64,
    pub sllc_misses: u64,
    pub sllc_writes: u64,
    pub bypasses: u64,
    pub mm_reads: u64,
    pub mm_writes: u64,
    pub hits_pki: f64,
    pub wpki: f64,
    pub misses_pki: f64,
    pub dynamic_energy_j: f64,
    pub static_energy_j: f64,
    pub total_energy_j: f64,
    pub stall_cycles: u64,
    pub normalized: Option<Normalized>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0).then(|| num / den)
}

/// Per-core trace-IPC; cores that never ran report 0.
pub fn per_core_ipc(stats: &SimStats) -> Vec<f64> {
    stats
        .cores
        .iter()
        .map(|c| {
            if c.cycles == 0 {
                0.0
            } else {
                c.instructions as f64 / c.cycles as f64
            }
        })
        .collect()
}

pub fn derive_metrics(
    stats: &SimStats,
    energy: &EnergyParams,
    baseline: Option<&SimStats>,
    alone_ipc: Option<&[f64]>,
) -> Result<MetricsReport, MetricsError> {
    if stats.elapsed_cycles == 0 {
        return Err(MetricsError::ZeroCycles);
    }
    let total = stats.total();
    if total.instructions == 0 {
        return Err(MetricsError::ZeroInstructions);
    }
    let ipc = per_core_ipc(stats);
    let it: f64 = ipc.iter().sum();
    let ws = match alone_ipc {
        None => None,
        Some(alone) if alone.len() != ipc.len() => {
            return Err(MetricsError::AloneIpcCount {
                expected: ipc.len(),
                got: alone.len(),
            })
        }
        Some(alone) => Some(
            ipc.iter()
                .zip(alone)
                .filter(|(_, &a)| a > 0.0)
                .map(|(s, a)| s / a)
                .sum(),
        ),
    };
    let kilo = total.instructions as f64 / 1000.0;
    let e_dyn = dynamic_energy(&total, energy);
    let e_stat = static_energy(stats.elapsed_cycles, energy);
    let normalized = baseline.map(|b| {
        let bt = b.total();
        let b_dyn = dynamic_energy(&bt, energy);
        let b_total = b_dyn + static_energy(b.elapsed_cycles, energy);
        let b_it: f64 = per_core_ipc(b).iter().sum();
        Normalized {
            writes: ratio(total.sllc_writes as f64, bt.sllc_writes as f64),
            hits: ratio(total.sllc_hits as f64, bt.sllc_hits as f64),
            dynamic_energy: ratio(e_dyn, b_dyn),
            total_energy: ratio(e_dyn + e_stat, b_total),
            it: ratio(it, b_it),
        }
    });
    Ok(MetricsReport {
        per_core_ipc: ipc,
        it,
        ws,
        instructions: total.instructions,
        elapsed_cycles: stats.elapsed_cycles,
        sllc_hits: total.sllc_hits,
        sllc_misses: total.sllc_misses,
        sllc_writes: total.sllc_writes,
        bypasses: total.bypasses,
        mm_reads: total.mm_reads,
        mm_writes: total.mm_writes,
        hits_pki: total.sllc_hits as f64 / kilo,
        wpki: total.sllc_writes as f64 / kilo,
        misses_pki: total.sllc_misses as f64 / kilo,
        dynamic_energy_j: e_dyn,
        static_energy_j: e_stat,
        total_energy_j: e_dyn + e_stat,
        stall_cycles: total.sllc_bank_stall_cycles,
        normalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::CoreStats;

    fn run(cores: &[(u64, u64)], writes: u64) -> SimStats {
        let mut s = SimStats::new(cores.len());
        for (c, &(instr, cyc)) in s.cores.iter_mut().zip(cores) {
            c.instructions = instr;
            c.cycles = cyc;
        }
        s.cores[0].sllc_writes = writes;
        s.elapsed_cycles = cores.iter().map(|c| c.1).max().unwrap_or(0);
        s
    }

    #[test]
    fn ipc_and_it() {
        let m = derive_metrics(
            &run(&[(1000, 500)], 0),
            &EnergyParams::stt_ram(1),
            None,
            None,
        )
        .unwrap();
        assert_eq!(m.per_core_ipc, vec![2.0]);
        assert_eq!(m.it, 2.0);
    }

    #[test]
    fn weighted_speedup_of_identical_runs_is_core_count() {
        let s = run(&[(1000, 500), (300, 900), (10, 20)], 0);
        let alone = per_core_ipc(&s);
        let m = derive_metrics(&s, &EnergyParams::stt_ram(3), None, Some(&alone)).unwrap();
        assert!((m.ws.unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            derive_metrics(&s, &EnergyParams::stt_ram(3), None, Some(&alone[..2])),
            Err(MetricsError::AloneIpcCount {
                expected: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn normalized_writes() {
        let base = run(&[(1000, 500)], 100);
        let rd = run(&[(1000, 500)], 80);
        let m = derive_metrics(&rd, &EnergyParams::stt_ram(1), Some(&base), None).unwrap();
        let n = m.normalized.unwrap();
        assert!((n.writes.unwrap() - 0.80).abs() < 1e-12);
        assert_eq!(n.hits, None);
        assert!((m.wpki - 80.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cycles_is_an_error() {
        let s = SimStats::new(1);
        assert_eq!(
            derive_metrics(&s, &EnergyParams::stt_ram(1), None, None),
            Err(MetricsError::ZeroCycles)
        );
        let mut s = SimStats::new(1);
        s.elapsed_cycles = 5;
        s.cores[0] = CoreStats {
            cycles: 5,
            ..CoreStats::default()
        };
        assert_eq!(
            derive_metrics(&s, &EnergyParams::stt_ram(1), None, None),
            Err(MetricsError::ZeroInstructions)
        );
    }
}
