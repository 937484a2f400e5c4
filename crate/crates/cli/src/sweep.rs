//! Sweep planning and execution: policy x RD entries x tag width x trace,
//! run on a pool of worker threads, reported in declared order.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rdsim::hierarchy::HierarchySnapshot;
use rdsim::metrics::{derive_metrics, per_core_ipc};
use rdsim::rd::storage_bits;
use rdsim::trace::{core_count, validate_trace};
use rdsim::workload::{build_mix_trace, MixSpec, Pool};
use rdsim::{
    AccessEvent, Hierarchy, HierarchyConfig, MetricsReport, Policy, ReuseBreakdown, SimStats,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{load_trace, read_json};

/// Environment variable selecting the number of worker threads.
pub const WORKERS_ENV: &str = "RDSIM_WORKERS";

pub const CSV_HEADER: [&str; 11] = [
    "policy",
    "trace",
    "writes",
    "writes_norm",
    "hits_pki",
    "it",
    "ws",
    "e_dyn_J",
    "e_stat_J",
    "e_total_norm",
    "stalls",
];

#[derive(Debug, Clone)]
pub struct NamedTrace {
    pub name: String,
    pub events: Vec<AccessEvent>,
}

/// One planned simulation.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub label: String,
    pub policy: Policy,
    pub trace: usize,
    pub rd_entries: Option<u64>,
    pub c_bits: Option<u32>,
    pub hierarchy: HierarchyConfig,
}

/// Everything written for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub policy: Policy,
    pub trace: String,
    pub rd_entries: Option<u64>,
    pub c_bits: Option<u32>,
    pub rd_storage_bits: Option<u64>,
    pub rd_storage_kb: Option<f64>,
    pub hierarchy: HierarchyConfig,
    pub stats: SimStats,
    pub metrics: MetricsReport,
    pub alone_ipc: Option<Vec<f64>>,
    pub sllc_resident_reuse: ReuseBreakdown,
    pub dasca_counter_histogram: Option<[u64; 4]>,
    pub snapshot: Option<HierarchySnapshot>,
}

impl RunRecord {
    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let m = &self.metrics;
        let norm = m.normalized.as_ref();
        vec![
            self.label.clone(),
            self.trace.clone(),
            m.sllc_writes.to_string(),
            opt(norm.and_then(|n| n.writes)),
            m.hits_pki.to_string(),
            m.it.to_string(),
            opt(m.ws),
            m.dynamic_energy_j.to_string(),
            m.static_energy_j.to_string(),
            opt(norm.and_then(|n| n.total_energy)),
            m.stall_cycles.to_string(),
        ]
    }
}

pub fn load_traces(cfg: &RunConfig) -> Result<Vec<NamedTrace>> {
    let mut out = Vec::new();
    for path in &cfg.traces {
        out.push(NamedTrace {
            name: trace_name(path),
            events: load_trace(path)?,
        });
    }
    if let (Some(mixes), Some(pool)) = (&cfg.mixes, &cfg.pool) {
        let manifest: Vec<MixSpec> = read_json(mixes)?;
        let pool_doc: Pool = read_json(pool)?;
        let base = pool.parent().unwrap_or(Path::new(""));
        for mix in manifest {
            let mut members = Vec::with_capacity(mix.members.len());
            for m in &mix.members {
                let entry = pool_doc.get(m).ok_or_else(|| {
                    CliError::usage(format!("mix {}: {m} is not in the pool", mix.name))
                })?;
                members.push(load_trace(&base.join(&entry.trace))?);
            }
            out.push(NamedTrace {
                name: mix.name,
                events: build_mix_trace(&members),
            });
        }
    }
    Ok(out)
}

pub fn trace_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Expands the sweep in declared order: traces, then policies, then RD
/// entry counts, then tag widths. Policies other than `rd` run once per trace.
pub fn plan(cfg: &RunConfig, traces: &[NamedTrace]) -> Result<Vec<RunSpec>> {
    let rd_axes = cfg.rd_entries.len() > 1 || cfg.c_bits.len() > 1;
    let mut specs = Vec::new();
    for (ti, t) in traces.iter().enumerate() {
        let cores = core_count(&t.events).max(1);
        for &policy in &cfg.policies {
            if policy == Policy::ReuseDetector {
                for &entries in &cfg.rd_entries {
                    for &c in &cfg.c_bits {
                        let hierarchy = cfg.hierarchy_for(cores, policy, entries, c)?;
                        let label = if rd_axes {
                            format!("rd(entries={entries},c={c})")
                        } else {
                            "rd".to_string()
                        };
                        specs.push(RunSpec {
                            label,
                            policy,
                            trace: ti,
                            rd_entries: Some(entries),
                            c_bits: Some(c),
                            hierarchy,
                        });
                    }
                }
            } else {
                let mut hierarchy =
                    cfg.hierarchy_for(cores, policy, cfg.rd_entries[0], cfg.c_bits[0])?;
                hierarchy.rd = None;
                specs.push(RunSpec {
                    label: policy.name().to_string(),
                    policy,
                    trace: ti,
                    rd_entries: None,
                    c_bits: None,
                    hierarchy,
                });
            }
        }
        let spec_cores = specs.last().map_or(cores, |s| s.hierarchy.cores);
        validate_trace(&t.events, spec_cores)
            .map_err(|e| CliError::usage(format!("trace {}: {e}", t.name)))?;
    }
    Ok(specs)
}

struct RawRun {
    stats: SimStats,
    alone_ipc: Option<Vec<f64>>,
    resident: ReuseBreakdown,
    dasca: Option<[u64; 4]>,
    snapshot: Option<HierarchySnapshot>,
}

fn execute(spec: &RunSpec, trace: &[AccessEvent], ws: bool, snapshots: bool) -> Result<RawRun> {
    let mut h = Hierarchy::new(spec.hierarchy.clone())?;
    h.run(trace)?;
    let alone_ipc = if ws {
        let mut alone = Vec::with_capacity(spec.hierarchy.cores);
        for core in 0..spec.hierarchy.cores {
            let sub: Vec<AccessEvent> = trace
                .iter()
                .filter(|e| e.core as usize == core)
                .copied()
                .collect();
            let stats = rdsim::simulate(&spec.hierarchy, &sub)?;
            alone.push(per_core_ipc(&stats)[core]);
        }
        Some(alone)
    } else {
        None
    };
    Ok(RawRun {
        alone_ipc,
        resident: h.resident_reuse(),
        dasca: h.dasca_histogram(),
        snapshot: snapshots.then(|| h.snapshot()),
        stats: h.into_stats(),
    })
}

pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every spec and derives its metrics. Fails on the first error in
/// declared order, after all workers have stopped.
pub fn run_all(
    cfg: &RunConfig,
    traces: &[NamedTrace],
    specs: &[RunSpec],
    workers: usize,
) -> Result<Vec<RunRecord>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RawRun>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, specs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = specs.get(i) else { break };
                let r = execute(
                    spec,
                    &traces[spec.trace].events,
                    cfg.weighted_speedup,
                    cfg.snapshots,
                );
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    let raw: Vec<RawRun> = slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every spec ran"))
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(specs.len());
    for (spec, run) in specs.iter().zip(&raw) {
        let baseline = specs
            .iter()
            .zip(&raw)
            .find(|(s, _)| s.trace == spec.trace && s.policy == Policy::Baseline)
            .map(|(_, r)| &r.stats);
        let energy = cfg.energy_for(&spec.hierarchy)?;
        let metrics = derive_metrics(&run.stats, &energy, baseline, run.alone_ipc.as_deref())?;
        let storage = spec.hierarchy.rd.as_ref().map(storage_bits);
        records.push(RunRecord {
            label: spec.label.clone(),
            policy: spec.policy,
            trace: traces[spec.trace].name.clone(),
            rd_entries: spec.rd_entries,
            c_bits: spec.c_bits,
            rd_storage_bits: storage,
            rd_storage_kb: storage.map(|b| b as f64 / 8192.0),
            hierarchy: spec.hierarchy.clone(),
            stats: run.stats.clone(),
            metrics,
            alone_ipc: run.alone_ipc.clone(),
            sllc_resident_reuse: run.resident,
            dasca_counter_histogram: run.dasca,
            snapshot: run.snapshot.clone(),
        });
    }
    Ok(records)
}

pub fn record_file_name(index: usize, r: &RunRecord) -> PathBuf {
    let clean = |s: &str| -> String {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    };
    PathBuf::from(format!(
        "{index:03}_{}_{}.json",
        clean(&r.label),
        clean(&r.trace)
    ))
}

pub fn write_csv<W: std::io::Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fail = |e: csv::Error| CliError::failure(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(fail)?;
    for r in records {
        w.write_record(r.csv_row()).map_err(fail)?;
    }
    w.flush()
        .map_err(|e| CliError::failure(format!("writing CSV: {e}")))?;
    Ok(())
}

/// Human-readable storage figure, e.g. `114688 bits (14 KB)`.
pub fn storage_line(bits: u64) -> String {
    let kb = bits as f64 / 8192.0;
    if bits.is_multiple_of(8192) {
        format!("{bits} bits ({} KB)", bits / 8192)
    } else {
        format!("{bits} bits ({kb:.2} KB)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rdsim::trace::{gen_synthetic, GeneratorSpec};

    fn traces() -> Vec<NamedTrace> {
        let t = |spec: &str| gen_synthetic(&spec.parse::<GeneratorSpec>().unwrap(), 1).unwrap();
        vec![
            NamedTrace {
                name: "loop".into(),
                events: t("loop:ws=200,passes=4,w=0.3"),
            },
            NamedTrace {
                name: "stream".into(),
                events: t("stream:n=3000"),
            },
        ]
    }

    fn cfg() -> RunConfig {
        RunConfig {
            preset: crate::config::Preset::Small,
            policies: vec![Policy::Baseline, Policy::ReuseDetector, Policy::DascaLite],
            rd_entries: vec![256, 512],
            ..RunConfig::default()
        }
    }

    #[test]
    fn plan_order_and_labels() {
        let specs = plan(&cfg(), &traces()).unwrap();
        let labels: Vec<(usize, &str)> =
            specs.iter().map(|s| (s.trace, s.label.as_str())).collect();
        assert_eq!(
            labels,
            [
                (0, "baseline"),
                (0, "rd(entries=256,c=10)"),
                (0, "rd(entries=512,c=10)"),
                (0, "dasca"),
                (1, "baseline"),
                (1, "rd(entries=256,c=10)"),
                (1, "rd(entries=512,c=10)"),
                (1, "dasca"),
            ]
        );
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let c = cfg();
        let t = traces();
        let specs = plan(&c, &t).unwrap();
        let one = run_all(&c, &t, &specs, 1).unwrap();
        let four = run_all(&c, &t, &specs, 4).unwrap();
        assert_eq!(one, four);
        let base = &one[0].metrics;
        assert_eq!(base.normalized.unwrap().writes, Some(1.0));
    }

    #[test]
    fn storage_lines() {
        assert_eq!(storage_line(114_688), "114688 bits (14 KB)");
        assert_eq!(storage_line(100), "100 bits (0.01 KB)");
    }
}
