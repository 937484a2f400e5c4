//! Command-line driver for the `rdsim` simulator: sweeps, the reference
//! scenario, trace generation, workload classification, mix building and
//! reporting.

pub mod config;
pub mod error;
pub mod io;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rdsim::golden::{golden_config, replay};
use rdsim::trace::{gen_synthetic, GeneratorSpec};
use rdsim::workload::{build_mixes, classify, measure_wpki, MixPattern, MixSpec, Pool, PoolEntry};
use rdsim::Policy;

use crate::config::{Preset, RunConfig, Technology};
use crate::error::{CliError, Result};
use crate::io::{load_trace, read_json, save_trace, write_json};
use crate::sweep::{
    load_traces, plan, record_file_name, run_all, storage_line, worker_count, write_csv, RunRecord,
};

#[derive(Debug, Parser)]
#[command(
    name = "rdsim",
    version,
    about = "Cache hierarchy simulator with reuse-based SLLC bypassing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a sweep of policies and RD configurations over traces.
    Simulate(SimulateArgs),
    /// Replay the reference scenario and compare every intermediate state.
    Golden(GoldenArgs),
    /// Write a synthetic trace.
    GenTrace(GenTraceArgs),
    /// Classify traces by SLLC writes per kilo-instruction.
    Wpki(WpkiArgs),
    /// Build multiprogrammed mixes from a classified pool.
    Mix(MixArgs),
    /// Rebuild the results table from a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML run configuration; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trace file; repeatable. `.bin` selects the binary format.
    #[arg(long = "trace", value_name = "PATH")]
    pub traces: Vec<PathBuf>,
    /// Policy to run; repeatable (default: baseline and rd).
    #[arg(long = "policy", value_name = "baseline|rd|dasca")]
    pub policies: Vec<Policy>,
    /// RD entry count; repeatable to sweep (default 8192).
    #[arg(long = "rd-entries", value_name = "N")]
    pub rd_entries: Vec<u64>,
    /// Compressed tag width; repeatable to sweep (default 10).
    #[arg(long = "c-bits", value_name = "BITS")]
    pub c_bits: Vec<u32>,
    /// small, two-level or three-level (default).
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Core count; taken from each trace when unset.
    #[arg(long)]
    pub cores: Option<usize>,
    /// Mix manifest from `rdsim mix`.
    #[arg(long, requires = "pool")]
    pub mixes: Option<PathBuf>,
    /// Pool file from `rdsim wpki`.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// stt-ram (default) or sram SLLC energy figures.
    #[arg(long)]
    pub technology: Option<Technology>,
    /// Main-memory latency in cycles.
    #[arg(long)]
    pub mm_cycles: Option<u32>,
    /// Ignore SLLC bank conflicts.
    #[arg(long)]
    pub no_bank_contention: bool,
    /// Dead-prediction counter threshold (4 disables bypassing).
    #[arg(long)]
    pub dasca_threshold: Option<u8>,
    /// Skip the alone runs needed for weighted speedup.
    #[arg(long)]
    pub no_ws: bool,
    /// Store the final hierarchy state in each run's JSON.
    #[arg(long)]
    pub snapshots: bool,
    /// Output directory (default `rdsim-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    fn apply(self, cfg: &mut RunConfig) {
        if !self.traces.is_empty() {
            cfg.traces = self.traces;
        }
        if !self.policies.is_empty() {
            cfg.policies = self.policies;
        }
        if !self.rd_entries.is_empty() {
            cfg.rd_entries = self.rd_entries;
        }
        if !self.c_bits.is_empty() {
            cfg.c_bits = self.c_bits;
        }
        if let Some(p) = self.preset {
            cfg.preset = p;
        }
        if self.cores.is_some() {
            cfg.cores = self.cores;
        }
        if self.mixes.is_some() {
            cfg.mixes = self.mixes;
        }
        if self.pool.is_some() {
            cfg.pool = self.pool;
        }
        if let Some(t) = self.technology {
            cfg.technology = t;
        }
        if self.mm_cycles.is_some() {
            cfg.mm_cycles = self.mm_cycles;
        }
        if self.no_bank_contention {
            cfg.bank_contention = Some(false);
        }
        if self.dasca_threshold.is_some() {
            cfg.dasca_threshold = self.dasca_threshold;
        }
        if self.no_ws {
            cfg.weighted_speedup = false;
        }
        if self.snapshots {
            cfg.snapshots = true;
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    ReuseOnMemoryFill,
    DropRdEntryOnHit,
}

#[derive(Debug, Args)]
pub struct GoldenArgs {
    /// Print the observed states as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_enum, hide = true)]
    pub inject: Option<Fault>,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    /// Generator, e.g. `stream:n=4`, `loop:ws=64,passes=3`, `mixed:p=0.3,n=20000,d=128`.
    #[arg(long)]
    pub spec: GeneratorSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Binary format (also implied by a `.bin` extension).
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct WpkiArgs {
    #[arg(long = "trace", value_name = "PATH", required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long, default_value = "three-level")]
    pub preset: Preset,
    /// Pool file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub pool: PathBuf,
    /// Pattern such as `H4`, `HL(2,2)` or `HML(1,1,2)`; repeatable.
    #[arg(long = "pattern", required = true)]
    pub patterns: Vec<MixPattern>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::Golden(a) => golden(a),
        Command::GenTrace(a) => gen_trace(a),
        Command::Wpki(a) => wpki(a),
        Command::Mix(a) => mix(a),
        Command::Report(a) => report(a),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    args.apply(&mut cfg);
    cfg.validate()?;
    let traces = load_traces(&cfg)?;
    let specs = plan(&cfg, &traces)?;

    let runs_dir = cfg.out.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| CliError::io(&runs_dir, e))?;
    let effective = cfg.out.join("effective_config.toml");
    std::fs::write(&effective, cfg.to_toml()?).map_err(|e| CliError::io(&effective, e))?;

    let mut shown = Vec::new();
    for s in &specs {
        if let (Some(rd), Policy::ReuseDetector) = (&s.hierarchy.rd, s.policy) {
            let bits = rdsim::rd::storage_bits(rd);
            if !shown.contains(&bits) {
                println!("rd storage: {}", storage_line(bits));
                shown.push(bits);
            }
        }
    }

    let records = run_all(&cfg, &traces, &specs, worker_count())?;
    for (i, r) in records.iter().enumerate() {
        write_json(&runs_dir.join(record_file_name(i, r)), r)?;
    }
    let csv_path = cfg.out.join("results.csv");
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_csv(file, &records)?;
    print_table(&records);
    println!("wrote {} runs to {}", records.len(), cfg.out.display());
    Ok(())
}

fn print_table(records: &[RunRecord]) {
    println!(
        "{:<24} {:<20} {:>10} {:>8} {:>9} {:>8}",
        "policy", "trace", "writes", "w_norm", "hits_pki", "it"
    );
    for r in records {
        let m = &r.metrics;
        let wn = m
            .normalized
            .and_then(|n| n.writes)
            .map_or_else(|| "-".to_string(), |w| format!("{w:.3}"));
        println!(
            "{:<24} {:<20} {:>10} {:>8} {:>9.3} {:>8.4}",
            r.label, r.trace, m.sllc_writes, wn, m.hits_pki, m.it
        );
    }
}

fn golden(args: GoldenArgs) -> Result<()> {
    let mut cfg = golden_config();
    match args.inject {
        Some(Fault::ReuseOnMemoryFill) => cfg.faults.reuse_on_memory_fill = true,
        Some(Fault::DropRdEntryOnHit) => cfg.faults.drop_rd_entry_on_hit = true,
        None => {}
    }
    let report = replay(&cfg)?;
    if args.json {
        let text =
            serde_json::to_string_pretty(&report).map_err(|e| CliError::failure(e.to_string()))?;
        println!("{text}");
    } else {
        for (i, p) in report.panels.iter().enumerate() {
            println!("access {}: {p}", i + 1);
        }
    }
    // keep stdout parseable in JSON mode
    let say = |line: String| {
        if args.json {
            eprintln!("{line}");
        } else {
            println!("{line}");
        }
    };
    match &report.first_mismatch {
        None => {
            say("golden: PASS".into());
            Ok(())
        }
        Some(m) => {
            say(format!("golden: FAIL at access {}", m.access));
            say(format!("  expected: {}", m.expected));
            say(format!("  actual:   {}", m.actual));
            Err(CliError::failure(format!(
                "golden scenario diverged at access {}",
                m.access
            )))
        }
    }
}

fn gen_trace(args: GenTraceArgs) -> Result<()> {
    let events = gen_synthetic(&args.spec, args.seed)?;
    let binary = args.binary || io::is_binary(&args.out);
    save_trace(&args.out, &events, binary)?;
    println!("wrote {} events to {}", events.len(), args.out.display());
    Ok(())
}

fn wpki(args: WpkiArgs) -> Result<()> {
    let cfg = args.preset.build(1)?;
    let mut workloads = Vec::with_capacity(args.traces.len());
    for path in &args.traces {
        let events = load_trace(path)?;
        let w = measure_wpki(&cfg, &events)?;
        let class = classify(w);
        println!("{:<24} {:>10.3} {}", sweep::trace_name(path), w, class);
        workloads.push(PoolEntry {
            name: sweep::trace_name(path),
            trace: path.display().to_string(),
            wpki: w,
            class,
        });
    }
    write_json(&args.out, &Pool { workloads })
}

fn mix(args: MixArgs) -> Result<()> {
    let pool: Pool = read_json(&args.pool)?;
    let mut all: Vec<MixSpec> = Vec::new();
    for pattern in &args.patterns {
        let prefix = format!("mix.{}", pattern.letters());
        let offset = all
            .iter()
            .filter(|m| {
                m.name
                    .strip_prefix(&prefix)
                    .is_some_and(|rest| rest.bytes().all(|b| b.is_ascii_digit()))
            })
            .count();
        for (i, mut m) in build_mixes(&pool, pattern, args.count, args.seed)?
            .into_iter()
            .enumerate()
        {
            m.name = format!("mix.{}{}", pattern.letters(), offset + i);
            println!("{:<12} {}", m.name, m.members.join(" "));
            all.push(m);
        }
    }
    write_json(&args.out, &all)
}

fn report(args: ReportArgs) -> Result<()> {
    let runs = args.run_dir.join("runs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&runs)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", runs.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let records: Vec<RunRecord> = files.iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    match args.format {
        ReportFormat::Csv => write_csv(std::io::stdout().lock(), &records),
        ReportFormat::Text => {
            print_table(&records);
            Ok(())
        }
    }
}
