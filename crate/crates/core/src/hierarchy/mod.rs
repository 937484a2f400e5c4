//! The simulated hierarchy: private L1 (and optional L2) per core, a per-core
//! reuse detector in front of the shared non-inclusive SLLC, a presence
//! directory and main memory.
//!
//! Private caches behave the same under every policy; the policy only decides
//! what happens to blocks leaving the last private level.

mod config;

pub use config::{FaultInjection, HierarchyConfig, Policy};

use serde::{Deserialize, Serialize};

use crate::addr::BlockAddr;
use crate::cache::{CacheLine, PrivateCache, SetSnapshot, SharedCache};
use crate::dasca::DascaPredictor;
use crate::directory::Directory;
use crate::energy::{BankOp, BankTimer, TimingParams};
use crate::error::SimError;
use crate::rd::{RdEntrySnapshot, ReuseDetector};
use crate::stats::{ReuseBreakdown, SimStats};
use crate::trace::{AccessEvent, AccessKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ServedFrom {
    L1,
    L2,
    Sllc,
    Peer,
    Memory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessOutcome {
    pub served_from: ServedFrom,
    pub supplier: Option<usize>,
    pub latency_cycles: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvictAction {
    InsertSllc,
    UpdateSllc,
    BypassToMm,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictOutcome {
    pub action: EvictAction,
    /// The policy kept the block away from the SLLC.
    pub bypassed: bool,
    /// The RD was probed and held the block.
    pub rd_hit: bool,
    /// The block was recorded in the RD.
    pub rd_filled: bool,
}

/// One block leaving a core's last private level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvictionRecord {
    /// Index of the trace event during which the eviction happened.
    pub event: u64,
    pub core: usize,
    pub block: BlockAddr,
    pub reuse: bool,
    pub dirty: bool,
    pub pc: u64,
    pub outcome: EvictOutcome,
}

/// A write of a block to main memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryWrite {
    pub event: u64,
    pub block: BlockAddr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineLog {
    pub evictions: Vec<EvictionRecord>,
    pub memory_writes: Vec<MemoryWrite>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSnapshot {
    pub l1: Vec<SetSnapshot>,
    pub l2: Option<Vec<SetSnapshot>>,
    pub rd: Option<Vec<RdEntrySnapshot>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectorySnapshot {
    pub block: BlockAddr,
    pub sharers: u64,
    pub dirty: u64,
}

/// Full architectural state after some number of events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySnapshot {
    pub events: u64,
    pub cores: Vec<CoreSnapshot>,
    pub sllc: Vec<SetSnapshot>,
    pub directory: Vec<DirectorySnapshot>,
    pub mm_writes: u64,
}

#[derive(Debug, Clone)]
struct CoreState {
    l1: PrivateCache,
    l2: Option<PrivateCache>,
    rd: Option<ReuseDetector>,
    clock: u64,
}

impl CoreState {
    fn last_level(&self) -> &PrivateCache {
        self.l2.as_ref().unwrap_or(&self.l1)
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    cfg: HierarchyConfig,
    timing: TimingParams,
    cores: Vec<CoreState>,
    sllc: SharedCache,
    dir: Directory,
    dasca: Option<DascaPredictor>,
    banks: BankTimer,
    stats: SimStats,
    events: u64,
    log: Option<EngineLog>,
}

enum Decision {
    Keep,
    Bypass,
}

impl Hierarchy {
    pub fn new(cfg: HierarchyConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut cores = Vec::with_capacity(cfg.cores);
        for _ in 0..cfg.cores {
            let rd = match (cfg.policy, cfg.rd) {
                (Policy::ReuseDetector, Some(rd)) => Some(ReuseDetector::new(rd)?),
                _ => None,
            };
            cores.push(CoreState {
                l1: PrivateCache::new(cfg.l1)?,
                l2: cfg.l2.map(PrivateCache::new).transpose()?,
                rd,
                clock: 0,
            });
        }
        let dasca = match cfg.policy {
            Policy::DascaLite => Some(DascaPredictor::new(cfg.dasca, cfg.sllc.geometry.sets)?),
            _ => None,
        };
        let timing = cfg.timing();
        Ok(Hierarchy {
            timing,
            cores,
            sllc: SharedCache::new(cfg.sllc)?,
            dir: Directory::new(),
            dasca,
            banks: BankTimer::new(cfg.bank_count() as usize, &timing),
            stats: SimStats::new(cfg.cores),
            events: 0,
            log: None,
            cfg,
        })
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn into_stats(self) -> SimStats {
        self.stats
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Starts recording private evictions and memory writes.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(EngineLog::default);
    }

    pub fn log(&self) -> Option<&EngineLog> {
        self.log.as_ref()
    }

    pub fn take_log(&mut self) -> Option<EngineLog> {
        self.log.take()
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn sllc(&self) -> &SharedCache {
        &self.sllc
    }

    pub fn l1(&self, core: usize) -> &PrivateCache {
        &self.cores[core].l1
    }

    pub fn l2(&self, core: usize) -> Option<&PrivateCache> {
        self.cores[core].l2.as_ref()
    }

    pub fn reuse_detector(&self, core: usize) -> Option<&ReuseDetector> {
        self.cores[core].rd.as_ref()
    }

    pub fn core_clock(&self, core: usize) -> u64 {
        self.cores[core].clock
    }

    /// Counter histogram of the DASCA predictor table, when that policy runs.
    pub fn dasca_histogram(&self) -> Option<[u64; 4]> {
        self.dasca.as_ref().map(|d| d.table().histogram())
    }

    /// Lines still resident in the SLLC, by hits received so far.
    pub fn resident_reuse(&self) -> ReuseBreakdown {
        let mut r = ReuseBreakdown::default();
        for (_, _, l) in self.sllc.iter_valid() {
            r.record(l.hits);
        }
        r
    }

    /// Whether `core` holds the block in any private level.
    pub fn holds_privately(&self, core: usize, block: BlockAddr) -> bool {
        let c = &self.cores[core];
        let l = c.last_level();
        let (s, t) = l.geometry().locate(block);
        l.lookup(s, t).way().is_some()
    }

    pub fn in_sllc(&self, block: BlockAddr) -> bool {
        let (s, t) = self.sllc.geometry().locate(block);
        self.sllc.lookup(s, t).way().is_some()
    }

    pub fn run(&mut self, trace: &[AccessEvent]) -> Result<(), SimError> {
        for ev in trace {
            self.handle_access(ev)?;
        }
        Ok(())
    }

    pub fn handle_access(&mut self, ev: &AccessEvent) -> Result<AccessOutcome, SimError> {
        let index = self.events as usize;
        let c = ev.core as usize;
        if c >= self.cfg.cores {
            return Err(SimError::CoreOutOfRange {
                index,
                core: ev.core,
                cores: self.cfg.cores,
            });
        }
        let bits = self.cfg.addr_bits;
        if bits < 64 && ev.addr >> bits != 0 {
            return Err(SimError::AddressOutOfRange {
                index,
                addr: ev.addr,
                bits,
            });
        }
        let block = self.cfg.l1.geometry.block_of(ev.addr);
        let t = self.timing;
        {
            let st = &mut self.stats.cores[c];
            st.instructions += u64::from(ev.icount_delta);
            st.accesses += 1;
            if ev.kind == AccessKind::Write {
                st.write_accesses += 1;
            }
        }
        // One cycle per committed instruction, then the access latency.
        self.cores[c].clock += u64::from(ev.icount_delta);
        let now = self.cores[c].clock;
        let mut latency = u64::from(t.l1_cycles);
        let mut supplier = None;

        let (s1, t1) = self.cfg.l1.geometry.locate(block);
        let served = if let Some(w) = self.cores[c].l1.lookup(s1, t1).way() {
            self.cores[c].l1.touch(s1, w)?;
            self.stats.cores[c].l1_hits += 1;
            ServedFrom::L1
        } else if let Some(hit) = self.l2_hit(c, block)? {
            latency += u64::from(t.l2_cycles);
            self.stats.cores[c].l2_hits += 1;
            self.fill_l1(c, block, hit, now + latency)?;
            ServedFrom::L2
        } else {
            latency += u64::from(t.l2_cycles) + u64::from(t.network_cycles);
            let (ss, st) = self.sllc.geometry().locate(block);
            let bank = self.bank_of(ss);
            let acc = self.banks.account_access(BankOp::Read, bank, now + latency);
            latency += acc.stall_cycles + acc.latency_cycles;
            self.stats.cores[c].sllc_bank_stall_cycles += acc.stall_cycles;
            if let Some(d) = self.dasca.as_mut() {
                d.observe_demand(block);
            }
            let (served, reuse) = if let Some(w) = self.sllc.lookup(ss, st).way() {
                self.sllc.touch(ss, w)?;
                self.sllc.record_hit(ss, w)?;
                self.stats.cores[c].sllc_hits += 1;
                (ServedFrom::Sllc, true)
            } else {
                self.stats.cores[c].sllc_misses += 1;
                if let Some(p) = self.dir.supplier(block, c) {
                    self.mark_reused(p, block)?;
                    latency += u64::from(t.network_cycles) + u64::from(self.supplier_cycles());
                    self.stats.cores[c].peer_supplies += 1;
                    supplier = Some(p);
                    (ServedFrom::Peer, true)
                } else {
                    latency += u64::from(t.mm_cycles);
                    self.stats.cores[c].mm_reads += 1;
                    (ServedFrom::Memory, self.cfg.faults.reuse_on_memory_fill)
                }
            };
            self.fill_private(c, block, reuse, ev.pc, now + latency)?;
            served
        };

        if ev.kind == AccessKind::Write {
            let l1 = &mut self.cores[c].l1;
            let w = l1
                .lookup(s1, t1)
                .way()
                .expect("block was just filled into L1");
            l1.mark_dirty(s1, w)?;
            l1.set_writer_pc(s1, w, ev.pc)?;
            self.dir.mark_dirty(block, c);
        }

        let clock = &mut self.cores[c].clock;
        *clock += latency;
        self.stats.cores[c].cycles = *clock;
        self.stats.elapsed_cycles = self.stats.elapsed_cycles.max(*clock);
        self.events += 1;
        Ok(AccessOutcome {
            served_from: served,
            supplier,
            latency_cycles: latency,
        })
    }

    fn bank_of(&self, sllc_set: u64) -> usize {
        (sllc_set % self.banks.banks() as u64) as usize
    }

    fn supplier_cycles(&self) -> u32 {
        if self.cfg.l2.is_some() {
            self.timing.l2_cycles
        } else {
            self.timing.l1_cycles
        }
    }

    /// On an L2 hit, promotes the line and returns the fields an L1 copy takes.
    fn l2_hit(&mut self, c: usize, block: BlockAddr) -> Result<Option<(bool, u64)>, SimError> {
        let Some(l2) = self.cores[c].l2.as_mut() else {
            return Ok(None);
        };
        let (s, t) = l2.geometry().locate(block);
        let Some(w) = l2.lookup(s, t).way() else {
            return Ok(None);
        };
        l2.touch(s, w)?;
        let line = *l2.line(s, w).expect("hit line is valid");
        Ok(Some((line.reuse, line.pc)))
    }

    fn mark_reused(&mut self, core: usize, block: BlockAddr) -> Result<(), SimError> {
        let st = &mut self.cores[core];
        for cache in std::iter::once(&mut st.l1).chain(st.l2.as_mut()) {
            let (s, t) = cache.geometry().locate(block);
            if let Some(w) = cache.lookup(s, t).way() {
                cache.set_reuse(s, w, true)?;
            }
        }
        Ok(())
    }

    /// Installs a block fetched from below the private levels.
    fn fill_private(
        &mut self,
        c: usize,
        block: BlockAddr,
        reuse: bool,
        pc: u64,
        at: u64,
    ) -> Result<(), SimError> {
        if let Some(l2) = self.cores[c].l2.as_mut() {
            let (s, t) = l2.geometry().locate(block);
            let victim = l2.insert(s, CacheLine::new(t).with_reuse(reuse).with_pc(pc))?;
            if let Some(v) = victim {
                let vb = l2.geometry().block_at(s, v.tag);
                let merged = self.pull_from_l1(c, vb, v)?;
                self.handle_private_eviction(c, vb, merged, at)?;
            }
        }
        self.dir.add_sharer(block, c);
        self.fill_l1(c, block, (reuse, pc), at)
    }

    fn fill_l1(
        &mut self,
        c: usize,
        block: BlockAddr,
        (reuse, pc): (bool, u64),
        at: u64,
    ) -> Result<(), SimError> {
        let l1 = &mut self.cores[c].l1;
        let (s, t) = l1.geometry().locate(block);
        if let Some(v) = l1.insert(s, CacheLine::new(t).with_reuse(reuse).with_pc(pc))? {
            let vb = l1.geometry().block_at(s, v.tag);
            if self.cores[c].l2.is_some() {
                self.write_back_to_l2(c, vb, v)?;
            } else {
                self.handle_private_eviction(c, vb, v, at)?;
            }
        }
        Ok(())
    }

    /// Back-invalidates the L1 copy of an L2 victim, folding its state in.
    fn pull_from_l1(
        &mut self,
        c: usize,
        block: BlockAddr,
        mut line: CacheLine,
    ) -> Result<CacheLine, SimError> {
        let l1 = &mut self.cores[c].l1;
        let (s, t) = l1.geometry().locate(block);
        if let Some(w) = l1.lookup(s, t).way() {
            let old = l1.invalidate(s, w)?;
            if old.dirty {
                line.dirty = true;
                line.pc = old.pc;
            }
            line.reuse |= old.reuse;
        }
        Ok(line)
    }

    fn write_back_to_l2(
        &mut self,
        c: usize,
        block: BlockAddr,
        v: CacheLine,
    ) -> Result<(), SimError> {
        let l2 = self.cores[c].l2.as_mut().expect("caller checked for L2");
        let (s, t) = l2.geometry().locate(block);
        let w = l2.lookup(s, t).way().ok_or(SimError::Inclusion {
            core: c,
            block: block.0,
        })?;
        if v.dirty {
            l2.mark_dirty(s, w)?;
            l2.set_writer_pc(s, w, v.pc)?;
        }
        if v.reuse {
            l2.set_reuse(s, w, true)?;
        }
        Ok(())
    }

    /// Handles a block that has just left core `c`'s last private level.
    /// `line` carries the block's merged dirty bit, reuse bit and writer PC;
    /// `at` is the cycle at which any resulting SLLC write arrives.
    pub fn handle_private_eviction(
        &mut self,
        c: usize,
        block: BlockAddr,
        line: CacheLine,
        at: u64,
    ) -> Result<EvictOutcome, SimError> {
        self.dir.remove_sharer(block, c);
        self.stats.cores[c].private_evictions += 1;
        let mut rd_hit = false;
        let mut rd_filled = false;
        let decision = match self.cfg.policy {
            Policy::Baseline => Decision::Keep,
            Policy::ReuseDetector => {
                let drop_on_hit = self.cfg.faults.drop_rd_entry_on_hit;
                let rd = self.cores[c]
                    .rd
                    .as_mut()
                    .expect("RD exists under the rd policy");
                if line.reuse {
                    Decision::Keep
                } else if rd.probe(block) {
                    rd_hit = true;
                    if drop_on_hit {
                        rd.forget(block);
                    }
                    Decision::Keep
                } else {
                    rd.insert(block);
                    rd_filled = true;
                    Decision::Bypass
                }
            }
            Policy::DascaLite => {
                let d = self
                    .dasca
                    .as_mut()
                    .expect("predictor exists under the dasca policy");
                let sig = d.signature(line.pc);
                let dead = d.predict_dead(sig);
                d.observe_write(block, sig);
                if dead {
                    Decision::Bypass
                } else {
                    Decision::Keep
                }
            }
        };
        let (action, bypassed) = match decision {
            Decision::Keep => (self.write_to_sllc(c, block, line.dirty, at)?, false),
            Decision::Bypass => {
                self.stats.cores[c].bypasses += 1;
                if line.dirty {
                    self.write_to_memory(c, block);
                    (EvictAction::BypassToMm, true)
                } else {
                    (EvictAction::Discard, true)
                }
            }
        };
        let outcome = EvictOutcome {
            action,
            bypassed,
            rd_hit,
            rd_filled,
        };
        if let Some(log) = self.log.as_mut() {
            log.evictions.push(EvictionRecord {
                event: self.events,
                core: c,
                block,
                reuse: line.reuse,
                dirty: line.dirty,
                pc: line.pc,
                outcome,
            });
        }
        Ok(outcome)
    }

    fn write_to_memory(&mut self, c: usize, block: BlockAddr) {
        self.stats.cores[c].mm_writes += 1;
        if let Some(log) = self.log.as_mut() {
            log.memory_writes.push(MemoryWrite {
                event: self.events,
                block,
            });
        }
    }

    fn account_sllc_write(&mut self, c: usize, set: u64, at: u64) {
        let bank = self.bank_of(set);
        let acc = self.banks.account_access(BankOp::Write, bank, at);
        let st = &mut self.stats.cores[c];
        st.sllc_writes += 1;
        st.sllc_bank_stall_cycles += acc.stall_cycles;
        self.stats.sllc_write_occupancy_cycles += acc.latency_cycles;
    }

    fn write_to_sllc(
        &mut self,
        c: usize,
        block: BlockAddr,
        dirty: bool,
        at: u64,
    ) -> Result<EvictAction, SimError> {
        let (s, t) = self.sllc.geometry().locate(block);
        match self.sllc.lookup(s, t).way() {
            Some(w) if dirty => {
                self.sllc.mark_dirty(s, w)?;
                if self.cfg.touch_on_update {
                    self.sllc.touch(s, w)?;
                }
                self.stats.cores[c].sllc_updates += 1;
                self.account_sllc_write(c, s, at);
                Ok(EvictAction::UpdateSllc)
            }
            Some(_) => {
                self.stats.cores[c].discards += 1;
                Ok(EvictAction::Discard)
            }
            None => {
                let victim = self.sllc.insert(s, CacheLine::new(t).with_dirty(dirty))?;
                self.stats.cores[c].sllc_inserts += 1;
                self.account_sllc_write(c, s, at);
                if let Some(v) = victim {
                    self.stats.sllc_evicted_reuse.record(v.hits);
                    if v.dirty {
                        let vb = self.sllc.geometry().block_at(s, v.tag);
                        self.write_to_memory(c, vb);
                    }
                }
                Ok(EvictAction::InsertSllc)
            }
        }
    }

    pub fn snapshot(&self) -> HierarchySnapshot {
        let mut directory: Vec<DirectorySnapshot> = self
            .dir
            .iter()
            .map(|(block, e)| DirectorySnapshot {
                block,
                sharers: e.sharers,
                dirty: e.dirty,
            })
            .collect();
        directory.sort_by_key(|d| d.block);
        HierarchySnapshot {
            events: self.events,
            cores: self
                .cores
                .iter()
                .map(|c| CoreSnapshot {
                    l1: c.l1.snapshot(),
                    l2: c.l2.as_ref().map(|l| l.snapshot()),
                    rd: c.rd.as_ref().map(|r| r.snapshot()),
                })
                .collect(),
            sllc: self.sllc.snapshot(),
            directory,
            mm_writes: self.stats.total().mm_writes,
        }
    }

    /// Checks structural invariants: per-array LRU state, L1 inclusion in
    /// L2, and that the directory matches the private contents exactly.
    pub fn audit(&self) -> Result<(), String> {
        self.sllc
            .check_invariants()
            .map_err(|e| format!("SLLC: {e}"))?;
        let mut expected = std::collections::HashMap::<BlockAddr, (u64, u64)>::new();
        for (i, c) in self.cores.iter().enumerate() {
            c.l1.check_invariants()
                .map_err(|e| format!("core {i} L1: {e}"))?;
            if let Some(rd) = &c.rd {
                rd.check_invariants()
                    .map_err(|e| format!("core {i} RD: {e}"))?;
            }
            let g1 = *c.l1.geometry();
            if let Some(l2) = &c.l2 {
                l2.check_invariants()
                    .map_err(|e| format!("core {i} L2: {e}"))?;
                for (s, _, l) in c.l1.iter_valid() {
                    let b = g1.block_at(s, l.tag);
                    let (s2, t2) = l2.geometry().locate(b);
                    if l2.lookup(s2, t2).way().is_none() {
                        return Err(format!("core {i}: block {:#x} in L1 but not in L2", b.0));
                    }
                }
            }
            let last = c.last_level();
            let gl = *last.geometry();
            for (s, _, l) in last.iter_valid() {
                let b = gl.block_at(s, l.tag);
                let (s1, t1) = g1.locate(b);
                let l1_dirty =
                    c.l1.lookup(s1, t1)
                        .way()
                        .and_then(|w| c.l1.line(s1, w))
                        .is_some_and(|x| x.dirty);
                let e = expected.entry(b).or_default();
                e.0 |= 1 << i;
                if l.dirty || l1_dirty {
                    e.1 |= 1 << i;
                }
            }
        }
        if expected.len() != self.dir.len() {
            return Err(format!(
                "directory has {} blocks, private caches hold {}",
                self.dir.len(),
                expected.len()
            ));
        }
        for (b, (sharers, dirty)) in expected {
            let e = self.dir.get(b);
            if e.sharers != sharers || e.dirty != dirty {
                return Err(format!(
                    "block {:#x}: directory {:#b}/{:#b}, caches {:#b}/{:#b}",
                    b.0, e.sharers, e.dirty, sharers, dirty
                ));
            }
        }
        Ok(())
    }
}

/// Runs `trace` on a fresh hierarchy and returns the counters.
pub fn simulate(cfg: &HierarchyConfig, trace: &[AccessEvent]) -> Result<SimStats, SimError> {
    let mut h = Hierarchy::new(cfg.clone())?;
    h.run(trace)?;
    Ok(h.into_stats())
}
