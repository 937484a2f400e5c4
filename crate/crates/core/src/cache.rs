//! Set-associative write-back cache array with true LRU.
//!
//! LRU state is kept as explicit ranks (0 = MRU) that always form a
//! permutation of `0..valid_lines` within a set. The inclusion role is a type
//! parameter: only private arrays expose reuse-bit updates, shared arrays
//! always store `reuse = false`.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::addr::Geometry;
use crate::error::{CacheError, ConfigError};

mod sealed {
    pub trait Sealed {}
}

/// Inclusion role of a cache array.
pub trait CacheRole: sealed::Sealed {
    const TRACKS_REUSE: bool;
}

/// A private level, inclusive with the levels above it. Lines carry a reuse
/// bit.
#[derive(Debug, Clone, Copy)]
pub struct PrivateInclusive;

/// The shared, non-inclusive last level. Reuse bits are not stored.
#[derive(Debug, Clone, Copy)]
pub struct SharedNonInclusive;

impl sealed::Sealed for PrivateInclusive {}
impl sealed::Sealed for SharedNonInclusive {}

impl CacheRole for PrivateInclusive {
    const TRACKS_REUSE: bool = true;
}

impl CacheRole for SharedNonInclusive {
    const TRACKS_REUSE: bool = false;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub geometry: Geometry,
    pub read_latency_cycles: u32,
    pub write_latency_cycles: u32,
}

impl CacheConfig {
    pub fn new(
        geometry: Geometry,
        read_latency_cycles: u32,
        write_latency_cycles: u32,
    ) -> Result<Self, ConfigError> {
        let cfg = CacheConfig {
            geometry,
            read_latency_cycles,
            write_latency_cycles,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.geometry.validate()?;
        if self.read_latency_cycles == 0 || self.write_latency_cycles == 0 {
            return Err(ConfigError::Invalid(
                "cache latencies must be >= 1 cycle".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CacheLine {
    pub tag: u64,
    pub valid: bool,
    pub dirty: bool,
    pub reuse: bool,
    pub lru_rank: u32,
    /// PC of the last instruction that wrote the block (private levels).
    pub pc: u64,
    /// Demand hits received since insertion (shared level).
    pub hits: u32,
}

impl CacheLine {
    pub fn new(tag: u64) -> Self {
        CacheLine {
            tag,
            valid: true,
            ..CacheLine::default()
        }
    }

    pub fn with_dirty(mut self, dirty: bool) -> Self {
        self.dirty = dirty;
        self
    }

    pub fn with_reuse(mut self, reuse: bool) -> Self {
        self.reuse = reuse;
        self
    }

    pub fn with_pc(mut self, pc: u64) -> Self {
        self.pc = pc;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit(usize),
    Miss,
}

impl Lookup {
    pub fn way(self) -> Option<usize> {
        match self {
            Lookup::Hit(w) => Some(w),
            Lookup::Miss => None,
        }
    }
}

/// One valid line in a snapshot, listed in way order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSnapshot {
    pub way: usize,
    pub tag: u64,
    pub block: u64,
    pub dirty: bool,
    pub reuse: bool,
    pub lru_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSnapshot {
    pub set: u64,
    pub lines: Vec<LineSnapshot>,
}

#[derive(Debug, Clone)]
pub struct Cache<R: CacheRole> {
    cfg: CacheConfig,
    lines: Vec<CacheLine>,
    occupancy: Vec<u32>,
    _role: PhantomData<R>,
}

pub type PrivateCache = Cache<PrivateInclusive>;
pub type SharedCache = Cache<SharedNonInclusive>;

impl<R: CacheRole> Cache<R> {
    pub fn new(cfg: CacheConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let g = cfg.geometry;
        Ok(Cache {
            cfg,
            lines: vec![CacheLine::default(); (g.sets as usize) * g.ways],
            occupancy: vec![0; g.sets as usize],
            _role: PhantomData,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &Geometry {
        &self.cfg.geometry
    }

    fn ways(&self) -> usize {
        self.cfg.geometry.ways
    }

    fn set_slice(&self, set: u64) -> &[CacheLine] {
        let w = self.ways();
        let base = set as usize * w;
        &self.lines[base..base + w]
    }

    fn set_slice_mut(&mut self, set: u64) -> &mut [CacheLine] {
        let w = self.ways();
        let base = set as usize * w;
        &mut self.lines[base..base + w]
    }

    fn check_set(&self, set: u64) -> Result<(), CacheError> {
        if set >= self.cfg.geometry.sets {
            Err(CacheError::SetOutOfRange { set })
        } else {
            Ok(())
        }
    }

    fn valid_mut(&mut self, set: u64, way: usize) -> Result<&mut CacheLine, CacheError> {
        self.check_set(set)?;
        match self.set_slice_mut(set).get_mut(way) {
            Some(l) if l.valid => Ok(l),
            _ => Err(CacheError::InvalidWay { set, way }),
        }
    }

    /// Finds a valid line with `tag` in `set`. Never mutates state.
    pub fn lookup(&self, set: u64, tag: u64) -> Lookup {
        if set >= self.cfg.geometry.sets {
            return Lookup::Miss;
        }
        self.set_slice(set)
            .iter()
            .position(|l| l.valid && l.tag == tag)
            .map_or(Lookup::Miss, Lookup::Hit)
    }

    pub fn line(&self, set: u64, way: usize) -> Option<&CacheLine> {
        if set >= self.cfg.geometry.sets {
            return None;
        }
        self.set_slice(set).get(way).filter(|l| l.valid)
    }

    /// Installs `line` at MRU. When the set is full the LRU line is evicted
    /// and returned with its dirty and reuse bits intact.
    pub fn insert(
        &mut self,
        set: u64,
        mut line: CacheLine,
    ) -> Result<Option<CacheLine>, CacheError> {
        self.check_set(set)?;
        if !line.valid {
            return Err(CacheError::InvalidLine);
        }
        if self.lookup(set, line.tag).way().is_some() {
            return Err(CacheError::DuplicateTag { set, tag: line.tag });
        }
        if !R::TRACKS_REUSE {
            line.reuse = false;
        }
        let ways = self.ways();
        let occupied = self.occupancy[set as usize] as usize;
        let slots = self.set_slice_mut(set);
        let (way, evicted) = if occupied < ways {
            let way = slots.iter().position(|l| !l.valid).expect("set not full");
            (way, None)
        } else {
            let lru = (ways - 1) as u32;
            let way = slots
                .iter()
                .position(|l| l.lru_rank == lru)
                .expect("ranks form a permutation");
            let mut old = slots[way];
            old.lru_rank = lru;
            (way, Some(old))
        };
        for l in slots.iter_mut().filter(|l| l.valid) {
            l.lru_rank += 1;
        }
        line.lru_rank = 0;
        slots[way] = line;
        if evicted.is_none() {
            self.occupancy[set as usize] += 1;
        }
        Ok(evicted)
    }

    /// Promotes a line to MRU.
    pub fn touch(&mut self, set: u64, way: usize) -> Result<(), CacheError> {
        let rank = self.valid_mut(set, way)?.lru_rank;
        for l in self.set_slice_mut(set).iter_mut().filter(|l| l.valid) {
            if l.lru_rank < rank {
                l.lru_rank += 1;
            }
        }
        self.set_slice_mut(set)[way].lru_rank = 0;
        Ok(())
    }

    pub fn mark_dirty(&mut self, set: u64, way: usize) -> Result<(), CacheError> {
        self.valid_mut(set, way)?.dirty = true;
        Ok(())
    }

    /// Clears the line and returns what it held.
    pub fn invalidate(&mut self, set: u64, way: usize) -> Result<CacheLine, CacheError> {
        let old = *self.valid_mut(set, way)?;
        for l in self.set_slice_mut(set).iter_mut().filter(|l| l.valid) {
            if l.lru_rank > old.lru_rank {
                l.lru_rank -= 1;
            }
        }
        self.set_slice_mut(set)[way] = CacheLine::default();
        self.occupancy[set as usize] -= 1;
        Ok(old)
    }

    pub fn occupancy(&self) -> usize {
        self.occupancy.iter().map(|&c| c as usize).sum()
    }

    /// All valid lines as `(set, way, line)`.
    pub fn iter_valid(&self) -> impl Iterator<Item = (u64, usize, &CacheLine)> + '_ {
        let ways = self.ways();
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| l.valid)
            .map(move |(i, l)| ((i / ways) as u64, i % ways, l))
    }

    /// Contents of every non-empty set, lines in way order.
    pub fn snapshot(&self) -> Vec<SetSnapshot> {
        let mut out: Vec<SetSnapshot> = Vec::new();
        for (set, way, l) in self.iter_valid() {
            let snap = LineSnapshot {
                way,
                tag: l.tag,
                block: self.cfg.geometry.block_at(set, l.tag).0,
                dirty: l.dirty,
                reuse: l.reuse,
                lru_rank: l.lru_rank,
            };
            match out.last_mut() {
                Some(s) if s.set == set => s.lines.push(snap),
                _ => out.push(SetSnapshot {
                    set,
                    lines: vec![snap],
                }),
            }
        }
        out
    }

    /// Checks the per-set LRU and tag invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for set in 0..self.cfg.geometry.sets {
            let valid: Vec<&CacheLine> = self.set_slice(set).iter().filter(|l| l.valid).collect();
            if valid.len() != self.occupancy[set as usize] as usize {
                return Err(format!("set {set}: occupancy counter out of sync"));
            }
            let mut ranks: Vec<u32> = valid.iter().map(|l| l.lru_rank).collect();
            ranks.sort_unstable();
            if ranks.iter().enumerate().any(|(i, &r)| r != i as u32) {
                return Err(format!("set {set}: ranks {ranks:?} are not a permutation"));
            }
            let mut tags: Vec<u64> = valid.iter().map(|l| l.tag).collect();
            tags.sort_unstable();
            if tags.windows(2).any(|w| w[0] == w[1]) {
                return Err(format!("set {set}: duplicate tags"));
            }
            if !R::TRACKS_REUSE && valid.iter().any(|l| l.reuse) {
                return Err(format!("set {set}: shared line with reuse bit"));
            }
        }
        Ok(())
    }
}

impl Cache<PrivateInclusive> {
    pub fn set_reuse(&mut self, set: u64, way: usize, value: bool) -> Result<(), CacheError> {
        self.valid_mut(set, way)?.reuse = value;
        Ok(())
    }

    /// Records the PC of a write to the line.
    pub fn set_writer_pc(&mut self, set: u64, way: usize, pc: u64) -> Result<(), CacheError> {
        self.valid_mut(set, way)?.pc = pc;
        Ok(())
    }
}

impl Cache<SharedNonInclusive> {
    /// Counts a demand hit on the line (reuse accounting).
    pub fn record_hit(&mut self, set: u64, way: usize) -> Result<(), CacheError> {
        let l = self.valid_mut(set, way)?;
        l.hits = l.hits.saturating_add(1);
        Ok(())
    }
}
