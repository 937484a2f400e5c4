//! Reuse Detector: a per-core set-associative buffer of compressed sector
//! tags with per-block presence bits and 1-bit FIFO replacement.
//!
//! A probe hit means the block was evicted from this core's private levels
//! before without having been reused, so its current eviction is its first
//! reuse and it should be kept in the shared cache.
//!
//! Indexing: the sector number selects the set (`sector % sets`) and the
//! remaining high bits (`sector / sets`) form the tag that is XOR-compressed
//! to `c_bits`.
//!
//! Replacement: each entry has one FIFO bit, set when the entry is filled and
//! never refreshed by later hits or presence updates. The victim is the
//! lowest-numbered way whose bit is clear; when every bit in the set is set,
//! all bits are cleared and way 0 is taken. Starting from an empty set this
//! evicts entries in exact fill order.

use serde::{Deserialize, Serialize};

use crate::addr::{compress_tag, sector_of, BlockAddr, RdTagConfig, DEFAULT_ADDR_BITS};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdConfig {
    pub sets: u64,
    pub ways: usize,
    pub tag: RdTagConfig,
}

impl RdConfig {
    /// Geometry from an entry count, with the full tag width derived from the
    /// address width. `c_bits = None` selects exact (uncompressed) tags.
    pub fn with_entries(
        entries: u64,
        ways: usize,
        c_bits: Option<u32>,
        sector_blocks: u64,
        block_bytes: u64,
        addr_bits: u32,
    ) -> Result<Self, ConfigError> {
        if ways == 0 || !entries.is_multiple_of(ways as u64) {
            return Err(ConfigError::Invalid(format!(
                "RD entries ({entries}) must be a positive multiple of ways ({ways})"
            )));
        }
        let sets = entries / ways as u64;
        if !sets.is_power_of_two()
            || !block_bytes.is_power_of_two()
            || !sector_blocks.is_power_of_two()
        {
            return Err(ConfigError::Invalid(format!(
                "RD sets ({sets}), block size and sector size must be powers of two"
            )));
        }
        let index_bits =
            block_bytes.trailing_zeros() + sector_blocks.trailing_zeros() + sets.trailing_zeros();
        if addr_bits <= index_bits || addr_bits > 64 {
            return Err(ConfigError::Invalid(format!(
                "address width {addr_bits} leaves no RD tag bits"
            )));
        }
        let t_bits = addr_bits - index_bits;
        let c_bits = c_bits.unwrap_or(t_bits).min(t_bits);
        let cfg = RdConfig {
            sets,
            ways,
            tag: RdTagConfig::new(t_bits, c_bits, sector_blocks)?,
        };
        Ok(cfg)
    }

    /// 8192 entries, 16 ways, 10-bit compressed tags, 2-block sectors,
    /// 64-byte blocks and 48-bit addresses.
    pub fn standard() -> Self {
        Self::with_entries(8192, 16, Some(10), 2, 64, DEFAULT_ADDR_BITS)
            .expect("standard RD geometry is valid")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.sets.is_power_of_two() || self.ways == 0 {
            return Err(ConfigError::Invalid(format!(
                "RD needs power-of-two sets and >= 1 way, got {}x{}",
                self.sets, self.ways
            )));
        }
        self.tag.validate()
    }

    pub fn entries(&self) -> u64 {
        self.sets * self.ways as u64
    }

    /// Bits per entry: compressed tag, presence bits, FIFO bit, valid bit.
    pub fn entry_bits(&self) -> u64 {
        u64::from(self.tag.c_bits) + self.tag.sector_blocks + 2
    }
}

/// Total RD storage in bits.
pub fn storage_bits(cfg: &RdConfig) -> u64 {
    cfg.entries() * cfg.entry_bits()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RdEntry {
    pub ctag: u64,
    pub presence: u64,
    pub fifo_bit: bool,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdEntrySnapshot {
    pub set: u64,
    pub way: usize,
    pub ctag: u64,
    pub presence: u64,
    pub fifo_bit: bool,
}

/// Where a block lands in the RD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RdSlot {
    pub set: u64,
    pub ctag: u64,
    pub presence_mask: u64,
}

#[derive(Debug, Clone)]
pub struct ReuseDetector {
    cfg: RdConfig,
    entries: Vec<RdEntry>,
}

impl ReuseDetector {
    pub fn new(cfg: RdConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(ReuseDetector {
            cfg,
            entries: vec![RdEntry::default(); cfg.entries() as usize],
        })
    }

    pub fn config(&self) -> &RdConfig {
        &self.cfg
    }

    pub fn slot(&self, block: BlockAddr) -> RdSlot {
        let (sector, slot) = sector_of(block, &self.cfg.tag);
        RdSlot {
            set: sector % self.cfg.sets,
            ctag: compress_tag(sector / self.cfg.sets, &self.cfg.tag),
            presence_mask: 1 << slot,
        }
    }

    fn set_entries(&self, set: u64) -> &[RdEntry] {
        let base = set as usize * self.cfg.ways;
        &self.entries[base..base + self.cfg.ways]
    }

    fn set_entries_mut(&mut self, set: u64) -> &mut [RdEntry] {
        let base = set as usize * self.cfg.ways;
        &mut self.entries[base..base + self.cfg.ways]
    }

    /// True iff a valid entry matches the block's compressed sector tag and
    /// has the block's presence bit set.
    pub fn probe(&self, block: BlockAddr) -> bool {
        let s = self.slot(block);
        self.set_entries(s.set)
            .iter()
            .any(|e| e.valid && e.ctag == s.ctag && e.presence & s.presence_mask != 0)
    }

    /// Records the block. Returns the entry it displaced, if any.
    pub fn insert(&mut self, block: BlockAddr) -> Option<RdEntry> {
        let s = self.slot(block);
        let set = self.set_entries_mut(s.set);
        if let Some(e) = set.iter_mut().find(|e| e.valid && e.ctag == s.ctag) {
            e.presence |= s.presence_mask;
            return None;
        }
        let way = match set.iter().position(|e| !e.fifo_bit) {
            Some(w) => w,
            None => {
                set.iter_mut().for_each(|e| e.fifo_bit = false);
                0
            }
        };
        let old = set[way];
        set[way] = RdEntry {
            ctag: s.ctag,
            presence: s.presence_mask,
            fifo_bit: true,
            valid: true,
        };
        old.valid.then_some(old)
    }

    /// Clears the block's presence bit, dropping the entry once it is empty.
    pub fn forget(&mut self, block: BlockAddr) {
        let s = self.slot(block);
        for e in self.set_entries_mut(s.set).iter_mut() {
            if e.valid && e.ctag == s.ctag {
                e.presence &= !s.presence_mask;
                if e.presence == 0 {
                    *e = RdEntry::default();
                }
            }
        }
    }

    pub fn entry(&self, set: u64, way: usize) -> Option<&RdEntry> {
        if set >= self.cfg.sets {
            return None;
        }
        self.set_entries(set).get(way)
    }

    pub fn occupancy(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    pub fn snapshot(&self) -> Vec<RdEntrySnapshot> {
        let ways = self.cfg.ways;
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.valid)
            .map(|(i, e)| RdEntrySnapshot {
                set: (i / ways) as u64,
                way: i % ways,
                ctag: e.ctag,
                presence: e.presence,
                fifo_bit: e.fifo_bit,
            })
            .collect()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let full_presence = if self.cfg.tag.sector_blocks == 64 {
            u64::MAX
        } else {
            (1u64 << self.cfg.tag.sector_blocks) - 1
        };
        for (i, e) in self.entries.iter().enumerate() {
            if !e.valid && e.presence != 0 {
                return Err(format!("entry {i}: invalid with presence bits"));
            }
            if e.presence & !full_presence != 0 {
                return Err(format!("entry {i}: presence bits beyond the sector"));
            }
            if e.valid && self.cfg.tag.c_bits < 64 && e.ctag >> self.cfg.tag.c_bits != 0 {
                return Err(format!("entry {i}: compressed tag wider than c_bits"));
            }
        }
        Ok(())
    }
}
