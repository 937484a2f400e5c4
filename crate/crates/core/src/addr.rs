//! Address arithmetic: block/set/tag decomposition, RD sectoring and XOR tag
//! compression.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Physical address width assumed when deriving tag widths.
pub const DEFAULT_ADDR_BITS: u32 = 48;

/// Shape of a set-associative array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub block_bytes: u64,
    pub sets: u64,
    pub ways: usize,
}

/// A byte address split into its cache coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decomposed {
    pub tag: u64,
    pub set: u64,
    pub offset: u64,
}

impl Geometry {
    pub fn new(block_bytes: u64, sets: u64, ways: usize) -> Result<Self, ConfigError> {
        let g = Geometry {
            block_bytes,
            sets,
            ways,
        };
        g.validate()?;
        Ok(g)
    }

    /// Builds a geometry from a total capacity in bytes.
    pub fn with_capacity(
        capacity_bytes: u64,
        block_bytes: u64,
        ways: usize,
    ) -> Result<Self, ConfigError> {
        if block_bytes == 0 || ways == 0 {
            return Err(ConfigError::Invalid(format!(
                "cannot derive sets from capacity {capacity_bytes} with block {block_bytes} and {ways} ways"
            )));
        }
        let per_set = block_bytes * ways as u64;
        if !capacity_bytes.is_multiple_of(per_set) {
            return Err(ConfigError::Invalid(format!(
                "capacity {capacity_bytes} is not a multiple of block_bytes x ways = {per_set}"
            )));
        }
        Geometry::new(block_bytes, capacity_bytes / per_set, ways)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.block_bytes.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "block_bytes must be a power of two, got {}",
                self.block_bytes
            )));
        }
        if !self.sets.is_power_of_two() {
            return Err(ConfigError::Invalid(format!(
                "sets must be a power of two, got {}",
                self.sets
            )));
        }
        if self.ways == 0 {
            return Err(ConfigError::Invalid("ways must be at least 1".into()));
        }
        Ok(())
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.block_bytes * self.sets * self.ways as u64
    }

    pub fn capacity_blocks(&self) -> u64 {
        self.sets * self.ways as u64
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bytes.trailing_zeros()
    }

    pub fn set_bits(&self) -> u32 {
        self.sets.trailing_zeros()
    }

    pub fn block_of(&self, addr: u64) -> BlockAddr {
        BlockAddr(addr >> self.block_bits())
    }

    pub fn decompose(&self, addr: u64) -> Decomposed {
        let offset = addr & (self.block_bytes - 1);
        let block = addr >> self.block_bits();
        Decomposed {
            tag: block >> self.set_bits(),
            set: block & (self.sets - 1),
            offset,
        }
    }

    pub fn compose(&self, d: Decomposed) -> u64 {
        (((d.tag << self.set_bits()) | d.set) << self.block_bits()) | d.offset
    }

    /// (set, tag) of a block number.
    pub fn locate(&self, block: BlockAddr) -> (u64, u64) {
        (block.0 & (self.sets - 1), block.0 >> self.set_bits())
    }

    pub fn block_at(&self, set: u64, tag: u64) -> BlockAddr {
        BlockAddr((tag << self.set_bits()) | set)
    }
}

/// Block number: a byte address shifted right by log2(block_bytes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockAddr(pub u64);

impl BlockAddr {
    pub fn byte_addr(self, block_bytes: u64) -> u64 {
        self.0 * block_bytes
    }
}

/// Widths used by the RD to store sector tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdTagConfig {
    /// Full tag width in bits.
    pub t_bits: u32,
    /// Compressed tag width in bits.
    pub c_bits: u32,
    /// Blocks covered by one sector (one RD entry).
    pub sector_blocks: u64,
}

impl RdTagConfig {
    pub fn new(t_bits: u32, c_bits: u32, sector_blocks: u64) -> Result<Self, ConfigError> {
        let cfg = RdTagConfig {
            t_bits,
            c_bits,
            sector_blocks,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.c_bits == 0 || self.c_bits > self.t_bits {
            return Err(ConfigError::Invalid(format!(
                "compressed tag width must satisfy 1 <= c ({}) <= t ({})",
                self.c_bits, self.t_bits
            )));
        }
        if self.t_bits > 64 {
            return Err(ConfigError::Invalid(format!(
                "tag width {} exceeds 64 bits",
                self.t_bits
            )));
        }
        if !self.sector_blocks.is_power_of_two() || self.sector_blocks > 64 {
            return Err(ConfigError::Invalid(format!(
                "sector_blocks must be a power of two in [1, 64], got {}",
                self.sector_blocks
            )));
        }
        Ok(())
    }

    /// True when compression is the identity (no aliasing possible).
    pub fn is_exact(&self) -> bool {
        self.c_bits == self.t_bits
    }
}

/// Sector number and the block's slot inside it.
pub fn sector_of(block: BlockAddr, cfg: &RdTagConfig) -> (u64, u64) {
    (block.0 / cfg.sector_blocks, block.0 % cfg.sector_blocks)
}

/// XOR-folds `full_tag` into `c_bits`.
///
/// The tag is cut into `c_bits`-wide pieces starting at the least significant
/// end; the most significant piece is implicitly zero padded. Bits above
/// `t_bits` are folded in as further pieces instead of being dropped, so an
/// out-of-range tag can alias but never vanish.
pub fn compress_tag(full_tag: u64, cfg: &RdTagConfig) -> u64 {
    let c = cfg.c_bits;
    if c >= 64 {
        return full_tag;
    }
    let mask = (1u64 << c) - 1;
    let mut rest = full_tag;
    let mut out = 0;
    while rest != 0 {
        out ^= rest & mask;
        rest >>= c;
    }
    out
}

/// Splits a tag into its `c_bits` pieces, least significant first.
pub fn tag_pieces(full_tag: u64, cfg: &RdTagConfig) -> Vec<u64> {
    let c = cfg.c_bits;
    let count = cfg.t_bits.div_ceil(c) as usize;
    let mask = if c >= 64 { u64::MAX } else { (1u64 << c) - 1 };
    (0..count)
        .map(|i| {
            let shift = i as u32 * c;
            if shift >= 64 {
                0
            } else {
                (full_tag >> shift) & mask
            }
        })
        .collect()
}
