use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::addr::{Geometry, DEFAULT_ADDR_BITS};
use crate::cache::CacheConfig;
use crate::dasca::DascaConfig;
use crate::energy::TimingParams;
use crate::error::ConfigError;
use crate::rd::RdConfig;

/// What happens to blocks evicted from the last private level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    /// Insert if absent, update if present and dirty, otherwise discard.
    #[serde(rename = "baseline")]
    Baseline,
    /// Bypass blocks that show no reuse (reuse bit clear and RD miss).
    #[serde(rename = "rd")]
    ReuseDetector,
    /// Bypass blocks whose writer PC is predicted dead.
    #[serde(rename = "dasca")]
    DascaLite,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Baseline, Policy::ReuseDetector, Policy::DascaLite];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Baseline => "baseline",
            Policy::ReuseDetector => "rd",
            Policy::DascaLite => "dasca",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "base" => Ok(Policy::Baseline),
            "rd" | "reuse-detector" => Ok(Policy::ReuseDetector),
            "dasca" | "dasca-lite" => Ok(Policy::DascaLite),
            other => Err(ConfigError::Invalid(format!("unknown policy {other:?}"))),
        }
    }
}

/// Deliberate defects for checking that the golden harness catches them.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultInjection {
    pub reuse_on_memory_fill: bool,
    pub drop_rd_entry_on_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub cores: usize,
    pub l1: CacheConfig,
    /// Absent for two-level hierarchies; the RD then sits behind L1.
    pub l2: Option<CacheConfig>,
    pub sllc: CacheConfig,
    pub rd: Option<RdConfig>,
    pub dasca: DascaConfig,
    pub policy: Policy,
    pub network_cycles: u32,
    pub mm_cycles: u32,
    pub bank_contention: bool,
    /// SLLC banks; one per core when unset.
    pub banks: Option<u32>,
    pub addr_bits: u32,
    /// Promote an SLLC line to MRU when a dirty eviction updates it.
    pub touch_on_update: bool,
    #[doc(hidden)]
    #[serde(skip)]
    pub faults: FaultInjection,
}

fn sllc_for(cores: usize, per_core_bytes: u64, ways: usize) -> Result<CacheConfig, ConfigError> {
    // Set counts must be powers of two, so odd core counts round the SLLC up.
    let scale = cores.max(1).next_power_of_two() as u64;
    CacheConfig::new(
        Geometry::with_capacity(per_core_bytes * scale, 64, ways)?,
        6,
        17,
    )
}

impl HierarchyConfig {
    /// Three-level reference hierarchy: 32 KB/8-way L1 (2 cycles),
    /// 256 KB/16-way L2 (5 cycles), 1 MB-per-core 16-way STT-RAM SLLC
    /// (6/17 cycles), 8K-entry RD per core, 3-cycle network.
    pub fn three_level(cores: usize) -> Result<Self, ConfigError> {
        let cfg = HierarchyConfig {
            cores,
            l1: CacheConfig::new(Geometry::with_capacity(32 << 10, 64, 8)?, 2, 2)?,
            l2: Some(CacheConfig::new(
                Geometry::with_capacity(256 << 10, 64, 16)?,
                5,
                5,
            )?),
            sllc: sllc_for(cores, 1 << 20, 16)?,
            rd: Some(RdConfig::standard()),
            dasca: DascaConfig::default(),
            policy: Policy::Baseline,
            network_cycles: 3,
            mm_cycles: 200,
            bank_contention: true,
            banks: None,
            addr_bits: DEFAULT_ADDR_BITS,
            touch_on_update: true,
            faults: FaultInjection::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Two-level variant: 32 KB L1 and a 1 MB-per-core shared L2 as SLLC.
    pub fn two_level(cores: usize) -> Result<Self, ConfigError> {
        let mut cfg = Self::three_level(cores)?;
        cfg.l2 = None;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Scaled-down three-level hierarchy for fast experiments: 1 KB/2-way L1,
    /// 4 KB/4-way L2, 16 KB-per-core 8-way SLLC, 256-entry RD per core.
    pub fn small(cores: usize) -> Result<Self, ConfigError> {
        let mut cfg = Self::three_level(cores)?;
        cfg.l1 = CacheConfig::new(Geometry::with_capacity(1 << 10, 64, 2)?, 2, 2)?;
        cfg.l2 = Some(CacheConfig::new(
            Geometry::with_capacity(4 << 10, 64, 4)?,
            5,
            5,
        )?);
        cfg.sllc = sllc_for(cores, 16 << 10, 8)?;
        cfg.rd = Some(RdConfig::with_entries(
            256,
            16,
            Some(10),
            2,
            64,
            DEFAULT_ADDR_BITS,
        )?);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn bank_count(&self) -> u32 {
        self.banks.unwrap_or(self.cores as u32).max(1)
    }

    pub fn block_bytes(&self) -> u64 {
        self.l1.geometry.block_bytes
    }

    pub fn timing(&self) -> TimingParams {
        TimingParams::from_caches(
            &self.l1,
            self.l2.as_ref(),
            &self.sllc,
            self.network_cycles,
            self.mm_cycles,
            self.bank_contention,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.cores == 0 || self.cores > 64 {
            return bad(format!("cores must be in [1, 64], got {}", self.cores));
        }
        self.l1.validate()?;
        self.sllc.validate()?;
        let bb = self.block_bytes();
        if let Some(l2) = &self.l2 {
            l2.validate()?;
            if l2.geometry.block_bytes != bb {
                return bad("L1 and L2 block sizes differ".into());
            }
        }
        if self.sllc.geometry.block_bytes != bb {
            return bad("private and shared block sizes differ".into());
        }
        if let Some(rd) = &self.rd {
            rd.validate()?;
        }
        if self.policy == Policy::ReuseDetector && self.rd.is_none() {
            return bad("policy rd needs an RD configuration".into());
        }
        self.dasca.validate()?;
        if self.network_cycles == 0 || self.mm_cycles == 0 {
            return bad("network and memory latencies must be >= 1 cycle".into());
        }
        if self.banks == Some(0) {
            return bad("need at least one SLLC bank".into());
        }
        if self.addr_bits == 0 || self.addr_bits > 64 {
            return bad(format!(
                "address width must be in [1, 64], got {}",
                self.addr_bits
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for cores in 1..=4 {
            HierarchyConfig::three_level(cores).unwrap();
            HierarchyConfig::two_level(cores).unwrap();
            HierarchyConfig::small(cores).unwrap();
        }
        let c = HierarchyConfig::three_level(4).unwrap();
        assert_eq!(c.sllc.geometry.capacity_bytes(), 4 << 20);
        assert_eq!(c.bank_count(), 4);
        assert_eq!(
            HierarchyConfig::three_level(3)
                .unwrap()
                .sllc
                .geometry
                .capacity_bytes(),
            4 << 20
        );
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut c = HierarchyConfig::small(1).unwrap();
        c.rd = None;
        assert!(c
            .clone()
            .with_policy(Policy::ReuseDetector)
            .validate()
            .is_err());
        assert!(c.clone().with_policy(Policy::Baseline).validate().is_ok());
        let mut c = HierarchyConfig::small(1).unwrap();
        c.cores = 0;
        assert!(c.validate().is_err());
        let mut c = HierarchyConfig::small(1).unwrap();
        c.sllc.geometry.block_bytes = 128;
        assert!(c.validate().is_err());
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("lru".parse::<Policy>().is_err());
    }
}
