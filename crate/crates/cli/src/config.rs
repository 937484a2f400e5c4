//! Run configuration: read from TOML, overridden by command-line flags and
//! echoed back as `effective_config.toml`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rdsim::{EnergyParams, HierarchyConfig, Policy, RdConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Small,
    TwoLevel,
    #[default]
    ThreeLevel,
}

impl Preset {
    pub fn build(self, cores: usize) -> Result<HierarchyConfig> {
        Ok(match self {
            Preset::Small => HierarchyConfig::small(cores)?,
            Preset::TwoLevel => HierarchyConfig::two_level(cores)?,
            Preset::ThreeLevel => HierarchyConfig::three_level(cores)?,
        })
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "small" => Ok(Preset::Small),
            "two-level" => Ok(Preset::TwoLevel),
            "three-level" => Ok(Preset::ThreeLevel),
            _ => Err(format!(
                "unknown preset {s:?} (small, two-level, three-level)"
            )),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Small => "small",
            Preset::TwoLevel => "two-level",
            Preset::ThreeLevel => "three-level",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Technology {
    #[default]
    SttRam,
    Sram,
}

impl FromStr for Technology {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "stt-ram" => Ok(Technology::SttRam),
            "sram" => Ok(Technology::Sram),
            _ => Err(format!("unknown technology {s:?} (stt-ram, sram)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    /// Core count for preset hierarchies; taken from each trace when unset.
    pub cores: Option<usize>,
    pub policies: Vec<Policy>,
    pub traces: Vec<PathBuf>,
    /// Mix manifest written by `rdsim mix`; needs `pool`.
    pub mixes: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub rd_entries: Vec<u64>,
    pub rd_ways: usize,
    pub c_bits: Vec<u32>,
    pub sector_blocks: u64,
    pub technology: Technology,
    /// Overrides the SLLC miss energy (defaults to the read energy).
    pub miss_energy_nj: Option<f64>,
    pub bank_contention: Option<bool>,
    pub mm_cycles: Option<u32>,
    pub touch_on_update: Option<bool>,
    pub dasca_threshold: Option<u8>,
    pub weighted_speedup: bool,
    pub snapshots: bool,
    pub out: PathBuf,
    /// Full hierarchy description; replaces the preset when present.
    pub hierarchy: Option<HierarchyConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: Preset::default(),
            cores: None,
            policies: vec![Policy::Baseline, Policy::ReuseDetector],
            traces: Vec::new(),
            mixes: None,
            pool: None,
            rd_entries: vec![8192],
            rd_ways: 16,
            c_bits: vec![10],
            sector_blocks: 2,
            technology: Technology::default(),
            miss_energy_nj: None,
            bank_contention: None,
            mm_cycles: None,
            touch_on_update: None,
            dasca_threshold: None,
            weighted_speedup: true,
            snapshots: false,
            out: PathBuf::from("rdsim-out"),
            hierarchy: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| CliError::failure(format!("cannot serialise config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.policies.is_empty() {
            return Err(CliError::usage("no policies to run"));
        }
        if self.traces.is_empty() && self.mixes.is_none() {
            return Err(CliError::usage("no traces or mixes to run"));
        }
        if self.mixes.is_some() != self.pool.is_some() {
            return Err(CliError::usage("--mixes and --pool go together"));
        }
        if self.rd_entries.is_empty() || self.c_bits.is_empty() {
            return Err(CliError::usage(
                "RD sweeps need at least one entry count and tag width",
            ));
        }
        Ok(())
    }

    /// Hierarchy for one run.
    pub fn hierarchy_for(
        &self,
        cores: usize,
        policy: Policy,
        rd_entries: u64,
        c_bits: u32,
    ) -> Result<HierarchyConfig> {
        let mut cfg = match &self.hierarchy {
            Some(h) => h.clone(),
            None => self.preset.build(self.cores.unwrap_or(cores))?,
        };
        cfg.policy = policy;
        cfg.rd = Some(RdConfig::with_entries(
            rd_entries,
            self.rd_ways,
            Some(c_bits),
            self.sector_blocks,
            cfg.block_bytes(),
            cfg.addr_bits,
        )?);
        if let Some(b) = self.bank_contention {
            cfg.bank_contention = b;
        }
        if let Some(mm) = self.mm_cycles {
            cfg.mm_cycles = mm;
        }
        if let Some(t) = self.touch_on_update {
            cfg.touch_on_update = t;
        }
        if let Some(t) = self.dasca_threshold {
            cfg.dasca.threshold = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn energy_for(&self, cfg: &HierarchyConfig) -> Result<EnergyParams> {
        let banks = cfg.bank_count();
        let mut e = match self.technology {
            Technology::SttRam => EnergyParams::stt_ram(banks),
            Technology::Sram => EnergyParams::sram(banks),
        };
        if let Some(me) = self.miss_energy_nj {
            e.miss_energy_nj = me;
        }
        e.validate()?;
        Ok(e)
    }
}
