//! Workload classification by SLLC writes per kilo-instruction and
//! construction of multiprogrammed mixes.
//!
//! Classes: High if WPKI >= 8, Medium if 1 <= WPKI < 8, Low below 1.
//!
//! Mix patterns name the class letters followed by per-class counts:
//! `H4` (four High workloads), `HL(2,2)`, `HML(1,1,2)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MetricsError, WorkloadError};
use crate::hierarchy::{simulate, HierarchyConfig, Policy};
use crate::trace::{interleave, AccessEvent};

pub const HIGH_WPKI: f64 = 8.0;
pub const MEDIUM_WPKI: f64 = 1.0;

/// Address offset separating the workloads of a mix: slot `i` is shifted by
/// `i << MIX_SLOT_SHIFT`.
pub const MIX_SLOT_SHIFT: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WpkiClass {
    High,
    Medium,
    Low,
}

impl WpkiClass {
    pub const ALL: [WpkiClass; 3] = [WpkiClass::High, WpkiClass::Medium, WpkiClass::Low];

    pub fn letter(self) -> char {
        match self {
            WpkiClass::High => 'H',
            WpkiClass::Medium => 'M',
            WpkiClass::Low => 'L',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'H' => Some(WpkiClass::High),
            'M' => Some(WpkiClass::Medium),
            'L' => Some(WpkiClass::Low),
            _ => None,
        }
    }
}

impl fmt::Display for WpkiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

pub fn classify(wpki: f64) -> WpkiClass {
    if wpki >= HIGH_WPKI {
        WpkiClass::High
    } else if wpki >= MEDIUM_WPKI {
        WpkiClass::Medium
    } else {
        WpkiClass::Low
    }
}

/// Moves every event onto core 0 so a trace can run on a single-core
/// hierarchy.
pub fn as_single_core(trace: &[AccessEvent]) -> Vec<AccessEvent> {
    trace
        .iter()
        .map(|e| AccessEvent { core: 0, ..*e })
        .collect()
}

/// SLLC writes per kilo-instruction of `trace` run alone under Baseline on a
/// single-core version of `cfg`.
pub fn measure_wpki(cfg: &HierarchyConfig, trace: &[AccessEvent]) -> Result<f64, WorkloadError> {
    let mut single = cfg.clone().with_policy(Policy::Baseline);
    if single.cores != 1 {
        single = HierarchyConfig {
            cores: 1,
            sllc: shrink_sllc(cfg)?,
            banks: None,
            ..single
        };
    }
    let stats = simulate(&single, &as_single_core(trace))?;
    let total = stats.total();
    if total.instructions == 0 {
        return Err(MetricsError::ZeroInstructions.into());
    }
    Ok(total.sllc_writes as f64 * 1000.0 / total.instructions as f64)
}

/// The SLLC share of one core: capacity divided by the (power-of-two
/// rounded) core count, same associativity.
fn shrink_sllc(cfg: &HierarchyConfig) -> Result<crate::cache::CacheConfig, WorkloadError> {
    let mut s = cfg.sllc;
    let scale = cfg.cores.next_power_of_two() as u64;
    s.geometry.sets = (s.geometry.sets / scale).max(1);
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub name: String,
    pub trace: String,
    pub wpki: f64,
    pub class: WpkiClass,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    pub workloads: Vec<PoolEntry>,
}

impl Pool {
    pub fn get(&self, name: &str) -> Option<&PoolEntry> {
        self.workloads.iter().find(|w| w.name == name)
    }
}

/// Per-class member counts of a mix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPattern {
    pub counts: Vec<(WpkiClass, usize)>,
}

impl MixPattern {
    pub fn letters(&self) -> String {
        self.counts.iter().map(|(c, _)| c.letter()).collect()
    }

    pub fn size(&self) -> usize {
        self.counts.iter().map(|(_, n)| n).sum()
    }
}

impl fmt::Display for MixPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters = self.letters();
        if let [(_, n)] = self.counts.as_slice() {
            return write!(f, "{letters}{n}");
        }
        let n: Vec<String> = self.counts.iter().map(|(_, n)| n.to_string()).collect();
        write!(f, "{letters}({})", n.join(","))
    }
}

impl FromStr for MixPattern {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |msg: &str| WorkloadError::Pattern {
            pattern: s.to_string(),
            msg: msg.to_string(),
        };
        let s = s.trim();
        let split = s
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(s.len());
        let (letters, rest) = s.split_at(split);
        if letters.is_empty() {
            return Err(err("expected class letters H, M or L"));
        }
        let mut classes = Vec::new();
        for ch in letters.chars() {
            let c =
                WpkiClass::from_letter(ch).ok_or_else(|| err("class letters must be H, M or L"))?;
            if classes.contains(&c) {
                return Err(err("class letter repeated"));
            }
            classes.push(c);
        }
        let counts: Vec<usize> = if classes.len() == 1 && !rest.starts_with('(') {
            vec![rest.parse().map_err(|_| err("expected a member count"))?]
        } else {
            let inner = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| err("expected counts in parentheses"))?;
            inner
                .split(',')
                .map(|n| n.trim().parse().map_err(|_| err("bad member count")))
                .collect::<Result<_, _>>()?
        };
        if counts.len() != classes.len() {
            return Err(err("one count per class letter"));
        }
        if counts.contains(&0) {
            return Err(err("counts must be positive"));
        }
        Ok(MixPattern {
            counts: classes.into_iter().zip(counts).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixSpec {
    pub name: String,
    pub members: Vec<String>,
    pub seed: u64,
    pub pattern: String,
}

/// Draws `count` mixes matching `pattern` from `pool`. Members of each mix
/// are sampled without replacement within their class and listed High,
/// Medium, Low, alphabetically within a class.
pub fn build_mixes(
    pool: &Pool,
    pattern: &MixPattern,
    count: usize,
    seed: u64,
) -> Result<Vec<MixSpec>, WorkloadError> {
    let mut by_class: BTreeMap<WpkiClass, Vec<&str>> = BTreeMap::new();
    for w in &pool.workloads {
        by_class.entry(w.class).or_default().push(&w.name);
    }
    for names in by_class.values_mut() {
        names.sort_unstable();
    }
    let shortfall: Vec<String> = pattern
        .counts
        .iter()
        .filter_map(|&(c, need)| {
            let have = by_class.get(&c).map_or(0, Vec::len);
            (have < need).then(|| format!("need {need} {c}, have {have}"))
        })
        .collect();
    if !shortfall.is_empty() {
        return Err(WorkloadError::InsufficientPool {
            pattern: pattern.to_string(),
            shortfall: shortfall.join("; "),
        });
    }
    let mut classes = pattern.counts.clone();
    classes.sort_by_key(|(c, _)| *c);
    let mut mixes = Vec::with_capacity(count);
    for i in 0..count {
        let mix_seed = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed);
        let mut members = Vec::with_capacity(pattern.size());
        for &(c, n) in &classes {
            let mut picked: Vec<&str> =
                by_class[&c].choose_multiple(&mut rng, n).copied().collect();
            picked.sort_unstable();
            members.extend(picked.into_iter().map(String::from));
        }
        mixes.push(MixSpec {
            name: format!("mix.{}{i}", pattern.letters()),
            members,
            seed: mix_seed,
            pattern: pattern.to_string(),
        });
    }
    Ok(mixes)
}

/// Interleaves member traces onto cores `0..n`, shifting slot `i`'s
/// addresses by `i << MIX_SLOT_SHIFT` so members never share data.
pub fn build_mix_trace(members: &[Vec<AccessEvent>]) -> Vec<AccessEvent> {
    let shifted: Vec<Vec<AccessEvent>> = members
        .iter()
        .enumerate()
        .map(|(slot, t)| {
            let off = (slot as u64) << MIX_SLOT_SHIFT;
            t.iter()
                .map(|e| AccessEvent {
                    addr: e.addr + off,
                    ..*e
                })
                .collect()
        })
        .collect();
    interleave(&shifted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{gen_synthetic, GeneratorSpec};

    #[test]
    fn class_boundaries() {
        assert_eq!(classify(0.0), WpkiClass::Low);
        assert_eq!(classify(0.999), WpkiClass::Low);
        assert_eq!(classify(1.0), WpkiClass::Medium);
        assert_eq!(classify(7.999), WpkiClass::Medium);
        assert_eq!(classify(8.0), WpkiClass::High);
        assert_eq!(classify(120.0), WpkiClass::High);
    }

    #[test]
    fn pattern_parsing() {
        let p: MixPattern = "H4".parse().unwrap();
        assert_eq!(p.counts, vec![(WpkiClass::High, 4)]);
        assert_eq!(p.to_string(), "H4");
        let p: MixPattern = "HML(1,1,2)".parse().unwrap();
        assert_eq!(p.size(), 4);
        assert_eq!(p.to_string(), "HML(1,1,2)");
        assert_eq!("HL(2,2)".parse::<MixPattern>().unwrap().letters(), "HL");
        for bad in ["", "X4", "HH(1,1)", "HL(2)", "H", "HL(2,0)", "HL 2,2"] {
            assert!(bad.parse::<MixPattern>().is_err(), "{bad}");
        }
    }

    fn pool(h: usize, m: usize, l: usize) -> Pool {
        let mut workloads = Vec::new();
        for (class, n) in [
            (WpkiClass::High, h),
            (WpkiClass::Medium, m),
            (WpkiClass::Low, l),
        ] {
            for i in 0..n {
                workloads.push(PoolEntry {
                    name: format!("{}{i}", class.letter().to_ascii_lowercase()),
                    trace: String::new(),
                    wpki: 0.0,
                    class,
                });
            }
        }
        Pool { workloads }
    }

    #[test]
    fn mixes_follow_the_pattern() {
        let p = pool(4, 1, 3);
        let pat: MixPattern = "HL(2,2)".parse().unwrap();
        let mixes = build_mixes(&p, &pat, 5, 7).unwrap();
        assert_eq!(mixes.len(), 5);
        for (i, m) in mixes.iter().enumerate() {
            assert_eq!(m.name, format!("mix.HL{i}"));
            assert_eq!(m.members.len(), 4);
            let classes: Vec<WpkiClass> =
                m.members.iter().map(|n| p.get(n).unwrap().class).collect();
            assert_eq!(
                classes,
                [
                    WpkiClass::High,
                    WpkiClass::High,
                    WpkiClass::Low,
                    WpkiClass::Low
                ]
            );
            assert!(m.members[0] < m.members[1] && m.members[2] < m.members[3]);
        }
        assert_eq!(mixes, build_mixes(&p, &pat, 5, 7).unwrap());
    }

    #[test]
    fn insufficient_pool_reports_shortfall() {
        let err = build_mixes(&pool(4, 0, 1), &"HL(2,2)".parse().unwrap(), 1, 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("need 2 L, have 1"), "{msg}");
    }

    #[test]
    fn mix_trace_separates_slots() {
        let t = gen_synthetic(&"stream:n=10".parse::<GeneratorSpec>().unwrap(), 1).unwrap();
        let mix = build_mix_trace(&[t.clone(), t]);
        assert_eq!(mix.len(), 20);
        for e in &mix {
            assert_eq!(e.addr >> MIX_SLOT_SHIFT, u64::from(e.core));
        }
    }

    #[test]
    fn stream_is_low_wpki_free_of_writes() {
        let cfg = HierarchyConfig::small(1).unwrap();
        let t = gen_synthetic(&"stream:n=2000".parse::<GeneratorSpec>().unwrap(), 1).unwrap();
        // a read-only stream still inserts every evicted block under Baseline
        let w = measure_wpki(&cfg, &t).unwrap();
        assert!(w > 0.0);
        let loop_small =
            gen_synthetic(&"loop:ws=8,passes=50".parse::<GeneratorSpec>().unwrap(), 1).unwrap();
        assert_eq!(measure_wpki(&cfg, &loop_small).unwrap(), 0.0);
        assert_eq!(classify(0.0), WpkiClass::Low);
    }
}
