//! Step-by-step reference scenario for the RD policy on a tiny two-core
//! hierarchy, with the expected state after every access.
//!
//! The hierarchy has a direct-mapped single-line L1 per core, no L2, a
//! 1-set 2-way RD per core and a 1-set 4-way SLLC. Blocks `A`..`E` sit in
//! distinct RD sectors. The sequence exercises private-to-private supply, the
//! reuse bit, RD training, an RD-hit insertion and a dirty update.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::addr::{BlockAddr, Geometry, RdTagConfig, DEFAULT_ADDR_BITS};
use crate::cache::CacheConfig;
use crate::error::SimError;
use crate::hierarchy::{Hierarchy, HierarchyConfig, HierarchySnapshot, Policy};
use crate::rd::RdConfig;
use crate::trace::AccessEvent;

pub const BLOCK_BYTES: u64 = 64;
const NAMES: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

/// Block number of a named block (`A` = 0, `B` = 2, ...).
pub fn block_of(name: char) -> BlockAddr {
    let i = NAMES
        .iter()
        .position(|&n| n == name)
        .expect("golden block name");
    BlockAddr(2 * i as u64)
}

fn name_of(block: u64) -> char {
    if block.is_multiple_of(2) && ((block / 2) as usize) < NAMES.len() {
        NAMES[(block / 2) as usize]
    } else {
        '?'
    }
}

pub fn golden_config() -> HierarchyConfig {
    let mut cfg = HierarchyConfig::two_level(2).expect("preset is valid");
    let one_line = |ways| Geometry::new(BLOCK_BYTES, 1, ways).expect("valid geometry");
    cfg.l1 = CacheConfig::new(one_line(1), 2, 2).expect("valid cache");
    cfg.sllc = CacheConfig::new(one_line(4), 6, 17).expect("valid cache");
    let t = DEFAULT_ADDR_BITS - 6 - 1;
    cfg.rd = Some(RdConfig {
        sets: 1,
        ways: 2,
        tag: RdTagConfig::new(t, t, 2).expect("valid tag config"),
    });
    cfg.policy = Policy::ReuseDetector;
    cfg
}

pub fn golden_trace() -> Vec<AccessEvent> {
    let ev = |core: u32, write: bool, name: char| {
        let addr = block_of(name).byte_addr(BLOCK_BYTES);
        if write {
            AccessEvent::write(core, 0x400, addr, 1)
        } else {
            AccessEvent::read(core, 0x400, addr, 1)
        }
    };
    vec![
        ev(0, false, 'A'),
        ev(1, false, 'A'),
        ev(1, false, 'B'),
        ev(1, false, 'C'),
        ev(1, false, 'B'),
        ev(1, false, 'D'),
        ev(0, true, 'A'),
        ev(0, false, 'E'),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateLine {
    pub block: char,
    pub dirty: bool,
    pub reuse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedLine {
    pub block: char,
    pub dirty: bool,
}

/// Contents of the scenario's arrays, lines in way order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Panel {
    pub l1: Vec<Option<PrivateLine>>,
    pub sllc: Vec<SharedLine>,
    pub rd: Vec<Vec<char>>,
    pub mm_writes: u64,
}

impl Panel {
    pub fn from_snapshot(snap: &HierarchySnapshot) -> Self {
        let l1 = snap
            .cores
            .iter()
            .map(|c| {
                c.l1.iter()
                    .flat_map(|s| &s.lines)
                    .next()
                    .map(|l| PrivateLine {
                        block: name_of(l.block),
                        dirty: l.dirty,
                        reuse: l.reuse,
                    })
            })
            .collect();
        let sllc = snap
            .sllc
            .iter()
            .flat_map(|s| &s.lines)
            .map(|l| SharedLine {
                block: name_of(l.block),
                dirty: l.dirty,
            })
            .collect();
        // One RD set, exact tags: the tag is the sector, the block is its
        // first (and only used) slot.
        let rd = snap
            .cores
            .iter()
            .map(|c| {
                c.rd.iter()
                    .flatten()
                    .map(|e| {
                        let slot = e.presence.trailing_zeros() as u64;
                        name_of(e.ctag * 2 + slot)
                    })
                    .collect()
            })
            .collect();
        Panel {
            l1,
            sllc,
            rd,
            mm_writes: snap.mm_writes,
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.l1.iter().enumerate() {
            match l {
                Some(l) => write!(
                    f,
                    "L1[{i}]={}({},{}) ",
                    l.block,
                    u8::from(l.dirty),
                    u8::from(l.reuse)
                )?,
                None => write!(f, "L1[{i}]=- ")?,
            }
        }
        write!(f, "SLLC=[")?;
        for (i, l) in self.sllc.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}{}", l.block, u8::from(l.dirty))?;
        }
        write!(f, "]")?;
        for (i, r) in self.rd.iter().enumerate() {
            write!(
                f,
                " RD[{i}]=[{}]",
                r.iter().map(char::to_string).collect::<Vec<_>>().join(",")
            )?;
        }
        write!(f, " MMw={}", self.mm_writes)
    }
}

fn pl(block: char, dirty: bool, reuse: bool) -> Option<PrivateLine> {
    Some(PrivateLine {
        block,
        dirty,
        reuse,
    })
}

fn sl(spec: &[(char, bool)]) -> Vec<SharedLine> {
    spec.iter()
        .map(|&(block, dirty)| SharedLine { block, dirty })
        .collect()
}

/// Expected state after each of the eight accesses.
pub fn expected_panels() -> Vec<Panel> {
    let panel = |l0, l1, sllc: &[(char, bool)], rd1: &[char]| Panel {
        l1: vec![l0, l1],
        sllc: sl(sllc),
        rd: vec![Vec::new(), rd1.to_vec()],
        mm_writes: 0,
    };
    vec![
        panel(pl('A', false, false), None, &[], &[]),
        panel(pl('A', false, true), pl('A', false, true), &[], &[]),
        panel(
            pl('A', false, true),
            pl('B', false, false),
            &[('A', false)],
            &[],
        ),
        panel(
            pl('A', false, true),
            pl('C', false, false),
            &[('A', false)],
            &['B'],
        ),
        panel(
            pl('A', false, true),
            pl('B', false, false),
            &[('A', false)],
            &['B', 'C'],
        ),
        panel(
            pl('A', false, true),
            pl('D', false, false),
            &[('A', false), ('B', false)],
            &['B', 'C'],
        ),
        panel(
            pl('A', true, true),
            pl('D', false, false),
            &[('A', false), ('B', false)],
            &['B', 'C'],
        ),
        panel(
            pl('E', false, false),
            pl('D', false, false),
            &[('A', true), ('B', false)],
            &['B', 'C'],
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    /// 1-based access number.
    pub access: usize,
    pub expected: Panel,
    pub actual: Panel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub panels: Vec<Panel>,
    pub first_mismatch: Option<Mismatch>,
}

impl GoldenReport {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Replays the scenario on `cfg` and compares every intermediate state.
pub fn replay(cfg: &HierarchyConfig) -> Result<GoldenReport, SimError> {
    let mut h = Hierarchy::new(cfg.clone())?;
    let expected = expected_panels();
    let mut panels = Vec::new();
    let mut first_mismatch = None;
    for (i, ev) in golden_trace().iter().enumerate() {
        h.handle_access(ev)?;
        let actual = Panel::from_snapshot(&h.snapshot());
        if first_mismatch.is_none() && actual != expected[i] {
            first_mismatch = Some(Mismatch {
                access: i + 1,
                expected: expected[i].clone(),
                actual: actual.clone(),
            });
        }
        panels.push(actual);
    }
    Ok(GoldenReport {
        panels,
        first_mismatch,
    })
}
