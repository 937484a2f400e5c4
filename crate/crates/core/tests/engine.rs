use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rdsim::addr::BlockAddr;
use rdsim::hierarchy::{EvictAction, EvictionRecord, ServedFrom};
use rdsim::trace::{gen_synthetic, random_trace, GeneratorSpec};
use rdsim::{AccessEvent, AccessKind, Hierarchy, HierarchyConfig, Policy, RdConfig};

fn small(cores: usize, policy: Policy, with_l2: bool) -> HierarchyConfig {
    let mut cfg = HierarchyConfig::small(cores).unwrap().with_policy(policy);
    if !with_l2 {
        cfg.l2 = None;
    }
    cfg
}

fn synth(spec: &str, seed: u64) -> Vec<AccessEvent> {
    gen_synthetic(&spec.parse::<GeneratorSpec>().unwrap(), seed).unwrap()
}

/// RD decisions implied by an unbounded, exact RD: a block is kept when its
/// reuse bit is set or when the same core bypassed it before.
fn oracle_keeps(log: &[EvictionRecord]) -> Vec<bool> {
    let mut seen: HashSet<(usize, BlockAddr)> = HashSet::new();
    log.iter()
        .map(|r| {
            let keep = r.reuse || seen.contains(&(r.core, r.block));
            if !r.reuse {
                seen.insert((r.core, r.block));
            }
            keep
        })
        .collect()
}

/// An RD big enough to never displace an entry for the given trace.
fn unbounded_rd(trace: &[AccessEvent], block_bytes: u64) -> RdConfig {
    let sectors: HashSet<u64> = trace.iter().map(|e| e.addr / block_bytes / 2).collect();
    let sets = (sectors.len() as u64).next_power_of_two().max(1);
    let mut per_set: HashMap<u64, usize> = HashMap::new();
    for s in &sectors {
        *per_set.entry(s % sets).or_default() += 1;
    }
    let ways = per_set.values().copied().max().unwrap_or(1);
    RdConfig::with_entries(sets * ways as u64, ways, None, 2, block_bytes, 48).unwrap()
}

#[test]
fn latencies_follow_the_additive_model() {
    let cfg = small(1, Policy::Baseline, true);
    let mut h = Hierarchy::new(cfg).unwrap();
    let miss = h
        .handle_access(&AccessEvent::read(0, 0, 0x1000, 1))
        .unwrap();
    assert_eq!(miss.served_from, ServedFrom::Memory);
    assert_eq!(miss.latency_cycles, 2 + 5 + 3 + 6 + 200);
    let hit = h
        .handle_access(&AccessEvent::read(0, 0, 0x1008, 1))
        .unwrap();
    assert_eq!(hit.served_from, ServedFrom::L1);
    assert_eq!(hit.latency_cycles, 2);
    assert_eq!(h.core_clock(0), 1 + 216 + 1 + 2);
    assert_eq!(h.stats().elapsed_cycles, 220);
}

#[test]
fn peer_supply_sets_reuse_on_both_copies() {
    let cfg = small(2, Policy::ReuseDetector, true);
    let mut h = Hierarchy::new(cfg).unwrap();
    h.handle_access(&AccessEvent::write(0, 0, 0x40, 1)).unwrap();
    let out = h.handle_access(&AccessEvent::read(1, 0, 0x40, 1)).unwrap();
    assert_eq!(out.served_from, ServedFrom::Peer);
    assert_eq!(out.supplier, Some(0));
    // both cores reach the same bank at cycle 11; the second waits 6 cycles
    assert_eq!(out.latency_cycles, 2 + 5 + 3 + 6 + 6 + 3 + 5);
    assert_eq!(h.stats().cores[1].sllc_bank_stall_cycles, 6);
    let reuse = |core: usize| {
        h.l1(core)
            .iter_valid()
            .next()
            .map(|(_, _, l)| (l.reuse, l.dirty))
    };
    assert_eq!(reuse(0), Some((true, true)));
    assert_eq!(reuse(1), Some((true, false)));
    assert_eq!(h.directory().get(BlockAddr(1)).sharers, 0b11);
    assert_eq!(h.directory().get(BlockAddr(1)).dirty, 0b01);
    h.audit().unwrap();
}

#[test]
fn streaming_under_rd_never_writes_the_sllc() {
    let t = synth("stream:n=20000", 3);
    let mut h = Hierarchy::new(small(1, Policy::ReuseDetector, true)).unwrap();
    h.run(&t).unwrap();
    let s = h.stats().total();
    assert_eq!(s.sllc_inserts, 0);
    assert_eq!(s.sllc_writes, 0);
    assert!(s.bypasses > 0);
    let mut b = Hierarchy::new(small(1, Policy::Baseline, true)).unwrap();
    b.run(&t).unwrap();
    assert!(b.stats().total().sllc_inserts > 0);
}

#[test]
fn unreachable_dasca_threshold_matches_baseline() {
    let t = random_trace(11, 2, 20_000, 64);
    let mut cfg = small(2, Policy::DascaLite, true);
    cfg.dasca.threshold = 4;
    let mut d = Hierarchy::new(cfg).unwrap();
    d.run(&t).unwrap();
    let mut b = Hierarchy::new(small(2, Policy::Baseline, true)).unwrap();
    b.run(&t).unwrap();
    assert_eq!(d.stats(), b.stats());
    assert_eq!(d.snapshot(), b.snapshot());
}

#[test]
fn dasca_learns_to_bypass_dead_writers() {
    // one PC streams writes through, another keeps a loop live
    let t = synth("stream:n=30000,w=1,pcs=1", 5);
    let mut h = Hierarchy::new(small(1, Policy::DascaLite, true)).unwrap();
    h.run(&t).unwrap();
    assert!(h.stats().total().bypasses > 0);
    let hist = h.dasca_histogram().unwrap();
    assert!(hist[3] > 0);
}

#[test]
fn identical_runs_are_deterministic() {
    let t = random_trace(99, 3, 10_000, 64);
    for p in Policy::ALL {
        let run = || {
            let mut h = Hierarchy::new(small(3, p, true)).unwrap();
            h.run(&t).unwrap();
            (h.stats().clone(), h.snapshot())
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn rejects_out_of_range_events() {
    let mut h = Hierarchy::new(small(2, Policy::Baseline, true)).unwrap();
    assert!(h.handle_access(&AccessEvent::read(2, 0, 0, 1)).is_err());
    assert!(h
        .handle_access(&AccessEvent::read(0, 0, 1 << 50, 1))
        .is_err());
}

/// Blocks written by the trace must either still be dirty somewhere or have
/// reached memory after their last write.
fn check_dirty_conservation(
    h: &Hierarchy,
    trace: &[AccessEvent],
    block_bytes: u64,
) -> Result<(), String> {
    let mut last_write: HashMap<BlockAddr, u64> = HashMap::new();
    for (i, e) in trace.iter().enumerate() {
        if e.kind == AccessKind::Write {
            last_write.insert(BlockAddr(e.addr / block_bytes), i as u64);
        }
    }
    let log = h.log().unwrap();
    let mut last_mm: HashMap<BlockAddr, u64> = HashMap::new();
    for w in &log.memory_writes {
        last_mm.insert(w.block, w.event);
    }
    let sllc_dirty: HashSet<BlockAddr> = h
        .sllc()
        .iter_valid()
        .filter(|(_, _, l)| l.dirty)
        .map(|(s, _, l)| h.sllc().geometry().block_at(s, l.tag))
        .collect();
    for (b, at) in last_write {
        let private_dirty = h.directory().get(b).dirty != 0;
        let flushed = last_mm.get(&b).is_some_and(|&m| m > at);
        if !(private_dirty || sllc_dirty.contains(&b) || flushed) {
            return Err(format!("dirty data of block {:#x} lost", b.0));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn directory_and_arrays_stay_consistent(seed in any::<u64>(), cores in 1usize..=4, policy in 0usize..3, l2 in any::<bool>()) {
        let cfg = small(cores, Policy::ALL[policy], l2);
        let t = random_trace(seed, cores as u32, 3000, 64);
        let mut h = Hierarchy::new(cfg).unwrap();
        h.enable_log();
        for ev in &t {
            h.handle_access(ev).unwrap();
            if let Err(e) = h.audit() {
                return Err(TestCaseError::fail(format!("after event {}: {e}", h.events())));
            }
        }
        check_dirty_conservation(&h, &t, 64).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn private_levels_are_policy_independent(seed in any::<u64>(), cores in 1usize..=4) {
        let t = random_trace(seed, cores as u32, 5000, 64);
        let runs: Vec<_> = Policy::ALL
            .iter()
            .map(|&p| {
                let mut h = Hierarchy::new(small(cores, p, true)).unwrap();
                h.run(&t).unwrap();
                h.stats().clone()
            })
            .collect();
        for r in &runs[1..] {
            for (a, b) in runs[0].cores.iter().zip(&r.cores) {
                prop_assert_eq!(a.l1_hits, b.l1_hits);
                prop_assert_eq!(a.l2_hits, b.l2_hits);
                prop_assert_eq!(a.sllc_lookups(), b.sllc_lookups());
                prop_assert_eq!(a.private_evictions, b.private_evictions);
            }
        }
    }

    #[test]
    fn rd_decisions_match_the_reuse_oracle(seed in any::<u64>(), cores in 1usize..=4, l2 in any::<bool>()) {
        let t = random_trace(seed, cores as u32, 4000, 64);
        let mut cfg = small(cores, Policy::ReuseDetector, l2);
        cfg.rd = Some(unbounded_rd(&t, 64));
        let mut h = Hierarchy::new(cfg).unwrap();
        h.enable_log();
        h.run(&t).unwrap();
        let log = &h.log().unwrap().evictions;
        for (r, keep) in log.iter().zip(oracle_keeps(log)) {
            prop_assert_eq!(!r.outcome.bypassed, keep, "{:?}", r);
            if !keep {
                prop_assert!(matches!(r.outcome.action, EvictAction::BypassToMm | EvictAction::Discard));
            }
        }
    }

    #[test]
    fn compressed_tags_keep_at_least_the_oracle(seed in any::<u64>(), cores in 1usize..=3, c_bits in 1u32..8) {
        let t = random_trace(seed, cores as u32, 4000, 64);
        let exact = unbounded_rd(&t, 64);
        let mut cfg = small(cores, Policy::ReuseDetector, true);
        cfg.rd = Some(RdConfig::with_entries(exact.entries(), exact.ways, Some(c_bits), 2, 64, 48).unwrap());
        let mut h = Hierarchy::new(cfg).unwrap();
        h.enable_log();
        h.run(&t).unwrap();
        let log = &h.log().unwrap().evictions;
        for (r, keep) in log.iter().zip(oracle_keeps(log)) {
            if keep {
                prop_assert!(!r.outcome.bypassed, "{:?}", r);
            }
        }
    }
}
