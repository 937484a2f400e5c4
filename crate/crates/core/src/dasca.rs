//! DASCA-lite: a PC-signature dead-write predictor used as the comparison
//! bypass policy.
//!
//! This is an approximation, not the published predictor. The signature hash,
//! the training rule, the sampler size and the counter initialisation are
//! local choices:
//!
//! * signature = low `sig_bits` of `pc ^ (pc >> sig_bits)`;
//! * one 2-bit saturating counter per signature, initialised to 0 (live);
//! * a sampler shadows every `stride`-th SLLC set. Every private-level
//!   eviction mapping to a sampled set is recorded there with its signature,
//!   whether or not the real SLLC accepts it. A demand access that finds the
//!   block in the sampler trains its signature live (-1); a sampler entry
//!   evicted without such an access trains its signature dead (+1);
//! * a write is predicted dead when its counter is `>= threshold`.

use serde::{Deserialize, Serialize};

use crate::addr::BlockAddr;
use crate::error::ConfigError;

pub const COUNTER_MAX: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DascaConfig {
    pub sig_bits: u32,
    pub threshold: u8,
    pub sampler_sets: u64,
    pub sampler_ways: usize,
}

impl Default for DascaConfig {
    fn default() -> Self {
        DascaConfig {
            sig_bits: 16,
            threshold: 2,
            sampler_sets: 32,
            sampler_ways: 16,
        }
    }
}

impl DascaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sig_bits == 0 || self.sig_bits > 24 {
            return Err(ConfigError::Invalid(format!(
                "DASCA signature width must be in [1, 24], got {}",
                self.sig_bits
            )));
        }
        if self.sampler_sets == 0 || self.sampler_ways == 0 {
            return Err(ConfigError::Invalid(
                "DASCA sampler needs >= 1 set and way".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature(pub u32);

impl Signature {
    pub fn of_pc(pc: u64, sig_bits: u32) -> Self {
        let mask = (1u64 << sig_bits) - 1;
        Signature(((pc ^ (pc >> sig_bits)) & mask) as u32)
    }
}

/// Saturating-counter table indexed by signature.
#[derive(Debug, Clone)]
pub struct PredictorTable {
    counters: Vec<u8>,
    threshold: u8,
}

impl PredictorTable {
    pub fn new(sig_bits: u32, threshold: u8) -> Self {
        PredictorTable {
            counters: vec![0; 1 << sig_bits],
            threshold,
        }
    }

    pub fn counter(&self, sig: Signature) -> u8 {
        self.counters[sig.0 as usize]
    }

    pub fn predict_dead(&self, sig: Signature) -> bool {
        self.counter(sig) >= self.threshold
    }

    pub fn train_dead(&mut self, sig: Signature) {
        let c = &mut self.counters[sig.0 as usize];
        *c = (*c + 1).min(COUNTER_MAX);
    }

    pub fn train_live(&mut self, sig: Signature) {
        let c = &mut self.counters[sig.0 as usize];
        *c = c.saturating_sub(1);
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    /// Number of counters at each value 0..=3.
    pub fn histogram(&self) -> [u64; 4] {
        let mut h = [0; 4];
        for &c in &self.counters {
            h[c as usize] += 1;
        }
        h
    }
}

#[derive(Debug, Clone, Copy)]
struct SamplerEntry {
    block: BlockAddr,
    sig: Signature,
    reused: bool,
    stamp: u64,
}

/// Sampler plus predictor table, owned by one hierarchy.
#[derive(Debug, Clone)]
pub struct DascaPredictor {
    cfg: DascaConfig,
    table: PredictorTable,
    sllc_sets: u64,
    stride: u64,
    sampler: Vec<Vec<SamplerEntry>>,
    clock: u64,
}

impl DascaPredictor {
    pub fn new(cfg: DascaConfig, sllc_sets: u64) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let sampled = cfg.sampler_sets.min(sllc_sets).max(1);
        Ok(DascaPredictor {
            cfg,
            table: PredictorTable::new(cfg.sig_bits, cfg.threshold),
            sllc_sets,
            stride: sllc_sets / sampled,
            sampler: vec![Vec::new(); sampled as usize],
            clock: 0,
        })
    }

    pub fn config(&self) -> &DascaConfig {
        &self.cfg
    }

    pub fn table(&self) -> &PredictorTable {
        &self.table
    }

    pub fn signature(&self, pc: u64) -> Signature {
        Signature::of_pc(pc, self.cfg.sig_bits)
    }

    pub fn predict_dead(&self, sig: Signature) -> bool {
        self.table.predict_dead(sig)
    }

    fn sampler_index(&self, block: BlockAddr) -> Option<usize> {
        let set = block.0 % self.sllc_sets;
        set.is_multiple_of(self.stride)
            .then(|| (set / self.stride) as usize)
            .filter(|&i| i < self.sampler.len())
    }

    /// A demand access reached the SLLC (hit or miss in the real array).
    pub fn observe_demand(&mut self, block: BlockAddr) {
        let Some(i) = self.sampler_index(block) else {
            return;
        };
        self.clock += 1;
        let stamp = self.clock;
        if let Some(e) = self.sampler[i].iter_mut().find(|e| e.block == block) {
            e.reused = true;
            e.stamp = stamp;
            let sig = e.sig;
            self.table.train_live(sig);
        }
    }

    /// A private-level eviction carrying `sig` is headed to the SLLC.
    pub fn observe_write(&mut self, block: BlockAddr, sig: Signature) {
        let Some(i) = self.sampler_index(block) else {
            return;
        };
        self.clock += 1;
        let stamp = self.clock;
        let ways = self.cfg.sampler_ways;
        let set = &mut self.sampler[i];
        if let Some(e) = set.iter_mut().find(|e| e.block == block) {
            e.sig = sig;
            e.reused = false;
            e.stamp = stamp;
            return;
        }
        if set.len() == ways {
            let lru = set
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| e.stamp)
                .map(|(w, _)| w)
                .expect("full set");
            let victim = set.swap_remove(lru);
            if !victim.reused {
                self.table.train_dead(victim.sig);
            }
        }
        self.sampler[i].push(SamplerEntry {
            block,
            sig,
            reused: false,
            stamp,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_table_predicts_live() {
        let t = PredictorTable::new(8, 2);
        assert!((0..256).all(|s| !t.predict_dead(Signature(s))));
        assert_eq!(t.len(), 256);
    }

    #[test]
    fn counter_arithmetic() {
        let mut t = PredictorTable::new(4, 2);
        let s = Signature(3);
        t.train_dead(s);
        assert!(!t.predict_dead(s));
        t.train_dead(s);
        assert!(t.predict_dead(s));
        t.train_live(s);
        t.train_live(s);
        assert!(!t.predict_dead(s));
        t.train_live(s);
        assert_eq!(t.counter(s), 0);
        for _ in 0..5 {
            t.train_dead(s);
        }
        assert_eq!(t.counter(s), 3);
        assert_eq!(t.histogram(), [15, 0, 0, 1]);
    }

    #[test]
    fn unreachable_threshold_never_bypasses() {
        let mut t = PredictorTable::new(4, 4);
        for _ in 0..10 {
            t.train_dead(Signature(1));
        }
        assert!(!t.predict_dead(Signature(1)));
    }

    #[test]
    fn signature_folds_high_bits() {
        assert_eq!(Signature::of_pc(0x1_0001, 16), Signature(0));
        assert_eq!(Signature::of_pc(0x40_0004, 16), Signature(0x44));
    }

    fn pred(ways: usize) -> DascaPredictor {
        DascaPredictor::new(
            DascaConfig {
                sig_bits: 8,
                threshold: 2,
                sampler_sets: 1,
                sampler_ways: ways,
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn write_then_evict_trains_dead() {
        let mut p = pred(1);
        let sig = Signature(5);
        p.observe_write(BlockAddr(1), sig);
        p.observe_write(BlockAddr(2), Signature(6));
        assert_eq!(p.table().counter(sig), 1);
    }

    #[test]
    fn read_hit_trains_live() {
        let mut p = pred(1);
        let sig = Signature(5);
        p.observe_write(BlockAddr(1), sig);
        p.observe_write(BlockAddr(2), sig);
        p.observe_write(BlockAddr(3), sig);
        assert_eq!(p.table().counter(sig), 2);
        p.observe_demand(BlockAddr(3));
        assert_eq!(p.table().counter(sig), 1);
        // a reused entry leaving the sampler is not dead
        p.observe_write(BlockAddr(4), sig);
        assert_eq!(p.table().counter(sig), 1);
    }

    #[test]
    fn only_sampled_sets_train() {
        let mut p = DascaPredictor::new(
            DascaConfig {
                sig_bits: 8,
                threshold: 2,
                sampler_sets: 2,
                sampler_ways: 1,
            },
            8,
        )
        .unwrap();
        // stride 4: sets 0 and 4 are sampled
        for b in [1u64, 2, 3, 5, 9, 10] {
            p.observe_write(BlockAddr(b), Signature(1));
        }
        assert_eq!(p.table().counter(Signature(1)), 0);
        p.observe_write(BlockAddr(4), Signature(1));
        p.observe_write(BlockAddr(12), Signature(1));
        assert_eq!(p.table().counter(Signature(1)), 1);
    }
}
