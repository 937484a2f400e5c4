//! Synthetic trace generators standing in for real benchmark traces.
//!
//! Generators are described by a compact string, e.g. `stream:n=4`,
//! `loop:ws=2,passes=3`, `mixed:p=0.3,n=1000,d=256` or
//! `random:cores=4,n=10000`. Common keys: `core`, `base` (hex or decimal byte
//! address), `block` (bytes), `w` (write fraction), `ipa` (mean instructions
//! per access), `pcs` (distinct program counters).

use std::collections::VecDeque;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AccessEvent, AccessKind};
use crate::error::ConfigError;

const PC_BASE: u64 = 0x40_0000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Pattern {
    /// Every block touched exactly once.
    Stream { blocks: u64 },
    /// A working set swept `passes` times in the same order.
    Loop { working_set: u64, passes: u32 },
    /// `blocks` new blocks streamed; a fraction `p` of them is touched once
    /// more after `distance` further new blocks.
    Mixed { p: f64, blocks: u64, distance: u64 },
    /// Multi-core fuzzing corpus: a random generator per core, some cores
    /// sharing an address region.
    Random { cores: u32, max_events: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub core: u32,
    pub base: u64,
    pub block_bytes: u64,
    pub write_ratio: f64,
    pub instructions_per_access: u32,
    pub pcs: u32,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            core: 0,
            base: 0,
            block_bytes: 64,
            write_ratio: 0.0,
            instructions_per_access: 4,
            pcs: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub pattern: Pattern,
    pub opts: GenOptions,
}

impl GeneratorSpec {
    pub fn new(pattern: Pattern) -> Self {
        GeneratorSpec {
            pattern,
            opts: GenOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        match self.pattern {
            Pattern::Stream { blocks: 0 } => return bad("stream needs n >= 1".into()),
            Pattern::Loop {
                working_set,
                passes,
            } => {
                if working_set == 0 {
                    return bad("loop needs ws >= 1".into());
                }
                if passes < 2 {
                    return bad(format!("loop needs passes >= 2, got {passes}"));
                }
            }
            Pattern::Mixed {
                p,
                blocks,
                distance,
            } => {
                if !(0.0..=1.0).contains(&p) {
                    return bad(format!("mixed needs 0 <= p <= 1, got {p}"));
                }
                if blocks == 0 || distance == 0 {
                    return bad("mixed needs n >= 1 and d >= 1".into());
                }
            }
            Pattern::Random { cores, max_events } => {
                if cores == 0 || cores > 64 || max_events == 0 {
                    return bad("random needs 1 <= cores <= 64 and n >= 1".into());
                }
            }
            Pattern::Stream { .. } => {}
        }
        let o = &self.opts;
        if !(0.0..=1.0).contains(&o.write_ratio) {
            return bad(format!(
                "write fraction must be in [0, 1], got {}",
                o.write_ratio
            ));
        }
        if !o.block_bytes.is_power_of_two() {
            return bad(format!(
                "block must be a power of two, got {}",
                o.block_bytes
            ));
        }
        if o.instructions_per_access == 0 || o.pcs == 0 {
            return bad("ipa and pcs must be >= 1".into());
        }
        Ok(())
    }
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| ConfigError::Invalid(format!("bad value for {key}: {v:?}")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::Invalid(format!("bad value for {key}: {v:?}")))
}

impl FromStr for GeneratorSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut opts = GenOptions::default();
        let (mut n, mut ws, mut passes, mut p, mut d, mut cores) =
            (None, None, None, None, None, None);
        for kv in args.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("expected key=value, got {kv:?}")))?;
            match k.trim() {
                "n" => n = Some(parse_u64(k, v)?),
                "ws" => ws = Some(parse_u64(k, v)?),
                "passes" => passes = Some(parse_u64(k, v)? as u32),
                "p" => p = Some(parse_f64(k, v)?),
                "d" => d = Some(parse_u64(k, v)?),
                "cores" => cores = Some(parse_u64(k, v)? as u32),
                "core" => opts.core = parse_u64(k, v)? as u32,
                "base" => opts.base = parse_u64(k, v)?,
                "block" => opts.block_bytes = parse_u64(k, v)?,
                "w" => opts.write_ratio = parse_f64(k, v)?,
                "ipa" => opts.instructions_per_access = parse_u64(k, v)? as u32,
                "pcs" => opts.pcs = parse_u64(k, v)? as u32,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown generator key {other:?}"
                    )))
                }
            }
        }
        let need = |v: Option<u64>, key: &str| {
            v.ok_or_else(|| ConfigError::Invalid(format!("{name} generator needs {key}=")))
        };
        let pattern = match name {
            "stream" => Pattern::Stream {
                blocks: need(n, "n")?,
            },
            "loop" => Pattern::Loop {
                working_set: need(ws, "ws")?,
                passes: passes.unwrap_or(2),
            },
            "mixed" => Pattern::Mixed {
                p: p.ok_or_else(|| ConfigError::Invalid("mixed generator needs p=".into()))?,
                blocks: need(n, "n")?,
                distance: d.unwrap_or(8192),
            },
            "random" => Pattern::Random {
                cores: cores.unwrap_or(1),
                max_events: need(n, "n")? as usize,
            },
            other => return Err(ConfigError::Invalid(format!("unknown generator {other:?}"))),
        };
        let spec = GeneratorSpec { pattern, opts };
        spec.validate()?;
        Ok(spec)
    }
}

/// Emits events for a sequence of block indices.
struct Emitter<'a> {
    opts: &'a GenOptions,
    rng: ChaCha8Rng,
    out: Vec<AccessEvent>,
}

impl Emitter<'_> {
    fn emit(&mut self, block_index: u64) {
        let o = self.opts;
        let kind = if o.write_ratio > 0.0 && self.rng.gen_bool(o.write_ratio) {
            AccessKind::Write
        } else {
            AccessKind::Read
        };
        let ipa = o.instructions_per_access;
        let icount_delta = if ipa == 1 {
            1
        } else {
            self.rng.gen_range(1..=2 * ipa - 1)
        };
        let pc = PC_BASE + 4 * self.rng.gen_range(0..o.pcs as u64);
        let offset = self.rng.gen_range(0..(o.block_bytes / 8).max(1)) * 8 % o.block_bytes;
        self.out.push(AccessEvent {
            core: o.core,
            pc,
            addr: o.base + block_index * o.block_bytes + offset,
            kind,
            icount_delta,
        });
    }
}

/// Deterministic synthetic trace for `spec` and `seed`.
pub fn gen_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<Vec<AccessEvent>, ConfigError> {
    spec.validate()?;
    let mut em = Emitter {
        opts: &spec.opts,
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: Vec::new(),
    };
    match spec.pattern {
        Pattern::Stream { blocks } => (0..blocks).for_each(|b| em.emit(b)),
        Pattern::Loop {
            working_set,
            passes,
        } => {
            for _ in 0..passes {
                (0..working_set).for_each(|b| em.emit(b));
            }
        }
        Pattern::Mixed {
            p,
            blocks,
            distance,
        } => {
            let reused_count = (p * blocks as f64).round() as usize;
            let mut reused = vec![false; blocks as usize];
            for i in index::sample(&mut em.rng, blocks as usize, reused_count) {
                reused[i] = true;
            }
            let mut pending: VecDeque<u64> = VecDeque::new();
            for b in 0..blocks {
                em.emit(b);
                if reused[b as usize] {
                    pending.push_back(b);
                }
                while pending.front().is_some_and(|&j| j + distance <= b) {
                    let j = pending.pop_front().unwrap();
                    em.emit(j);
                }
            }
            while let Some(j) = pending.pop_front() {
                em.emit(j);
            }
        }
        Pattern::Random { cores, max_events } => {
            return Ok(random_trace(seed, cores, max_events, spec.opts.block_bytes));
        }
    }
    Ok(em.out)
}

/// Random multi-core trace of at most `max_events` events for property tests
/// and fuzzing. Each core gets a randomly parameterised stream, loop or mixed
/// generator sized for small (tens of KB) hierarchies; roughly a third of the
/// cores share the address region of core 0.
pub fn random_trace(
    seed: u64,
    cores: u32,
    max_events: usize,
    block_bytes: u64,
) -> Vec<AccessEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_7ace);
    let budget = (max_events / cores.max(1) as usize).max(1);
    let per_core: Vec<Vec<AccessEvent>> = (0..cores)
        .map(|core| {
            let pattern = match rng.gen_range(0..3) {
                0 => Pattern::Stream {
                    blocks: rng.gen_range(16..=budget as u64 + 16),
                },
                1 => Pattern::Loop {
                    working_set: rng.gen_range(8..=600),
                    passes: rng.gen_range(2..=6),
                },
                _ => Pattern::Mixed {
                    p: rng.gen_range(0.0..=1.0),
                    blocks: rng.gen_range(16..=budget as u64 + 16),
                    distance: rng.gen_range(8..=800),
                },
            };
            let shared = core > 0 && rng.gen_bool(0.33);
            let opts = GenOptions {
                core,
                base: if shared { 0 } else { u64::from(core) << 32 },
                block_bytes,
                write_ratio: rng.gen_range(0.0..=0.5),
                instructions_per_access: rng.gen_range(1..=8),
                pcs: rng.gen_range(1..=8),
            };
            let spec = GeneratorSpec { pattern, opts };
            let mut evs = gen_synthetic(&spec, rng.gen()).expect("generated parameters are valid");
            evs.truncate(budget);
            evs
        })
        .collect();
    let mut merged = interleave(&per_core);
    merged.truncate(max_events);
    merged
}

/// Merges per-workload traces into one multi-core trace. Workload `i` runs on
/// core `i`. Events are ordered by each core's committed-instruction count
/// (the running sum of `icount_delta`), ties broken by lower core index, so a
/// core that executes more instructions between accesses issues them less
/// often.
pub fn interleave(traces: &[Vec<AccessEvent>]) -> Vec<AccessEvent> {
    let total = traces.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut cursor = vec![0usize; traces.len()];
    let mut clock = vec![0u64; traces.len()];
    while out.len() < total {
        let (slot, _) = traces
            .iter()
            .enumerate()
            .filter(|(i, t)| cursor[*i] < t.len())
            .map(|(i, t)| (i, clock[i] + u64::from(t[cursor[i]].icount_delta)))
            .min_by_key(|&(i, at)| (at, i))
            .expect("some trace has events left");
        let mut ev = traces[slot][cursor[slot]];
        cursor[slot] += 1;
        clock[slot] += u64::from(ev.icount_delta);
        ev.core = slot as u32;
        out.push(ev);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn blocks(evs: &[AccessEvent], bb: u64) -> Vec<u64> {
        evs.iter().map(|e| e.addr / bb).collect()
    }

    fn distinct(evs: &[AccessEvent]) -> usize {
        blocks(evs, 64).into_iter().collect::<HashSet<_>>().len()
    }

    #[test]
    fn stream_touches_each_block_once() {
        let evs = gen_synthetic(&"stream:n=4".parse().unwrap(), 0).unwrap();
        assert_eq!(evs.len(), 4);
        assert_eq!(distinct(&evs), 4);
    }

    #[test]
    fn loop_revisits() {
        let evs = gen_synthetic(&"loop:ws=2,passes=3".parse().unwrap(), 0).unwrap();
        assert_eq!(evs.len(), 6);
        assert_eq!(distinct(&evs), 2);
        assert!("loop:ws=2,passes=1".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn mixed_zero_is_stream() {
        let evs = gen_synthetic(&"mixed:p=0.0,n=100".parse().unwrap(), 0).unwrap();
        assert_eq!(evs.len(), 100);
        assert_eq!(distinct(&evs), 100);
    }

    #[test]
    fn mixed_reuse_count_and_distance() {
        let spec: GeneratorSpec = "mixed:p=0.25,n=400,d=50".parse().unwrap();
        let evs = gen_synthetic(&spec, 9).unwrap();
        assert_eq!(evs.len(), 500);
        assert_eq!(distinct(&evs), 400);
        let bl = blocks(&evs, 64);
        // every repeat follows at least d new blocks after the first touch
        let mut first = std::collections::HashMap::new();
        let mut new_seen = 0u64;
        for b in bl {
            match first.get(&b) {
                None => {
                    first.insert(b, new_seen);
                    new_seen += 1;
                }
                Some(&at) => assert!(new_seen - at > 50 || new_seen == 400),
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let spec: GeneratorSpec = "mixed:p=0.5,n=300,d=20,w=0.3,pcs=3".parse().unwrap();
        assert_eq!(
            gen_synthetic(&spec, 42).unwrap(),
            gen_synthetic(&spec, 42).unwrap()
        );
        assert_ne!(
            gen_synthetic(&spec, 42).unwrap(),
            gen_synthetic(&spec, 43).unwrap()
        );
        assert_eq!(random_trace(7, 3, 2000, 64), random_trace(7, 3, 2000, 64));
    }

    #[test]
    fn bad_specs() {
        for s in [
            "stream",
            "stream:n=0",
            "mixed:p=1.5,n=3",
            "bogus:n=1",
            "stream:n=4,w=2",
            "stream:q=1",
            "random:cores=0,n=5",
        ] {
            assert!(s.parse::<GeneratorSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn random_trace_respects_bounds() {
        for seed in 0..20 {
            let evs = random_trace(seed, 4, 3000, 64);
            assert!(evs.len() <= 3000);
            assert!(evs.iter().all(|e| e.core < 4 && e.icount_delta >= 1));
            crate::trace::validate_trace(&evs, 4).unwrap();
        }
    }

    #[test]
    fn interleave_orders_by_instruction_clock() {
        let a = vec![
            AccessEvent::read(9, 0, 0x0, 10),
            AccessEvent::read(9, 0, 0x40, 10),
        ];
        let b = vec![
            AccessEvent::read(9, 0, 0x1000, 4),
            AccessEvent::read(9, 0, 0x1040, 4),
            AccessEvent::read(9, 0, 0x1080, 4),
        ];
        let m = interleave(&[a, b]);
        let order: Vec<(u32, u64)> = m.iter().map(|e| (e.core, e.addr)).collect();
        // clocks: b@4, b@8, a@10, b@12, a@20
        assert_eq!(
            order,
            vec![(1, 0x1000), (1, 0x1040), (0, 0x0), (1, 0x1080), (0, 0x40)]
        );
    }
}
