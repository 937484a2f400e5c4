//! Memory access traces: the event type, the text and binary file formats,
//! and synthetic generators.
//!
//! Text format, one event per line:
//!
//! ```text
//! # core kind pc addr icount_delta
//! 0 R 0x1000 0x400 1
//! 1 W 0x1004 0x7f00 3
//! ```
//!
//! Binary format: a little-endian `u64` record count followed by fixed 25-byte
//! records `core:u32 kind:u8 pc:u64 addr:u64 icount_delta:u32` (kind 0 = read,
//! 1 = write).

mod synth;

pub use synth::{gen_synthetic, interleave, random_trace, GenOptions, GeneratorSpec, Pattern};

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TraceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn is_write(self) -> bool {
        matches!(self, AccessKind::Write)
    }
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "R",
            AccessKind::Write => "W",
        })
    }
}

impl FromStr for AccessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "R" | "r" => Ok(AccessKind::Read),
            "W" | "w" => Ok(AccessKind::Write),
            other => Err(format!("unknown access kind {other:?}")),
        }
    }
}

/// One memory reference issued by one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub core: u32,
    pub pc: u64,
    pub addr: u64,
    pub kind: AccessKind,
    /// Instructions committed by this core since its previous event.
    pub icount_delta: u32,
}

impl AccessEvent {
    pub fn read(core: u32, pc: u64, addr: u64, icount_delta: u32) -> Self {
        AccessEvent {
            core,
            pc,
            addr,
            kind: AccessKind::Read,
            icount_delta,
        }
    }

    pub fn write(core: u32, pc: u64, addr: u64, icount_delta: u32) -> Self {
        AccessEvent {
            core,
            pc,
            addr,
            kind: AccessKind::Write,
            icount_delta,
        }
    }
}

impl fmt::Display for AccessEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {:#x} {:#x} {}",
            self.core, self.kind, self.pc, self.addr, self.icount_delta
        )
    }
}

fn parse_hex(tok: &str) -> Result<u64, String> {
    let digits = tok
        .strip_prefix("0x")
        .or_else(|| tok.strip_prefix("0X"))
        .unwrap_or(tok);
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad hex value {tok:?}: {e}"))
}

fn parse_line(line: &str) -> Result<AccessEvent, String> {
    let mut toks = line.split_whitespace();
    let mut next = |what: &str| toks.next().ok_or_else(|| format!("missing {what}"));
    let core = next("core")?;
    let kind = next("kind")?;
    let pc = next("pc")?;
    let addr = next("addr")?;
    let delta = next("icount_delta")?;
    if let Some(extra) = toks.next() {
        return Err(format!("unexpected trailing field {extra:?}"));
    }
    Ok(AccessEvent {
        core: core
            .parse()
            .map_err(|e| format!("bad core {core:?}: {e}"))?,
        kind: kind.parse()?,
        pc: parse_hex(pc)?,
        addr: parse_hex(addr)?,
        icount_delta: delta
            .parse()
            .map_err(|e| format!("bad icount_delta {delta:?}: {e}"))?,
    })
}

/// Parses the text trace format. Blank lines and `#` comments are skipped.
pub fn parse_trace<R: Read>(stream: R) -> Result<Vec<AccessEvent>, TraceError> {
    let reader = BufReader::new(stream);
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let ev = parse_line(body).map_err(|msg| TraceError::Parse { line: idx + 1, msg })?;
        events.push(ev);
    }
    Ok(events)
}

pub fn write_trace<W: Write>(mut out: W, events: &[AccessEvent]) -> std::io::Result<()> {
    for ev in events {
        writeln!(out, "{ev}")?;
    }
    out.flush()
}

const RECORD_BYTES: usize = 4 + 1 + 8 + 8 + 4;

pub fn write_trace_binary<W: Write>(mut out: W, events: &[AccessEvent]) -> std::io::Result<()> {
    out.write_all(&(events.len() as u64).to_le_bytes())?;
    let mut rec = [0u8; RECORD_BYTES];
    for ev in events {
        rec[0..4].copy_from_slice(&ev.core.to_le_bytes());
        rec[4] = u8::from(ev.kind.is_write());
        rec[5..13].copy_from_slice(&ev.pc.to_le_bytes());
        rec[13..21].copy_from_slice(&ev.addr.to_le_bytes());
        rec[21..25].copy_from_slice(&ev.icount_delta.to_le_bytes());
        out.write_all(&rec)?;
    }
    out.flush()
}

pub fn parse_trace_binary<R: Read>(stream: R) -> Result<Vec<AccessEvent>, TraceError> {
    let mut reader = BufReader::new(stream);
    let mut len = [0u8; 8];
    reader
        .read_exact(&mut len)
        .map_err(|_| TraceError::Binary("missing record count".into()))?;
    let count = u64::from_le_bytes(len);
    let mut events = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut rec = [0u8; RECORD_BYTES];
    for i in 0..count {
        reader
            .read_exact(&mut rec)
            .map_err(|_| TraceError::Binary(format!("truncated at record {i} of {count}")))?;
        let kind = match rec[4] {
            0 => AccessKind::Read,
            1 => AccessKind::Write,
            k => {
                return Err(TraceError::Binary(format!(
                    "record {i}: unknown kind byte {k}"
                )))
            }
        };
        events.push(AccessEvent {
            core: u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            kind,
            pc: u64::from_le_bytes(rec[5..13].try_into().unwrap()),
            addr: u64::from_le_bytes(rec[13..21].try_into().unwrap()),
            icount_delta: u32::from_le_bytes(rec[21..25].try_into().unwrap()),
        });
    }
    let mut probe = [0u8; 1];
    if reader.read(&mut probe)? != 0 {
        return Err(TraceError::Binary(format!(
            "trailing bytes after {count} records"
        )));
    }
    Ok(events)
}

/// Checks the structural invariants a simulator relies on: every core index
/// is below `cores` and each core's first event commits at least one
/// instruction.
pub fn validate_trace(events: &[AccessEvent], cores: usize) -> Result<(), String> {
    let mut seen = vec![false; cores];
    for (i, ev) in events.iter().enumerate() {
        let c = ev.core as usize;
        if c >= cores {
            return Err(format!(
                "event {i}: core {c} out of range (cores = {cores})"
            ));
        }
        if !seen[c] {
            if ev.icount_delta == 0 {
                return Err(format!(
                    "event {i}: first event of core {c} has icount_delta 0"
                ));
            }
            seen[c] = true;
        }
    }
    Ok(())
}

/// Number of cores a trace refers to (highest core index + 1).
pub fn core_count(events: &[AccessEvent]) -> usize {
    events
        .iter()
        .map(|e| e.core as usize + 1)
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let evs = parse_trace("0 R 0x1000 0x400 1\n".as_bytes()).unwrap();
        assert_eq!(evs, vec![AccessEvent::read(0, 0x1000, 0x400, 1)]);
    }

    #[test]
    fn empty_and_comments() {
        assert!(parse_trace("".as_bytes()).unwrap().is_empty());
        let evs = parse_trace("# header\n\n1 W ff 40 2\n".as_bytes()).unwrap();
        assert_eq!(evs, vec![AccessEvent::write(1, 0xff, 0x40, 2)]);
    }

    #[test]
    fn bad_kind_reports_line() {
        match parse_trace("0 X 0x0 0x0 1\n".as_bytes()) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_trace("# c\n0 R 0x0 0x0 1\n0 R 0x0\n".as_bytes()) {
            Err(TraceError::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("missing"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_trace("0 R 0x0 0x0 1 9\n".as_bytes()).is_err());
        assert!(parse_trace("0 R 0xzz 0x0 1\n".as_bytes()).is_err());
    }

    #[test]
    fn binary_rejects_truncation() {
        let evs = vec![AccessEvent::read(0, 1, 2, 3)];
        let mut buf = Vec::new();
        write_trace_binary(&mut buf, &evs).unwrap();
        assert_eq!(buf.len(), 8 + RECORD_BYTES);
        assert!(parse_trace_binary(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(parse_trace_binary(extra.as_slice()).is_err());
        assert_eq!(parse_trace_binary(buf.as_slice()).unwrap(), evs);
    }

    #[test]
    fn validation() {
        let evs = vec![AccessEvent::read(0, 0, 0, 1), AccessEvent::read(0, 0, 0, 0)];
        assert!(validate_trace(&evs, 1).is_ok());
        assert!(validate_trace(&evs[1..], 1).is_err());
        assert!(validate_trace(&[AccessEvent::read(2, 0, 0, 1)], 2).is_err());
        assert_eq!(core_count(&[AccessEvent::read(2, 0, 0, 1)]), 3);
    }

    fn arb_event() -> impl Strategy<Value = AccessEvent> {
        (
            any::<u32>(),
            any::<u64>(),
            any::<u64>(),
            any::<bool>(),
            any::<u32>(),
        )
            .prop_map(|(core, pc, addr, w, icount_delta)| AccessEvent {
                core,
                pc,
                addr,
                kind: if w {
                    AccessKind::Write
                } else {
                    AccessKind::Read
                },
                icount_delta,
            })
    }

    proptest! {
        #[test]
        fn text_round_trip(evs in prop::collection::vec(arb_event(), 0..50)) {
            let mut buf = Vec::new();
            write_trace(&mut buf, &evs).unwrap();
            prop_assert_eq!(parse_trace(buf.as_slice()).unwrap(), evs);
        }

        #[test]
        fn binary_round_trip(evs in prop::collection::vec(arb_event(), 0..50)) {
            let mut buf = Vec::new();
            write_trace_binary(&mut buf, &evs).unwrap();
            prop_assert_eq!(parse_trace_binary(buf.as_slice()).unwrap(), evs);
        }
    }
}
