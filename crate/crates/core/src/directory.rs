//! Presence directory: which cores hold a block in their private levels and
//! which of those copies are dirty. Stands in for a full coherence protocol.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::addr::BlockAddr;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirEntry {
    /// Bit `c` set iff core `c` holds the block privately.
    pub sharers: u64,
    /// Bit `c` set iff core `c`'s private copy is dirty.
    pub dirty: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Directory {
    entries: HashMap<BlockAddr, DirEntry>,
}

impl Directory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, block: BlockAddr) -> DirEntry {
        self.entries.get(&block).copied().unwrap_or_default()
    }

    pub fn add_sharer(&mut self, block: BlockAddr, core: usize) {
        self.entries.entry(block).or_default().sharers |= 1 << core;
    }

    pub fn mark_dirty(&mut self, block: BlockAddr, core: usize) {
        let e = self.entries.entry(block).or_default();
        debug_assert!(e.sharers & (1 << core) != 0);
        e.dirty |= 1 << core;
    }

    pub fn remove_sharer(&mut self, block: BlockAddr, core: usize) {
        if let Some(e) = self.entries.get_mut(&block) {
            e.sharers &= !(1 << core);
            e.dirty &= !(1 << core);
            if e.sharers == 0 {
                self.entries.remove(&block);
            }
        }
    }

    /// Lowest-numbered core other than `requester` holding the block.
    pub fn supplier(&self, block: BlockAddr, requester: usize) -> Option<usize> {
        let others = self.get(block).sharers & !(1 << requester);
        (others != 0).then(|| others.trailing_zeros() as usize)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockAddr, DirEntry)> + '_ {
        self.entries.iter().map(|(b, e)| (*b, *e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supplier_picks_lowest_other_core() {
        let mut d = Directory::new();
        let b = BlockAddr(7);
        assert_eq!(d.supplier(b, 0), None);
        d.add_sharer(b, 3);
        d.add_sharer(b, 1);
        assert_eq!(d.supplier(b, 0), Some(1));
        assert_eq!(d.supplier(b, 1), Some(3));
        d.add_sharer(b, 0);
        assert_eq!(d.supplier(b, 2), Some(0));
    }

    #[test]
    fn removal_clears_dirty_and_empty_entries() {
        let mut d = Directory::new();
        let b = BlockAddr(1);
        d.add_sharer(b, 2);
        d.mark_dirty(b, 2);
        assert_eq!(
            d.get(b),
            DirEntry {
                sharers: 4,
                dirty: 4
            }
        );
        d.remove_sharer(b, 2);
        assert!(d.is_empty());
        d.remove_sharer(b, 2);
        assert_eq!(d.get(b), DirEntry::default());
    }
}
