//! Min-heap with lazy deletion: entries carry a stamp, and entries whose
//! stamp is no longer current are discarded when they reach the top.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// `f64` ordered by `total_cmp`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Key(pub f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct LazyMinHeap {
    heap: BinaryHeap<Reverse<(Key, usize, u64)>>,
}

impl LazyMinHeap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: f64, id: usize, stamp: u64) {
        self.heap.push(Reverse((Key(key), id, stamp)));
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn clear(&mut self) {
        self.heap.clear();
    }

    /// Smallest live entry whose id is not `skip`. Ties go to the smaller id.
    /// Stale entries met on the way are dropped; live skipped ones are kept.
    pub fn min_live(
        &mut self,
        is_live: impl Fn(usize, u64) -> bool,
        skip: Option<usize>,
    ) -> Option<(f64, usize)> {
        let mut held = Vec::new();
        let mut found = None;
        while let Some(&Reverse((Key(k), id, stamp))) = self.heap.peek() {
            if !is_live(id, stamp) {
                self.heap.pop();
                continue;
            }
            if Some(id) == skip {
                held.push(self.heap.pop().expect("peeked"));
                continue;
            }
            found = Some((k, id));
            break;
        }
        self.heap.extend(held);
        found
    }
}
