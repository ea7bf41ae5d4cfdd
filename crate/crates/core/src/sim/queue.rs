use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Priority classes; lower fires first among events at the same time.
pub mod class {
    pub const SPOT_TERMINATION: u8 = 0;
    pub const VM_STATUS: u8 = 1;
    pub const BILLING: u8 = 2;
    pub const PRICE_CHANGE: u8 = 3;
    pub const SWEEP: u8 = 4;
    pub const SAMPLE: u8 = 5;
    pub const REQUEST: u8 = 6;
}

#[derive(Debug, Clone, Copy)]
struct Key {
    time: f64,
    class: u8,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Reversed so that `BinaryHeap` pops the earliest key.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.class.cmp(&self.class))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug)]
struct Entry<E> {
    key: Key,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.cmp(&other.key)
    }
}

/// Events ordered by `(time, class, insertion sequence)`.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            seq: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn push(&mut self, time: f64, class: u8, event: E) {
        debug_assert!(time.is_finite());
        let key = Key {
            time,
            class,
            seq: self.seq,
        };
        self.seq += 1;
        self.heap.push(Entry { key, event });
    }

    /// `(time, class)` of the next event.
    #[inline]
    pub fn peek(&self) -> Option<(f64, u8)> {
        self.heap.peek().map(|e| (e.key.time, e.key.class))
    }

    pub fn pop(&mut self) -> Option<(f64, u8, E)> {
        self.heap.pop().map(|e| (e.key.time, e.key.class, e.event))
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
