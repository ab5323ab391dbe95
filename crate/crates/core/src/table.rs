//! Open-addressing hash table keyed by Morton code, with Robin Hood
//! displacement and backward-shift deletion.
//!
//! Keys go through a 64-bit mixing finalizer before masking to a
//! power-of-two capacity. The load factor is capped at 3/4. Probing is
//! linear, so a run of displaced entries stays contiguous in memory.

use std::mem;

use crate::morton::MortonCode;

const MIN_CAPACITY: usize = 16;

/// Murmur3 64-bit finalizer.
#[inline]
pub fn mix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

#[derive(Debug, Clone, Default)]
struct Bucket<V> {
    key: u64,
    /// 0 marks an empty bucket; otherwise displacement from the home slot + 1.
    dist: u32,
    value: V,
}

#[derive(Debug, Clone)]
pub struct RobinHoodMap<V> {
    buckets: Vec<Bucket<V>>,
    mask: usize,
    len: usize,
}

impl<V: Default> Default for RobinHoodMap<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V: Default> RobinHoodMap<V> {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    /// Table able to hold `n` entries without growing.
    pub fn with_capacity(n: usize) -> Self {
        let slots = (n * 4 / 3 + 1).next_power_of_two().max(MIN_CAPACITY);
        let mut buckets = Vec::with_capacity(slots);
        buckets.resize_with(slots, Bucket::default);
        RobinHoodMap {
            buckets,
            mask: slots - 1,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of slots.
    pub fn capacity(&self) -> usize {
        self.buckets.len()
    }

    pub fn clear(&mut self) {
        for b in &mut self.buckets {
            *b = Bucket::default();
        }
        self.len = 0;
    }

    #[inline]
    fn home(&self, key: u64) -> usize {
        mix64(key) as usize & self.mask
    }

    #[inline]
    fn find(&self, key: u64) -> Option<usize> {
        let mut idx = self.home(key);
        let mut dist = 1u32;
        loop {
            let b = &self.buckets[idx];
            // Robin Hood invariant: past a bucket poorer than us, the key cannot be stored
            if b.dist < dist {
                return None;
            }
            if b.key == key {
                return Some(idx);
            }
            dist += 1;
            idx = (idx + 1) & self.mask;
        }
    }

    #[inline]
    pub fn get(&self, key: MortonCode) -> Option<&V> {
        self.find(key.0).map(|i| &self.buckets[i].value)
    }

    #[inline]
    pub fn get_mut(&mut self, key: MortonCode) -> Option<&mut V> {
        self.find(key.0).map(|i| &mut self.buckets[i].value)
    }

    pub fn contains_key(&self, key: MortonCode) -> bool {
        self.find(key.0).is_some()
    }

    /// Inserts or replaces; returns the previous value.
    pub fn insert(&mut self, key: MortonCode, value: V) -> Option<V> {
        if let Some(i) = self.find(key.0) {
            return Some(mem::replace(&mut self.buckets[i].value, value));
        }
        self.insert_absent(key.0, value);
        None
    }

    /// Returns the entry for `key`, creating it with `make` when absent. The
    /// flag is true when a new entry was created.
    #[inline]
    pub fn get_or_insert_with(&mut self, key: MortonCode, make: impl FnOnce() -> V) -> (&mut V, bool) {
        match self.find(key.0) {
            Some(i) => (&mut self.buckets[i].value, false),
            None => {
                let i = self.insert_absent(key.0, make());
                (&mut self.buckets[i].value, true)
            }
        }
    }

    /// Places a key known to be absent; returns its final slot.
    fn insert_absent(&mut self, key: u64, value: V) -> usize {
        if (self.len + 1) * 4 > self.buckets.len() * 3 {
            self.grow();
        }
        self.len += 1;
        let mut idx = self.home(key);
        let mut carry = Bucket {
            key,
            dist: 1,
            value,
        };
        let mut placed = None;
        loop {
            let b = &mut self.buckets[idx];
            if b.dist == 0 {
                *b = carry;
                return placed.unwrap_or(idx);
            }
            if b.dist < carry.dist {
                mem::swap(b, &mut carry);
                placed.get_or_insert(idx);
            }
            carry.dist += 1;
            idx = (idx + 1) & self.mask;
        }
    }

    fn grow(&mut self) {
        let slots = self.buckets.len() * 2;
        let mut fresh = Vec::with_capacity(slots);
        fresh.resize_with(slots, Bucket::default);
        let old = mem::replace(&mut self.buckets, fresh);
        self.mask = slots - 1;
        self.len = 0;
        for b in old {
            if b.dist != 0 {
                self.insert_absent(b.key, b.value);
            }
        }
    }

    pub fn remove(&mut self, key: MortonCode) -> Option<V> {
        let mut idx = self.find(key.0)?;
        let value = mem::take(&mut self.buckets[idx].value);
        self.len -= 1;
        loop {
            let next = (idx + 1) & self.mask;
            if self.buckets[next].dist <= 1 {
                self.buckets[idx] = Bucket::default();
                return Some(value);
            }
            let mut moved = mem::take(&mut self.buckets[next]);
            moved.dist -= 1;
            self.buckets[idx] = moved;
            idx = next;
        }
    }

    /// Entries in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (MortonCode, &V)> + '_ {
        self.buckets
            .iter()
            .filter(|b| b.dist != 0)
            .map(|b| (MortonCode(b.key), &b.value))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (MortonCode, &mut V)> + '_ {
        self.buckets
            .iter_mut()
            .filter(|b| b.dist != 0)
            .map(|b| (MortonCode(b.key), &mut b.value))
    }

    pub fn keys(&self) -> impl Iterator<Item = MortonCode> + '_ {
        self.iter().map(|(k, _)| k)
    }

    /// Longest displacement currently in the table.
    pub fn max_probe_length(&self) -> u32 {
        self.buckets.iter().map(|b| b.dist).max().unwrap_or(0)
    }

    #[cfg(test)]
    fn check_invariants(&self) {
        let mut count = 0;
        for (i, b) in self.buckets.iter().enumerate() {
            if b.dist == 0 {
                continue;
            }
            count += 1;
            let home = self.home(b.key);
            let disp = (i + self.buckets.len() - home) & self.mask;
            assert_eq!(disp as u32 + 1, b.dist, "slot {i}");
            if b.dist > 1 {
                let prev = &self.buckets[(i + self.buckets.len() - 1) & self.mask];
                assert!(prev.dist != 0 && prev.dist + 1 >= b.dist, "gap before slot {i}");
            }
        }
        assert_eq!(count, self.len);
    }
}
