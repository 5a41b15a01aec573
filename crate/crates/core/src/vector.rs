//! Finitely supported real sequences indexed by `ℤ`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeqVector {
    entries: BTreeMap<i64, f64>,
}

impl SeqVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Standard basis vector `e_j`.
    pub fn unit(j: i64) -> Self {
        let mut v = Self::new();
        v.set(j, 1.0);
        v
    }

    /// Zero entries are dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (i64, f64)>) -> Self {
        let mut v = Self::new();
        for (i, x) in pairs {
            v.set(i, x);
        }
        v
    }

    pub fn set(&mut self, i: i64, x: f64) {
        if x == 0.0 {
            self.entries.remove(&i);
        } else {
            self.entries.insert(i, x);
        }
    }

    pub fn get(&self, i: i64) -> f64 {
        self.entries.get(&i).copied().unwrap_or(0.0)
    }

    /// Non-zero entries in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.entries.iter().map(|(&i, &x)| (i, x))
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest and largest supported index.
    pub fn support_range(&self) -> Option<(i64, i64)> {
        Some((*self.entries.keys().next()?, *self.entries.keys().next_back()?))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self::from_pairs(self.iter().map(|(i, x)| (i, lambda * x)))
    }

    /// Entries whose index satisfies `keep`.
    pub fn restricted(&self, mut keep: impl FnMut(i64) -> bool) -> Self {
        Self {
            entries: self.entries.iter().filter(|(i, _)| keep(**i)).map(|(&i, &x)| (i, x)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        Self::from_pairs(self.iter().map(|(i, x)| (i, x.abs())))
    }
}

impl FromIterator<(i64, f64)> for SeqVector {
    fn from_iter<T: IntoIterator<Item = (i64, f64)>>(iter: T) -> Self {
        Self::from_pairs(iter)
    }
}
