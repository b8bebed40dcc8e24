//! State spaces of q-ary units and support sets.
//!
//! States are enumerated lexicographically with the leftmost coordinate most
//! significant: `index = Σ x_i q^(n-1-i)`. Every file format and every
//! comparison in the crate uses this order.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest state count a single layer may have.
pub const MAX_STATES: usize = 1 << 26;

/// `{0, …, q-1}^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSpace {
    n: usize,
    q: usize,
}

impl StateSpace {
    /// `n = 0` is allowed and denotes the one-point space left after
    /// clamping every coordinate.
    pub fn new(n: usize, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::domain(format!("alphabet size q = {q} must be at least 2")));
        }
        let mut card: usize = 1;
        for _ in 0..n {
            card = card
                .checked_mul(q)
                .filter(|&c| c <= MAX_STATES)
                .ok_or_else(|| Error::domain(format!("{q}^{n} states exceeds the limit of {MAX_STATES}")))?;
        }
        Ok(StateSpace { n, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn cardinality(&self) -> usize {
        self.q.pow(self.n as u32)
    }

    /// Coordinates of the state with the given index.
    pub fn decode(&self, index: usize) -> Vec<usize> {
        let mut x = vec![0; self.n];
        self.decode_into(index, &mut x);
        x
    }

    /// Like [`decode`](Self::decode) but writes into a caller buffer of length `n`.
    pub fn decode_into(&self, mut index: usize, x: &mut [usize]) {
        debug_assert_eq!(x.len(), self.n);
        for slot in x.iter_mut().rev() {
            *slot = index % self.q;
            index /= self.q;
        }
    }

    pub fn encode(&self, x: &[usize]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::dim(format!(
                "state has {} coordinates, space has {}",
                x.len(),
                self.n
            )));
        }
        let mut idx = 0;
        for (i, &v) in x.iter().enumerate() {
            if v >= self.q {
                return Err(Error::domain(format!(
                    "coordinate {i} has symbol {v} >= q = {}",
                    self.q
                )));
            }
            idx = idx * self.q + v;
        }
        Ok(idx)
    }

    /// Encode without validation; callers guarantee the state is in range.
    pub(crate) fn encode_unchecked(&self, x: &[usize]) -> usize {
        x.iter().fold(0, |acc, &v| acc * self.q + v)
    }

    /// All states in enumeration order.
    pub fn states(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.cardinality()).map(move |i| self.decode(i))
    }

    /// `x` with coordinate `j` set to symbol `b`. For binary units this is the
    /// bit inversion when `b != x_j`.
    pub fn flip(&self, x: &[usize], j: usize, b: usize) -> Result<Vec<usize>> {
        self.encode(x)?;
        if j >= self.n {
            return Err(Error::domain(format!("coordinate {j} out of range for n = {}", self.n)));
        }
        if b >= self.q {
            return Err(Error::domain(format!("symbol {b} out of range for q = {}", self.q)));
        }
        let mut y = x.to_vec();
        y[j] = b;
        Ok(y)
    }
}

/// True iff `x` and `y` differ in exactly one coordinate.
pub fn hamming_adjacent(x: &[usize], y: &[usize]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::dim(format!("states of length {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count() == 1)
}

/// A set of state indices of one space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    space: StateSpace,
    members: BTreeSet<usize>,
}

impl SupportSet {
    /// Fails on duplicates or out-of-range members.
    pub fn new(space: StateSpace, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for m in members {
            if m >= space.cardinality() {
                return Err(Error::domain(format!("member {m} >= {}", space.cardinality())));
            }
            if !set.insert(m) {
                return Err(Error::domain(format!("duplicate member {m}")));
            }
        }
        Ok(SupportSet { space, members: set })
    }

    pub fn full(space: StateSpace) -> Self {
        SupportSet {
            space,
            members: (0..space.cardinality()).collect(),
        }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.members.len() == self.space.cardinality()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub(crate) fn insert(&mut self, index: usize) -> bool {
        self.members.insert(index)
    }
}
