//! Undirected edge sets over nodes `0..p`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{QuiltError, Result};

/// A set of unordered node pairs `(i, j)` stored with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        Self { p, edges: BTreeSet::new() }
    }

    pub fn from_pairs<I>(p: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut set = Self::new(p);
        for (i, j) in pairs {
            set.insert(i, j)?;
        }
        Ok(set)
    }

    /// Complete graph on `0..p`.
    pub fn complete(p: usize) -> Self {
        let mut set = Self::new(p);
        for i in 0..p {
            for j in (i + 1)..p {
                set.edges.insert((i, j));
            }
        }
        set
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Inserts the pair in canonical order. Returns whether it was new.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<bool> {
        if i >= self.p {
            return Err(QuiltError::IndexOutOfRange { index: i, p: self.p });
        }
        if j >= self.p {
            return Err(QuiltError::IndexOutOfRange { index: j, p: self.p });
        }
        if i == j {
            return Err(QuiltError::InvalidInput(alloc::format!("self-loop on node {i}")));
        }
        Ok(self.edges.insert(ordered(i, j)))
    }

    pub fn remove(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&ordered(i, j))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&ordered(i, j))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet { p: self.p.max(other.p), edges: self.edges.union(&other.edges).copied().collect() }
    }

    pub fn intersection(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet { p: self.p, edges: self.edges.intersection(&other.edges).copied().collect() }
    }

    pub fn difference(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet { p: self.p, edges: self.edges.difference(&other.edges).copied().collect() }
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = alloc::vec![0; self.p];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> EdgeSet {
        EdgeSet { p: self.p, edges: self.edges.iter().map(|&(i, j)| ordered(perm[i], perm[j])).collect() }
    }
}

pub(crate) fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}
