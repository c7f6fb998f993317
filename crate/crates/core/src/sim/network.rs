use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Undirected simple graph over agent ids `0..n`.
///
/// Neighbour sets are ordered so that iteration, and therefore random draw
/// order, is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SocialNetwork {
    adjacency: Vec<BTreeSet<usize>>,
}

impl SocialNetwork {
    pub fn empty(n: usize) -> Self {
        SocialNetwork {
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Adds the tie `{i, j}`. Returns false for self-loops, out-of-range ids
    /// and ties that already exist.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        if i == j || i >= self.len() || j >= self.len() {
            return false;
        }
        let inserted = self.adjacency[i].insert(j);
        self.adjacency[j].insert(i);
        inserted
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).is_some_and(|n| n.contains(&j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    /// Every tie once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.range(i + 1..).map(move |&j| (i, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Unlinked pairs `(i, j)`, `i < j`, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if !self.adjacency[i].contains(&j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Symmetric and irreflexive.
    pub fn is_consistent(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(i, nbrs)| {
            !nbrs.contains(&i) && nbrs.iter().all(|&j| j < self.len() && self.adjacency[j].contains(&i))
        })
    }
}
