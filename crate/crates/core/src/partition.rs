//! Set partitions of subjects stored as canonical label vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of {0, …, N−1}.
///
/// Labels are canonical: blocks are numbered in order of first appearance,
/// so two label vectors describe the same partition exactly when they are
/// equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn from_labels<T: Copy + Eq + std::hash::Hash>(labels: &[T]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = labels
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    /// Builds a partition from explicit blocks; every subject must appear
    /// exactly once.
    pub fn from_blocks(blocks: &[Vec<usize>], n: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::Data(format!("block {b} is empty")));
            }
            for &i in block {
                if i >= n {
                    return Err(Error::Data(format!("subject {i} out of range (N = {n})")));
                }
                if labels[i] != usize::MAX {
                    return Err(Error::Data(format!("subject {i} appears twice")));
                }
                labels[i] = b;
            }
        }
        if let Some(i) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Data(format!("subject {i} is in no block")));
        }
        Ok(Self::from_labels(&labels))
    }

    pub fn single_block(n: usize) -> Self {
        Partition { labels: vec![0; n] }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_blocks()];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }

    #[inline]
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n_items() != coarser.n_items() {
            return false;
        }
        let mut image = vec![usize::MAX; self.n_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            let c = coarser.labels[i];
            if image[l] == usize::MAX {
                image[l] = c;
            } else if image[l] != c {
                return false;
            }
        }
        true
    }
}

/// All partitions of {0, …, n−1} as restricted growth strings (Bell(n) of
/// them). Intended for small n.
pub fn enumerate_partitions(n: usize) -> Vec<Partition> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut a = vec![0usize; n];
    fn rec(a: &mut Vec<usize>, i: usize, max: usize, out: &mut Vec<Partition>) {
        if i == a.len() {
            out.push(Partition { labels: a.clone() });
            return;
        }
        for v in 0..=max + 1 {
            a[i] = v;
            rec(a, i + 1, max.max(v), out);
        }
    }
    rec(&mut a, 1, 0, &mut out);
    out
}
