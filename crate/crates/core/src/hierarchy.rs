//! Multi-index bookkeeping for the auxiliary-operator hierarchy.
//!
//! Nodes are the multi-indices `n = (n_1, ..., n_K)` with `sum n_k <= N`,
//! ranked in graded order: by depth first, then descending lexicographic
//! within a depth (so `(1, 0, ..., 0)` is the first node at depth 1).
//! Ranks are computed combinatorially, and the `n_{k+}` / `n_{k-}`
//! neighbour tables are precomputed so the right-hand side never searches.

/// Marks a missing neighbour (below depth 0 or above the truncation depth).
pub const NO_NEIGHBOR: u32 = u32::MAX;

/// Largest hierarchy the engine will allocate.
pub const MAX_NODES: usize = 4_000_000;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n_sites: usize) -> Self {
        Self(vec![0; n_sites])
    }

    pub fn depth(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Number of multi-indices with `n_sites` components and depth `<= depth`.
pub fn hierarchy_count(n_sites: usize, depth: usize) -> Option<u128> {
    binomial((depth + n_sites) as u64, n_sites as u64)
}

/// Number of compositions of `total` into `parts` nonnegative parts.
fn compositions(total: u64, parts: u64) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    binomial(total + parts - 1, parts - 1).expect("composition count fits for validated spaces")
}

#[derive(Debug, Clone)]
pub struct HierarchyIndexSpace {
    n_sites: usize,
    truncation: usize,
    /// `count * n_sites`, node-major.
    indices: Vec<u32>,
    depths: Vec<u32>,
    /// `count * n_sites`; rank of `n_{k+}` or [`NO_NEIGHBOR`].
    plus: Vec<u32>,
    /// `count * n_sites`; rank of `n_{k-}` or [`NO_NEIGHBOR`].
    minus: Vec<u32>,
    /// `depth_offsets[d]` is the rank of the first node of depth `d`.
    depth_offsets: Vec<usize>,
}

impl HierarchyIndexSpace {
    pub fn new(n_sites: usize, truncation: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidParameter {
                name: "n_sites",
                reason: "must be positive".into(),
            });
        }
        let count = hierarchy_count(n_sites, truncation).unwrap_or(u128::MAX);
        if count > MAX_NODES as u128 {
            return Err(Error::HierarchyTooLarge {
                count,
                max: MAX_NODES,
            });
        }
        let count = count as usize;

        let depth_offsets: Vec<usize> = (0..=truncation + 1)
            .map(|d| {
                if d == 0 {
                    0
                } else {
                    hierarchy_count(n_sites, d - 1).unwrap() as usize
                }
            })
            .collect();

        let mut indices = Vec::with_capacity(count * n_sites);
        let mut depths = Vec::with_capacity(count);
        let mut current = vec![0u32; n_sites];
        for d in 0..=truncation as u32 {
            first_of_depth(&mut current, d);
            loop {
                indices.extend_from_slice(&current);
                depths.push(d);
                if !next_same_depth(&mut current) {
                    break;
                }
            }
        }
        debug_assert_eq!(depths.len(), count);

        let mut space = Self {
            n_sites,
            truncation,
            indices,
            depths,
            plus: vec![NO_NEIGHBOR; count * n_sites],
            minus: vec![NO_NEIGHBOR; count * n_sites],
            depth_offsets,
        };

        let mut scratch = vec![0u32; n_sites];
        for node in 0..count {
            scratch.copy_from_slice(space.index_slice(node));
            let depth = space.depths[node] as usize;
            for k in 0..n_sites {
                if depth < truncation {
                    scratch[k] += 1;
                    space.plus[node * n_sites + k] = space.rank_slice(&scratch) as u32;
                    scratch[k] -= 1;
                }
                if scratch[k] > 0 {
                    scratch[k] -= 1;
                    space.minus[node * n_sites + k] = space.rank_slice(&scratch) as u32;
                    scratch[k] += 1;
                }
            }
        }
        Ok(space)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn count(&self) -> usize {
        self.depths.len()
    }

    pub fn depth(&self, node: usize) -> u32 {
        self.depths[node]
    }

    pub fn index_slice(&self, node: usize) -> &[u32] {
        &self.indices[node * self.n_sites..(node + 1) * self.n_sites]
    }

    pub fn unrank(&self, node: usize) -> MultiIndex {
        MultiIndex(self.index_slice(node).to_vec())
    }

    /// Rank of `n`, or `None` if it is outside the truncated space.
    pub fn rank(&self, n: &MultiIndex) -> Option<usize> {
        if n.0.len() != self.n_sites || n.depth() as usize > self.truncation {
            return None;
        }
        Some(self.rank_slice(&n.0))
    }

    fn rank_slice(&self, n: &[u32]) -> usize {
        let depth: u32 = n.iter().sum();
        let k = n.len() as u64;
        // nodes of the same depth preceding n in descending lex order
        let mut before: u128 = 0;
        let mut remaining = depth as u64;
        for (j, &nj) in n.iter().enumerate() {
            let tail = k - j as u64 - 1;
            for v in (nj as u64 + 1)..=remaining {
                before += compositions(remaining - v, tail);
            }
            remaining -= nj as u64;
        }
        self.depth_offsets[depth as usize] + before as usize
    }

    /// Rank of `n_{k+}` for 0-based site `k`.
    #[inline]
    pub fn plus(&self, node: usize, k: usize) -> u32 {
        self.plus[node * self.n_sites + k]
    }

    /// Rank of `n_{k-}` for 0-based site `k`.
    #[inline]
    pub fn minus(&self, node: usize, k: usize) -> u32 {
        self.minus[node * self.n_sites + k]
    }

    pub fn plus_row(&self, node: usize) -> &[u32] {
        &self.plus[node * self.n_sites..(node + 1) * self.n_sites]
    }

    pub fn minus_row(&self, node: usize) -> &[u32] {
        &self.minus[node * self.n_sites..(node + 1) * self.n_sites]
    }
}

fn first_of_depth(n: &mut [u32], depth: u32) {
    n.fill(0);
    n[0] = depth;
}

/// Advances to the next composition with the same depth in descending
/// lexicographic order. Returns false after the last one.
fn next_same_depth(n: &mut [u32]) -> bool {
    let k = n.len();
    if k < 2 {
        return false;
    }
    // rightmost position (excluding the last) holding a positive value
    let Some(j) = (0..k - 1).rev().find(|&j| n[j] > 0) else {
        return false;
    };
    let tail: u32 = n[j + 1..].iter().sum();
    n[j] -= 1;
    n[j + 1..].fill(0);
    n[j + 1] = tail + 1;
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_force(n_sites: usize, depth: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n_sites];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in 0..=left {
                cur[pos] = v;
                rec(pos + 1, left - v, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, depth as u32, &mut cur, &mut out);
        out
    }

    #[test]
    fn small_counts() {
        assert_eq!(HierarchyIndexSpace::new(7, 0).unwrap().count(), 1);
        assert_eq!(HierarchyIndexSpace::new(1, 3).unwrap().count(), 4);
        assert_eq!(hierarchy_count(7, 12), Some(50388));
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n_sites in 1..=4 {
            for depth in 0..=5 {
                let space = HierarchyIndexSpace::new(n_sites, depth).unwrap();
                let all: HashSet<Vec<u32>> = brute_force(n_sites, depth).into_iter().collect();
                assert_eq!(space.count(), all.len());
                let listed: HashSet<Vec<u32>> =
                    (0..space.count()).map(|i| space.unrank(i).0).collect();
                assert_eq!(listed, all);
            }
        }
    }

    #[test]
    fn graded_descending_lex_order() {
        let space = HierarchyIndexSpace::new(3, 2).unwrap();
        let order: Vec<Vec<u32>> = (0..space.count()).map(|i| space.unrank(i).0).collect();
        assert_eq!(
            order,
            vec![
                vec![0, 0, 0],
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 2, 0],
                vec![0, 1, 1],
                vec![0, 0, 2],
            ]
        );
    }

    #[test]
    fn rank_unrank_and_neighbors_are_consistent() {
        let space = HierarchyIndexSpace::new(7, 4).unwrap();
        for node in 0..space.count() {
            let n = space.unrank(node);
            assert_eq!(space.rank(&n), Some(node));
            for k in 0..7 {
                let p = space.plus(node, k);
                if n.depth() < 4 {
                    assert_ne!(p, NO_NEIGHBOR);
                    assert_eq!(space.minus(p as usize, k) as usize, node);
                    let mut up = n.clone();
                    up.0[k] += 1;
                    assert_eq!(space.unrank(p as usize), up);
                } else {
                    assert_eq!(p, NO_NEIGHBOR);
                }
                let m = space.minus(node, k);
                if n.0[k] > 0 {
                    assert_eq!(space.plus(m as usize, k) as usize, node);
                } else {
                    assert_eq!(m, NO_NEIGHBOR);
                }
            }
        }
    }

    #[test]
    fn rank_rejects_outside_space() {
        let space = HierarchyIndexSpace::new(3, 2).unwrap();
        assert_eq!(space.rank(&MultiIndex(vec![2, 1, 0])), None);
        assert_eq!(space.rank(&MultiIndex(vec![1, 0])), None);
    }

    #[test]
    fn absurd_depth_is_rejected_with_count() {
        let err = HierarchyIndexSpace::new(7, 200).unwrap_err();
        let expected = binomial(207, 7).unwrap();
        assert_eq!(
            err,
            Error::HierarchyTooLarge {
                count: expected,
                max: MAX_NODES
            }
        );
    }
}
