//! Linkless quadtree matrix.
//!
//! Nodes live in per-tier hash maps keyed by their [`LinearIndex`]; there are
//! no child pointers. The root is tier 0 and leaves sit at tier `depth`, each
//! holding a dense `leaf_size x leaf_size` block. A missing node means the
//! corresponding submatrix is exactly zero. The matrix is conceptually padded
//! to `leaf_size * 2^depth` but padding is never stored.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Result, SpammError};
use crate::matrix::dense::DenseMatrix;
use crate::matrix::leaf::LeafBlock;
use crate::morton::LinearIndex;

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

fn fresh_uid() -> u64 {
    NEXT_UID.fetch_add(1, Ordering::Relaxed)
}

/// Handle to a leaf inside one [`QuadtreeMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafId(pub u32);

/// Read-only view of a stored node.
#[derive(Debug, Clone, Copy)]
pub struct TreeNode<'a> {
    pub tier: u32,
    pub index: LinearIndex,
    pub norm: f32,
    pub leaf: Option<&'a LeafBlock>,
}

/// Smallest `d >= 0` with `leaf_size * 2^d >= max(rows, cols)`.
pub fn tree_depth(rows: usize, cols: usize, leaf_size: usize) -> u32 {
    let extent = rows.max(cols);
    let mut d = 0u32;
    let mut padded = leaf_size;
    while padded < extent {
        padded <<= 1;
        d += 1;
    }
    d
}

/// `epsilon = tau / max(|A|_F, |B|_F)`, the element drop tolerance that is
/// consistent with a product tolerance `tau`.
pub fn drop_tolerance(tau: f64, norm_a: f64, norm_b: f64) -> Result<f64> {
    if !(tau >= 0.0) || !(norm_a >= 0.0) || !(norm_b >= 0.0) {
        return Err(SpammError::InvalidArgument(
            "tolerance and norms must be nonnegative".into(),
        ));
    }
    let denom = norm_a.max(norm_b);
    if denom == 0.0 {
        return Err(SpammError::InvalidArgument(
            "drop tolerance undefined for two zero norms".into(),
        ));
    }
    Ok(tau / denom)
}

#[derive(Debug, Clone)]
pub struct QuadtreeMatrix {
    rows: usize,
    cols: usize,
    leaf_size: usize,
    depth: u32,
    /// Norms of tiers `0..depth`.
    interior: Vec<HashMap<u64, f32>>,
    leaf_index: HashMap<u64, LeafId>,
    leaves: Vec<(LinearIndex, LeafBlock)>,
    uid: u64,
}

impl QuadtreeMatrix {
    /// An all-zero `rows x cols` matrix with no stored nodes.
    pub fn zeros(rows: usize, cols: usize, leaf_size: usize) -> Result<Self> {
        if leaf_size == 0 || !leaf_size.is_power_of_two() {
            return Err(SpammError::LeafSizeNotPowerOfTwo(leaf_size));
        }
        if rows == 0 || cols == 0 {
            return Err(SpammError::InvalidArgument(format!(
                "quadtree dimensions must be positive, got {rows}x{cols}"
            )));
        }
        let depth = tree_depth(rows, cols, leaf_size);
        if depth > 32 {
            return Err(SpammError::IndexOverflow {
                row: (rows / leaf_size) as u64,
                col: (cols / leaf_size) as u64,
            });
        }
        Ok(QuadtreeMatrix {
            rows,
            cols,
            leaf_size,
            depth,
            interior: vec![HashMap::new(); depth as usize],
            leaf_index: HashMap::new(),
            leaves: Vec::new(),
            uid: fresh_uid(),
        })
    }

    /// Builds the tree from a dense matrix. All-zero blocks produce no leaf.
    pub fn from_dense(dense: &DenseMatrix<f32>, leaf_size: usize) -> Result<Self> {
        let (rows, cols) = dense.shape();
        let mut q = Self::zeros(rows, cols, leaf_size)?;
        let nb = leaf_size;
        let data = dense.as_slice();
        for bi in 0..rows.div_ceil(nb) {
            for bj in 0..cols.div_ceil(nb) {
                let r_end = ((bi + 1) * nb).min(rows);
                let c_end = ((bj + 1) * nb).min(cols);
                let c0 = bj * nb;
                let any = (bi * nb..r_end).any(|r| {
                    data[r * cols + c0..r * cols + c_end]
                        .iter()
                        .any(|&v| v != 0.0)
                });
                if !any {
                    continue;
                }
                let mut values = vec![0.0f32; nb * nb];
                for r in bi * nb..r_end {
                    let lr = r - bi * nb;
                    values[lr * nb..lr * nb + (c_end - c0)]
                        .copy_from_slice(&data[r * cols + c0..r * cols + c_end]);
                }
                let key = LinearIndex::encode_u32(bi as u32, bj as u32);
                q.push_leaf(key, LeafBlock::from_values(nb, values));
            }
        }
        q.rebuild_interior();
        Ok(q)
    }

    /// Assembles a tree from leaves; norms are recomputed.
    pub fn from_leaves(
        rows: usize,
        cols: usize,
        leaf_size: usize,
        leaves: impl IntoIterator<Item = (LinearIndex, LeafBlock)>,
    ) -> Result<Self> {
        let mut q = Self::zeros(rows, cols, leaf_size)?;
        for (key, mut leaf) in leaves {
            if leaf.size() != leaf_size {
                return Err(SpammError::DimensionMismatch(format!(
                    "leaf of size {} in a tree with leaf size {leaf_size}",
                    leaf.size()
                )));
            }
            q.check_leaf_key(key)?;
            let (bi, bj) = key.decode();
            let (r0, c0) = (bi as usize * leaf_size, bj as usize * leaf_size);
            let padded = (0..leaf_size).any(|lr| {
                (0..leaf_size)
                    .any(|lc| (r0 + lr >= rows || c0 + lc >= cols) && leaf.get(lr, lc) != 0.0)
            });
            if padded {
                return Err(SpammError::InvalidArgument(format!(
                    "leaf ({bi}, {bj}) has non-zero values in the padding region"
                )));
            }
            if q.leaf_index.contains_key(&key.0) {
                return Err(SpammError::InvalidArgument(format!(
                    "duplicate leaf key {}",
                    key.0
                )));
            }
            leaf.compute_norms();
            q.push_leaf(key, leaf);
        }
        q.rebuild_interior();
        Ok(q)
    }

    fn check_leaf_key(&self, key: LinearIndex) -> Result<()> {
        let (bi, bj) = key.decode();
        let nb = self.leaf_size;
        if bi as usize * nb >= self.rows || bj as usize * nb >= self.cols {
            return Err(SpammError::InvalidArgument(format!(
                "leaf ({bi}, {bj}) lies entirely in the padding region"
            )));
        }
        Ok(())
    }

    fn push_leaf(&mut self, key: LinearIndex, leaf: LeafBlock) -> LeafId {
        let id = LeafId(self.leaves.len() as u32);
        self.leaves.push((key, leaf));
        self.leaf_index.insert(key.0, id);
        id
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    #[inline]
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Padded size `leaf_size * 2^depth`.
    #[inline]
    pub fn padded_size(&self) -> usize {
        self.leaf_size << self.depth
    }

    /// Identity of the current contents; changes on every mutation.
    #[inline]
    pub fn uid(&self) -> u64 {
        self.uid
    }

    #[inline]
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    /// Frobenius norm of the whole matrix.
    pub fn norm(&self) -> f32 {
        self.node_norm(0, LinearIndex(0)).unwrap_or(0.0)
    }

    /// Leaves in storage order.
    pub fn leaves(&self) -> impl Iterator<Item = (LeafId, LinearIndex, &LeafBlock)> + '_ {
        self.leaves
            .iter()
            .enumerate()
            .map(|(i, (k, l))| (LeafId(i as u32), *k, l))
    }

    /// Leaf keys as found in the hashed store (unspecified order).
    pub fn leaf_keys_hashed(&self) -> impl Iterator<Item = (LinearIndex, LeafId)> + '_ {
        self.leaf_index.iter().map(|(&k, &id)| (LinearIndex(k), id))
    }

    #[inline]
    pub fn leaf(&self, id: LeafId) -> &LeafBlock {
        &self.leaves[id.0 as usize].1
    }

    #[inline]
    pub fn leaf_key(&self, id: LeafId) -> LinearIndex {
        self.leaves[id.0 as usize].0
    }

    pub fn try_leaf(&self, id: LeafId) -> Option<(LinearIndex, &LeafBlock)> {
        self.leaves.get(id.0 as usize).map(|(k, l)| (*k, l))
    }

    #[inline]
    pub fn leaf_id(&self, key: LinearIndex) -> Option<LeafId> {
        self.leaf_index.get(&key.0).copied()
    }

    pub fn leaf_by_key(&self, key: LinearIndex) -> Option<&LeafBlock> {
        self.leaf_id(key).map(|id| self.leaf(id))
    }

    pub fn node_norm(&self, tier: u32, index: LinearIndex) -> Option<f32> {
        if tier == self.depth {
            self.leaf_by_key(index).map(LeafBlock::norm)
        } else {
            self.interior.get(tier as usize)?.get(&index.0).copied()
        }
    }

    pub fn node(&self, tier: u32, index: LinearIndex) -> Option<TreeNode<'_>> {
        if tier == self.depth {
            self.leaf_by_key(index).map(|leaf| TreeNode {
                tier,
                index,
                norm: leaf.norm(),
                leaf: Some(leaf),
            })
        } else {
            let norm = *self.interior.get(tier as usize)?.get(&index.0)?;
            Some(TreeNode {
                tier,
                index,
                norm,
                leaf: None,
            })
        }
    }

    /// Number of stored nodes on a tier.
    pub fn tier_len(&self, tier: u32) -> usize {
        if tier == self.depth {
            self.leaves.len()
        } else {
            self.interior.get(tier as usize).map_or(0, HashMap::len)
        }
    }

    /// Sorted keys of the stored nodes on a tier.
    pub fn tier_keys(&self, tier: u32) -> Vec<LinearIndex> {
        let mut keys: Vec<LinearIndex> = if tier == self.depth {
            self.leaves.iter().map(|(k, _)| *k).collect()
        } else {
            self.interior
                .get(tier as usize)
                .map(|m| m.keys().map(|&k| LinearIndex(k)).collect())
                .unwrap_or_default()
        };
        keys.sort_unstable();
        keys
    }

    fn children_norm(&self, child_tier: u32, parent: LinearIndex) -> f32 {
        let mut sq = 0.0f64;
        for q in 0..4 {
            if let Some(n) = self.node_norm(child_tier, parent.child(q)) {
                sq += (n as f64) * (n as f64);
            }
        }
        sq.sqrt() as f32
    }

    /// Rebuilds every interior norm from the leaf norms, bottom-up.
    fn rebuild_interior(&mut self) {
        for tier in self.interior.iter_mut() {
            tier.clear();
        }
        for t in (0..self.depth).rev() {
            let parents: HashSet<u64> = if t + 1 == self.depth {
                self.leaves.iter().map(|(k, _)| k.parent().0).collect()
            } else {
                self.interior[t as usize + 1]
                    .keys()
                    .map(|&k| k >> 2)
                    .collect()
            };
            let mut tier = HashMap::with_capacity(parents.len());
            for p in parents {
                tier.insert(p, self.children_norm(t + 1, LinearIndex(p)));
            }
            self.interior[t as usize] = tier;
        }
    }

    fn update_ancestors(&mut self, leaf_key: LinearIndex) {
        for t in (0..self.depth).rev() {
            let key = leaf_key.ancestor(self.depth - t);
            let norm = self.children_norm(t + 1, key);
            self.interior[t as usize].insert(key.0, norm);
        }
    }

    /// Recomputes leaf sub-norms, block norms and all interior norms.
    pub fn compute_norms(&mut self) {
        for (_, leaf) in self.leaves.iter_mut() {
            leaf.compute_norms();
        }
        self.rebuild_interior();
        self.uid = fresh_uid();
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(SpammError::IndexOutOfRange {
                row: i,
                col: j,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn get_element(&self, i: usize, j: usize) -> Result<f32> {
        self.check_index(i, j)?;
        let nb = self.leaf_size;
        let key = LinearIndex::encode_u32((i / nb) as u32, (j / nb) as u32);
        Ok(self
            .leaf_by_key(key)
            .map_or(0.0, |leaf| leaf.get(i % nb, j % nb)))
    }

    /// Stores `v` and refreshes the norms on the path to the root. Setting an
    /// element to zero keeps its leaf allocated.
    pub fn set_element(&mut self, i: usize, j: usize, v: f32) -> Result<()> {
        self.check_index(i, j)?;
        if !v.is_finite() {
            return Err(SpammError::NonFinite {
                row: i,
                col: j,
                value: v as f64,
            });
        }
        let nb = self.leaf_size;
        let key = LinearIndex::encode_u32((i / nb) as u32, (j / nb) as u32);
        let id = match self.leaf_id(key) {
            Some(id) => id,
            None if v == 0.0 => return Ok(()),
            None => self.push_leaf(key, LeafBlock::zeros(nb)),
        };
        self.leaves[id.0 as usize].1.set(i % nb, j % nb, v);
        self.update_ancestors(key);
        self.uid = fresh_uid();
        Ok(())
    }

    /// Zeroes every sub-block with norm below `eps`, removes leaves that end
    /// up zero, and returns the number of non-zero sub-blocks dropped.
    pub fn sparsify(&mut self, eps: f64) -> usize {
        let mut dropped = 0;
        for (_, leaf) in self.leaves.iter_mut() {
            dropped += leaf.drop_below(eps);
        }
        let before = self.leaves.len();
        self.leaves.retain(|(_, leaf)| leaf.norm() > 0.0);
        if dropped > 0 || self.leaves.len() != before {
            self.leaf_index = self
                .leaves
                .iter()
                .enumerate()
                .map(|(i, (k, _))| (k.0, LeafId(i as u32)))
                .collect();
            self.rebuild_interior();
            self.uid = fresh_uid();
        }
        dropped
    }

    /// Multiplies every element by `s` and refreshes the norms.
    pub fn scale(&mut self, s: f32) {
        for (_, leaf) in self.leaves.iter_mut() {
            leaf.scale(s);
        }
        self.compute_norms();
    }

    pub fn to_dense(&self) -> DenseMatrix<f32> {
        let (rows, cols, nb) = (self.rows, self.cols, self.leaf_size);
        let mut data = vec![0.0f32; rows * cols];
        for (key, leaf) in &self.leaves {
            let (bi, bj) = key.decode();
            let (r0, c0) = (bi as usize * nb, bj as usize * nb);
            let c_len = nb.min(cols - c0);
            for lr in 0..nb.min(rows - r0) {
                let r = r0 + lr;
                data[r * cols + c0..r * cols + c0 + c_len]
                    .copy_from_slice(&leaf.values()[lr * nb..lr * nb + c_len]);
            }
        }
        DenseMatrix::new(rows, cols, data).expect("leaf values are finite")
    }

    /// Walks the whole tree and checks structure, padding and norm
    /// consistency (`|n^2 - sum children^2| <= 1e-6 n^2`).
    pub fn check_invariants(&self) -> Result<()> {
        const REL: f64 = 1e-6;
        // spacing of f32 subnormals; bounds the storage error of tiny norms
        let tiny = f64::from(f32::from_bits(1));
        // `parts` rounded norms summed on one side, one rounded norm on the other
        let close = |x: f64, y: f64, parts: usize| {
            let m = x.max(y);
            (x - y).abs() <= REL * m + 2.0 * (1.0 + (parts as f64).sqrt()) * m.sqrt() * tiny
        };
        let fail = |msg: String| Err(SpammError::InvariantViolation(msg));
        let nb = self.leaf_size;
        if self.leaf_index.len() != self.leaves.len() {
            return fail("leaf index and leaf store disagree".into());
        }
        for (i, (key, leaf)) in self.leaves.iter().enumerate() {
            if self.leaf_index.get(&key.0) != Some(&LeafId(i as u32)) {
                return fail(format!("leaf {} missing from index", key.0));
            }
            let (bi, bj) = key.decode();
            let (r0, c0) = (bi as usize * nb, bj as usize * nb);
            if r0 >= self.rows || c0 >= self.cols {
                return fail(format!("leaf {} lies in the padding region", key.0));
            }
            for lr in 0..nb {
                for lc in 0..nb {
                    if (r0 + lr >= self.rows || c0 + lc >= self.cols) && leaf.get(lr, lc) != 0.0 {
                        return fail(format!("non-zero padding in leaf {}", key.0));
                    }
                }
            }
            let direct: f64 = leaf.values().iter().map(|&v| (v as f64) * (v as f64)).sum();
            let n2 = (leaf.norm() as f64).powi(2);
            if !close(n2, direct, 0) {
                return fail(format!(
                    "leaf {} norm {} vs Frobenius {}",
                    key.0,
                    leaf.norm(),
                    direct.sqrt()
                ));
            }
            let subs: f64 = leaf
                .subnorms()
                .iter()
                .map(|&s| (s as f64) * (s as f64))
                .sum();
            if !close(n2, subs, leaf.subnorms().len()) {
                return fail(format!("leaf {} sub-norms inconsistent", key.0));
            }
            if self.depth > 0
                && !self.interior[self.depth as usize - 1].contains_key(&key.parent().0)
            {
                return fail(format!("leaf {} has no parent", key.0));
            }
        }
        for t in 0..self.depth {
            for (&k, &norm) in &self.interior[t as usize] {
                let key = LinearIndex(k);
                if t > 0 && !self.interior[t as usize - 1].contains_key(&key.parent().0) {
                    return fail(format!("node ({t}, {k}) has no parent"));
                }
                if t == 0 && k != 0 {
                    return fail(format!("root tier holds key {k}"));
                }
                let mut children = 0;
                let mut sq = 0.0f64;
                for q in 0..4 {
                    if let Some(n) = self.node_norm(t + 1, key.child(q)) {
                        children += 1;
                        sq += (n as f64) * (n as f64);
                    }
                }
                if children == 0 {
                    return fail(format!("interior node ({t}, {k}) has no children"));
                }
                let n2 = (norm as f64) * (norm as f64);
                if !close(n2, sq, 4) {
                    return fail(format!("node ({t}, {k}) norm^2 {n2} vs children {sq}"));
                }
            }
        }
        Ok(())
    }
}
