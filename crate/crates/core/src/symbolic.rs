//! Symbolic multiply over the leaf tier of two linkless quadtrees.
//!
//! 1. extract one [`IndexEntry`] per leaf of each operand,
//! 2. stable-sort the entries on their contraction index `k`,
//! 3. sort every run of equal `k` by descending norm,
//! 4. convolve matching runs, emitting a [`ProductTask`] for every pair whose
//!    norm product is at least `tau`.
//!
//! Because each run is sorted by norm, the inner loop stops at the first
//! failing pair and the outer loop stops once an A entry fails against the
//! largest B entry. The early exits never drop a pair that passes.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Result, SpammError};
use crate::matrix::{LeafId, QuadtreeMatrix};
use crate::morton::{c_index, k_of_a, k_of_b, LinearIndex};

/// Which side of the product an operand is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    A,
    B,
}

/// How leaf entries are pulled out of a quadtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LeafStore {
    /// Walk the contiguous leaf array.
    #[default]
    Array,
    /// Walk the hashed key store and resolve each leaf through it.
    Map,
}

/// Contraction index of `key` moved into the column lane, so A and B values
/// compare directly.
#[inline]
pub fn k_lane(key: LinearIndex, role: Role) -> u64 {
    match role {
        Role::A => k_of_a(key),
        Role::B => k_of_b(key) >> 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEntry {
    pub key: LinearIndex,
    pub norm: f32,
    pub leaf: LeafId,
}

/// A run of entries sharing one contraction index, as a range into
/// [`SortedOperand::entries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KBlock {
    pub k: u64,
    pub start: usize,
    pub end: usize,
}

impl KBlock {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Operand entries after both sort passes.
#[derive(Debug, Clone)]
pub struct SortedOperand {
    pub role: Role,
    pub entries: Vec<IndexEntry>,
    pub blocks: Vec<KBlock>,
}

impl SortedOperand {
    pub fn block_entries(&self, block: &KBlock) -> &[IndexEntry] {
        &self.entries[block.start..block.end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductTask {
    pub a: LeafId,
    pub b: LeafId,
    pub a_key: LinearIndex,
    pub b_key: LinearIndex,
    pub c_key: LinearIndex,
    /// `|A_ik|_F * |B_kj|_F`, exact in double precision.
    pub norm_product: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlanStats {
    /// Tasks emitted.
    pub tasks: u64,
    /// Norm products evaluated by the convolution.
    pub examined: u64,
    /// Evaluated products that fell below `tau` (one per loop exit).
    pub pruned: u64,
    /// All leaf pairs with matching `k`, evaluated or not.
    pub candidates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Operands {
    pub a_uid: u64,
    pub b_uid: u64,
    pub rows: usize,
    pub inner: usize,
    pub cols: usize,
    pub leaf_size: usize,
}

/// Ordered product tasks for one multiply.
#[derive(Debug, Clone)]
pub struct MultiplyPlan {
    pub tasks: Vec<ProductTask>,
    pub stats: PlanStats,
    pub tau: f64,
    pub(crate) operands: Option<Operands>,
}

impl MultiplyPlan {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// `(m, k, n)` of the product the plan was built for, when known.
    pub fn dims(&self) -> Option<(usize, usize, usize)> {
        self.operands.map(|o| (o.rows, o.inner, o.cols))
    }

    /// Writes one `l_A l_B l_C normprod` line per task, in plan order.
    pub fn write_dump(&self, w: &mut impl Write) -> Result<()> {
        for t in &self.tasks {
            writeln!(
                w,
                "{} {} {} {:e}",
                t.a_key.0, t.b_key.0, t.c_key.0, t.norm_product
            )?;
        }
        Ok(())
    }
}

pub fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(SpammError::InvalidArgument(format!(
            "tolerance must be finite and >= 0, got {tau}"
        )));
    }
    Ok(())
}

/// One entry per stored leaf, in leaf storage order.
pub fn extract_entries(q: &QuadtreeMatrix) -> Vec<IndexEntry> {
    q.leaves()
        .map(|(leaf, key, block)| IndexEntry {
            key,
            norm: block.norm(),
            leaf,
        })
        .collect()
}

/// Same entries as [`extract_entries`], gathered through the hashed store.
pub fn extract_entries_hashed(q: &QuadtreeMatrix) -> Vec<IndexEntry> {
    q.leaf_keys_hashed()
        .map(|(key, _)| {
            let leaf = q.leaf_id(key).expect("key comes from the index");
            IndexEntry {
                key,
                norm: q.leaf(leaf).norm(),
                leaf,
            }
        })
        .collect()
}

/// Stable sort on the contraction index (merge-based `slice::sort_by_key`).
pub fn sort_by_k(entries: &mut [IndexEntry], role: Role) {
    entries.sort_by_key(|e| k_lane(e.key, role));
}

/// Splits k-sorted entries into runs and orders each run by descending norm,
/// breaking ties by ascending key.
pub fn sort_kblocks_by_norm(mut entries: Vec<IndexEntry>, role: Role) -> SortedOperand {
    let mut blocks = Vec::new();
    let mut start = 0;
    while start < entries.len() {
        let k = k_lane(entries[start].key, role);
        let mut end = start + 1;
        while end < entries.len() && k_lane(entries[end].key, role) == k {
            end += 1;
        }
        entries[start..end].sort_by(|x, y| y.norm.total_cmp(&x.norm).then(x.key.cmp(&y.key)));
        blocks.push(KBlock { k, start, end });
        start = end;
    }
    SortedOperand {
        role,
        entries,
        blocks,
    }
}

/// Extraction and both sorts for one operand.
pub fn prepare(q: &QuadtreeMatrix, role: Role, store: LeafStore) -> SortedOperand {
    let mut entries = match store {
        LeafStore::Array => extract_entries(q),
        LeafStore::Map => extract_entries_hashed(q),
    };
    sort_by_k(&mut entries, role);
    sort_kblocks_by_norm(entries, role)
}

fn convolve_block(
    a: &[IndexEntry],
    b: &[IndexEntry],
    tau: f64,
    tasks: &mut Vec<ProductTask>,
    stats: &mut PlanStats,
) {
    stats.candidates += (a.len() * b.len()) as u64;
    for ea in a {
        let na = ea.norm as f64;
        let mut passed = 0usize;
        for eb in b {
            let p = na * eb.norm as f64;
            stats.examined += 1;
            if p < tau {
                stats.pruned += 1;
                break;
            }
            tasks.push(ProductTask {
                a: ea.leaf,
                b: eb.leaf,
                a_key: ea.key,
                b_key: eb.key,
                c_key: c_index(ea.key, eb.key),
                norm_product: p,
            });
            passed += 1;
        }
        // failed against the largest B norm: every later A entry fails too
        if passed == 0 && !b.is_empty() {
            break;
        }
    }
    stats.tasks = tasks.len() as u64;
}

/// Matching k-block pairs in ascending k.
fn matching_blocks<'a>(
    a: &'a SortedOperand,
    b: &'a SortedOperand,
) -> Vec<(&'a KBlock, &'a KBlock)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.blocks.len() && j < b.blocks.len() {
        let (ka, kb) = (a.blocks[i].k, b.blocks[j].k);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((&a.blocks[i], &b.blocks[j]));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Convolves two prepared operands under the SpAMM condition
/// (`|A_ik| |B_kj| < tau` drops the pair; equality is kept).
pub fn convolve(a: &SortedOperand, b: &SortedOperand, tau: f64) -> MultiplyPlan {
    let mut tasks = Vec::new();
    let mut stats = PlanStats::default();
    for (ba, bb) in matching_blocks(a, b) {
        convolve_block(
            a.block_entries(ba),
            b.block_entries(bb),
            tau,
            &mut tasks,
            &mut stats,
        );
    }
    stats.tasks = tasks.len() as u64;
    MultiplyPlan {
        tasks,
        stats,
        tau,
        operands: None,
    }
}

/// [`convolve`] with k-blocks processed in parallel; output is identical.
pub fn convolve_par(a: &SortedOperand, b: &SortedOperand, tau: f64) -> MultiplyPlan {
    let parts: Vec<(Vec<ProductTask>, PlanStats)> = matching_blocks(a, b)
        .into_par_iter()
        .map(|(ba, bb)| {
            let mut tasks = Vec::new();
            let mut stats = PlanStats::default();
            convolve_block(
                a.block_entries(ba),
                b.block_entries(bb),
                tau,
                &mut tasks,
                &mut stats,
            );
            (tasks, stats)
        })
        .collect();
    let mut tasks = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    let mut stats = PlanStats::default();
    for (t, s) in parts {
        tasks.extend(t);
        stats.examined += s.examined;
        stats.pruned += s.pruned;
        stats.candidates += s.candidates;
    }
    stats.tasks = tasks.len() as u64;
    MultiplyPlan {
        tasks,
        stats,
        tau,
        operands: None,
    }
}

pub fn plan_stats(plan: &MultiplyPlan) -> PlanStats {
    plan.stats
}

/// Options for [`symbolic_multiply_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct SymbolicOptions {
    pub store: LeafStore,
    pub parallel: bool,
}

/// Builds the product plan for `A * B`.
pub fn symbolic_multiply(a: &QuadtreeMatrix, b: &QuadtreeMatrix, tau: f64) -> Result<MultiplyPlan> {
    symbolic_multiply_with(a, b, tau, SymbolicOptions::default())
}

pub fn symbolic_multiply_with(
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    tau: f64,
    opts: SymbolicOptions,
) -> Result<MultiplyPlan> {
    check_tau(tau)?;
    if a.cols() != b.rows() {
        return Err(SpammError::DimensionMismatch(format!(
            "A is {}x{}, B is {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    if a.leaf_size() != b.leaf_size() {
        return Err(SpammError::DimensionMismatch(format!(
            "leaf sizes differ: {} vs {}",
            a.leaf_size(),
            b.leaf_size()
        )));
    }
    let sa = prepare(a, Role::A, opts.store);
    let sb = prepare(b, Role::B, opts.store);
    let mut plan = if opts.parallel {
        convolve_par(&sa, &sb, tau)
    } else {
        convolve(&sa, &sb, tau)
    };
    plan.operands = Some(Operands {
        a_uid: a.uid(),
        b_uid: b.uid(),
        rows: a.rows(),
        inner: a.cols(),
        cols: b.cols(),
        leaf_size: a.leaf_size(),
    });
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DenseMatrix;

    fn entry(i: u32, j: u32, norm: f32, tag: u32) -> IndexEntry {
        IndexEntry {
            key: LinearIndex::encode_u32(i, j),
            norm,
            leaf: LeafId(tag),
        }
    }

    fn dense_tree(n: usize) -> QuadtreeMatrix {
        let d = DenseMatrix::from_fn(n, n, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f32).unwrap();
        QuadtreeMatrix::from_dense(&d, 16).unwrap()
    }

    #[test]
    fn extract_counts() {
        let empty = QuadtreeMatrix::zeros(64, 64, 16).unwrap();
        assert!(extract_entries(&empty).is_empty());
        let q = dense_tree(64);
        let e = extract_entries(&q);
        assert_eq!(e.len(), 16);
        for x in &e {
            assert_eq!(x.norm, q.leaf(x.leaf).norm());
            assert_eq!(q.leaf_key(x.leaf), x.key);
        }
        let mut h = extract_entries_hashed(&q);
        let mut a = e.clone();
        h.sort_by_key(|x| x.key);
        a.sort_by_key(|x| x.key);
        assert_eq!(h, a);
    }

    #[test]
    fn sort_by_k_orders_and_is_stable() {
        // A entries: k is the column
        let mut e = vec![
            entry(0, 3, 1.0, 0),
            entry(1, 2, 1.0, 1),
            entry(2, 1, 1.0, 2),
            entry(3, 0, 1.0, 3),
        ];
        sort_by_k(&mut e, Role::A);
        let ks: Vec<u32> = e.iter().map(|x| x.key.decode().1).collect();
        assert_eq!(ks, vec![0, 1, 2, 3]);
        let before = e.clone();
        sort_by_k(&mut e, Role::A);
        assert_eq!(e, before);

        // two entries per k, tagged in input order
        let mut e = vec![
            entry(5, 1, 1.0, 0),
            entry(2, 0, 1.0, 1),
            entry(0, 1, 1.0, 2),
            entry(7, 0, 1.0, 3),
        ];
        sort_by_k(&mut e, Role::A);
        let tags: Vec<u32> = e.iter().map(|x| x.leaf.0).collect();
        assert_eq!(tags, vec![1, 3, 0, 2]);

        // B entries: k is the row
        let mut e = vec![
            entry(1, 0, 1.0, 0),
            entry(0, 5, 1.0, 1),
            entry(1, 9, 1.0, 2),
            entry(0, 2, 1.0, 3),
        ];
        sort_by_k(&mut e, Role::B);
        let tags: Vec<u32> = e.iter().map(|x| x.leaf.0).collect();
        assert_eq!(tags, vec![1, 3, 0, 2]);
    }

    #[test]
    fn norm_sort_within_blocks() {
        let e = vec![
            entry(0, 0, 1.0, 0),
            entry(1, 0, 5.0, 1),
            entry(2, 0, 3.0, 2),
            entry(0, 1, 9.0, 3),
        ];
        let s = sort_kblocks_by_norm(e, Role::A);
        assert_eq!(s.blocks.len(), 2);
        let norms: Vec<f32> = s
            .block_entries(&s.blocks[0])
            .iter()
            .map(|x| x.norm)
            .collect();
        assert_eq!(norms, vec![5.0, 3.0, 1.0]);
        assert_eq!(s.blocks[1].len(), 1);

        // equal norms fall back to ascending key; 8 and 2 both have k = 0 in A
        let e = vec![
            IndexEntry {
                key: LinearIndex(8),
                norm: 2.0,
                leaf: LeafId(0),
            },
            IndexEntry {
                key: LinearIndex(2),
                norm: 2.0,
                leaf: LeafId(1),
            },
        ];
        let s = sort_kblocks_by_norm(e, Role::A);
        assert_eq!(s.blocks.len(), 1);
        let keys: Vec<u64> = s.entries.iter().map(|x| x.key.0).collect();
        assert_eq!(keys, vec![2, 8]);
    }

    #[test]
    fn dense_tau_zero_is_complete() {
        let q = dense_tree(64);
        let plan = symbolic_multiply(&q, &q, 0.0).unwrap();
        assert_eq!(plan.len(), 64);
        assert_eq!(plan.stats.pruned, 0);
        assert_eq!(plan.stats.examined, 64);
        assert_eq!(plan.stats.candidates, 64);
        for t in &plan.tasks {
            let (i, k) = t.a_key.decode();
            let (k2, j) = t.b_key.decode();
            assert_eq!(k, k2);
            assert_eq!(t.c_key, LinearIndex::encode_u32(i, j));
        }
    }

    #[test]
    fn huge_tau_prunes_everything() {
        let q = dense_tree(64);
        let max = q
            .leaves()
            .map(|(_, _, l)| l.norm() as f64)
            .fold(0.0, f64::max);
        let plan = symbolic_multiply(&q, &q, max * max * 1.01).unwrap();
        assert!(plan.is_empty());
        // one failing check per k-block
        assert_eq!(plan.stats.pruned, 4);
        assert_eq!(plan_stats(&plan).tasks, 0);
    }

    #[test]
    fn threshold_equality_is_kept() {
        let mut a = QuadtreeMatrix::zeros(16, 16, 16).unwrap();
        a.set_element(0, 0, 2.0).unwrap();
        let plan = symbolic_multiply(&a, &a, 4.0).unwrap();
        assert_eq!(plan.len(), 1);
        assert_eq!(plan.tasks[0].norm_product, 4.0);
        let plan = symbolic_multiply(&a, &a, 4.0 + 1e-12).unwrap();
        assert!(plan.is_empty());
    }

    #[test]
    fn empty_plan_stats() {
        let a = QuadtreeMatrix::zeros(32, 32, 16).unwrap();
        let plan = symbolic_multiply(&a, &a, 1.0).unwrap();
        assert_eq!(plan.stats, PlanStats::default());
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = QuadtreeMatrix::zeros(32, 20, 16).unwrap();
        assert!(symbolic_multiply(&a, &a, 0.0).is_err());
        let b = QuadtreeMatrix::zeros(20, 8, 8).unwrap();
        assert!(symbolic_multiply(&a, &b, 0.0).is_err());
        let b = QuadtreeMatrix::zeros(20, 8, 16).unwrap();
        assert!(symbolic_multiply(&a, &b, -1.0).is_err());
        assert!(symbolic_multiply(&a, &b, f64::NAN).is_err());
        assert!(symbolic_multiply(&a, &b, 0.0).is_ok());
    }

    #[test]
    fn dump_format() {
        let mut a = QuadtreeMatrix::zeros(32, 32, 16).unwrap();
        a.set_element(16, 0, 2.0).unwrap();
        let mut b = QuadtreeMatrix::zeros(32, 32, 16).unwrap();
        b.set_element(0, 16, 3.0).unwrap();
        let plan = symbolic_multiply(&a, &b, 0.0).unwrap();
        let mut out = Vec::new();
        plan.write_dump(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2 1 3 6e0\n");
    }
}
