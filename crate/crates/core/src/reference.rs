//! Reference products and error measures used to check SpAMM results.

use std::collections::HashMap;

use crate::error::{Result, SpammError};
use crate::matrix::{DenseMatrix, LeafBlock, QuadtreeMatrix, Scalar};
use crate::morton::LinearIndex;
use crate::numeric::{dense_leaf_multiply, Granularity};
use crate::symbolic::check_tau;

/// `alpha * A * B + beta * C` with a plain triple loop in precision `T`.
///
/// Every element sums its `k` terms in ascending order; zero `a_ik` terms are
/// skipped, which changes nothing for finite inputs.
pub fn dense_multiply<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    alpha: T,
    beta: T,
    c: Option<&DenseMatrix<T>>,
) -> Result<DenseMatrix<T>> {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    if k != kb {
        return Err(SpammError::DimensionMismatch(format!(
            "A is {m}x{k}, B is {kb}x{n}"
        )));
    }
    if let Some(c) = c {
        if c.shape() != (m, n) {
            return Err(SpammError::DimensionMismatch(format!(
                "C is {}x{}, product is {m}x{n}",
                c.rows(),
                c.cols()
            )));
        }
    }
    // non-zero column extent of each row of B
    let extents: Vec<(usize, usize)> = (0..k)
        .map(|r| {
            let row = b.row(r);
            match row.iter().position(|x| !x.is_zero()) {
                Some(lo) => (lo, n - row.iter().rev().position(|x| !x.is_zero()).unwrap()),
                None => (0, 0),
            }
        })
        .collect();
    let mut out = vec![T::zero(); m * n];
    let mut acc = vec![T::zero(); n];
    for i in 0..m {
        acc.iter_mut().for_each(|x| *x = T::zero());
        let arow = a.row(i);
        for (p, &aik) in arow.iter().enumerate() {
            let (lo, hi) = extents[p];
            if aik.is_zero() || lo >= hi {
                continue;
            }
            let brow = &b.row(p)[lo..hi];
            for (x, &bv) in acc[lo..hi].iter_mut().zip(brow) {
                *x = *x + aik * bv;
            }
        }
        let orow = &mut out[i * n..(i + 1) * n];
        match c {
            Some(c) => {
                for ((o, &s), &cv) in orow.iter_mut().zip(&acc).zip(c.row(i)) {
                    *o = alpha * s + beta * cv;
                }
            }
            None => {
                for (o, &s) in orow.iter_mut().zip(&acc) {
                    *o = alpha * s;
                }
            }
        }
    }
    DenseMatrix::new(m, n, out)
}

pub fn dense_multiply_double(
    a: &DenseMatrix<f64>,
    b: &DenseMatrix<f64>,
    alpha: f64,
    beta: f64,
    c: Option<&DenseMatrix<f64>>,
) -> Result<DenseMatrix<f64>> {
    dense_multiply(a, b, alpha, beta, c)
}

pub fn dense_multiply_single(
    a: &DenseMatrix<f32>,
    b: &DenseMatrix<f32>,
    alpha: f32,
    beta: f32,
    c: Option<&DenseMatrix<f32>>,
) -> Result<DenseMatrix<f32>> {
    dense_multiply(a, b, alpha, beta, c)
}

/// Result of [`recursive_spamm`].
#[derive(Debug, Clone)]
pub struct RecursiveProduct {
    pub c: QuadtreeMatrix,
    /// Leaf pairs `(l_A, l_B)` that were multiplied, in visit order.
    pub visits: Vec<(LinearIndex, LinearIndex)>,
}

/// Depth-first SpAMM: at every tier a node pair survives only when
/// `|A_node| |B_node| >= tau`; surviving leaf pairs get a full leaf product.
///
/// Both operands must have the same tree depth.
pub fn recursive_spamm(
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    tau: f64,
) -> Result<RecursiveProduct> {
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
        return Err(SpammError::DimensionMismatch(
            "operands use different leaf sizes".into(),
        ));
    }
    if a.depth() != b.depth() {
        return Err(SpammError::DepthMismatch(a.depth(), b.depth()));
    }
    let nb = a.leaf_size();
    let mut walk = Walk {
        a,
        b,
        tau,
        depth: a.depth(),
        acc: HashMap::new(),
        order: Vec::new(),
        visits: Vec::new(),
    };
    walk.visit(0, LinearIndex(0), LinearIndex(0), LinearIndex(0));
    let Walk {
        mut acc,
        order,
        visits,
        ..
    } = walk;
    let mut leaves: Vec<(LinearIndex, LeafBlock)> = order
        .into_iter()
        .map(|k| (k, LeafBlock::from_values(nb, acc.remove(&k.0).unwrap())))
        .collect();
    leaves.sort_unstable_by_key(|(k, _)| *k);
    let c = QuadtreeMatrix::from_leaves(a.rows(), b.cols(), nb, leaves)?;
    Ok(RecursiveProduct { c, visits })
}

struct Walk<'a> {
    a: &'a QuadtreeMatrix,
    b: &'a QuadtreeMatrix,
    tau: f64,
    depth: u32,
    acc: HashMap<u64, Vec<f32>>,
    order: Vec<LinearIndex>,
    visits: Vec<(LinearIndex, LinearIndex)>,
}

impl Walk<'_> {
    fn visit(&mut self, tier: u32, la: LinearIndex, lb: LinearIndex, lc: LinearIndex) {
        let (Some(na), Some(nbn)) = (self.a.node_norm(tier, la), self.b.node_norm(tier, lb)) else {
            return;
        };
        if (na as f64) * (nbn as f64) < self.tau {
            return;
        }
        if tier == self.depth {
            let (Some(ba), Some(bb)) = (self.a.leaf_by_key(la), self.b.leaf_by_key(lb)) else {
                return;
            };
            let size = ba.size();
            let order = &mut self.order;
            let acc = self.acc.entry(lc.0).or_insert_with(|| {
                order.push(lc);
                vec![0.0; size * size]
            });
            dense_leaf_multiply(ba, bb, acc);
            self.visits.push((la, lb));
            return;
        }
        // children (p, r) of A and (r, q) of B contribute to child (p, q) of C
        for p in 0..2u8 {
            for q in 0..2u8 {
                for r in 0..2u8 {
                    self.visit(
                        tier + 1,
                        la.child(2 * p + r),
                        lb.child(2 * r + q),
                        lc.child(2 * p + q),
                    );
                }
            }
        }
    }
}

/// Largest element-wise deviation of `c` from a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub max_abs: f64,
    /// `(row, col)` of the largest deviation; `(0, 0)` for empty matrices.
    pub location: (usize, usize),
    pub tau: Option<f64>,
    pub granularity: Option<Granularity>,
}

impl ErrorReport {
    pub fn with_run(mut self, tau: f64, granularity: Option<Granularity>) -> Self {
        self.tau = Some(tau);
        self.granularity = granularity;
        self
    }
}

/// `max_ij |c_ij - r_ij|` evaluated in double precision.
pub fn max_norm_error<T: Scalar, U: Scalar>(
    c: &DenseMatrix<T>,
    reference: &DenseMatrix<U>,
) -> Result<ErrorReport> {
    if c.shape() != reference.shape() {
        return Err(SpammError::DimensionMismatch(format!(
            "result is {}x{}, reference is {}x{}",
            c.rows(),
            c.cols(),
            reference.rows(),
            reference.cols()
        )));
    }
    let cols = c.cols().max(1);
    let mut best = (0.0f64, 0usize);
    for (i, (x, y)) in c.as_slice().iter().zip(reference.as_slice()).enumerate() {
        let d = (x.to_double() - y.to_double()).abs();
        if d > best.0 {
            best = (d, i);
        }
    }
    Ok(ErrorReport {
        max_abs: best.0,
        location: (best.1 / cols, best.1 % cols),
        tau: None,
        granularity: None,
    })
}

/// Flop count of the dense `(m x k) (k x n)` product with `beta != 0`:
/// `m [k (1 + 2n) - n]`.
pub fn flop_model(m: u64, k: u64, n: u64) -> u64 {
    if m == 0 || k == 0 {
        return 0;
    }
    m * (k * (1 + 2 * n) - n)
}

/// Modeled flops per second; `seconds` must be positive.
pub fn effective_performance(flops: u64, seconds: f64) -> Result<f64> {
    if !(seconds > 0.0) || !seconds.is_finite() {
        return Err(SpammError::InvalidArgument(format!(
            "elapsed time must be positive, got {seconds}"
        )));
    }
    Ok(flops as f64 / seconds)
}

/// Modeled flops and rate for one timed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfModel {
    pub flops: u64,
    pub seconds: f64,
    pub rate: f64,
}

impl PerfModel {
    pub fn new(m: usize, k: usize, n: usize, seconds: f64) -> Result<Self> {
        let flops = flop_model(m as u64, k as u64, n as u64);
        let rate = effective_performance(flops, seconds)?;
        Ok(PerfModel {
            flops,
            seconds,
            rate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::symbolic_multiply;
    use std::collections::HashSet;

    #[test]
    fn dense_small_cases() {
        let a = DenseMatrix::<f64>::from_rows(&[&[3.0]]).unwrap();
        let b = DenseMatrix::<f64>::from_rows(&[&[-2.5]]).unwrap();
        assert_eq!(
            dense_multiply_double(&a, &b, 1.0, 0.0, None)
                .unwrap()
                .get(0, 0),
            -7.5
        );
        let i = DenseMatrix::<f64>::identity(5);
        let x = DenseMatrix::<f64>::from_fn(5, 5, |r, c| (r * 5 + c) as f64 - 7.0).unwrap();
        assert_eq!(dense_multiply_double(&i, &x, 1.0, 0.0, None).unwrap(), x);
        assert_eq!(dense_multiply_double(&x, &i, 1.0, 0.0, None).unwrap(), x);
        let two = dense_multiply_double(&i, &x, 1.0, 1.0, Some(&x)).unwrap();
        assert_eq!(two.get(3, 4), 2.0 * x.get(3, 4));
        assert!(dense_multiply_double(&x, &DenseMatrix::zeros(4, 5), 1.0, 0.0, None).is_err());
    }

    #[test]
    fn dense_matches_naive_sum() {
        let a =
            DenseMatrix::<f32>::from_fn(7, 9, |i, j| ((i * 31 + j * 17) % 11) as f32 * 0.3 - 1.0)
                .unwrap();
        let b = DenseMatrix::<f32>::from_fn(9, 4, |i, j| {
            if (i + j) % 3 == 0 {
                0.0
            } else {
                1.0 / (1 + i + j) as f32
            }
        })
        .unwrap();
        let c = dense_multiply_single(&a, &b, 1.0, 0.0, None).unwrap();
        for i in 0..7 {
            for j in 0..4 {
                let mut s = 0.0f32;
                for k in 0..9 {
                    s += a.get(i, k) * b.get(k, j);
                }
                assert_eq!(c.get(i, j), s);
            }
        }
    }

    #[test]
    fn flop_model_values() {
        assert_eq!(flop_model(1, 1, 1), 2);
        assert_eq!(flop_model(2, 3, 4), 2 * (3 * 9 - 4));
        assert_eq!(flop_model(4096, 4096, 4096), 4096 * (4096 * 8193 - 4096));
        assert!(effective_performance(10, 0.0).is_err());
        assert_eq!(effective_performance(10, 2.0).unwrap(), 5.0);
    }

    #[test]
    fn error_report_location() {
        let a = DenseMatrix::<f32>::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = DenseMatrix::<f64>::from_rows(&[&[1.0, 2.0], &[3.5, 4.0]]).unwrap();
        let r = max_norm_error(&a, &b).unwrap();
        assert_eq!(r.max_abs, 0.5);
        assert_eq!(r.location, (1, 0));
        assert!(max_norm_error(&a, &DenseMatrix::<f64>::zeros(1, 2)).is_err());
    }

    fn decay(n: usize, lambda: f32) -> QuadtreeMatrix {
        let d = DenseMatrix::from_fn(n, n, |i, j| lambda.powi(i.abs_diff(j) as i32)).unwrap();
        QuadtreeMatrix::from_dense(&d, 16).unwrap()
    }

    #[test]
    fn recursive_tau_zero_is_exact_product() {
        let a = decay(70, 0.8);
        let r = recursive_spamm(&a, &a, 0.0).unwrap();
        let d = a.to_dense();
        let exact = dense_multiply_single(&d, &d, 1.0, 0.0, None).unwrap();
        let e = max_norm_error(&r.c.to_dense(), &exact).unwrap();
        assert!(e.max_abs < 1e-5, "{e:?}");
        r.c.check_invariants().unwrap();
    }

    #[test]
    fn recursive_visits_subset_of_flat() {
        let a = decay(128, 0.5);
        for tau in [1e-8, 1e-4, 1e-2, 1.0] {
            let r = recursive_spamm(&a, &a, tau).unwrap();
            let plan = symbolic_multiply(&a, &a, tau).unwrap();
            let flat: HashSet<(u64, u64)> =
                plan.tasks.iter().map(|t| (t.a_key.0, t.b_key.0)).collect();
            assert!(r.visits.len() <= flat.len());
            for (la, lb) in &r.visits {
                assert!(flat.contains(&(la.0, lb.0)));
            }
        }
    }

    #[test]
    fn recursive_rejects_depth_mismatch() {
        let a = QuadtreeMatrix::zeros(32, 64, 16).unwrap();
        let b = QuadtreeMatrix::zeros(64, 16, 16).unwrap();
        assert!(recursive_spamm(&a, &b, 0.0).is_ok());
        let a = QuadtreeMatrix::zeros(16, 16, 16).unwrap();
        let b = QuadtreeMatrix::zeros(16, 64, 16).unwrap();
        assert!(matches!(
            recursive_spamm(&a, &b, 0.0),
            Err(SpammError::DepthMismatch(0, 2))
        ));
    }
}
