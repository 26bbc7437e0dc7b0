//! Numeric multiply: runs a [`MultiplyPlan`] and accumulates `C`.
//!
//! Each task multiplies two leaves as a grid of 4x4x4 micro products. With
//! [`Granularity::Fine4`] a micro product is skipped when the norms of its
//! two 4x4 operands multiply to less than `tau`; with
//! [`Granularity::Coarse16`] every micro product runs and the only pruning
//! is the one done by the symbolic phase.
//!
//! Products are summed into per-`C`-leaf accumulators in plan order, then
//! combined as `C = alpha * sum + beta * C_before`, after which the norms of
//! `C` are rebuilt once.

use std::collections::HashMap;
use std::ops::{Add, AddAssign};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Result, SpammError};
use crate::matrix::{LeafBlock, QuadtreeMatrix};
use crate::morton::LinearIndex;
use crate::symbolic::{check_tau, MultiplyPlan, ProductTask};

/// Level at which the SpAMM condition is checked inside a leaf product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Condition applied to every 4x4 sub-block product.
    #[default]
    Fine4,
    /// No conditionals inside a 16x16 product.
    Coarse16,
}

impl Granularity {
    pub fn label(self) -> &'static str {
        match self {
            Granularity::Fine4 => "fine4",
            Granularity::Coarse16 => "coarse16",
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Granularity {
    type Err = SpammError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fine4" | "4" | "4x4" => Ok(Granularity::Fine4),
            "coarse16" | "16" | "16x16" => Ok(Granularity::Coarse16),
            _ => Err(SpammError::InvalidArgument(format!(
                "unknown granularity '{s}'"
            ))),
        }
    }
}

/// Parameters of `C = alpha * A * B + beta * C` under tolerance `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplyConfig {
    pub tau: f64,
    pub granularity: Granularity,
    pub alpha: f32,
    pub beta: f32,
}

impl Default for MultiplyConfig {
    fn default() -> Self {
        MultiplyConfig {
            tau: 0.0,
            granularity: Granularity::Fine4,
            alpha: 1.0,
            beta: 0.0,
        }
    }
}

impl MultiplyConfig {
    pub fn new(tau: f64, granularity: Granularity) -> Self {
        MultiplyConfig {
            tau,
            granularity,
            ..Default::default()
        }
    }

    pub fn with_scaling(mut self, alpha: f32, beta: f32) -> Self {
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(SpammError::InvalidArgument(
                "alpha and beta must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Work done by a numeric multiply. Counters are summable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExecCounters {
    /// Executed 4x4x4 micro products.
    pub products4: u64,
    /// Micro products gated off by the 4x4 condition.
    pub skipped4: u64,
    /// Leaf products (plan tasks) processed.
    pub tasks: u64,
    pub seconds: f64,
}

impl ExecCounters {
    /// Complexity in 4x4x4 units; a full 16x16x16 product counts 64.
    pub fn complexity(&self) -> u64 {
        self.products4
    }

    /// Modeled floating point operations of the executed micro products.
    pub fn flops(&self) -> u64 {
        self.products4 * 2 * 64
    }
}

impl Add for ExecCounters {
    type Output = ExecCounters;

    fn add(self, rhs: Self) -> Self {
        ExecCounters {
            products4: self.products4 + rhs.products4,
            skipped4: self.skipped4 + rhs.skipped4,
            tasks: self.tasks + rhs.tasks,
            seconds: self.seconds + rhs.seconds,
        }
    }
}

impl AddAssign for ExecCounters {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

/// `c += a * b` on strided 4x4 views.
///
/// Each output row is built in a zeroed register from rank-1 updates in
/// ascending `k` and then added to `c`.
#[inline(always)]
fn micro_kernel_strided(a: &[f32], lda: usize, b: &[f32], ldb: usize, c: &mut [f32], ldc: usize) {
    let b0: [f32; 4] = b[0..4].try_into().unwrap();
    let b1: [f32; 4] = b[ldb..ldb + 4].try_into().unwrap();
    let b2: [f32; 4] = b[2 * ldb..2 * ldb + 4].try_into().unwrap();
    let b3: [f32; 4] = b[3 * ldb..3 * ldb + 4].try_into().unwrap();
    for i in 0..4 {
        let ar: [f32; 4] = a[i * lda..i * lda + 4].try_into().unwrap();
        let mut reg = [0.0f32; 4];
        for j in 0..4 {
            reg[j] += ar[0] * b0[j];
        }
        for j in 0..4 {
            reg[j] += ar[1] * b1[j];
        }
        for j in 0..4 {
            reg[j] += ar[2] * b2[j];
        }
        for j in 0..4 {
            reg[j] += ar[3] * b3[j];
        }
        let cr = &mut c[i * ldc..i * ldc + 4];
        for j in 0..4 {
            cr[j] += reg[j];
        }
    }
}

/// Same accumulation order as the 4x4 kernel for sub-blocks of side `s < 4`.
fn micro_kernel_small(
    s: usize,
    a: &[f32],
    lda: usize,
    b: &[f32],
    ldb: usize,
    c: &mut [f32],
    ldc: usize,
) {
    for i in 0..s {
        let mut reg = [0.0f32; 4];
        for k in 0..s {
            let aik = a[i * lda + k];
            for j in 0..s {
                reg[j] += aik * b[k * ldb + j];
            }
        }
        for j in 0..s {
            c[i * ldc + j] += reg[j];
        }
    }
}

/// `c += a * b` for row-major 4x4 blocks.
pub fn micro_kernel_4(a: &[f32; 16], b: &[f32; 16], c: &mut [f32; 16]) {
    micro_kernel_strided(a, 4, b, 4, c, 4);
}

/// Multiplies two leaves into the accumulator `c` (row-major, leaf sized).
///
/// Sub-products run in `(p, q, r)` order with `r`, the contraction
/// sub-index, innermost. Under [`Granularity::Fine4`] a sub-product is
/// skipped when `|a_pr| |b_rq| < tau`.
pub fn block_multiply_16(
    a: &LeafBlock,
    b: &LeafBlock,
    c: &mut [f32],
    granularity: Granularity,
    tau: f64,
) -> ExecCounters {
    let nb = a.size();
    debug_assert_eq!(b.size(), nb);
    debug_assert_eq!(c.len(), nb * nb);
    let s = a.sub_size();
    let g = a.grid();
    let (av, bv) = (a.values(), b.values());
    let (asub, bsub) = (a.subnorms(), b.subnorms());
    let gated = granularity == Granularity::Fine4;
    let mut out = ExecCounters::default();
    for p in 0..g {
        for q in 0..g {
            let c_off = p * s * nb + q * s;
            for r in 0..g {
                if gated && (asub[p * g + r] as f64) * (bsub[r * g + q] as f64) < tau {
                    out.skipped4 += 1;
                    continue;
                }
                let a_off = p * s * nb + r * s;
                let b_off = r * s * nb + q * s;
                if s == 4 {
                    micro_kernel_strided(&av[a_off..], nb, &bv[b_off..], nb, &mut c[c_off..], nb);
                } else {
                    micro_kernel_small(s, &av[a_off..], nb, &bv[b_off..], nb, &mut c[c_off..], nb);
                }
                out.products4 += 1;
            }
        }
    }
    out.tasks = 1;
    out
}

/// Plain `i-k-j` triple loop over a whole leaf, no sub-blocking or gating.
/// Counted as `grid^3` micro-product units.
pub fn dense_leaf_multiply(a: &LeafBlock, b: &LeafBlock, c: &mut [f32]) -> ExecCounters {
    let nb = a.size();
    let (av, bv) = (a.values(), b.values());
    for i in 0..nb {
        let crow = &mut c[i * nb..(i + 1) * nb];
        for k in 0..nb {
            let aik = av[i * nb + k];
            let brow = &bv[k * nb..(k + 1) * nb];
            for (cj, bj) in crow.iter_mut().zip(brow) {
                *cj += aik * bj;
            }
        }
    }
    let g = a.grid() as u64;
    ExecCounters {
        products4: g * g * g,
        tasks: 1,
        ..Default::default()
    }
}

/// Leaf product used by an execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKernel {
    /// 4x4 micro products, gated according to the granularity.
    Micro(Granularity),
    /// Unconditional dense leaf product.
    DenseLeaf,
}

impl LeafKernel {
    #[inline]
    fn run(self, a: &LeafBlock, b: &LeafBlock, c: &mut [f32], tau: f64) -> ExecCounters {
        match self {
            LeafKernel::Micro(g) => block_multiply_16(a, b, c, g, tau),
            LeafKernel::DenseLeaf => dense_leaf_multiply(a, b, c),
        }
    }
}

fn check_operands(
    plan: &MultiplyPlan,
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    c: &QuadtreeMatrix,
) -> Result<()> {
    if a.cols() != b.rows() || c.shape() != (a.rows(), b.cols()) {
        return Err(SpammError::DimensionMismatch(format!(
            "A {}x{}, B {}x{}, C {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols(),
            c.rows(),
            c.cols()
        )));
    }
    if a.leaf_size() != b.leaf_size() || a.leaf_size() != c.leaf_size() {
        return Err(SpammError::DimensionMismatch(
            "operands use different leaf sizes".into(),
        ));
    }
    if let Some(ops) = plan.operands {
        if ops.a_uid != a.uid() || ops.b_uid != b.uid() {
            return Err(SpammError::StalePlan);
        }
    }
    let resolves = |t: &ProductTask| {
        matches!(a.try_leaf(t.a), Some((k, _)) if k == t.a_key)
            && matches!(b.try_leaf(t.b), Some((k, _)) if k == t.b_key)
    };
    if !plan.tasks.iter().all(resolves) {
        return Err(SpammError::StalePlan);
    }
    Ok(())
}

/// `C = alpha * acc + beta * C_before`, leaves in ascending key order.
fn combine(
    c: &mut QuadtreeMatrix,
    acc_keys: Vec<LinearIndex>,
    mut acc: Vec<Vec<f32>>,
    alpha: f32,
    beta: f32,
) -> Result<()> {
    let nb = c.leaf_size();
    let mut slot: HashMap<u64, usize> =
        acc_keys.iter().enumerate().map(|(i, k)| (k.0, i)).collect();
    let mut leaves: Vec<(LinearIndex, Vec<f32>)> = Vec::with_capacity(acc.len() + c.leaf_count());

    for (_, key, old) in c.leaves() {
        let vals: Vec<f32> = match slot.remove(&key.0) {
            Some(i) => {
                let p = std::mem::take(&mut acc[i]);
                p.iter()
                    .zip(old.values())
                    .map(|(&p, &o)| alpha * p + beta * o)
                    .collect()
            }
            None => old.values().iter().map(|&o| beta * o).collect(),
        };
        if vals.iter().any(|&v| v != 0.0) {
            leaves.push((key, vals));
        }
    }
    for (i, key) in acc_keys.into_iter().enumerate() {
        if slot.contains_key(&key.0) {
            let vals: Vec<f32> = acc[i].iter().map(|&p| alpha * p).collect();
            if vals.iter().any(|&v| v != 0.0) {
                leaves.push((key, vals));
            }
        }
    }
    leaves.sort_unstable_by_key(|(k, _)| *k);
    *c = QuadtreeMatrix::from_leaves(
        c.rows(),
        c.cols(),
        nb,
        leaves
            .into_iter()
            .map(|(k, v)| (k, LeafBlock::from_values(nb, v))),
    )?;
    Ok(())
}

/// Executes `plan` with the micro-kernel at `cfg.granularity`.
pub fn execute_plan(
    plan: &MultiplyPlan,
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    c: &mut QuadtreeMatrix,
    cfg: &MultiplyConfig,
) -> Result<ExecCounters> {
    execute_plan_with(plan, a, b, c, cfg, LeafKernel::Micro(cfg.granularity))
}

/// Executes `plan` with an explicit leaf kernel; `cfg.granularity` is
/// ignored when `kernel` says otherwise.
pub fn execute_plan_with(
    plan: &MultiplyPlan,
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    c: &mut QuadtreeMatrix,
    cfg: &MultiplyConfig,
    kernel: LeafKernel,
) -> Result<ExecCounters> {
    cfg.validate()?;
    check_operands(plan, a, b, c)?;
    let start = Instant::now();
    let nb = a.leaf_size();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    let mut keys: Vec<LinearIndex> = Vec::new();
    let mut acc: Vec<Vec<f32>> = Vec::new();
    let mut counters = ExecCounters::default();
    for t in &plan.tasks {
        let i = *slot.entry(t.c_key.0).or_insert_with(|| {
            keys.push(t.c_key);
            acc.push(vec![0.0; nb * nb]);
            acc.len() - 1
        });
        counters += kernel.run(a.leaf(t.a), b.leaf(t.b), &mut acc[i], cfg.tau);
    }
    combine(c, keys, acc, cfg.alpha, cfg.beta)?;
    counters.seconds = start.elapsed().as_secs_f64();
    Ok(counters)
}

/// Parallel [`execute_plan_with`]: tasks sharing a `C` leaf run in plan order
/// on one thread, distinct `C` leaves run concurrently. Results and counters
/// match the sequential path exactly.
pub fn execute_plan_par(
    plan: &MultiplyPlan,
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    c: &mut QuadtreeMatrix,
    cfg: &MultiplyConfig,
    kernel: LeafKernel,
) -> Result<ExecCounters> {
    cfg.validate()?;
    check_operands(plan, a, b, c)?;
    let start = Instant::now();
    let nb = a.leaf_size();
    let mut slot: HashMap<u64, usize> = HashMap::new();
    let mut groups: Vec<(LinearIndex, Vec<usize>)> = Vec::new();
    for (ti, t) in plan.tasks.iter().enumerate() {
        let g = *slot.entry(t.c_key.0).or_insert_with(|| {
            groups.push((t.c_key, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(ti);
    }
    let results: Vec<(Vec<f32>, ExecCounters)> = groups
        .par_iter()
        .map(|(_, tasks)| {
            let mut acc = vec![0.0f32; nb * nb];
            let mut cnt = ExecCounters::default();
            for &ti in tasks {
                let t = &plan.tasks[ti];
                cnt += kernel.run(a.leaf(t.a), b.leaf(t.b), &mut acc, cfg.tau);
            }
            (acc, cnt)
        })
        .collect();
    let mut counters = ExecCounters::default();
    let mut acc = Vec::with_capacity(results.len());
    for (v, cnt) in results {
        counters += cnt;
        acc.push(v);
    }
    let keys = groups.into_iter().map(|(k, _)| k).collect();
    combine(c, keys, acc, cfg.alpha, cfg.beta)?;
    counters.seconds = start.elapsed().as_secs_f64();
    Ok(counters)
}

/// Symbolic plus numeric multiply: returns `alpha * A * B` (with `C_before`
/// empty) and the counters of the numeric phase.
pub fn spamm_multiply(
    a: &QuadtreeMatrix,
    b: &QuadtreeMatrix,
    cfg: &MultiplyConfig,
) -> Result<(QuadtreeMatrix, ExecCounters)> {
    let plan = crate::symbolic::symbolic_multiply(a, b, cfg.tau)?;
    let mut c = QuadtreeMatrix::zeros(a.rows(), b.cols(), a.leaf_size())?;
    let counters = execute_plan(&plan, a, b, &mut c, cfg)?;
    Ok((c, counters))
}
