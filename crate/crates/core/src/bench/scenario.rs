//! Timed self-product runs `C = alpha A A + beta A` and their reports.

use std::sync::OnceLock;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Result, SpammError};
use crate::matrix::{DenseMatrix, QuadtreeMatrix, LEAF_SIZE};
use crate::numeric::{
    execute_plan_par, execute_plan_with, ExecCounters, Granularity, LeafKernel, MultiplyConfig,
};
use crate::reference::{
    dense_multiply_double, dense_multiply_single, effective_performance, flop_model, max_norm_error,
};
use crate::symbolic::{symbolic_multiply_with, LeafStore, PlanStats, SymbolicOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// SpAMM with the 4x4 condition inside leaf products.
    Spamm4,
    /// SpAMM with unconditional 16x16 leaf products.
    Spamm16,
    /// SpAMM plan with a plain dense leaf kernel.
    SpammDenseLeaf,
    DenseSingle,
    DenseDouble,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Spamm4,
        Scenario::Spamm16,
        Scenario::SpammDenseLeaf,
        Scenario::DenseSingle,
        Scenario::DenseDouble,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::Spamm4 => "spamm4",
            Scenario::Spamm16 => "spamm16",
            Scenario::SpammDenseLeaf => "spamm-dense-leaf",
            Scenario::DenseSingle => "dense-single",
            Scenario::DenseDouble => "dense-double",
        }
    }

    /// Label written to the `granularity` column.
    pub fn granularity_label(self) -> &'static str {
        match self {
            Scenario::Spamm4 => Granularity::Fine4.label(),
            Scenario::Spamm16 => Granularity::Coarse16.label(),
            Scenario::SpammDenseLeaf => "dense-leaf",
            Scenario::DenseSingle | Scenario::DenseDouble => "none",
        }
    }

    pub fn granularity(self) -> Option<Granularity> {
        match self {
            Scenario::Spamm4 => Some(Granularity::Fine4),
            Scenario::Spamm16 | Scenario::SpammDenseLeaf => Some(Granularity::Coarse16),
            _ => None,
        }
    }

    pub fn is_spamm(self) -> bool {
        matches!(
            self,
            Scenario::Spamm4 | Scenario::Spamm16 | Scenario::SpammDenseLeaf
        )
    }

    pub fn for_granularity(g: Granularity) -> Self {
        match g {
            Granularity::Fine4 => Scenario::Spamm4,
            Granularity::Coarse16 => Scenario::Spamm16,
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Scenario {
    type Err = SpammError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.label() == s)
            .ok_or_else(|| SpammError::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// One benchmark row. Serializes to the fixed CSV schema; plan statistics
/// are kept in memory only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub n: usize,
    pub tau: f64,
    pub granularity: String,
    pub seconds: f64,
    pub products4: u64,
    pub complexity: u64,
    pub flops_model: u64,
    pub effective_rate: f64,
    pub max_norm_error: f64,
    #[serde(skip)]
    pub plan: PlanStats,
    #[serde(skip)]
    pub skipped4: u64,
}

pub const CSV_HEADER: &str =
    "scenario,n,tau,granularity,seconds,products4,complexity,flops_model,effective_rate,max_norm_error";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub alpha: f32,
    pub beta: f32,
    /// Timed repetitions; the reported time is their median.
    pub repeats: usize,
    pub parallel: bool,
    pub store: LeafStore,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            alpha: 1.0,
            beta: 0.0,
            repeats: 5,
            parallel: false,
            store: LeafStore::Array,
        }
    }
}

/// A square input matrix with its quadtree and a lazily computed
/// double-precision reference result.
pub struct Workload {
    dense: DenseMatrix<f32>,
    tree: QuadtreeMatrix,
    alpha: f32,
    beta: f32,
    oracle: OnceLock<DenseMatrix<f64>>,
}

impl Workload {
    pub fn new(a: DenseMatrix<f32>, alpha: f32, beta: f32) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(SpammError::DimensionMismatch(format!(
                "self-product scenarios need a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(SpammError::InvalidArgument(
                "alpha and beta must be finite".into(),
            ));
        }
        let tree = QuadtreeMatrix::from_dense(&a, LEAF_SIZE)?;
        Ok(Workload {
            dense: a,
            tree,
            alpha,
            beta,
            oracle: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.dense.rows()
    }

    pub fn dense(&self) -> &DenseMatrix<f32> {
        &self.dense
    }

    pub fn tree(&self) -> &QuadtreeMatrix {
        &self.tree
    }

    /// `alpha A A + beta A` in double precision.
    pub fn oracle(&self) -> &DenseMatrix<f64> {
        self.oracle.get_or_init(|| {
            let a = self.dense.to_f64();
            dense_multiply_double(&a, &a, self.alpha as f64, self.beta as f64, Some(&a))
                .expect("square operands")
        })
    }

    /// One SpAMM product; returns `C`, counters and plan statistics.
    pub fn spamm(
        &self,
        tau: f64,
        kernel: LeafKernel,
        opts: &RunOptions,
    ) -> Result<(QuadtreeMatrix, ExecCounters, PlanStats)> {
        let sym = SymbolicOptions {
            store: opts.store,
            parallel: opts.parallel,
        };
        let plan = symbolic_multiply_with(&self.tree, &self.tree, tau, sym)?;
        let granularity = match kernel {
            LeafKernel::Micro(g) => g,
            LeafKernel::DenseLeaf => Granularity::Coarse16,
        };
        let cfg = MultiplyConfig::new(tau, granularity).with_scaling(self.alpha, self.beta);
        let mut c = self.tree.clone();
        let counters = if opts.parallel {
            execute_plan_par(&plan, &self.tree, &self.tree, &mut c, &cfg, kernel)?
        } else {
            execute_plan_with(&plan, &self.tree, &self.tree, &mut c, &cfg, kernel)?
        };
        Ok((c, counters, plan.stats))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Dense-equivalent work in 4x4x4 units.
pub fn dense_products4(n: usize) -> u64 {
    dense_products4_mkn(n, n, n)
}

/// Runs `scenario` on `w` at tolerance `tau`. Error is measured against the
/// double-precision result.
pub fn run_scenario(
    w: &Workload,
    scenario: Scenario,
    tau: f64,
    opts: &RunOptions,
) -> Result<RunReport> {
    crate::symbolic::check_tau(tau)?;
    if opts.repeats == 0 {
        return Err(SpammError::InvalidArgument(
            "repeats must be at least 1".into(),
        ));
    }
    let n = w.n();
    let mut times = Vec::with_capacity(opts.repeats);
    let (products4, skipped4, plan, error) = if scenario.is_spamm() {
        let kernel = match scenario {
            Scenario::Spamm4 => LeafKernel::Micro(Granularity::Fine4),
            Scenario::Spamm16 => LeafKernel::Micro(Granularity::Coarse16),
            _ => LeafKernel::DenseLeaf,
        };
        let mut last = None;
        for _ in 0..opts.repeats {
            let t0 = Instant::now();
            let out = w.spamm(tau, kernel, opts)?;
            times.push(t0.elapsed().as_secs_f64());
            last = Some(out);
        }
        let (c, counters, stats) = last.unwrap();
        let err = max_norm_error(&c.to_dense(), w.oracle())?.max_abs;
        (counters.products4, counters.skipped4, stats, err)
    } else {
        let err = match scenario {
            Scenario::DenseSingle => {
                let mut last = None;
                for _ in 0..opts.repeats {
                    let t0 = Instant::now();
                    let c = dense_multiply_single(
                        w.dense(),
                        w.dense(),
                        w.alpha,
                        w.beta,
                        Some(w.dense()),
                    )?;
                    times.push(t0.elapsed().as_secs_f64());
                    last = Some(c);
                }
                max_norm_error(&last.unwrap(), w.oracle())?.max_abs
            }
            _ => {
                let a = w.dense().to_f64();
                let mut last = None;
                for _ in 0..opts.repeats {
                    let t0 = Instant::now();
                    let c = dense_multiply_double(&a, &a, w.alpha as f64, w.beta as f64, Some(&a))?;
                    times.push(t0.elapsed().as_secs_f64());
                    last = Some(c);
                }
                max_norm_error(&last.unwrap(), w.oracle())?.max_abs
            }
        };
        (dense_products4(n), 0, PlanStats::default(), err)
    };
    let seconds = median(times);
    let flops = flop_model(n as u64, n as u64, n as u64);
    let rate = effective_performance(flops, seconds.max(f64::MIN_POSITIVE))?;
    Ok(RunReport {
        scenario: scenario.label().to_string(),
        n,
        tau,
        granularity: scenario.granularity_label().to_string(),
        seconds,
        products4,
        complexity: products4,
        flops_model: flops,
        effective_rate: rate,
        max_norm_error: error,
        plan,
        skipped4,
    })
}

/// Dense-equivalent work of an `(m x k) (k x n)` product in 4x4x4 units.
fn dense_products4_mkn(m: usize, k: usize, n: usize) -> u64 {
    (m.div_ceil(4) * k.div_ceil(4) * n.div_ceil(4)) as u64
}

/// General `C = alpha A B + beta C0` under `scenario`. Returns the result
/// and a report whose `n` column holds the row count of `A`.
pub fn multiply_matrices(
    a: &DenseMatrix<f32>,
    b: &DenseMatrix<f32>,
    c0: Option<&DenseMatrix<f32>>,
    scenario: Scenario,
    tau: f64,
    opts: &RunOptions,
) -> Result<(DenseMatrix<f32>, RunReport)> {
    crate::symbolic::check_tau(tau)?;
    if opts.repeats == 0 {
        return Err(SpammError::InvalidArgument(
            "repeats must be at least 1".into(),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(SpammError::DimensionMismatch(format!(
            "A is {m}x{k}, B is {}x{n}",
            b.rows()
        )));
    }
    let zero = DenseMatrix::zeros(m, n);
    let c0 = c0.unwrap_or(&zero);
    if c0.shape() != (m, n) {
        return Err(SpammError::DimensionMismatch(format!(
            "C is {}x{}, product is {m}x{n}",
            c0.rows(),
            c0.cols()
        )));
    }
    let (a64, b64, c64) = (a.to_f64(), b.to_f64(), c0.to_f64());
    let oracle =
        dense_multiply_double(&a64, &b64, opts.alpha as f64, opts.beta as f64, Some(&c64))?;
    let mut times = Vec::with_capacity(opts.repeats);
    let mut timed = |f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        for _ in 0..opts.repeats {
            let t0 = Instant::now();
            f()?;
            times.push(t0.elapsed().as_secs_f64());
        }
        Ok(())
    };
    let mut plan_stats = PlanStats::default();
    let mut counters = ExecCounters::default();
    let mut error = None;
    let result: DenseMatrix<f32> = match scenario {
        Scenario::DenseSingle => {
            let mut out = None;
            timed(&mut || {
                out = Some(dense_multiply_single(
                    a,
                    b,
                    opts.alpha,
                    opts.beta,
                    Some(c0),
                )?);
                Ok(())
            })?;
            out.unwrap()
        }
        Scenario::DenseDouble => {
            let mut out = None;
            timed(&mut || {
                out = Some(dense_multiply_double(
                    &a64,
                    &b64,
                    opts.alpha as f64,
                    opts.beta as f64,
                    Some(&c64),
                )?);
                Ok(())
            })?;
            let out = out.unwrap();
            error = Some(max_norm_error(&out, &oracle)?.max_abs);
            out.convert()
        }
        _ => {
            let qa = QuadtreeMatrix::from_dense(a, LEAF_SIZE)?;
            let qb = QuadtreeMatrix::from_dense(b, LEAF_SIZE)?;
            let qc = QuadtreeMatrix::from_dense(c0, LEAF_SIZE)?;
            let kernel = match scenario {
                Scenario::Spamm4 => LeafKernel::Micro(Granularity::Fine4),
                Scenario::Spamm16 => LeafKernel::Micro(Granularity::Coarse16),
                _ => LeafKernel::DenseLeaf,
            };
            let cfg = MultiplyConfig::new(tau, scenario.granularity().unwrap_or_default())
                .with_scaling(opts.alpha, opts.beta);
            let sym = SymbolicOptions {
                store: opts.store,
                parallel: opts.parallel,
            };
            let mut out = None;
            timed(&mut || {
                let plan = symbolic_multiply_with(&qa, &qb, tau, sym)?;
                let mut c = qc.clone();
                counters = if opts.parallel {
                    execute_plan_par(&plan, &qa, &qb, &mut c, &cfg, kernel)?
                } else {
                    execute_plan_with(&plan, &qa, &qb, &mut c, &cfg, kernel)?
                };
                plan_stats = plan.stats;
                out = Some(c);
                Ok(())
            })?;
            out.unwrap().to_dense()
        }
    };
    let error = match error {
        Some(e) => e,
        None => max_norm_error(&result, &oracle)?.max_abs,
    };
    let (products4, skipped4) = if scenario.is_spamm() {
        (counters.products4, counters.skipped4)
    } else {
        (dense_products4_mkn(m, k, n), 0)
    };
    let seconds = median(times);
    let flops = flop_model(m as u64, k as u64, n as u64);
    let report = RunReport {
        scenario: scenario.label().to_string(),
        n: m,
        tau,
        granularity: scenario.granularity_label().to_string(),
        seconds,
        products4,
        complexity: products4,
        flops_model: flops,
        effective_rate: effective_performance(flops, seconds.max(f64::MIN_POSITIVE))?,
        max_norm_error: error,
        plan: plan_stats,
        skipped4,
    };
    Ok((result, report))
}

/// Writes reports as CSV with the fixed header.
pub fn write_reports(w: impl std::io::Write, rows: &[RunReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate::{generate, GeneratorKind, GeneratorSpec};

    fn opts1() -> RunOptions {
        RunOptions {
            repeats: 1,
            ..Default::default()
        }
    }

    #[test]
    fn scenario_labels_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(s.label().parse::<Scenario>().unwrap(), s);
        }
        assert!("spamm8".parse::<Scenario>().is_err());
    }

    #[test]
    fn dense_single_counts_dense_work() {
        let a = generate(&GeneratorSpec::new(GeneratorKind::RandomDense, 256).seed(3)).unwrap();
        let w = Workload::new(a, 1.0, 0.0).unwrap();
        let r = run_scenario(&w, Scenario::DenseSingle, 0.0, &opts1()).unwrap();
        assert_eq!(r.products4, 262_144);
        assert_eq!(r.complexity, 262_144);
        assert_eq!(r.flops_model, 2 * 256u64.pow(3));
        let d = run_scenario(&w, Scenario::DenseDouble, 0.0, &opts1()).unwrap();
        assert_eq!(d.max_norm_error, 0.0);
    }

    #[test]
    fn spamm_tau_zero_close_to_single() {
        let a = generate(&GeneratorSpec::new(GeneratorKind::RandomDense, 128).seed(5)).unwrap();
        let w = Workload::new(a, 1.0, 0.0).unwrap();
        let s = run_scenario(&w, Scenario::DenseSingle, 0.0, &opts1()).unwrap();
        for sc in [
            Scenario::Spamm4,
            Scenario::Spamm16,
            Scenario::SpammDenseLeaf,
        ] {
            let r = run_scenario(&w, sc, 0.0, &opts1()).unwrap();
            assert!(
                r.max_norm_error <= 4.0 * s.max_norm_error,
                "{sc}: {} vs {}",
                r.max_norm_error,
                s.max_norm_error
            );
            assert_eq!(r.products4, dense_products4(128));
        }
    }

    #[test]
    fn alpha_beta_reach_the_oracle() {
        let a = generate(&GeneratorSpec::new(GeneratorKind::Exponential, 64).lambda(0.7)).unwrap();
        let w = Workload::new(a, 0.5, -2.0).unwrap();
        for sc in Scenario::ALL {
            let r = run_scenario(&w, sc, 0.0, &opts1()).unwrap();
            assert!(r.max_norm_error < 1e-5, "{sc}: {}", r.max_norm_error);
        }
    }

    #[test]
    fn parallel_keeps_non_timing_columns() {
        let a = generate(&GeneratorSpec::new(GeneratorKind::BlockedDecay, 200).seed(2)).unwrap();
        let w = Workload::new(a, 1.0, 0.0).unwrap();
        let par = RunOptions {
            parallel: true,
            ..opts1()
        };
        for sc in [Scenario::Spamm4, Scenario::Spamm16] {
            let mut x = run_scenario(&w, sc, 1e-6, &opts1()).unwrap();
            let mut y = run_scenario(&w, sc, 1e-6, &par).unwrap();
            for r in [&mut x, &mut y] {
                r.seconds = 0.0;
                r.effective_rate = 0.0;
            }
            assert_eq!(x, y);
        }
    }

    #[test]
    fn general_product_matches_workload() {
        let a = generate(
            &GeneratorSpec::new(GeneratorKind::Exponential, 40)
                .lambda(0.6)
                .seed(4),
        )
        .unwrap();
        let w = Workload::new(a.clone(), 1.5, 0.5).unwrap();
        let opts = RunOptions {
            alpha: 1.5,
            beta: 0.5,
            ..opts1()
        };
        for sc in Scenario::ALL {
            let (_, mut r) = multiply_matrices(&a, &a, Some(&a), sc, 1e-7, &opts).unwrap();
            let mut s = run_scenario(&w, sc, 1e-7, &opts).unwrap();
            for x in [&mut r, &mut s] {
                x.seconds = 0.0;
                x.effective_rate = 0.0;
            }
            assert_eq!(r, s);
        }
        let b = DenseMatrix::from_fn(40, 7, |i, j| (i + 2 * j) as f32 * 0.01).unwrap();
        let (c, r) = multiply_matrices(&a, &b, None, Scenario::Spamm4, 0.0, &opts1()).unwrap();
        assert_eq!(c.shape(), (40, 7));
        assert!(r.max_norm_error < 1e-5);
        assert_eq!(r.flops_model, flop_model(40, 40, 7));
        assert!(multiply_matrices(&b, &a, None, Scenario::Spamm4, 0.0, &opts1()).is_err());
    }

    #[test]
    fn rejects_non_square_and_bad_args() {
        assert!(Workload::new(DenseMatrix::zeros(3, 4), 1.0, 0.0).is_err());
        let w = Workload::new(DenseMatrix::identity(8), 1.0, 0.0).unwrap();
        assert!(run_scenario(&w, Scenario::Spamm4, -1.0, &opts1()).is_err());
        let zero = RunOptions {
            repeats: 0,
            ..opts1()
        };
        assert!(run_scenario(&w, Scenario::Spamm4, 0.0, &zero).is_err());
    }
}
