//! Parameter sweeps, granularity ratios and tolerance calibration.

use serde::Serialize;

use crate::bench::scenario::{run_scenario, RunOptions, RunReport, Scenario, Workload};
use crate::error::{Result, SpammError};
use crate::matrix::DenseMatrix;
use crate::numeric::{Granularity, LeafKernel};
use crate::reference::max_norm_error;

/// Coarse-to-fine work and time ratios for one `(n, tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub tau: f64,
    pub c16_over_c4: f64,
    pub t16_over_t4: f64,
}

pub const RATIO_HEADER: &str = "n,tau,c16_over_c4,t16_over_t4";

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<RunReport>,
    pub ratios: Vec<RatioRow>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Runs every `(n, tau, scenario)` combination, `n` outermost, then `tau`,
/// then scenarios in the given order. `family(n)` builds the input.
pub fn sweep(
    family: impl Fn(usize) -> Result<DenseMatrix<f32>>,
    ns: &[usize],
    taus: &[f64],
    scenarios: &[Scenario],
    opts: &RunOptions,
) -> Result<SweepResult> {
    if ns.is_empty() || taus.is_empty() || scenarios.is_empty() {
        return Err(SpammError::InvalidArgument(
            "sweep lists must be non-empty".into(),
        ));
    }
    let mut out = SweepResult::default();
    for &n in ns {
        let w = Workload::new(family(n)?, opts.alpha, opts.beta)?;
        for &tau in taus {
            let start = out.rows.len();
            for &sc in scenarios {
                out.rows.push(run_scenario(&w, sc, tau, opts)?);
            }
            let here = &out.rows[start..];
            let find = |label: &str| here.iter().find(|r| r.scenario == label);
            if let (Some(r4), Some(r16)) = (
                find(Scenario::Spamm4.label()),
                find(Scenario::Spamm16.label()),
            ) {
                out.ratios.push(RatioRow {
                    n,
                    tau,
                    c16_over_c4: ratio(r16.complexity as f64, r4.complexity as f64),
                    t16_over_t4: ratio(r16.seconds, r4.seconds),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_ratios(w: impl std::io::Write, rows: &[RatioRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(RATIO_HEADER.split(','))?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SpammError::InvalidArgument(
            "slope needs at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(SpammError::InvalidArgument(
            "slope needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(SpammError::InvalidArgument(
            "slope needs distinct x values".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Outcome of a tolerance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub granularity: Granularity,
    pub n: usize,
    pub target: f64,
    /// Largest tolerance found whose error stays within `target`.
    pub tau: f64,
    pub max_norm_error: f64,
    pub products4: u64,
    /// Whether some tolerance in the range met the target.
    pub met: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRange {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

impl Default for CalibrationRange {
    fn default() -> Self {
        CalibrationRange {
            lo: 1e-12,
            hi: 1e-2,
            iterations: 8,
        }
    }
}

/// Log-space bisection for the largest `tau` whose max-norm error does not
/// exceed `target`, assuming error grows with `tau`.
pub fn calibrate_tau(
    w: &Workload,
    granularity: Granularity,
    target: f64,
    range: CalibrationRange,
    opts: &RunOptions,
) -> Result<Calibration> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(SpammError::InvalidArgument(format!(
            "error target must be positive, got {target}"
        )));
    }
    if !(range.lo > 0.0 && range.lo < range.hi && range.hi.is_finite()) {
        return Err(SpammError::InvalidArgument(
            "calibration range needs 0 < lo < hi".into(),
        ));
    }
    let probe = |tau: f64| -> Result<(f64, u64)> {
        let (c, counters, _) = w.spamm(tau, LeafKernel::Micro(granularity), opts)?;
        Ok((
            max_norm_error(&c.to_dense(), w.oracle())?.max_abs,
            counters.products4,
        ))
    };
    let done = |tau: f64, (err, p4): (f64, u64), met: bool| Calibration {
        granularity,
        n: w.n(),
        target,
        tau,
        max_norm_error: err,
        products4: p4,
        met,
    };
    let at_hi = probe(range.hi)?;
    if at_hi.0 <= target {
        return Ok(done(range.hi, at_hi, true));
    }
    let mut lo = (range.lo, probe(range.lo)?);
    if lo.1 .0 > target {
        return Ok(done(lo.0, lo.1, false));
    }
    let mut hi = range.hi;
    for _ in 0..range.iterations {
        let mid = (lo.0 * hi).sqrt();
        let r = probe(mid)?;
        if r.0 <= target {
            lo = (mid, r);
        } else {
            hi = mid;
        }
    }
    Ok(done(lo.0, lo.1, true))
}

/// Runs `scenario` for one matrix at one tolerance; the single-cell sweep.
pub fn run_single(
    a: DenseMatrix<f32>,
    scenario: Scenario,
    tau: f64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let w = Workload::new(a, opts.alpha, opts.beta)?;
    run_scenario(&w, scenario, tau, opts)
}
