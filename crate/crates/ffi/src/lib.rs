//! C ABI over the `spamm` library.
//!
//! Matrices, quadtrees and plans cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns a [`SpammStatus`]; on failure the message is available from
//! [`spamm_last_error_message`] until the next failing call on the same
//! thread. Output handles are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use spamm::bench::{
    generate, load_matrix, save_matrix, GeneratorKind, GeneratorSpec, MarketLayout,
};
use spamm::numeric::{
    execute_plan, spamm_multiply as multiply, ExecCounters, Granularity, MultiplyConfig,
};
use spamm::{symbolic_multiply, DenseMatrix, MultiplyPlan, QuadtreeMatrix, SpammError};

/// Dense row-major single-precision matrix.
pub struct SpammDense(DenseMatrix<f32>);

/// Quadtree matrix.
pub struct SpammQuadtree(QuadtreeMatrix);

/// Ordered product tasks for one pair of quadtrees.
pub struct SpammPlan(MultiplyPlan);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpammStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    IndexOutOfRange = 4,
    NonFinite = 5,
    StalePlan = 6,
    Format = 7,
    Io = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpammGranularity {
    Fine4 = 0,
    Coarse16 = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpammGenerator {
    Exponential = 0,
    Algebraic = 1,
    BlockedDecay = 2,
    RandomDense = 3,
}

/// `C = alpha * A * B + beta * C`, products below `tau` dropped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpammConfig {
    pub tau: f64,
    pub granularity: SpammGranularity,
    pub alpha: f32,
    pub beta: f32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpammCounters {
    pub products4: u64,
    pub skipped4: u64,
    pub tasks: u64,
    pub seconds: f64,
}

impl From<ExecCounters> for SpammCounters {
    fn from(c: ExecCounters) -> Self {
        SpammCounters {
            products4: c.products4,
            skipped4: c.skipped4,
            tasks: c.tasks,
            seconds: c.seconds,
        }
    }
}

impl From<SpammGranularity> for Granularity {
    fn from(g: SpammGranularity) -> Self {
        match g {
            SpammGranularity::Fine4 => Granularity::Fine4,
            SpammGranularity::Coarse16 => Granularity::Coarse16,
        }
    }
}

impl From<SpammGenerator> for GeneratorKind {
    fn from(g: SpammGenerator) -> Self {
        match g {
            SpammGenerator::Exponential => GeneratorKind::Exponential,
            SpammGenerator::Algebraic => GeneratorKind::Algebraic,
            SpammGenerator::BlockedDecay => GeneratorKind::BlockedDecay,
            SpammGenerator::RandomDense => GeneratorKind::RandomDense,
        }
    }
}

impl From<&SpammConfig> for MultiplyConfig {
    fn from(c: &SpammConfig) -> Self {
        MultiplyConfig::new(c.tau, c.granularity.into()).with_scaling(c.alpha, c.beta)
    }
}

fn status_of(e: &SpammError) -> SpammStatus {
    match e {
        SpammError::DimensionMismatch(_) | SpammError::DepthMismatch(..) => {
            SpammStatus::DimensionMismatch
        }
        SpammError::IndexOutOfRange { .. } => SpammStatus::IndexOutOfRange,
        SpammError::NonFinite { .. } => SpammStatus::NonFinite,
        SpammError::StalePlan => SpammStatus::StalePlan,
        SpammError::Format { .. } | SpammError::Dump(_) => SpammStatus::Format,
        SpammError::InvariantViolation(_) => SpammStatus::Internal,
        e if e.is_io() => SpammStatus::Io,
        SpammError::Csv(_) => SpammStatus::Format,
        _ => SpammStatus::InvalidArgument,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(SpammError),
}

impl From<SpammError> for Failure {
    fn from(e: SpammError) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SpammStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpammStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SpammStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SpammStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn path_of(p: *const c_char) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| SpammError::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spamm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn spamm_status_name(status: SpammStatus) -> *const c_char {
    let s: &'static CStr = match status {
        SpammStatus::Ok => c"ok",
        SpammStatus::NullPointer => c"null pointer",
        SpammStatus::InvalidArgument => c"invalid argument",
        SpammStatus::DimensionMismatch => c"dimension mismatch",
        SpammStatus::IndexOutOfRange => c"index out of range",
        SpammStatus::NonFinite => c"non-finite value",
        SpammStatus::StalePlan => c"stale plan",
        SpammStatus::Format => c"format error",
        SpammStatus::Io => c"i/o error",
        SpammStatus::Internal => c"internal error",
    };
    s.as_ptr()
}

/// tau 0, fine 4x4 gating, alpha 1, beta 0.
#[no_mangle]
pub extern "C" fn spamm_config_default() -> SpammConfig {
    SpammConfig {
        tau: 0.0,
        granularity: SpammGranularity::Fine4,
        alpha: 1.0,
        beta: 0.0,
    }
}

/// New `rows x cols` matrix copied from `data` (row-major, `rows * cols`
/// floats), or all zeros when `data` is NULL.
///
/// # Safety
/// `data` must be NULL or point to `rows * cols` floats; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_new(
    rows: usize,
    cols: usize,
    data: *const f32,
    out: *mut *mut SpammDense,
) -> SpammStatus {
    guard(|| {
        let d = if data.is_null() {
            DenseMatrix::zeros(rows, cols)
        } else {
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| SpammError::InvalidArgument("rows * cols overflows".into()))?;
            DenseMatrix::new(rows, cols, std::slice::from_raw_parts(data, len).to_vec())?
        };
        put(out, SpammDense(d))
    })
}

/// # Safety
/// `m` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_free(m: *mut SpammDense) {
    free(m)
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_shape(
    m: *const SpammDense,
    rows: *mut usize,
    cols: *mut usize,
) -> SpammStatus {
    guard(|| {
        let (nr, nc) = deref(m, "matrix")?.0.shape();
        *deref_mut(rows, "rows")? = nr;
        *deref_mut(cols, "cols")? = nc;
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_get(
    m: *const SpammDense,
    i: usize,
    j: usize,
    value: *mut f32,
) -> SpammStatus {
    guard(|| {
        let v = deref(m, "matrix")?.0.try_get(i, j)?;
        *deref_mut(value, "value")? = v;
        Ok(())
    })
}

/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_set(
    m: *mut SpammDense,
    i: usize,
    j: usize,
    value: f32,
) -> SpammStatus {
    guard(|| {
        deref_mut(m, "matrix")?.0.set(i, j, value)?;
        Ok(())
    })
}

/// Copies the row-major values into `buf`, which must hold `len >= rows * cols` floats.
///
/// # Safety
/// `buf` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_copy(
    m: *const SpammDense,
    buf: *mut f32,
    len: usize,
) -> SpammStatus {
    guard(|| {
        let d = &deref(m, "matrix")?.0;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let src = d.as_slice();
        if len < src.len() {
            return Err(SpammError::InvalidArgument(format!(
                "buffer holds {len} values, need {}",
                src.len()
            ))
            .into());
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        Ok(())
    })
}

/// Reads a MatrixMarket file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_load(
    path: *const c_char,
    out: *mut *mut SpammDense,
) -> SpammStatus {
    guard(|| {
        let p = path_of(path)?;
        put(out, SpammDense(load_matrix(p)?))
    })
}

/// Writes a MatrixMarket file, coordinate layout when `coordinate` is true.
///
/// # Safety
/// `m` must be a valid handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spamm_dense_save(
    m: *const SpammDense,
    path: *const c_char,
    coordinate: bool,
) -> SpammStatus {
    guard(|| {
        let d = &deref(m, "matrix")?.0;
        let layout = if coordinate {
            MarketLayout::Coordinate
        } else {
            MarketLayout::Array
        };
        save_matrix(path_of(path)?, d, layout)?;
        Ok(())
    })
}

/// Synthetic `n x n` matrix. `blocks` lists the atom block sizes used by
/// the blocked-decay generator; NULL with `nblocks == 0` keeps the default.
///
/// # Safety
/// `blocks` must point to `nblocks` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_generate(
    kind: SpammGenerator,
    n: usize,
    lambda: f64,
    c: f64,
    blocks: *const usize,
    nblocks: usize,
    seed: u64,
    symmetrize: bool,
    out: *mut *mut SpammDense,
) -> SpammStatus {
    guard(|| {
        let mut spec = GeneratorSpec::new(kind.into(), n)
            .lambda(lambda)
            .magnitude(c)
            .seed(seed)
            .symmetrize(symmetrize);
        if nblocks > 0 {
            if blocks.is_null() {
                return Err(Failure::Null("blocks"));
            }
            spec = spec.blocks(std::slice::from_raw_parts(blocks, nblocks).to_vec());
        }
        put(out, SpammDense(generate(&spec)?))
    })
}

/// # Safety
/// `d` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_quadtree_from_dense(
    d: *const SpammDense,
    leaf_size: usize,
    out: *mut *mut SpammQuadtree,
) -> SpammStatus {
    guard(|| {
        let q = QuadtreeMatrix::from_dense(&deref(d, "matrix")?.0, leaf_size)?;
        put(out, SpammQuadtree(q))
    })
}

/// # Safety
/// `q` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spamm_quadtree_free(q: *mut SpammQuadtree) {
    free(q)
}

/// # Safety
/// `q` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_quadtree_to_dense(
    q: *const SpammQuadtree,
    out: *mut *mut SpammDense,
) -> SpammStatus {
    guard(|| put(out, SpammDense(deref(q, "quadtree")?.0.to_dense())))
}

/// Frobenius norm and number of stored leaves.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_quadtree_info(
    q: *const SpammQuadtree,
    norm: *mut f32,
    leaves: *mut usize,
) -> SpammStatus {
    guard(|| {
        let q = &deref(q, "quadtree")?.0;
        *deref_mut(norm, "norm")? = q.norm();
        *deref_mut(leaves, "leaves")? = q.leaf_count();
        Ok(())
    })
}

/// Symbolic phase: the leaf products of `a * b` that survive `tau`.
///
/// # Safety
/// `a` and `b` must be valid handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_plan_new(
    a: *const SpammQuadtree,
    b: *const SpammQuadtree,
    tau: f64,
    out: *mut *mut SpammPlan,
) -> SpammStatus {
    guard(|| {
        let plan = symbolic_multiply(&deref(a, "a")?.0, &deref(b, "b")?.0, tau)?;
        put(out, SpammPlan(plan))
    })
}

/// Number of leaf products in the plan, 0 for NULL.
///
/// # Safety
/// `p` must be NULL or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spamm_plan_len(p: *const SpammPlan) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spamm_plan_free(p: *mut SpammPlan) {
    free(p)
}

/// Numeric phase: `c = alpha * a * b + beta * c` over the plan's tasks.
/// `counters` may be NULL.
///
/// # Safety
/// Handles must be valid; `c` must not alias `a` or `b`.
#[no_mangle]
pub unsafe extern "C" fn spamm_plan_execute(
    p: *const SpammPlan,
    a: *const SpammQuadtree,
    b: *const SpammQuadtree,
    c: *mut SpammQuadtree,
    config: *const SpammConfig,
    counters: *mut SpammCounters,
) -> SpammStatus {
    guard(|| {
        let cfg = MultiplyConfig::from(deref(config, "config")?);
        let plan = &deref(p, "plan")?.0;
        let (a, b) = (&deref(a, "a")?.0, &deref(b, "b")?.0);
        let got = execute_plan(plan, a, b, &mut deref_mut(c, "c")?.0, &cfg)?;
        if let Some(out) = counters.as_mut() {
            *out = got.into();
        }
        Ok(())
    })
}

/// Both phases: a new quadtree holding `alpha * a * b`. `counters` may be NULL.
///
/// # Safety
/// Handles must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spamm_multiply(
    a: *const SpammQuadtree,
    b: *const SpammQuadtree,
    config: *const SpammConfig,
    out: *mut *mut SpammQuadtree,
    counters: *mut SpammCounters,
) -> SpammStatus {
    guard(|| {
        let cfg = MultiplyConfig::from(deref(config, "config")?);
        let (c, got) = multiply(&deref(a, "a")?.0, &deref(b, "b")?.0, &cfg)?;
        put(out, SpammQuadtree(c))?;
        if let Some(o) = counters.as_mut() {
            *o = got.into();
        }
        Ok(())
    })
}
