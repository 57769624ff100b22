//! C interface to the `structsparse` library.
//!
//! Matrices cross the boundary as column-major `double` arrays. Every
//! fallible function returns an [`SsStatus`]; on failure the message is
//! available from [`ss_last_error`] on the same thread. Dictionaries are
//! opaque handles created by [`ss_dictionary_new`] and released with
//! [`ss_dictionary_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use structsparse::classify::classify_block_with;
use structsparse::prox::prox_prior;
use structsparse::{
    metrics, solve, ClassifierConfig, ConfusionMatrix, Dictionary, Error, GaussianKernel,
    GroupStructure, LaplacianGraph, Matrix, NeighborhoodBlock, PriorKind, PriorSpec, Problem,
    SimilarityWeights, SolverKind, SolverParams,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    EmptyClass = 4,
    ZeroColumn = 5,
    NonFinite = 6,
    Decomposition = 7,
    StepFailure = 8,
    Cycle = 9,
    Config = 10,
    Io = 11,
    Format = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsPriorKind {
    L1 = 0,
    JointSparsity = 1,
    Laplacian = 2,
    Group = 3,
    SparseGroup = 4,
    LowRank = 5,
    LowRankGroup = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsSolverKind {
    Admm = 0,
    Sparsa = 1,
    Fss = 2,
}

/// Regularizer and its weights. `lambda2` is read only by the Laplacian and
/// sparse-group priors.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsPrior {
    pub kind: SsPriorKind,
    pub lambda: f64,
    pub lambda2: f64,
    /// Sparse-group prior: scale the ℓ1 term of each group by its weight.
    pub weighted_l1: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsSolverParams {
    pub rho: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub sparsa_eta: f64,
    pub sparsa_alpha0: f64,
    pub adaptive_rho: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsReport {
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the returned point.
    pub objective: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsMetrics {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub kappa: f64,
}

/// Opaque dictionary handle.
pub struct SsDictionary {
    inner: Dictionary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SsStatus {
    match e {
        Error::InvalidArgument(_) => SsStatus::InvalidArgument,
        Error::Shape(_) => SsStatus::Shape,
        Error::EmptyClass(_) => SsStatus::EmptyClass,
        Error::ZeroColumn(_) => SsStatus::ZeroColumn,
        Error::NonFinite(_) => SsStatus::NonFinite,
        Error::Decomposition(_) => SsStatus::Decomposition,
        Error::StepFailure { .. } => SsStatus::StepFailure,
        Error::Cycle { .. } => SsStatus::Cycle,
        Error::SizeMismatch { .. } | Error::Format(_) => SsStatus::Format,
        Error::Config(_) => SsStatus::Config,
        Error::AtPixel { source, .. } => status_of(source),
        Error::TooManyFailures { .. } => SsStatus::InvalidArgument,
        Error::Io(_) => SsStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            SsStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            SsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: callers pass pointers that are either null or valid for reads.
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn slice_in<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `len` readable elements at `p`.
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

fn slice_out<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    // SAFETY: the caller guarantees `len` writable elements at `p`.
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

fn matrix_in(p: *const f64, rows: usize, cols: usize, what: &'static str) -> Result<Matrix, Failure> {
    let len = rows.checked_mul(cols).ok_or_else(|| Error::Shape(format!("{what}: {rows}x{cols} overflows")))?;
    Ok(Matrix::from_column_slice(rows, cols, slice_in(p, len, what)?))
}

impl From<SsPriorKind> for PriorKind {
    fn from(k: SsPriorKind) -> Self {
        match k {
            SsPriorKind::L1 => PriorKind::L1,
            SsPriorKind::JointSparsity => PriorKind::JointSparsity,
            SsPriorKind::Laplacian => PriorKind::Laplacian,
            SsPriorKind::Group => PriorKind::Group,
            SsPriorKind::SparseGroup => PriorKind::SparseGroup,
            SsPriorKind::LowRank => PriorKind::LowRank,
            SsPriorKind::LowRankGroup => PriorKind::LowRankGroup,
        }
    }
}

impl From<SsSolverKind> for SolverKind {
    fn from(k: SsSolverKind) -> Self {
        match k {
            SsSolverKind::Admm => SolverKind::Admm,
            SsSolverKind::Sparsa => SolverKind::Sparsa,
            SsSolverKind::Fss => SolverKind::Fss,
        }
    }
}

impl From<SolverParams> for SsSolverParams {
    fn from(p: SolverParams) -> Self {
        Self {
            rho: p.rho,
            max_iters: p.max_iters,
            tol_abs: p.tol_abs,
            tol_rel: p.tol_rel,
            sparsa_eta: p.sparsa_eta,
            sparsa_alpha0: p.sparsa_alpha0,
            adaptive_rho: p.adaptive_rho,
        }
    }
}

impl From<SsSolverParams> for SolverParams {
    fn from(p: SsSolverParams) -> Self {
        Self {
            rho: p.rho,
            max_iters: p.max_iters,
            tol_abs: p.tol_abs,
            tol_rel: p.tol_rel,
            sparsa_eta: p.sparsa_eta,
            sparsa_alpha0: p.sparsa_alpha0,
            adaptive_rho: p.adaptive_rho,
        }
    }
}

fn prior_spec(p: &SsPrior) -> Result<PriorSpec, Error> {
    let kind = PriorKind::from(p.kind);
    let lambda2 = kind.has_lambda2().then_some(p.lambda2);
    Ok(PriorSpec::new(kind, p.lambda, lambda2)?.with_weighted_l1(p.weighted_l1))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library defaults: ρ = 1, 2000 iterations, tolerances 1e-6 / 1e-4.
#[no_mangle]
pub extern "C" fn ss_solver_params_default() -> SsSolverParams {
    SolverParams::default().into()
}

/// Tight tolerances with adaptive ρ, for reference solutions.
#[no_mangle]
pub extern "C" fn ss_solver_params_precise() -> SsSolverParams {
    SolverParams::precise().into()
}

/// Builds a dictionary from `bands × n_atoms` column-major atoms and one
/// class id (1-based, grouped contiguously) per atom.
///
/// # Safety
/// `atoms` must hold `bands * n_atoms` doubles, `classes` `n_atoms` values,
/// and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_dictionary_new(
    atoms: *const f64,
    bands: usize,
    n_atoms: usize,
    classes: *const u16,
    normalize: bool,
    out: *mut *mut SsDictionary,
) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let a = matrix_in(atoms, bands, n_atoms, "atoms")?;
        let ids = slice_in(classes, n_atoms, "classes")?.to_vec();
        let inner = Dictionary::new(a, ids, normalize)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(SsDictionary { inner })) };
        Ok(())
    })
}

/// Releases a dictionary; null is ignored.
///
/// # Safety
/// `dict` must come from [`ss_dictionary_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_dictionary_free(dict: *mut SsDictionary) {
    if !dict.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(dict) });
    }
}

/// Number of atoms, 0 for null.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dictionary_num_atoms(dict: *const SsDictionary) -> usize {
    unsafe { dict.as_ref() }.map_or(0, |d| d.inner.num_atoms())
}

/// Number of classes, 0 for null.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_dictionary_num_classes(dict: *const SsDictionary) -> usize {
    unsafe { dict.as_ref() }.map_or(0, |d| d.inner.num_classes())
}

/// Proximal operator of `scale · R` on a `rows × cols` matrix whose rows are
/// partitioned into `n_groups` contiguous groups (weights `√size`).
///
/// # Safety
/// `v` and `out` must hold `rows * cols` doubles and `group_sizes` `n_groups`
/// values summing to `rows`.
#[no_mangle]
pub unsafe extern "C" fn ss_prox(
    prior: *const SsPrior,
    group_sizes: *const usize,
    n_groups: usize,
    v: *const f64,
    rows: usize,
    cols: usize,
    scale: f64,
    out: *mut f64,
) -> SsStatus {
    guard(|| {
        let spec = prior_spec(non_null(prior, "prior")?)?;
        let groups = GroupStructure::from_sizes(slice_in(group_sizes, n_groups, "group_sizes")?)?;
        let v = matrix_in(v, rows, cols, "v")?;
        let x = prox_prior(&spec, &v, &groups, scale)?;
        slice_out(out, rows * cols, "out")?.copy_from_slice(x.as_slice());
        Ok(())
    })
}

/// Minimizes `½‖Y − AX‖²_F + R(X)` for `bands × pixels` data `y` and writes
/// the `n_atoms × pixels` coefficients to `x_out`.
///
/// The Laplacian prior needs `weights`, a symmetric `pixels × pixels`
/// similarity matrix with zero diagonal; it is ignored otherwise and may be
/// null. `params` may be null for the defaults, `report` may be null.
///
/// # Safety
/// Pointers must be valid for the sizes above; `dict` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_solve(
    dict: *const SsDictionary,
    prior: *const SsPrior,
    solver: SsSolverKind,
    params: *const SsSolverParams,
    y: *const f64,
    bands: usize,
    pixels: usize,
    weights: *const f64,
    x_out: *mut f64,
    report: *mut SsReport,
) -> SsStatus {
    guard(|| {
        let dict = &non_null(dict, "dict")?.inner;
        let spec = prior_spec(non_null(prior, "prior")?)?;
        let params = unsafe { params.as_ref() }.map_or_else(SolverParams::default, |p| (*p).into());
        let y = matrix_in(y, bands, pixels, "y")?;
        let graph = if spec.kind == PriorKind::Laplacian {
            Some(LaplacianGraph::from_weights(matrix_in(weights, pixels, pixels, "weights")?)?)
        } else {
            None
        };
        let problem = Problem::new(dict, &y, spec, graph.as_ref())?;
        let (x, r) = solve(&problem, solver.into(), &params)?;
        slice_out(x_out, dict.num_atoms() * pixels, "x_out")?.copy_from_slice(x.as_slice());
        if let Some(rep) = unsafe { report.as_mut() } {
            *rep = SsReport {
                iterations: r.iterations,
                converged: r.converged,
                objective: problem.objective(&x)?,
            };
        }
        Ok(())
    })
}

/// Codes a block of `pixels` spectra (column 0 is the pixel being labeled)
/// and writes its class. For the Laplacian prior the pixel graph uses a
/// Gaussian kernel of width `kernel_sigma`. `residuals`, if not null,
/// receives one class residual per dictionary class.
///
/// # Safety
/// Pointers must be valid for the sizes above; `dict` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ss_classify_block(
    dict: *const SsDictionary,
    prior: *const SsPrior,
    solver: SsSolverKind,
    params: *const SsSolverParams,
    kernel_sigma: f64,
    spectra: *const f64,
    bands: usize,
    pixels: usize,
    class_out: *mut u16,
    residuals: *mut f64,
) -> SsStatus {
    guard(|| {
        let dict = &non_null(dict, "dict")?.inner;
        if class_out.is_null() {
            return Err(Failure::Null("class_out"));
        }
        let mut config = ClassifierConfig::new(prior_spec(non_null(prior, "prior")?)?, 1, solver.into())?;
        config.weight_kernel_sigma = kernel_sigma;
        if let Some(p) = unsafe { params.as_ref() } {
            config.params = (*p).into();
        }
        config.validate()?;
        let kernel = GaussianKernel::new(kernel_sigma)?;
        let block = NeighborhoodBlock::from_spectra(matrix_in(spectra, bands, pixels, "spectra")?);
        let decision = classify_block_with(dict, &block, &config, &kernel as &dyn SimilarityWeights)?;
        if !residuals.is_null() {
            slice_out(residuals, decision.residuals.len(), "residuals")?.copy_from_slice(&decision.residuals);
        }
        // SAFETY: checked non-null above.
        unsafe { *class_out = decision.class };
        Ok(())
    })
}

/// OA, AA (percent) and κ of a `k × k` row-major confusion matrix whose
/// entry `[t][p]` counts pixels of true class `t + 1` predicted `p + 1`.
///
/// # Safety
/// `counts` must hold `k * k` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ss_metrics(counts: *const u64, k: usize, out: *mut SsMetrics) -> SsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let flat = slice_in(counts, k * k, "counts")?;
        let rows = flat.chunks(k.max(1)).map(|r| r.to_vec()).take(k).collect();
        let m = metrics(&ConfusionMatrix::from_counts(rows)?)?;
        // SAFETY: checked non-null above.
        unsafe {
            *out = SsMetrics {
                overall_accuracy: m.overall_accuracy,
                average_accuracy: m.average_accuracy,
                kappa: m.kappa,
            }
        };
        Ok(())
    })
}
