//! Closed-form proximal operators for every supported regularizer.
//!
//! All operators take the threshold already multiplied by the step
//! (`λ/ρ` in ADMM, `λ/α` in SpaRSA).

use crate::dictionary::GroupStructure;
use crate::error::{invalid, Error, Result};
use crate::prior::{PriorKind, PriorSpec};
use crate::Matrix;

/// Singular values at or below this after thresholding are set to zero.
pub const SINGULAR_FLUSH: f64 = 1e-12;

/// Support summary of a coefficient matrix.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportStats {
    pub nonzero_rows: usize,
    pub active_groups: usize,
    /// Rank of every group block, in group order.
    pub group_ranks: Vec<usize>,
    /// Singular values kept by the last singular-value thresholding, summed
    /// over groups (0 for priors that do not threshold singular values).
    pub retained_singular_values: usize,
}

impl SupportStats {
    /// Measures `x`; group ranks count singular values above
    /// `1e-10 · max(1, σ_max)` of each block.
    pub fn measure(x: &Matrix, groups: &GroupStructure) -> Result<Self> {
        groups.check_rows(x.nrows())?;
        let nonzero_rows = x.row_iter().filter(|r| r.iter().any(|&v| v != 0.0)).count();
        let mut active_groups = 0;
        let mut group_ranks = Vec::with_capacity(groups.num_groups());
        for (range, _) in groups.iter() {
            let block = x.rows(range.start, range.len());
            if block.iter().any(|&v| v != 0.0) {
                active_groups += 1;
                let sv = singular_values(&block.into_owned())?;
                let top = sv.iter().copied().fold(0.0, f64::max);
                let tol = 1e-10 * top.max(1.0);
                group_ranks.push(sv.iter().filter(|&&s| s > tol).count());
            } else {
                group_ranks.push(0);
            }
        }
        Ok(Self {
            nonzero_rows,
            active_groups,
            group_ranks,
            retained_singular_values: 0,
        })
    }
}

/// Output of a prior-dispatched prox together with its support statistics.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub output: Matrix,
    pub stats: SupportStats,
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("threshold must be finite and non-negative, got {t}")));
    }
    Ok(())
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Elementwise `sign(v)·max(|v| − t, 0)`: the prox of `t‖·‖₁`.
pub fn soft_threshold(v: &Matrix, t: f64) -> Result<Matrix> {
    check_threshold(t)?;
    Ok(v.map(|x| shrink(x, t)))
}

/// Row-wise shrinkage: the prox of `t Σᵢ ‖xⁱ‖₂`.
pub fn prox_row_l2(x: &Matrix, t: f64) -> Result<Matrix> {
    check_threshold(t)?;
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        let scale = if norm > 0.0 { (1.0 - t / norm).max(0.0) } else { 0.0 };
        row *= scale;
    }
    Ok(out)
}

/// Block shrinkage: the prox of `t Σ_g w_g ‖X_g‖_F`.
pub fn prox_group_l2(x: &Matrix, groups: &GroupStructure, t: f64) -> Result<Matrix> {
    check_threshold(t)?;
    groups.check_rows(x.nrows())?;
    let mut out = x.clone();
    shrink_groups(&mut out, groups, t);
    Ok(out)
}

fn shrink_groups(x: &mut Matrix, groups: &GroupStructure, t: f64) {
    for (range, w) in groups.iter() {
        let mut block = x.rows_mut(range.start, range.len());
        let norm = block.norm();
        let scale = if norm > 0.0 { (1.0 - t * w / norm).max(0.0) } else { 0.0 };
        block *= scale;
    }
}

/// Prox of `t1 Σ_g w_g ‖X_g‖_F + t2 Σ_g c_g ‖X_g‖₁` with `c_g = w_g` when
/// `weighted_l1`, else 1.
///
/// Computed as soft thresholding followed by group shrinkage. The ℓ1 prox
/// maps every group onto a set where the group norm is already minimized in
/// direction, so the composition is the exact prox of the sum (the standard
/// sparse-group-Lasso identity, cf. Friedman, Hastie & Tibshirani 2010).
pub fn prox_sparse_group(
    x: &Matrix,
    groups: &GroupStructure,
    t1: f64,
    t2: f64,
    weighted_l1: bool,
) -> Result<Matrix> {
    check_threshold(t1)?;
    check_threshold(t2)?;
    groups.check_rows(x.nrows())?;
    let mut out = x.clone();
    for (range, w) in groups.iter() {
        let t = if weighted_l1 { t2 * w } else { t2 };
        out.rows_mut(range.start, range.len())
            .apply(|v| *v = shrink(*v, t));
    }
    shrink_groups(&mut out, groups, t1);
    Ok(out)
}

pub(crate) fn singular_values(x: &Matrix) -> Result<Vec<f64>> {
    let svd = x
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or(Error::Decomposition("SVD"))?;
    Ok(svd.singular_values.iter().copied().collect())
}

/// Singular-value soft thresholding; returns the output and the number of
/// singular values retained.
fn svt_counted(x: &Matrix, t: f64) -> Result<(Matrix, usize)> {
    let (m, n) = x.shape();
    if x.iter().all(|&v| v == 0.0) {
        return Ok((Matrix::zeros(m, n), 0));
    }
    // Decompose the wide orientation so the bidiagonalization runs on the
    // short side (blocks are atoms × pixels with few pixels).
    let transpose = m > n;
    let work = if transpose { x.transpose() } else { x.clone() };
    let (rows, cols) = work.shape();
    let svd = work
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or(Error::Decomposition("SVD"))?;
    let u = svd.u.as_ref().ok_or(Error::Decomposition("SVD"))?;
    let v_t = svd.v_t.as_ref().ok_or(Error::Decomposition("SVD"))?;
    let mut out = Matrix::zeros(rows, cols);
    let mut kept = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - t;
        if shrunk <= SINGULAR_FLUSH {
            continue;
        }
        kept += 1;
        out.ger(shrunk, &u.column(i), &v_t.row(i).transpose(), 1.0);
    }
    Ok((if transpose { out.transpose() } else { out }, kept))
}

/// Prox of `t‖X‖_*`: `U·max(Σ − t, 0)·Vᵀ`.
pub fn svt(x: &Matrix, t: f64) -> Result<Matrix> {
    check_threshold(t)?;
    Ok(svt_counted(x, t)?.0)
}

fn group_nuclear_counted(x: &Matrix, groups: &GroupStructure, t: f64) -> Result<(Matrix, usize)> {
    let mut out = Matrix::zeros(x.nrows(), x.ncols());
    let mut kept = 0;
    for (range, w) in groups.iter() {
        let block = x.rows(range.start, range.len()).into_owned();
        let (b, k) = svt_counted(&block, t * w)?;
        out.rows_mut(range.start, range.len()).copy_from(&b);
        kept += k;
    }
    Ok((out, kept))
}

/// Prox of `t Σ_g w_g ‖X_g‖_*`: independent SVT of every group block.
pub fn prox_group_nuclear(x: &Matrix, groups: &GroupStructure, t: f64) -> Result<Matrix> {
    check_threshold(t)?;
    groups.check_rows(x.nrows())?;
    Ok(group_nuclear_counted(x, groups, t)?.0)
}

/// Prox of `scale · R` for the non-smooth part of `prior` (for the Laplacian
/// prior that is the ℓ1 term only; the graph term is smooth).
pub fn prox_prior(prior: &PriorSpec, v: &Matrix, groups: &GroupStructure, scale: f64) -> Result<Matrix> {
    Ok(prox_dispatch(prior, v, groups, scale)?.0)
}

/// [`prox_prior`] plus support statistics of the result.
pub fn prox_prior_with_stats(
    prior: &PriorSpec,
    v: &Matrix,
    groups: &GroupStructure,
    scale: f64,
) -> Result<ProxResult> {
    let (output, retained) = prox_dispatch(prior, v, groups, scale)?;
    let mut stats = SupportStats::measure(&output, groups)?;
    stats.retained_singular_values = retained;
    Ok(ProxResult { output, stats })
}

fn prox_dispatch(prior: &PriorSpec, v: &Matrix, groups: &GroupStructure, scale: f64) -> Result<(Matrix, usize)> {
    prior.check_solvable()?;
    let t = prior.lambda * scale;
    Ok(match prior.kind {
        PriorKind::L1 | PriorKind::Laplacian => (soft_threshold(v, t)?, 0),
        PriorKind::JointSparsity => (prox_row_l2(v, t)?, 0),
        PriorKind::Group => (prox_group_l2(v, groups, t)?, 0),
        PriorKind::SparseGroup => (
            prox_sparse_group(v, groups, t, prior.lambda2_or_zero() * scale, prior.weighted_l1)?,
            0,
        ),
        PriorKind::LowRank => {
            check_threshold(t)?;
            svt_counted(v, t)?
        }
        PriorKind::LowRankGroup => {
            check_threshold(t)?;
            groups.check_rows(v.nrows())?;
            group_nuclear_counted(v, groups, t)?
        }
    })
}
