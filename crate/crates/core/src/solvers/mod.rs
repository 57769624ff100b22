//! Solvers for `min_X ½‖Y − AX‖²_F + R(X)`.

mod admm;
pub mod factor;
mod fss;
mod sparsa;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

pub use admm::admm_solve;
pub use factor::{x_update_laplacian, GramFactor};
pub use fss::{feature_sign, fss_lasso, fss_solve, FssOutcome, Quadratic};
pub use sparsa::sparsa_solve;

use crate::classify::graph::LaplacianGraph;
use crate::dictionary::{Dictionary, GroupStructure};
use crate::error::{invalid, shape, Error, Result};
use crate::prior::{PriorKind, PriorSpec};
use crate::prox;
use crate::Matrix;

/// KKT tolerance the feature-sign solver must reach.
pub const FSS_KKT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Admm,
    Sparsa,
    Fss,
}

impl SolverKind {
    /// Feature-sign search only handles the ℓ1 and Laplacian priors.
    pub fn supports(self, prior: PriorKind) -> bool {
        match self {
            SolverKind::Admm | SolverKind::Sparsa => true,
            SolverKind::Fss => matches!(prior, PriorKind::L1 | PriorKind::Laplacian),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Admm => "admm",
            SolverKind::Sparsa => "sparsa",
            SolverKind::Fss => "fss",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(SolverKind::Admm),
            "sparsa" => Ok(SolverKind::Sparsa),
            "fss" | "feature-sign" => Ok(SolverKind::Fss),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// ADMM penalty.
    pub rho: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// SpaRSA factor by which the inverse step grows on rejection (> 1).
    pub sparsa_eta: f64,
    /// SpaRSA initial inverse step.
    pub sparsa_alpha0: f64,
    /// Residual-balancing update of `rho` (off by default).
    pub adaptive_rho: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 2000,
            tol_abs: 1e-6,
            tol_rel: 1e-4,
            sparsa_eta: 2.0,
            sparsa_alpha0: 1.0,
            adaptive_rho: false,
        }
    }
}

impl SolverParams {
    /// Tight tolerances for reference-quality solutions. ADMM balances its
    /// residuals by adapting ρ, which fixed ρ = 1 cannot match on
    /// underdetermined problems with small λ.
    pub fn precise() -> Self {
        Self {
            max_iters: 50_000,
            tol_abs: 1e-12,
            tol_rel: 1e-12,
            adaptive_rho: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.rho) || !pos(self.tol_abs) || !pos(self.tol_rel) || !pos(self.sparsa_alpha0) {
            return Err(invalid(format!("solver parameters must be positive: {self:?}")));
        }
        if !(self.sparsa_eta.is_finite() && self.sparsa_eta > 1.0) {
            return Err(invalid(format!("sparsa_eta must exceed 1, got {}", self.sparsa_eta)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub method: SolverKind,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// ADMM: `‖X − Z‖_F`. SpaRSA and block-coordinate FSS: relative objective
    /// change. Single-pass FSS: KKT violation.
    pub primal_residuals: Vec<f64>,
    /// ADMM: `ρ‖Z − Z_prev‖_F`. Empty for the other solvers.
    pub dual_residuals: Vec<f64>,
    /// ADMM primal and dual thresholds at the final iteration.
    pub stop_thresholds: Option<(f64, f64)>,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolverReport {
    pub(crate) fn new(method: SolverKind) -> Self {
        Self {
            method,
            iterations: 0,
            objective_trace: Vec::new(),
            primal_residuals: Vec::new(),
            dual_residuals: Vec::new(),
            stop_thresholds: None,
            converged: false,
            wall_time: Duration::ZERO,
        }
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().copied()
    }
}

/// Re-derives the stopping decision from a finished report.
pub fn convergence_check(report: &SolverReport, params: &SolverParams) -> Result<bool> {
    if report.objective_trace.is_empty() {
        return Err(invalid("solver report has an empty objective trace"));
    }
    let last = |v: &[f64]| v.last().copied();
    Ok(match report.method {
        SolverKind::Admm => {
            let (Some(r), Some(s)) = (last(&report.primal_residuals), last(&report.dual_residuals))
            else {
                return Err(invalid("ADMM report has no residuals"));
            };
            let (eps_pri, eps_dual) = report.stop_thresholds.unwrap_or((params.tol_abs, params.tol_abs));
            r <= eps_pri && s <= eps_dual
        }
        SolverKind::Sparsa => {
            let trace = &report.objective_trace;
            if trace.len() < 2 {
                return Ok(false);
            }
            relative_change(trace[trace.len() - 2], trace[trace.len() - 1]) < params.tol_rel
        }
        // Block-coordinate runs record one relative change per sweep; single
        // solves record the KKT violation.
        SolverKind::Fss => match last(&report.primal_residuals) {
            Some(v) if report.objective_trace.len() >= 2 => v < params.tol_rel,
            Some(kkt) => kkt <= FSS_KKT_TOL,
            None => return Err(invalid("FSS report has no residuals")),
        },
    })
}

pub(crate) fn relative_change(prev: f64, next: f64) -> f64 {
    let diff = (prev - next).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / next.abs().max(prev.abs()).max(f64::MIN_POSITIVE)
    }
}

/// One coding problem: dictionary, data block, prior and optional graph.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub dictionary: &'a Dictionary,
    pub y: &'a Matrix,
    pub prior: PriorSpec,
    pub laplacian: Option<&'a LaplacianGraph>,
}

impl<'a> Problem<'a> {
    pub fn new(
        dictionary: &'a Dictionary,
        y: &'a Matrix,
        prior: PriorSpec,
        laplacian: Option<&'a LaplacianGraph>,
    ) -> Result<Self> {
        if y.nrows() != dictionary.bands() {
            return Err(shape(format!(
                "block has {} bands, dictionary has {}",
                y.nrows(),
                dictionary.bands()
            )));
        }
        if y.ncols() == 0 {
            return Err(invalid("block has no pixels"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("block contains non-finite values"));
        }
        prior.check_solvable()?;
        if prior.kind == PriorKind::Laplacian {
            match laplacian {
                None => return Err(invalid("the Laplacian prior needs a similarity graph")),
                Some(g) if g.len() != y.ncols() => {
                    return Err(shape(format!(
                        "graph has {} vertices for {} pixels",
                        g.len(),
                        y.ncols()
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            dictionary,
            y,
            prior,
            laplacian,
        })
    }

    pub fn groups(&self) -> &GroupStructure {
        self.dictionary.groups()
    }

    pub(crate) fn graph_weight(&self) -> Option<(&'a LaplacianGraph, f64)> {
        match (self.prior.kind, self.laplacian) {
            (PriorKind::Laplacian, Some(g)) if self.prior.lambda2_or_zero() > 0.0 => {
                Some((g, self.prior.lambda2_or_zero()))
            }
            _ => None,
        }
    }

    /// `½‖Y − AX‖²_F` plus the smooth graph term.
    pub(crate) fn smooth_value(&self, x: &Matrix) -> f64 {
        let mut v = 0.5 * data_residual(self.dictionary.atoms(), self.y, x).norm_squared();
        if let Some((g, l2)) = self.graph_weight() {
            v += l2 * trace_form(x, g.laplacian());
        }
        v
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &Matrix) -> Result<f64> {
        let nonsmooth = nonsmooth_value(&self.prior, x, self.groups())?;
        Ok(self.smooth_value(x) + nonsmooth)
    }
}

/// `Y − AX`, skipping the zero rows of `X`.
fn data_residual(a: &Matrix, y: &Matrix, x: &Matrix) -> Matrix {
    let rows: Vec<usize> = (0..x.nrows())
        .filter(|&i| x.row(i).iter().any(|&v| v != 0.0))
        .collect();
    let mut residual = y.clone();
    if 2 * rows.len() > x.nrows() {
        residual.gemm(-1.0, a, x, 1.0);
    } else {
        for i in rows {
            residual.ger(-1.0, &a.column(i), &x.row(i).transpose(), 1.0);
        }
    }
    residual
}

/// `tr(X L Xᵀ)`.
fn trace_form(x: &Matrix, l: &Matrix) -> f64 {
    (x * l).component_mul(x).sum()
}

/// Non-smooth part of the prior (the whole prior except the Laplacian graph term).
fn nonsmooth_value(prior: &PriorSpec, x: &Matrix, groups: &GroupStructure) -> Result<f64> {
    let lambda = prior.lambda;
    let l1 = |m: &Matrix| m.iter().map(|v| v.abs()).sum::<f64>();
    Ok(match prior.kind {
        PriorKind::L1 | PriorKind::Laplacian => lambda * l1(x),
        PriorKind::JointSparsity => lambda * x.row_iter().map(|r| r.norm()).sum::<f64>(),
        PriorKind::Group => {
            groups.check_rows(x.nrows())?;
            lambda
                * groups
                    .iter()
                    .map(|(r, w)| w * x.rows(r.start, r.len()).norm())
                    .sum::<f64>()
        }
        PriorKind::SparseGroup => {
            groups.check_rows(x.nrows())?;
            let lambda2 = prior.lambda2_or_zero();
            groups
                .iter()
                .map(|(r, w)| {
                    let block = x.rows(r.start, r.len());
                    let c = if prior.weighted_l1 { w } else { 1.0 };
                    lambda * w * block.norm() + lambda2 * c * block.iter().map(|v| v.abs()).sum::<f64>()
                })
                .sum()
        }
        PriorKind::LowRank => lambda * nuclear_norm(x)?,
        PriorKind::LowRankGroup => {
            groups.check_rows(x.nrows())?;
            let mut total = 0.0;
            for (r, w) in groups.iter() {
                total += w * nuclear_norm(&x.rows(r.start, r.len()).into_owned())?;
            }
            lambda * total
        }
    })
}

fn nuclear_norm(x: &Matrix) -> Result<f64> {
    if x.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    Ok(prox::singular_values(x)?.iter().sum())
}

/// `R(X)` for `prior`, including the graph term `λ₂ tr(X L Xᵀ)` of the
/// Laplacian prior.
pub fn regularizer_value(
    prior: &PriorSpec,
    x: &Matrix,
    groups: &GroupStructure,
    laplacian: Option<&LaplacianGraph>,
) -> Result<f64> {
    let mut v = nonsmooth_value(prior, x, groups)?;
    if prior.kind == PriorKind::Laplacian {
        let g = laplacian.ok_or_else(|| invalid("the Laplacian prior needs a similarity graph"))?;
        if g.len() != x.ncols() {
            return Err(shape(format!("graph has {} vertices for {} pixels", g.len(), x.ncols())));
        }
        v += prior.lambda2_or_zero() * trace_form(x, g.laplacian());
    }
    Ok(v)
}

/// `½‖Y − AX‖²_F + R(X)`.
pub fn objective_value(
    dictionary: &Dictionary,
    y: &Matrix,
    x: &Matrix,
    prior: &PriorSpec,
    laplacian: Option<&LaplacianGraph>,
) -> Result<f64> {
    if x.nrows() != dictionary.num_atoms() || x.ncols() != y.ncols() || y.nrows() != dictionary.bands() {
        return Err(shape(format!(
            "A is {:?}, Y is {:?}, X is {:?}",
            dictionary.atoms().shape(),
            y.shape(),
            x.shape()
        )));
    }
    let fit = 0.5 * (y - dictionary.atoms() * x).norm_squared();
    Ok(fit + regularizer_value(prior, x, dictionary.groups(), laplacian)?)
}

/// Runs the chosen solver.
pub fn solve(problem: &Problem, kind: SolverKind, params: &SolverParams) -> Result<(Matrix, SolverReport)> {
    if !kind.supports(problem.prior.kind) {
        return Err(Error::Config(format!(
            "solver {kind} does not support prior {}",
            problem.prior.kind
        )));
    }
    match kind {
        SolverKind::Admm => admm_solve(problem, params),
        SolverKind::Sparsa => sparsa_solve(problem, params),
        SolverKind::Fss => fss_solve(problem, params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar_dict() -> Dictionary {
        Dictionary::new(dmatrix![1.0], vec![1], false).unwrap()
    }

    #[test]
    fn objective_examples() {
        let d = scalar_dict();
        let y = dmatrix![2.0];
        let l1 = PriorSpec::single(PriorKind::L1, 0.5);
        let v = objective_value(&d, &y, &dmatrix![1.5], &l1, None).unwrap();
        assert!((v - 0.875).abs() < 1e-15);
        let zero = objective_value(&d, &y, &dmatrix![0.0], &l1, None).unwrap();
        assert_eq!(zero, 2.0);
    }

    #[test]
    fn joint_sparsity_objective() {
        let a = Matrix::identity(3, 3);
        let d = Dictionary::new(a, vec![1, 1, 2], false).unwrap();
        let y = dmatrix![1.0, 0.0; 0.0, 2.0; 1.0, 1.0];
        let x = dmatrix![0.0, 0.0; 3.0, 4.0; 0.0, 0.0];
        let js = PriorSpec::single(PriorKind::JointSparsity, 0.1);
        let v = objective_value(&d, &y, &x, &js, None).unwrap();
        let fit = 0.5 * (&y - &x).norm_squared();
        assert!((v - (fit + 0.1 * 5.0)).abs() < 1e-14);
    }

    #[test]
    fn laplacian_objective_needs_graph() {
        let d = scalar_dict();
        let y = dmatrix![1.0, 1.0];
        let x = dmatrix![1.0, -1.0];
        let lap = PriorSpec::pair(PriorKind::Laplacian, 0.1, 0.5);
        assert!(objective_value(&d, &y, &x, &lap, None).is_err());
        let g = LaplacianGraph::from_weights(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        // tr(X L Xᵀ) = [1 -1] L [1 -1]ᵀ = 4
        let v = objective_value(&d, &y, &x, &lap, Some(&g)).unwrap();
        assert!((v - (2.0 + 0.2 + 2.0)).abs() < 1e-14);
    }

    fn report(method: SolverKind) -> SolverReport {
        SolverReport::new(method)
    }

    #[test]
    fn convergence_check_cases() {
        let params = SolverParams::default();
        let mut r = report(SolverKind::Admm);
        assert!(convergence_check(&r, &params).is_err());
        r.objective_trace = vec![1.0];
        r.primal_residuals = vec![0.0];
        r.dual_residuals = vec![0.0];
        assert!(convergence_check(&r, &params).unwrap());
        r.primal_residuals = vec![5.0];
        r.stop_thresholds = Some((1e-3, 1e-3));
        assert!(!convergence_check(&r, &params).unwrap());

        let mut s = report(SolverKind::Sparsa);
        s.objective_trace = vec![2.0, 1.0];
        assert!(!convergence_check(&s, &params).unwrap());
        s.objective_trace = vec![1.0, 1.0];
        assert!(convergence_check(&s, &params).unwrap());
    }

    #[test]
    fn solver_prior_compatibility() {
        assert!(SolverKind::Fss.supports(PriorKind::Laplacian));
        assert!(!SolverKind::Fss.supports(PriorKind::LowRankGroup));
        assert!(PriorKind::ALL.iter().all(|&k| SolverKind::Admm.supports(k)));
    }
}
