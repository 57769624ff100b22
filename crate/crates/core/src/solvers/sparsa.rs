use std::time::Instant;

use super::{relative_change, Problem, SolverKind, SolverParams, SolverReport};
use crate::error::{Error, Result};
use crate::prox::prox_prior;
use crate::Matrix;

/// Sufficient-decrease constant of the acceptance test.
const SIGMA: f64 = 1e-5;
const ALPHA_MIN: f64 = 1e-30;
const ALPHA_MAX: f64 = 1e30;
const MAX_REDUCTIONS: usize = 100;

/// SpaRSA proximal gradient with Barzilai–Borwein steps and monotone
/// backtracking.
///
/// Each iteration tries `X⁺ = prox_{R/α}(X − ∇f(X)/α)` starting from the BB
/// value of `α` and multiplies `α` by `sparsa_eta` until
/// `φ(X⁺) ≤ φ(X) − (σ/2)·α‖X⁺ − X‖²` (up to a rounding allowance of
/// `1e-14·max(|φ|, 1)`). The smooth part `f` includes the graph term of the
/// Laplacian prior. Stops once the relative objective change falls below
/// `tol_rel`.
pub fn sparsa_solve(problem: &Problem, params: &SolverParams) -> Result<(Matrix, SolverReport)> {
    params.validate()?;
    let start = Instant::now();
    let dict = problem.dictionary;
    let a = dict.atoms();
    let groups = dict.groups();
    let graph = problem.graph_weight();
    let gradient = |x: &Matrix| -> Matrix {
        let mut g = a.tr_mul(&(a * x - problem.y));
        if let Some((lap, lambda2)) = graph {
            g += x * lap.laplacian() * (2.0 * lambda2);
        }
        g
    };

    let mut x = Matrix::zeros(dict.num_atoms(), problem.y.ncols());
    let mut phi = problem.objective(&x)?;
    let mut grad = gradient(&x);
    let mut alpha = params.sparsa_alpha0;
    let mut report = SolverReport::new(SolverKind::Sparsa);
    report.objective_trace.push(phi);

    for iter in 1..=params.max_iters {
        let mut reductions = 0;
        let (next, phi_next) = loop {
            let trial = &x - &grad / alpha;
            let cand = prox_prior(&problem.prior, &trial, groups, alpha.recip())?;
            let phi_c = problem.objective(&cand)?;
            if !phi_c.is_finite() {
                return Err(Error::NonFinite(iter));
            }
            let step_sq = (&cand - &x).norm_squared();
            let slack = 1e-14 * phi.abs().max(1.0);
            if phi_c <= phi - 0.5 * SIGMA * alpha * step_sq + slack {
                break (cand, phi_c);
            }
            reductions += 1;
            if reductions > MAX_REDUCTIONS {
                return Err(Error::StepFailure {
                    iteration: iter,
                    halvings: reductions - 1,
                });
            }
            alpha = (alpha * params.sparsa_eta).min(ALPHA_MAX);
        };

        let step = &next - &x;
        let grad_next = gradient(&next);
        let ss = step.norm_squared();
        if ss > 0.0 {
            let sy = step.dot(&(&grad_next - &grad));
            alpha = (sy / ss).clamp(ALPHA_MIN, ALPHA_MAX);
        }
        let change = relative_change(phi, phi_next);
        x = next;
        grad = grad_next;
        phi = phi_next;

        report.iterations = iter;
        report.objective_trace.push(phi);
        report.primal_residuals.push(change);
        if change < params.tol_rel || ss == 0.0 {
            report.converged = true;
            break;
        }
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Dictionary, PriorKind, PriorSpec};
    use nalgebra::dmatrix;

    #[test]
    fn monotone_objective_trace() {
        let atoms = dmatrix![1.0, 0.9, 0.0; 0.0, 0.1, 1.0; 0.3, 0.3, 0.2];
        let dict = Dictionary::new(atoms, vec![1, 1, 2], true).unwrap();
        let y = dmatrix![1.0, 0.5; 0.2, 0.9; 0.1, 0.3];
        let prior = PriorSpec::new(PriorKind::LowRank, 0.1, None).unwrap();
        let problem = Problem::new(&dict, &y, prior, None).unwrap();
        let (_, report) = sparsa_solve(&problem, &SolverParams::default()).unwrap();
        assert!(report.converged);
        let slack = |v: f64| 1e-14 * v.abs().max(1.0);
        assert!(report.objective_trace.windows(2).all(|w| w[1] <= w[0] + slack(w[0])));
    }
}
