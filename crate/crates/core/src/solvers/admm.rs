use std::time::Instant;

use super::factor::x_update_laplacian;
use super::{Problem, SolverKind, SolverParams, SolverReport};
use crate::error::{Error, Result};
use crate::prox::prox_prior;
use crate::Matrix;

/// Scaled-form ADMM on the splitting `X = Z`:
///
/// ```text
/// X ← (AᵀA + ρI)⁻¹ (AᵀY + ρ(Z − U))      (+ 2λ₂ X L on the left for the Laplacian prior)
/// Z ← prox_{R/ρ}(X + U)
/// U ← U + X − Z
/// ```
///
/// Returns `Z`, whose zero pattern is exact. Stops when
/// `‖X − Z‖ ≤ √(NT)·tol_abs + tol_rel·max(‖X‖, ‖Z‖)` and
/// `ρ‖Z − Z_prev‖ ≤ √(NT)·tol_abs + tol_rel·ρ‖U‖`.
pub fn admm_solve(problem: &Problem, params: &SolverParams) -> Result<(Matrix, SolverReport)> {
    params.validate()?;
    let start = Instant::now();
    let dict = problem.dictionary;
    let factor = dict.gram_factor()?;
    let groups = dict.groups();
    let (n, t) = (dict.num_atoms(), problem.y.ncols());
    let aty = dict.atoms().tr_mul(problem.y);
    let graph = problem.graph_weight();

    let mut rho = params.rho;
    let mut z = Matrix::zeros(n, t);
    let mut u = Matrix::zeros(n, t);
    let sqrt_dim = ((n * t) as f64).sqrt();
    let mut report = SolverReport::new(SolverKind::Admm);

    for iter in 1..=params.max_iters {
        let rhs = &aty + (&z - &u) * rho;
        let x = match graph {
            Some((g, lambda2)) => x_update_laplacian(factor, &rhs, g, lambda2, rho)?,
            None => factor.solve(&rhs, rho)?,
        };
        let z_prev = std::mem::replace(
            &mut z,
            prox_prior(&problem.prior, &(&x + &u), groups, rho.recip())?,
        );
        u += &x - &z;

        let primal = (&x - &z).norm();
        let dual = rho * (&z - &z_prev).norm();
        let (x_norm, z_norm, u_norm) = (x.norm(), z.norm(), u.norm());
        // a non-finite entry anywhere makes one of these non-finite
        if ![primal, dual, x_norm, z_norm, u_norm].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(iter));
        }
        let eps_pri = sqrt_dim * params.tol_abs + params.tol_rel * x_norm.max(z_norm);
        let eps_dual = sqrt_dim * params.tol_abs + params.tol_rel * rho * u_norm;

        report.iterations = iter;
        report.objective_trace.push(problem.objective(&z)?);
        report.primal_residuals.push(primal);
        report.dual_residuals.push(dual);
        report.stop_thresholds = Some((eps_pri, eps_dual));

        if primal <= eps_pri && dual <= eps_dual {
            report.converged = true;
            break;
        }
        if params.adaptive_rho {
            // residual balancing; U is scaled so that ρU stays fixed
            if primal > 10.0 * dual {
                rho *= 2.0;
                u /= 2.0;
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }
    report.wall_time = start.elapsed();
    Ok((z, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{fss_solve, sparsa_solve};
    use crate::{Dictionary, PriorKind, PriorSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem_data(seed: u64) -> (Dictionary, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms = Matrix::from_fn(8, 6, |_, _| rng.random::<f64>() - 0.5);
        let y = Matrix::from_fn(8, 3, |_, _| rng.random::<f64>() - 0.5);
        (Dictionary::new(atoms, vec![1, 1, 1, 2, 2, 2], true).unwrap(), y)
    }

    #[test]
    fn three_solvers_agree_on_l1() {
        let (dict, y) = random_problem_data(3);
        let prior = PriorSpec::new(PriorKind::L1, 0.05, None).unwrap();
        let problem = Problem::new(&dict, &y, prior, None).unwrap();
        let params = SolverParams::precise();
        let (xa, ra) = admm_solve(&problem, &params).unwrap();
        let (xs, _) = sparsa_solve(&problem, &params).unwrap();
        let (xf, _) = fss_solve(&problem, &params).unwrap();
        assert!(ra.converged);
        let fa = problem.objective(&xa).unwrap();
        let ff = problem.objective(&xf).unwrap();
        let fs = problem.objective(&xs).unwrap();
        assert!((fa - ff).abs() <= 1e-8 * ff.abs().max(1.0), "{fa} vs {ff}");
        assert!((fs - ff).abs() <= 1e-8 * ff.abs().max(1.0), "{fs} vs {ff}");
        assert!((&xa - &xf).amax() < 1e-5);
    }

    #[test]
    fn admm_and_sparsa_agree_on_joint_sparsity() {
        let (dict, y) = random_problem_data(5);
        let prior = PriorSpec::new(PriorKind::JointSparsity, 0.1, None).unwrap();
        let problem = Problem::new(&dict, &y, prior, None).unwrap();
        let params = SolverParams::precise();
        let (xa, _) = admm_solve(&problem, &params).unwrap();
        let (xs, _) = sparsa_solve(&problem, &params).unwrap();
        let (fa, fs) = (problem.objective(&xa).unwrap(), problem.objective(&xs).unwrap());
        assert!((fa - fs).abs() <= 1e-8 * fa.abs().max(1.0), "{fa} vs {fs}");
        // rows are all zero or all nonzero
        for row in xa.row_iter() {
            let nz = row.iter().filter(|v| **v != 0.0).count();
            assert!(nz == 0 || nz == row.len());
        }
    }

    #[test]
    fn adaptive_rho_reaches_same_objective() {
        let (dict, y) = random_problem_data(9);
        let prior = PriorSpec::new(PriorKind::Group, 0.05, None).unwrap();
        let problem = Problem::new(&dict, &y, prior, None).unwrap();
        let fixed = SolverParams::precise();
        let adaptive = SolverParams { adaptive_rho: true, rho: 50.0, ..fixed };
        let (x1, _) = admm_solve(&problem, &fixed).unwrap();
        let (x2, r2) = admm_solve(&problem, &adaptive).unwrap();
        assert!(r2.converged);
        let (f1, f2) = (problem.objective(&x1).unwrap(), problem.objective(&x2).unwrap());
        assert!((f1 - f2).abs() <= 1e-8 * f1.max(1.0));
    }
}
