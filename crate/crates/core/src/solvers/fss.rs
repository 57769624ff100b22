//! Feature-sign search (Lee, Battle, Raina & Ng, 2007) and its
//! block-coordinate extension to the Laplacian-regularized problem.

use std::time::Instant;

use nalgebra::DVector;

use super::{relative_change, Problem, SolverKind, SolverParams, SolverReport, FSS_KKT_TOL};
use crate::error::{invalid, shape, Error, Result};
use crate::prior::PriorKind;
use crate::Matrix;

/// `½ xᵀ(H + shift·I)x − bᵀx`, the smooth part of one feature-sign problem.
#[derive(Debug, Clone)]
pub struct Quadratic<'a> {
    pub hessian: &'a Matrix,
    pub shift: f64,
    pub linear: DVector<f64>,
}

impl Quadratic<'_> {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn gradient(&self, x: &DVector<f64>, active: &[usize]) -> DVector<f64> {
        let mut g = -&self.linear;
        for &j in active {
            let xj = x[j];
            if xj != 0.0 {
                g.axpy(xj, &self.hessian.column(j), 1.0);
                g[j] += self.shift * xj;
            }
        }
        g
    }

    /// Objective restricted to the coordinates in `idx`.
    fn reduced_value(&self, idx: &[usize], z: &DVector<f64>, lambda: f64) -> f64 {
        let mut quad = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            let mut row = 0.0;
            for (b, &j) in idx.iter().enumerate() {
                row += self.hessian[(i, j)] * z[b];
            }
            quad += z[a] * (row + self.shift * z[a]);
        }
        let lin: f64 = idx.iter().enumerate().map(|(a, &i)| self.linear[i] * z[a]).sum();
        0.5 * quad - lin + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct FssOutcome {
    pub x: DVector<f64>,
    /// Feature-sign steps taken.
    pub steps: usize,
    pub active_set_changes: usize,
    /// Largest violation of the optimality conditions at `x`.
    pub kkt: f64,
}

fn kkt_violation(g: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    x.iter()
        .zip(g.iter())
        .map(|(&xj, &gj)| {
            if xj != 0.0 {
                (gj + lambda * xj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Where the reduced quadratic `½ zᵀHz − rᵀz` sends the active block.
enum Move {
    /// Its minimizer.
    Target(DVector<f64>),
    /// A null-space direction along which it decreases without bound.
    Ray(DVector<f64>),
}

fn reduced_move(h: &Matrix, rhs: &DVector<f64>) -> Result<Move> {
    let top_diag = h.diagonal().amax();
    if let Some(chol) = h.clone().cholesky() {
        // a tiny pivot means the block is numerically singular
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
        if min_pivot > 1e-8 * top_diag {
            return Ok(Move::Target(chol.solve(rhs)));
        }
    }
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::Decomposition("eigendecomposition of the active Gram block"))?;
    let top = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let tol = 1e-10 * top;
    let mut z = DVector::zeros(rhs.len());
    let mut ray = rhs.clone();
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        let c = u.dot(rhs);
        if mu > tol {
            z.axpy(c / mu, &u, 1.0);
            ray.axpy(-c, &u, 1.0);
        }
    }
    if ray.norm() > 1e-10 * rhs.norm().max(f64::MIN_POSITIVE) {
        Ok(Move::Ray(ray))
    } else {
        Ok(Move::Target(z))
    }
}

/// Minimizes `½ xᵀ(H + shift·I)x − bᵀx + λ‖x‖₁` by feature-sign search.
///
/// `warm` may supply a starting point; its nonzero entries seed the active
/// set. Fails with [`Error::Cycle`] after `10·N` active-set changes.
pub fn feature_sign(q: &Quadratic, lambda: f64, warm: Option<&DVector<f64>>) -> Result<FssOutcome> {
    let n = q.dim();
    if q.hessian.shape() != (n, n) {
        return Err(shape(format!("Hessian {:?} for {n} unknowns", q.hessian.shape())));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid(format!("lambda must be non-negative, got {lambda}")));
    }
    let mut x = match warm {
        Some(w) if w.len() == n => w.clone(),
        Some(w) => return Err(shape(format!("warm start of length {} for {n} unknowns", w.len()))),
        None => DVector::zeros(n),
    };
    let mut theta: Vec<f64> = x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
    let scale = q.linear.amax().max(lambda).max(1.0);
    let tol = 1e-12 * scale;
    let limit = 10 * n.max(1);
    let mut changes = 0usize;
    let mut steps = 0usize;
    let mut active_solved = false;

    loop {
        let active: Vec<usize> = (0..n).filter(|&j| theta[j] != 0.0).collect();
        let g = q.gradient(&x, &active);
        let active_ok = active_solved
            || active
                .iter()
                .all(|&j| (g[j] + lambda * theta[j]).abs() <= tol);
        let mut active = active;
        if active_ok {
            // most violating zero coordinate, lowest index on ties
            let mut best: Option<(usize, f64)> = None;
            for j in (0..n).filter(|&j| x[j] == 0.0 && theta[j] == 0.0) {
                if best.is_none_or(|(_, v)| g[j].abs() > v) {
                    best = Some((j, g[j].abs()));
                }
            }
            match best {
                Some((j, v)) if v > lambda + tol => {
                    theta[j] = -g[j].signum();
                    let pos = active.partition_point(|&a| a < j);
                    active.insert(pos, j);
                    changes += 1;
                }
                _ => {
                    let g_full = q.gradient(&x, &active);
                    return Ok(FssOutcome {
                        kkt: kkt_violation(&g_full, &x, lambda),
                        x,
                        steps,
                        active_set_changes: changes,
                    });
                }
            }
        }
        if changes > limit {
            return Err(Error::Cycle { changes, limit });
        }

        // Feature-sign step on the active set.
        steps += 1;
        let k = active.len();
        let mut h = Matrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        let mut current = DVector::zeros(k);
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                h[(a, b)] = q.hessian[(i, j)];
            }
            h[(a, a)] += q.shift;
            rhs[a] = q.linear[i] - lambda * theta[i];
            current[a] = x[i];
        }
        let (dir, bounded) = match reduced_move(&h, &rhs)? {
            Move::Target(target) => (&target - &current, true),
            Move::Ray(ray) => (ray, false),
        };

        // Candidate points: the full step and every zero crossing, smallest step first on ties.
        // Along an unbounded ray only the crossings are candidates.
        let mut candidates: Vec<(f64, Option<usize>)> = if bounded { vec![(1.0, None)] } else { Vec::new() };
        for a in 0..k {
            let (c, d) = (current[a], dir[a]);
            if c != 0.0 && c * d < 0.0 {
                let step = -c / d;
                if step > 0.0 && (step < 1.0 || !bounded) {
                    candidates.push((step, Some(a)));
                }
            }
        }
        candidates.sort_by(|l, r| l.0.total_cmp(&r.0));
        if !bounded {
            // the objective falls linearly until the first crossing
            candidates.truncate(1);
        }
        let before = q.reduced_value(&active, &current, lambda);
        let mut best: Option<(f64, Option<usize>, f64)> = None;
        for &(step, crossing) in &candidates {
            let mut z = &current + &dir * step;
            if let Some(a) = crossing {
                z[a] = 0.0;
            }
            let f = q.reduced_value(&active, &z, lambda);
            if best.is_none_or(|(_, _, fb)| f < fb) {
                best = Some((step, crossing, f));
            }
        }
        let Some((step, crossing, after)) = best else {
            return Err(Error::Decomposition("unbounded feature-sign subproblem"));
        };
        if after >= before && !active_ok {
            // no progress: count the stall towards the cycle limit
            changes += 1;
        }
        let mut chosen = &current + &dir * step;
        if let Some(a) = crossing {
            chosen[a] = 0.0;
        }
        let full_step = bounded && crossing.is_none() && step == 1.0;
        let mut consistent = true;
        for (a, &i) in active.iter().enumerate() {
            x[i] = chosen[a];
            let s = if x[i] == 0.0 { 0.0 } else { x[i].signum() };
            if s != theta[i] {
                consistent = false;
                if s == 0.0 {
                    changes += 1;
                }
            }
            theta[i] = s;
        }
        active_solved = full_step && consistent;
        if changes > limit {
            return Err(Error::Cycle { changes, limit });
        }
    }
}

/// Single-vector Lasso `min ½‖y − Ax‖² + λ‖x‖₁` by feature-sign search.
pub fn fss_lasso(a: &Matrix, y: &DVector<f64>, lambda: f64) -> Result<(DVector<f64>, SolverReport)> {
    if a.nrows() != y.len() {
        return Err(shape(format!("A is {:?}, y has {} entries", a.shape(), y.len())));
    }
    let start = Instant::now();
    let gram = a.tr_mul(a);
    let q = Quadratic {
        hessian: &gram,
        shift: 0.0,
        linear: a.tr_mul(y),
    };
    let out = feature_sign(&q, lambda, None)?;
    let mut report = SolverReport::new(SolverKind::Fss);
    report.iterations = out.steps;
    report.objective_trace.push(0.5 * (y - a * &out.x).norm_squared() + lambda * out.x.lp_norm(1));
    report.primal_residuals.push(out.kkt);
    report.converged = out.kkt <= FSS_KKT_TOL;
    report.wall_time = start.elapsed();
    Ok((out.x, report))
}

/// Feature-sign search for the ℓ1 prior (column by column) and for the
/// Laplacian prior (block-coordinate sweeps over pixels, each an exact
/// feature-sign solve with the graph coupling folded into the quadratic).
pub fn fss_solve(problem: &Problem, params: &SolverParams) -> Result<(Matrix, SolverReport)> {
    params.validate()?;
    if !matches!(problem.prior.kind, PriorKind::L1 | PriorKind::Laplacian) {
        return Err(Error::Config(format!(
            "feature-sign search does not support prior {}",
            problem.prior.kind
        )));
    }
    let start = Instant::now();
    let dict = problem.dictionary;
    let gram = dict.gram();
    let aty = dict.atoms().tr_mul(problem.y);
    let lambda = problem.prior.lambda;
    let (n, t) = (dict.num_atoms(), problem.y.ncols());
    let mut x = Matrix::zeros(n, t);
    let mut report = SolverReport::new(SolverKind::Fss);

    match problem.graph_weight() {
        None => {
            let mut kkt = 0.0f64;
            for j in 0..t {
                let q = Quadratic {
                    hessian: gram,
                    shift: 0.0,
                    linear: aty.column(j).into_owned(),
                };
                let out = feature_sign(&q, lambda, None)?;
                report.iterations += out.steps;
                kkt = kkt.max(out.kkt);
                x.set_column(j, &out.x);
            }
            report.objective_trace.push(problem.objective(&x)?);
            report.primal_residuals.push(kkt);
            report.converged = kkt <= FSS_KKT_TOL;
        }
        Some((graph, lambda2)) => {
            let l = graph.laplacian();
            let mut prev = problem.objective(&x)?;
            report.objective_trace.push(prev);
            for _ in 0..params.max_iters {
                for j in 0..t {
                    // coupling h_j = Σ_{s≠j} L_sj x_s
                    let mut coupling = &x * l.column(j);
                    coupling.axpy(-l[(j, j)], &x.column(j), 1.0);
                    let q = Quadratic {
                        hessian: gram,
                        shift: 2.0 * lambda2 * l[(j, j)],
                        linear: aty.column(j) - coupling * (2.0 * lambda2),
                    };
                    let warm = x.column(j).into_owned();
                    let out = feature_sign(&q, lambda, Some(&warm))?;
                    report.iterations += out.steps;
                    x.set_column(j, &out.x);
                }
                let obj = problem.objective(&x)?;
                let change = relative_change(prev, obj);
                report.objective_trace.push(obj);
                report.primal_residuals.push(change);
                prev = obj;
                if change < params.tol_rel {
                    report.converged = true;
                    break;
                }
            }
        }
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Dictionary, LaplacianGraph, PriorSpec};
    use nalgebra::dmatrix;

    #[test]
    fn orthonormal_dictionary_gives_soft_threshold() {
        let a = Matrix::identity(3, 3);
        let y = DVector::from_vec(vec![2.0, -0.3, -1.5]);
        let (x, report) = fss_lasso(&a, &y, 0.5).unwrap();
        assert_eq!(x, DVector::from_vec(vec![1.5, 0.0, -1.0]));
        assert!(report.converged);
        assert!((report.final_objective().unwrap() - (0.5 * 0.59 + 1.25)).abs() < 1e-12);
    }

    #[test]
    fn large_lambda_gives_zero() {
        let a = dmatrix![1.0, 0.5; 0.0, 1.0; 1.0, -1.0];
        let y = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let lmax = a.tr_mul(&y).amax();
        let (x, _) = fss_lasso(&a, &y, lmax * 1.01).unwrap();
        assert_eq!(x.amax(), 0.0);
        let (x, r) = fss_lasso(&a, &y, lmax * 0.5).unwrap();
        assert!(x.amax() > 0.0);
        assert!(r.primal_residuals[0] <= FSS_KKT_TOL);
    }

    #[test]
    fn laplacian_sweeps_decrease_objective() {
        let atoms = dmatrix![1.0, 0.2, 0.0; 0.1, 1.0, 0.3; 0.0, 0.4, 1.0; 0.5, 0.0, 0.2];
        let dict = Dictionary::new(atoms, vec![1, 1, 2], true).unwrap();
        let y = dmatrix![1.0, 0.9, 0.1; 0.2, 0.3, 0.8; 0.0, 0.1, 1.0; 0.5, 0.4, 0.2];
        let graph = LaplacianGraph::from_weights(dmatrix![0.0, 1.0, 0.2; 1.0, 0.0, 0.2; 0.2, 0.2, 0.0]).unwrap();
        let prior = PriorSpec::new(PriorKind::Laplacian, 0.05, Some(0.5)).unwrap();
        let problem = Problem::new(&dict, &y, prior, Some(&graph)).unwrap();
        let (_, report) = fss_solve(&problem, &SolverParams::precise()).unwrap();
        assert!(report.converged);
        let trace = &report.objective_trace;
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
