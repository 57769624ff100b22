use crate::classify::graph::LaplacianGraph;
use crate::error::{invalid, shape, Error, Result};
use crate::Matrix;
use nalgebra::DVector;

/// Spectral factorization of `AᵀA` from a thin SVD of `A`.
///
/// `AᵀA = V S² Vᵀ` with `V` of size `N × r`, `r` the numerical rank of `A`
/// (singular values below `max(P, N)·ε·σ_max` are treated as zero). Any shifted
/// system `(AᵀA + cI) x = b` with `c > 0` is then solved as
/// `V (S² + c)⁻¹ Vᵀ b + (b − V Vᵀ b) / c`, so one factorization serves every
/// ADMM penalty and every per-eigenvalue shift of the Laplacian update.
#[derive(Debug, Clone)]
pub struct GramFactor {
    v: Matrix,
    sq: DVector<f64>,
}

impl GramFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        let svd = a
            .clone()
            .try_svd(false, true, f64::EPSILON, 10_000)
            .ok_or(Error::Decomposition("SVD of the dictionary"))?;
        let v_t = svd.v_t.ok_or(Error::Decomposition("SVD of the dictionary"))?;
        let top = svd.singular_values.max();
        let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * top;
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > cutoff)
            .collect();
        let v = Matrix::from_fn(a.ncols(), keep.len(), |r, c| v_t[(keep[c], r)]);
        let sq = DVector::from_iterator(keep.len(), keep.iter().map(|&i| svd.singular_values[i].powi(2)));
        Ok(Self { v, sq })
    }

    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    /// Numerical rank of the dictionary.
    pub fn rank(&self) -> usize {
        self.sq.len()
    }

    /// Solves `(AᵀA + shift·I) X = rhs`.
    pub fn solve(&self, rhs: &Matrix, shift: f64) -> Result<Matrix> {
        self.solve_shifted(rhs, &vec![shift; rhs.ncols()])
    }

    /// Solves `(AᵀA + shifts[j]·I) x_j = rhs_j` column by column.
    pub fn solve_shifted(&self, rhs: &Matrix, shifts: &[f64]) -> Result<Matrix> {
        if rhs.nrows() != self.dim() || shifts.len() != rhs.ncols() {
            return Err(shape(format!(
                "rhs {:?} with {} shifts against a Gram of size {}",
                rhs.shape(),
                shifts.len(),
                self.dim()
            )));
        }
        if let Some(c) = shifts.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(invalid(format!("shift must be positive, got {c}")));
        }
        // x = b/c + V·diag(1/(s² + c) − 1/c)·Vᵀb
        let mut scaled = self.v.tr_mul(rhs);
        let mut out = rhs.clone();
        for (j, &c) in shifts.iter().enumerate() {
            out.column_mut(j).scale_mut(c.recip());
            for (k, s2) in self.sq.iter().enumerate() {
                scaled[(k, j)] *= -s2 / (c * (s2 + c));
            }
        }
        out.gemm(1.0, &self.v, &scaled, 1.0);
        Ok(out)
    }
}

/// Solves `(AᵀA + ρI) X + 2λ₂ X L = rhs` exactly.
///
/// With `L = QΛQᵀ` the substitution `X̃ = XQ` decouples the columns into
/// `(AᵀA + (ρ + 2λ₂Λ_jj) I) x̃_j = (rhs·Q)_j`.
pub fn x_update_laplacian(
    factor: &GramFactor,
    rhs: &Matrix,
    graph: &LaplacianGraph,
    lambda2: f64,
    rho: f64,
) -> Result<Matrix> {
    if graph.len() != rhs.ncols() {
        return Err(shape(format!(
            "Laplacian of size {} for {} pixels",
            graph.len(),
            rhs.ncols()
        )));
    }
    if !(lambda2.is_finite() && lambda2 >= 0.0) {
        return Err(invalid(format!("lambda2 must be non-negative, got {lambda2}")));
    }
    if lambda2 == 0.0 {
        return factor.solve(rhs, rho);
    }
    let (values, q) = graph.eigen();
    let shifts: Vec<f64> = values.iter().map(|l| rho + 2.0 * lambda2 * l).collect();
    let rotated = rhs * q;
    let solved = factor.solve_shifted(&rotated, &shifts)?;
    Ok(solved * q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn small_a() -> Matrix {
        dmatrix![1.0, 0.5, -0.2, 0.3; 0.0, 1.0, 0.4, -0.6; 0.2, -0.1, 1.0, 0.9]
    }

    #[test]
    fn shifted_solve_matches_dense_lu() {
        let a = small_a();
        let f = GramFactor::new(&a).unwrap();
        let rhs = dmatrix![1.0, -1.0; 2.0, 0.5; 0.0, 3.0; -1.0, 1.0];
        let x = f.solve(&rhs, 0.7).unwrap();
        let dense = a.tr_mul(&a) + Matrix::identity(4, 4) * 0.7;
        assert!((&dense * &x - &rhs).norm() < 1e-12 * rhs.norm());
        assert!(f.solve(&rhs, 0.0).is_err());
    }

    #[test]
    fn laplacian_update_reductions() {
        let a = small_a();
        let f = GramFactor::new(&a).unwrap();
        let rhs = dmatrix![1.0, -1.0; 2.0, 0.5; 0.0, 3.0; -1.0, 1.0];
        let plain = f.solve(&rhs, 1.0).unwrap();
        let g = LaplacianGraph::from_weights(dmatrix![0.0, 1.0; 1.0, 0.0]).unwrap();
        assert_eq!(x_update_laplacian(&f, &rhs, &g, 0.0, 1.0).unwrap(), plain);
        let zero = LaplacianGraph::from_laplacian(Matrix::zeros(2, 2)).unwrap();
        let x = x_update_laplacian(&f, &rhs, &zero, 0.25, 1.0).unwrap();
        assert!((x - &plain).norm() < 1e-12);
        let iso = LaplacianGraph::isolated(2).unwrap();
        // isolated graph has L = I, which just adds 2λ₂ to the shift
        let x = x_update_laplacian(&f, &rhs, &iso, 0.25, 1.0).unwrap();
        assert!((x - f.solve(&rhs, 1.5).unwrap()).norm() < 1e-12);
    }
}
