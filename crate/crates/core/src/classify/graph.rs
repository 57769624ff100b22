//! Pixel-similarity graphs for the Laplacian prior.

use std::sync::OnceLock;

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{invalid, shape, Result};
use crate::Matrix;

/// Builds the similarity matrix `W` of a block of pixel spectra (columns).
pub trait SimilarityWeights: Send + Sync {
    fn weights(&self, spectra: &Matrix) -> Result<Matrix>;
}

/// `w_ij = exp(−‖y_i − y_j‖² / (2σ²·m))` where `m` is the median squared
/// pairwise distance of the block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel {
    pub sigma: f64,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid(format!("kernel sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }
}

impl SimilarityWeights for GaussianKernel {
    fn weights(&self, spectra: &Matrix) -> Result<Matrix> {
        let t = spectra.ncols();
        if t < 2 {
            return Err(invalid(format!("a similarity graph needs at least 2 pixels, got {t}")));
        }
        let mut dist = Matrix::zeros(t, t);
        let mut pairs = Vec::with_capacity(t * (t - 1) / 2);
        for i in 0..t {
            for j in i + 1..t {
                let d = (spectra.column(i) - spectra.column(j)).norm_squared();
                dist[(i, j)] = d;
                dist[(j, i)] = d;
                pairs.push(d);
            }
        }
        pairs.sort_by(f64::total_cmp);
        let mid = pairs.len() / 2;
        let mut scale = if pairs.len() % 2 == 1 {
            pairs[mid]
        } else {
            0.5 * (pairs[mid - 1] + pairs[mid])
        };
        if scale <= 0.0 {
            // More than half the pairs coincide; fall back to the mean positive distance.
            let positive: Vec<f64> = pairs.iter().copied().filter(|&d| d > 0.0).collect();
            scale = if positive.is_empty() {
                1.0
            } else {
                positive.iter().sum::<f64>() / positive.len() as f64
            };
        }
        let denom = 2.0 * self.sigma * self.sigma * scale;
        let mut w = dist.map(|d| (-d / denom).exp());
        w.fill_diagonal(0.0);
        Ok(w)
    }
}

/// Similarity graph with its normalized symmetric Laplacian
/// `L = I − D^(−1/2) W D^(−1/2)`.
#[derive(Debug, Clone)]
pub struct LaplacianGraph {
    weights: Matrix,
    degrees: DVector<f64>,
    laplacian: Matrix,
    eigen: OnceLock<(DVector<f64>, Matrix)>,
}

impl LaplacianGraph {
    /// Assembles the Laplacian of a symmetric, non-negative, zero-diagonal
    /// weight matrix. Isolated vertices use degree 1.
    pub fn from_weights(weights: Matrix) -> Result<Self> {
        let t = weights.nrows();
        if weights.ncols() != t || t == 0 {
            return Err(shape(format!("weight matrix is {:?}", weights.shape())));
        }
        for i in 0..t {
            if weights[(i, i)] != 0.0 {
                return Err(invalid("weight matrix must have a zero diagonal"));
            }
            for j in 0..t {
                let w = weights[(i, j)];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(invalid(format!("weight ({i}, {j}) = {w} is not non-negative")));
                }
                if (w - weights[(j, i)]).abs() > 1e-12 * w.abs().max(1.0) {
                    return Err(invalid("weight matrix must be symmetric"));
                }
            }
        }
        let degrees = DVector::from_iterator(t, weights.row_iter().map(|r| r.sum()));
        let inv_sqrt = degrees.map(|d| if d > 0.0 { d.sqrt().recip() } else { 1.0 });
        let mut laplacian = Matrix::identity(t, t);
        for i in 0..t {
            for j in 0..t {
                laplacian[(i, j)] -= inv_sqrt[i] * weights[(i, j)] * inv_sqrt[j];
            }
        }
        // exact symmetry for the eigensolver
        laplacian = (&laplacian + laplacian.transpose()) * 0.5;
        Ok(Self {
            weights,
            degrees,
            laplacian,
            eigen: OnceLock::new(),
        })
    }

    /// Wraps an arbitrary symmetric positive semidefinite Laplacian (for
    /// example an unnormalized `D − W`). Weights are read back as `−L_ij`
    /// off the diagonal, clamped at zero.
    pub fn from_laplacian(laplacian: Matrix) -> Result<Self> {
        let t = laplacian.nrows();
        if laplacian.ncols() != t || t == 0 {
            return Err(shape(format!("Laplacian is {:?}", laplacian.shape())));
        }
        if laplacian.iter().any(|v| !v.is_finite()) {
            return Err(invalid("Laplacian has non-finite entries"));
        }
        if (&laplacian - laplacian.transpose()).amax() > 1e-12 * laplacian.amax().max(1.0) {
            return Err(invalid("Laplacian must be symmetric"));
        }
        let laplacian = (&laplacian + laplacian.transpose()) * 0.5;
        let eig = SymmetricEigen::new(laplacian.clone());
        if eig.eigenvalues.min() < -1e-10 * laplacian.amax().max(1.0) {
            return Err(invalid("Laplacian must be positive semidefinite"));
        }
        let mut weights = laplacian.map(|v| (-v).max(0.0));
        weights.fill_diagonal(0.0);
        let degrees = DVector::from_iterator(t, weights.row_iter().map(|r| r.sum()));
        let eigen = OnceLock::new();
        let _ = eigen.set((eig.eigenvalues.map(|v| v.max(0.0)), eig.eigenvectors));
        Ok(Self {
            weights,
            degrees,
            laplacian,
            eigen,
        })
    }

    /// The all-isolated graph on `t` vertices (`L = I`).
    pub fn isolated(t: usize) -> Result<Self> {
        Self::from_weights(Matrix::zeros(t, t))
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    pub fn len(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Eigenvalues (clamped to be non-negative) and orthonormal eigenvectors of `L`.
    pub fn eigen(&self) -> &(DVector<f64>, Matrix) {
        self.eigen.get_or_init(|| {
            let eig = SymmetricEigen::new(self.laplacian.clone());
            (eig.eigenvalues.map(|v| v.max(0.0)), eig.eigenvectors)
        })
    }
}

/// Gaussian-kernel graph over the columns of `spectra`.
pub fn build_similarity_weights(spectra: &Matrix, sigma: f64) -> Result<LaplacianGraph> {
    LaplacianGraph::from_weights(GaussianKernel::new(sigma)?.weights(spectra)?)
}
