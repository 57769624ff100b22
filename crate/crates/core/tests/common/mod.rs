//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use structsparse::{Dictionary, GroupStructure, Matrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random partition of `n` rows into contiguous groups.
pub fn random_sizes(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=left.min(4));
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// Class ids for a dictionary whose groups have the given sizes.
pub fn class_ids(sizes: &[usize]) -> Vec<u16> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g as u16 + 1, s))
        .collect()
}

pub fn random_dictionary(rng: &mut ChaCha8Rng, p: usize, sizes: &[usize]) -> Dictionary {
    let n: usize = sizes.iter().sum();
    Dictionary::new(gaussian(rng, p, n), class_ids(sizes), true).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Cyclic coordinate descent for `½‖y − Ax‖² + λ‖x‖₁`, run until no
/// coordinate moves by more than `1e-15` (relative) or `max_sweeps`.
pub fn lasso_cd(a: &Matrix, y: &DVector<f64>, lambda: f64, max_sweeps: usize) -> DVector<f64> {
    let n = a.ncols();
    let col_sq: Vec<f64> = (0..n).map(|j| a.column(j).norm_squared()).collect();
    let mut x = DVector::<f64>::zeros(n);
    let mut r = y.clone();
    for _ in 0..max_sweeps {
        let mut biggest = 0.0f64;
        for j in 0..n {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho: f64 = a.column(j).dot(&r) + col_sq[j] * x[j];
            let new = rho.signum() * (rho.abs() - lambda).max(0.0) / col_sq[j];
            let delta = new - x[j];
            if delta != 0.0 {
                r.axpy(-delta, &a.column(j), 1.0);
                x[j] = new;
                biggest = biggest.max(delta.abs() / new.abs().max(1.0));
            }
        }
        if biggest < 1e-15 {
            break;
        }
    }
    x
}

pub fn lasso_objective(a: &Matrix, y: &DVector<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    0.5 * (y - a * x).norm_squared() + lambda * x.lp_norm(1)
}

fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

fn nuclear_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().sum()
}

/// A positively homogeneous convex function evaluated blockwise.
#[derive(Debug, Clone, Copy)]
pub enum Norm {
    /// `Σ|x|`
    L1,
    /// `Σ_i ‖row_i‖₂`
    RowL2,
    /// `‖X‖_F`
    Frobenius,
    /// `‖X‖_*`
    Nuclear,
    /// `a‖X‖_F + b‖X‖₁`
    FrobeniusPlusL1(f64, f64),
}

impl Norm {
    pub fn value(self, x: &Matrix) -> f64 {
        match self {
            Norm::L1 => x.iter().map(|v| v.abs()).sum(),
            Norm::RowL2 => x.row_iter().map(|r| r.norm()).sum(),
            Norm::Frobenius => x.norm(),
            Norm::Nuclear => nuclear_norm(x),
            Norm::FrobeniusPlusL1(a, b) => a * x.norm() + b * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// Dual norm; `G ∈ ∂R(X)` iff `dual(G) ≤ 1` and `⟨G, X⟩ = R(X)`.
    pub fn dual(self, g: &Matrix) -> f64 {
        match self {
            Norm::L1 => g.amax(),
            Norm::RowL2 => g.row_iter().map(|r| r.norm()).fold(0.0, f64::max),
            Norm::Frobenius => g.norm(),
            Norm::Nuclear => spectral_norm(g),
            Norm::FrobeniusPlusL1(a, b) => {
                // smallest s with ‖soft(G, s·b)‖_F ≤ s·a, found by bisection
                let fits = |s: f64| g.map(|v| (v.abs() - s * b).max(0.0)).norm() <= s * a;
                let (mut lo, mut hi) = (0.0, 1.0);
                while !fits(hi) {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if fits(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }
}

/// Largest violation of `V − X ∈ Σ_g t_g ∂R_g(X_g)` over row blocks, where
/// block `g` uses `norms[g]` scaled by `scales[g]`. Zero means optimal.
pub fn subgradient_violation(v: &Matrix, x: &Matrix, blocks: &[(std::ops::Range<usize>, Norm, f64)]) -> f64 {
    let g = v - x;
    let mut worst = 0.0f64;
    for (range, norm, t) in blocks {
        let gb = g.rows(range.start, range.len()).into_owned();
        let xb = x.rows(range.start, range.len()).into_owned();
        if *t == 0.0 {
            worst = worst.max(gb.amax());
            continue;
        }
        let scaled = &gb / *t;
        let dual_excess = (norm.dual(&scaled) - 1.0).max(0.0);
        let value = norm.value(&xb);
        let pairing = (scaled.dot(&xb) - value).abs() / value.max(1.0);
        worst = worst.max(dual_excess).max(pairing);
    }
    worst
}

/// One block covering every row.
pub fn whole(rows: usize, norm: Norm, t: f64) -> Vec<(std::ops::Range<usize>, Norm, f64)> {
    vec![(0..rows, norm, t)]
}

/// One block per group with threshold `t·w_g`.
pub fn per_group(groups: &GroupStructure, t: f64, norm: impl Fn(f64) -> Norm) -> Vec<(std::ops::Range<usize>, Norm, f64)> {
    groups.iter().map(|(r, w)| (r, norm(w), t * w)).collect()
}

/// `(I_T ⊗ (AᵀA + ρI) + 2λ₂ (L ⊗ I_N)) vec(X)` assembled densely.
pub fn laplacian_system(a: &Matrix, l: &Matrix, lambda2: f64, rho: f64) -> DMatrix<f64> {
    let n = a.ncols();
    let t = l.nrows();
    let gram = a.tr_mul(a) + Matrix::identity(n, n) * rho;
    let mut big = DMatrix::zeros(n * t, n * t);
    for j in 0..t {
        big.view_mut((j * n, j * n), (n, n)).copy_from(&gram);
        for s in 0..t {
            for i in 0..n {
                big[(s * n + i, j * n + i)] += 2.0 * lambda2 * l[(s, j)];
            }
        }
    }
    big
}

pub fn vec_of(m: &Matrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}
