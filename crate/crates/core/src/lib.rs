//! Structured sparsity priors for sparse-representation classification (SRC)
//! of hyperspectral images.
//!
//! A test pixel, or a spatial window of pixels, is coded over a dictionary of
//! labeled training spectra and assigned to the class whose sub-dictionary
//! reconstructs it with the smallest residual. The coding step is
//!
//! ```text
//! min_X  ½‖Y − A X‖²_F + R(X)
//! ```
//!
//! where `R` is one of the priors in [`PriorKind`]: ℓ1, joint sparsity (ℓ1,2),
//! Laplacian-regularized ℓ1, collaborative group Lasso, sparse group Lasso
//! (CHiLasso), nuclear norm, and the per-group nuclear norm ("low-rank group").
//!
//! Three solvers are provided: ADMM ([`solvers::admm_solve`]), SpaRSA
//! proximal gradient ([`solvers::sparsa_solve`]) and feature-sign search
//! ([`solvers::fss_solve`]).

pub mod classify;
pub mod cli;
pub mod cube;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod io;
pub mod prior;
pub mod prox;
pub mod solvers;
pub mod window;

pub use classify::graph::{GaussianKernel, LaplacianGraph, SimilarityWeights};
pub use classify::{
    class_residuals, classify_block, classify_image, BlockDecision, ClassifierConfig,
    ImageClassification,
};
pub use cube::{HsiCube, LabelMap, Pixel};
pub use dictionary::{
    build_dictionary_split, group_mask, normalize_columns, Dictionary, GroupStructure,
    LabeledPixel, Split, SplitPolicy,
};
pub use error::{Error, Result};
pub use eval::{confusion_matrix, metrics, ConfusionMatrix, Metrics};
pub use prior::{PriorKind, PriorSpec};
pub use prox::{ProxResult, SupportStats};
pub use solvers::{
    admm_solve, convergence_check, fss_solve, objective_value, solve, sparsa_solve, Problem,
    SolverKind, SolverParams, SolverReport,
};
pub use window::{extract_window, NeighborhoodBlock};

/// Dense real matrix used for spectra, dictionaries and coefficients.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Coefficient matrix `X` (atoms × pixels).
pub type CoefficientMatrix = Matrix;
