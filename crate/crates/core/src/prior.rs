use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Regularizer `R(X)` added to `½‖Y − AX‖²_F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorKind {
    /// `λ‖X‖₁`
    L1,
    /// `λ Σᵢ ‖xⁱ‖₂` over rows.
    JointSparsity,
    /// `λ‖X‖₁ + λ₂ tr(X L Xᵀ)`
    Laplacian,
    /// `λ Σ_g w_g ‖X_g‖_F`
    Group,
    /// `λ Σ_g w_g ‖X_g‖_F + λ₂ Σ_g w_g ‖X_g‖₁` (weights on the ℓ1 term optional).
    SparseGroup,
    /// `λ‖X‖_*`
    LowRank,
    /// `λ Σ_g w_g ‖X_g‖_*`
    LowRankGroup,
}

impl PriorKind {
    pub const ALL: [PriorKind; 7] = [
        PriorKind::L1,
        PriorKind::JointSparsity,
        PriorKind::Laplacian,
        PriorKind::Group,
        PriorKind::SparseGroup,
        PriorKind::LowRank,
        PriorKind::LowRankGroup,
    ];

    /// Whether the prior takes a second weight `λ₂`.
    pub fn has_lambda2(self) -> bool {
        matches!(self, PriorKind::Laplacian | PriorKind::SparseGroup)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            PriorKind::L1 => "l1",
            PriorKind::JointSparsity => "js",
            PriorKind::Laplacian => "ls",
            PriorKind::Group => "gs",
            PriorKind::SparseGroup => "sgs",
            PriorKind::LowRank => "lr",
            PriorKind::LowRankGroup => "lrg",
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for PriorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "l1" | "lasso" => PriorKind::L1,
            "js" | "joint" | "joint-sparsity" => PriorKind::JointSparsity,
            "ls" | "laplacian" => PriorKind::Laplacian,
            "gs" | "group" => PriorKind::Group,
            "sgs" | "sparse-group" | "chilasso" => PriorKind::SparseGroup,
            "lr" | "low-rank" | "nuclear" => PriorKind::LowRank,
            "lrg" | "low-rank-group" => PriorKind::LowRankGroup,
            other => return Err(Error::Config(format!("unknown prior '{other}'"))),
        })
    }
}

/// A prior with its regularization weights.
///
/// For [`PriorKind::Laplacian`], `lambda` weights the ℓ1 term and `lambda2`
/// the graph term. For [`PriorKind::SparseGroup`], `lambda` weights the group
/// term and `lambda2` the ℓ1 term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub lambda: f64,
    pub lambda2: Option<f64>,
    /// Multiply the sparse-group ℓ1 term by the group weights `w_g`.
    pub weighted_l1: bool,
}

impl PriorSpec {
    /// Validated constructor: weights must be positive and `lambda2` present
    /// exactly for the two-weight priors.
    pub fn new(kind: PriorKind, lambda: f64, lambda2: Option<f64>) -> Result<Self> {
        let spec = Self {
            kind,
            lambda,
            lambda2,
            weighted_l1: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Single-weight prior, unchecked. Solvers accept zero weights, which the
    /// reduction identities rely on.
    pub fn single(kind: PriorKind, lambda: f64) -> Self {
        Self {
            kind,
            lambda,
            lambda2: None,
            weighted_l1: true,
        }
    }

    /// Two-weight prior, unchecked.
    pub fn pair(kind: PriorKind, lambda: f64, lambda2: f64) -> Self {
        Self {
            kind,
            lambda,
            lambda2: Some(lambda2),
            weighted_l1: true,
        }
    }

    pub fn with_weighted_l1(mut self, weighted: bool) -> Self {
        self.weighted_l1 = weighted;
        self
    }

    pub fn lambda2_or_zero(&self) -> f64 {
        self.lambda2.unwrap_or(0.0)
    }

    /// Strict check used for user-facing configuration.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        match (self.kind.has_lambda2(), self.lambda2) {
            (true, Some(l2)) if l2.is_finite() && l2 > 0.0 => Ok(()),
            (true, Some(l2)) => Err(Error::Config(format!("lambda2 must be positive, got {l2}"))),
            (true, None) => Err(Error::Config(format!("prior {} needs lambda2", self.kind))),
            (false, Some(_)) => Err(Error::Config(format!("prior {} takes no lambda2", self.kind))),
            (false, None) => Ok(()),
        }
    }

    /// Relaxed check used by the solvers: weights finite and non-negative.
    pub(crate) fn check_solvable(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda) || !ok(self.lambda2_or_zero()) {
            return Err(invalid(format!(
                "regularization weights must be finite and non-negative: {:?}",
                self
            )));
        }
        Ok(())
    }
}
