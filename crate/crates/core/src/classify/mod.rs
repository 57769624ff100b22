//! Minimum-residual decision rules and whole-image classification.

pub mod graph;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::cube::{HsiCube, LabelMap, Pixel};
use crate::dictionary::Dictionary;
use crate::error::{invalid, shape, Error, Result};
use crate::prior::{PriorKind, PriorSpec};
use crate::solvers::{solve, Problem, SolverKind, SolverParams, SolverReport};
use crate::window::{extract_window, NeighborhoodBlock};
use crate::Matrix;
use graph::{GaussianKernel, LaplacianGraph, SimilarityWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub prior: PriorSpec,
    /// Odd side length of the spatial window.
    pub window: usize,
    pub solver: SolverKind,
    pub weight_kernel_sigma: f64,
    pub params: SolverParams,
}

impl ClassifierConfig {
    pub fn new(prior: PriorSpec, window: usize, solver: SolverKind) -> Result<Self> {
        let config = Self {
            prior,
            window,
            solver,
            weight_kernel_sigma: 1.0,
            params: SolverParams::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!("window {} must be odd", self.window)));
        }
        if !self.solver.supports(self.prior.kind) {
            return Err(Error::Config(format!(
                "solver {} cannot be used with prior {}",
                self.solver, self.prior.kind
            )));
        }
        if !(self.weight_kernel_sigma.is_finite() && self.weight_kernel_sigma > 0.0) {
            return Err(Error::Config("weight kernel sigma must be positive".into()));
        }
        self.params.validate()
    }

    pub fn kernel(&self) -> Result<GaussianKernel> {
        GaussianKernel::new(self.weight_kernel_sigma)
    }
}

/// `‖Y − A δ_g(X)‖²_F` for every class `g` (index 0 is class 1).
pub fn class_residuals(dict: &Dictionary, y: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
    if x.nrows() != dict.num_atoms() || x.ncols() != y.ncols() || y.nrows() != dict.bands() {
        return Err(shape(format!(
            "A is {:?}, Y is {:?}, X is {:?}",
            dict.atoms().shape(),
            y.shape(),
            x.shape()
        )));
    }
    Ok(dict
        .groups()
        .iter()
        .map(|(r, _)| {
            let recon = dict.atoms().columns(r.start, r.len()) * x.rows(r.start, r.len());
            (y - recon).norm_squared()
        })
        .collect())
}

/// Smallest residual wins; ties go to the lowest class id.
fn argmin_class(residuals: &[f64]) -> u16 {
    let mut best = 0;
    for (g, r) in residuals.iter().enumerate() {
        if *r < residuals[best] {
            best = g;
        }
    }
    best as u16 + 1
}

#[derive(Debug, Clone)]
pub struct BlockDecision {
    pub class: u16,
    pub residuals: Vec<f64>,
    pub coefficients: Matrix,
    pub report: SolverReport,
}

/// Codes the block under the configured prior and labels it by minimum total residual.
pub fn classify_block(
    dict: &Dictionary,
    block: &NeighborhoodBlock,
    config: &ClassifierConfig,
) -> Result<BlockDecision> {
    classify_block_with(dict, block, config, &config.kernel()?)
}

/// As [`classify_block`] with a caller-supplied similarity builder for the Laplacian prior.
pub fn classify_block_with(
    dict: &Dictionary,
    block: &NeighborhoodBlock,
    config: &ClassifierConfig,
    weights: &dyn SimilarityWeights,
) -> Result<BlockDecision> {
    let mut prior = config.prior;
    let mut graph: Option<LaplacianGraph> = None;
    if prior.kind == PriorKind::Laplacian {
        if block.len() < 2 {
            log::debug!(
                "window at {:?} has a single pixel; using the l1 prior",
                block.center()
            );
            prior = PriorSpec::single(PriorKind::L1, prior.lambda);
        } else {
            graph = Some(LaplacianGraph::from_weights(weights.weights(&block.spectra)?)?);
        }
    }
    let problem = Problem::new(dict, &block.spectra, prior, graph.as_ref())?;
    let (x, report) = solve(&problem, config.solver, &config.params)?;
    let residuals = class_residuals(dict, &block.spectra, &x)?;
    Ok(BlockDecision {
        class: argmin_class(&residuals),
        residuals,
        coefficients: x,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct ImageClassification {
    /// Predicted labels at the test pixels, 0 elsewhere and at failed pixels.
    pub map: LabelMap,
    pub failures: Vec<(Pixel, String)>,
    pub elapsed: Duration,
}

/// Classifies every test pixel from its window. `workers = 0` uses the
/// available parallelism. The result does not depend on the worker count.
pub fn classify_image(
    cube: &HsiCube,
    dict: &Dictionary,
    config: &ClassifierConfig,
    test_pixels: &[Pixel],
    workers: usize,
) -> Result<ImageClassification> {
    config.validate()?;
    if dict.bands() != cube.bands() {
        return Err(shape(format!(
            "dictionary has {} bands, cube has {}",
            dict.bands(),
            cube.bands()
        )));
    }
    if let Some(p) = test_pixels.iter().find(|p| !cube.contains(**p)) {
        return Err(invalid(format!("test pixel {p:?} outside the image")));
    }
    let start = Instant::now();
    // build shared caches before fanning out
    dict.gram_factor()?;
    if config.solver == SolverKind::Fss {
        dict.gram();
    }
    let kernel = config.kernel()?;
    let classify_one = |p: &Pixel| -> Result<u16> {
        let block = extract_window(cube, *p, config.window)?;
        classify_block_with(dict, &block, config, &kernel)
            .map(|d| d.class)
            .map_err(|e| Error::AtPixel {
                row: p.row,
                col: p.col,
                source: Box::new(e),
            })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<u16>> = pool.install(|| test_pixels.par_iter().map(classify_one).collect());

    let mut map = LabelMap::zeros(cube.width(), cube.height());
    let mut failures = Vec::new();
    for (p, r) in test_pixels.iter().zip(results) {
        match r {
            Ok(label) => map.set(*p, label),
            Err(e) => {
                log::warn!("{e}");
                failures.push((*p, e.to_string()));
            }
        }
    }
    if failures.len() * 100 > test_pixels.len() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: test_pixels.len(),
        });
    }
    Ok(ImageClassification {
        map,
        failures,
        elapsed: start.elapsed(),
    })
}
