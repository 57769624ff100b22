//! Experiment runner behind the `structsparse` binary.
//!
//! Every run is described by a [`RunConfig`], read from `key = value` text
//! (the same format as cube headers) with command-line overrides. The
//! manifest written next to the results is itself a valid config file, so a
//! run can be repeated with `--config <out>/manifest.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::graph::{build_similarity_weights, LaplacianGraph};
use crate::classify::{classify_image, ClassifierConfig};
use crate::cube::{HsiCube, LabelMap, Pixel};
use crate::dictionary::{
    build_dictionary_split, stratified_partition, Dictionary, LabeledPixel, SplitPolicy,
};
use crate::error::{Error, Result};
use crate::eval::{confusion_matrix, metrics, ConfusionMatrix, Metrics};
use crate::io::{
    load_cube, load_labels, parse_key_values, save_labels, save_map, save_pattern, synth_generate,
    write_cube, Interleave, Palette, SceneSpec,
};
use crate::prior::{PriorKind, PriorSpec};
use crate::prox::SupportStats;
use crate::solvers::{solve, Problem, SolverKind, SolverParams};
use crate::Matrix;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "STRUCTSPARSE_OUT";

/// Share of labeled pixels used for training when `n_train` is not given.
const DEFAULT_TRAIN_FRACTION: f64 = 0.10;
/// Share of the training pixels kept for fitting during a sweep.
const SWEEP_FIT_FRACTION: f64 = 0.8;
/// Keys written to manifests for information only.
const INFO_PREFIXES: [&str; 3] = ["timing.", "result.", "sweep."];

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth(SceneSpec),
    Files {
        header: PathBuf,
        raw: PathBuf,
        labels: PathBuf,
    },
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub prior: PriorSpec,
    pub solver: SolverKind,
    pub window: usize,
    /// `None` trains on 10% of the labeled pixels.
    pub n_train: Option<usize>,
    /// Explicit per-class training counts; overrides `n_train`.
    pub train_counts: Option<Vec<usize>>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// 0 uses the available parallelism.
    pub workers: usize,
    pub normalize: bool,
    pub kernel_sigma: f64,
    pub params: SolverParams,
    pub lambda_grid: Vec<f64>,
    pub lambda2_grid: Option<Vec<f64>>,
    pub toy_classes: (u16, u16),
    pub toy_pixels: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "synth",
    "cube",
    "raw",
    "labels",
    "prior",
    "lambda",
    "lambda2",
    "weighted_l1",
    "solver",
    "window",
    "n_train",
    "train_counts",
    "seed",
    "out",
    "workers",
    "normalize",
    "kernel_sigma",
    "rho",
    "max_iters",
    "tol_abs",
    "tol_rel",
    "adaptive_rho",
    "sparsa_eta",
    "lambda_grid",
    "lambda2_grid",
    "toy_classes",
    "toy_pixels",
];

/// Five log-spaced values from 1e-3 to 0.1.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(format!("'{key}' has invalid value '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(config_err(format!("'{key}' must be true or false, got '{value}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(config_err(format!("'{key}' needs at least one value")));
    }
    items.into_iter().map(|v| parse_num(key, v)).collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Reads an optional config file and applies `overrides` on top.
    pub fn load(config_path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match config_path {
            Some(p) => parse_key_values(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            let info = INFO_PREFIXES.iter().any(|p| key.starts_with(p));
            if !info && !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(config_err(format!("unknown config key '{key}'")));
            }
        }
        let get = |k: &str| map.get(k).map(String::as_str);

        let data = match (get("synth"), get("cube")) {
            (Some(_), Some(_)) => return Err(config_err("give either 'synth' or 'cube', not both")),
            (Some(s), None) => DataSource::Synth(s.parse()?),
            (None, Some(header)) => {
                let header = PathBuf::from(header);
                let raw = get("raw")
                    .map(PathBuf::from)
                    .unwrap_or_else(|| header.with_extension("raw"));
                let labels = get("labels")
                    .map(PathBuf::from)
                    .ok_or_else(|| config_err("'cube' needs a 'labels' file"))?;
                DataSource::Files { header, raw, labels }
            }
            (None, None) => return Err(config_err("no dataset: set 'synth' or 'cube'")),
        };

        let kind: PriorKind = get("prior").unwrap_or("js").parse()?;
        let lambda: f64 = get("lambda").map(|v| parse_num("lambda", v)).transpose()?.unwrap_or(1e-2);
        let lambda2 = match get("lambda2") {
            Some(v) => Some(parse_num::<f64>("lambda2", v)?),
            None if kind.has_lambda2() => Some(lambda),
            None => None,
        };
        let mut prior = PriorSpec::new(kind, lambda, lambda2).map_err(|e| config_err(e.to_string()))?;
        if let Some(v) = get("weighted_l1") {
            prior = prior.with_weighted_l1(parse_bool("weighted_l1", v)?);
        }
        let solver: SolverKind = get("solver").unwrap_or("admm").parse()?;

        let defaults = SolverParams::default();
        let num_or = |key: &str, default: f64| -> Result<f64> {
            get(key).map(|v| parse_num(key, v)).transpose().map(|v| v.unwrap_or(default))
        };
        let params = SolverParams {
            rho: num_or("rho", defaults.rho)?,
            max_iters: get("max_iters")
                .map(|v| parse_num("max_iters", v))
                .transpose()?
                .unwrap_or(defaults.max_iters),
            tol_abs: num_or("tol_abs", defaults.tol_abs)?,
            tol_rel: num_or("tol_rel", defaults.tol_rel)?,
            sparsa_eta: num_or("sparsa_eta", defaults.sparsa_eta)?,
            sparsa_alpha0: defaults.sparsa_alpha0,
            adaptive_rho: get("adaptive_rho")
                .map(|v| parse_bool("adaptive_rho", v))
                .transpose()?
                .unwrap_or(false),
        };

        let toy_classes = match get("toy_classes") {
            Some(v) => match parse_list::<u16>("toy_classes", v)?.as_slice() {
                &[a, b] if a != b && a > 0 && b > 0 => (a, b),
                _ => return Err(config_err("'toy_classes' needs two distinct class ids")),
            },
            None => (1, 2),
        };

        let config = Self {
            data,
            prior,
            solver,
            window: get("window").map(|v| parse_num("window", v)).transpose()?.unwrap_or(3),
            n_train: get("n_train").map(|v| parse_num("n_train", v)).transpose()?,
            train_counts: get("train_counts").map(|v| parse_list("train_counts", v)).transpose()?,
            seed: get("seed").map(|v| parse_num("seed", v)).transpose()?.unwrap_or(0),
            out_dir: get("out").map(PathBuf::from).unwrap_or_else(default_out_dir),
            workers: get("workers").map(|v| parse_num("workers", v)).transpose()?.unwrap_or(0),
            normalize: get("normalize").map(|v| parse_bool("normalize", v)).transpose()?.unwrap_or(true),
            kernel_sigma: num_or("kernel_sigma", 1.0)?,
            params,
            lambda_grid: get("lambda_grid")
                .map(|v| parse_list("lambda_grid", v))
                .transpose()?
                .unwrap_or_else(default_lambda_grid),
            lambda2_grid: get("lambda2_grid").map(|v| parse_list("lambda2_grid", v)).transpose()?,
            toy_classes,
            toy_pixels: get("toy_pixels").map(|v| parse_num("toy_pixels", v)).transpose()?.unwrap_or(30),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.classifier().map_err(|e| match e {
            Error::Config(_) => e,
            other => config_err(other.to_string()),
        })?;
        if self.n_train == Some(0) {
            return Err(config_err("n_train must be positive"));
        }
        if self.toy_pixels == 0 {
            return Err(config_err("toy_pixels must be positive"));
        }
        Ok(())
    }

    pub fn classifier(&self) -> Result<ClassifierConfig> {
        let config = ClassifierConfig {
            prior: self.prior,
            window: self.window,
            solver: self.solver,
            weight_kernel_sigma: self.kernel_sigma,
            params: self.params,
        };
        config.validate()?;
        Ok(config)
    }

    /// Text form accepted by [`RunConfig::load`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.data {
            DataSource::Synth(spec) => {
                let _ = writeln!(s, "synth = {spec}");
            }
            DataSource::Files { header, raw, labels } => {
                let _ = writeln!(s, "cube = {}", header.display());
                let _ = writeln!(s, "raw = {}", raw.display());
                let _ = writeln!(s, "labels = {}", labels.display());
            }
        }
        let _ = writeln!(s, "prior = {}", self.prior.kind.short_name());
        let _ = writeln!(s, "lambda = {}", self.prior.lambda);
        if let Some(l2) = self.prior.lambda2 {
            let _ = writeln!(s, "lambda2 = {l2}");
        }
        let _ = writeln!(s, "weighted_l1 = {}", self.prior.weighted_l1);
        let _ = writeln!(s, "solver = {}", self.solver);
        let _ = writeln!(s, "window = {}", self.window);
        if let Some(n) = self.n_train {
            let _ = writeln!(s, "n_train = {n}");
        }
        if let Some(c) = &self.train_counts {
            let _ = writeln!(s, "train_counts = {}", join(c));
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "normalize = {}", self.normalize);
        let _ = writeln!(s, "kernel_sigma = {}", self.kernel_sigma);
        let p = &self.params;
        let _ = writeln!(s, "rho = {}", p.rho);
        let _ = writeln!(s, "max_iters = {}", p.max_iters);
        let _ = writeln!(s, "tol_abs = {}", p.tol_abs);
        let _ = writeln!(s, "tol_rel = {}", p.tol_rel);
        let _ = writeln!(s, "sparsa_eta = {}", p.sparsa_eta);
        let _ = writeln!(s, "adaptive_rho = {}", p.adaptive_rho);
        let _ = writeln!(s, "lambda_grid = {}", join(&self.lambda_grid));
        if let Some(g) = &self.lambda2_grid {
            let _ = writeln!(s, "lambda2_grid = {}", join(g));
        }
        let _ = writeln!(s, "toy_classes = {},{}", self.toy_classes.0, self.toy_classes.1);
        let _ = writeln!(s, "toy_pixels = {}", self.toy_pixels);
        s
    }

    /// Loads or generates the cube and ground truth.
    pub fn load_data(&self) -> Result<(HsiCube, LabelMap)> {
        match &self.data {
            DataSource::Synth(spec) => {
                let scene = synth_generate(spec, self.seed)?;
                Ok((scene.cube, scene.labels))
            }
            DataSource::Files { header, raw, labels } => {
                let cube = load_cube(header, raw)?;
                let map = load_labels(labels, cube.width(), cube.height())?;
                Ok((cube, map))
            }
        }
    }

    fn split_policy(&self, labeled: usize) -> (usize, SplitPolicy) {
        match &self.train_counts {
            Some(c) => (c.iter().sum(), SplitPolicy::PerClass(c.clone())),
            None => {
                let n = self
                    .n_train
                    .unwrap_or_else(|| ((labeled as f64 * DEFAULT_TRAIN_FRACTION).round() as usize).max(1));
                (n, SplitPolicy::Proportional)
            }
        }
    }
}

/// What a classification run produced.
#[derive(Debug, Clone)]
pub struct ClassifyOutcome {
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    pub predicted: LabelMap,
    pub n_train: usize,
    pub n_test: usize,
    pub failures: usize,
    pub elapsed: Duration,
}

struct Prepared {
    cube: HsiCube,
    truth: LabelMap,
    dictionary: Dictionary,
    train: Vec<LabeledPixel>,
    test: Vec<LabeledPixel>,
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let (cube, truth) = config.load_data()?;
    let labeled = truth.labeled_pixels().count();
    let (n_train, policy) = config.split_policy(labeled);
    let split = build_dictionary_split(&cube, &truth, n_train, config.seed, &policy, config.normalize)?;
    log::info!(
        "{} training and {} test pixels, {} classes",
        split.train.len(),
        split.test.len(),
        split.dictionary.num_classes()
    );
    Ok(Prepared {
        cube,
        truth,
        dictionary: split.dictionary,
        train: split.train,
        test: split.test,
    })
}

fn evaluate(
    cube: &HsiCube,
    truth: &LabelMap,
    dictionary: &Dictionary,
    classifier: &ClassifierConfig,
    test: &[LabeledPixel],
    workers: usize,
) -> Result<(LabelMap, ConfusionMatrix, Metrics, usize)> {
    let pixels: Vec<Pixel> = test.iter().map(|s| s.pixel).collect();
    let result = classify_image(cube, dictionary, classifier, &pixels, workers)?;
    let cm = confusion_matrix(truth, &result.map, &pixels)?;
    let m = metrics(&cm)?;
    Ok((result.map, cm, m, result.failures.len()))
}

/// Split, classify the test pixels, score, and write the results to `out_dir`.
pub fn run_classify(config: &RunConfig) -> Result<ClassifyOutcome> {
    let start = Instant::now();
    let prep = prepare(config)?;
    let classifier = config.classifier()?;
    let split_time = start.elapsed();
    let (predicted, cm, m, failures) =
        evaluate(&prep.cube, &prep.truth, &prep.dictionary, &classifier, &prep.test, config.workers)?;
    let outcome = ClassifyOutcome {
        metrics: m,
        confusion: cm,
        predicted,
        n_train: prep.train.len(),
        n_test: prep.test.len(),
        failures,
        elapsed: start.elapsed(),
    };
    write_classify_outputs(config, &prep, &outcome, split_time, &[])?;
    Ok(outcome)
}

fn write_classify_outputs(
    config: &RunConfig,
    prep: &Prepared,
    outcome: &ClassifyOutcome,
    split_time: Duration,
    extra: &[(String, String)],
) -> Result<()> {
    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    let k = prep.dictionary.num_classes();
    let title = format!("{} / {}", config.prior.kind, config.solver);
    save_labels(&outcome.predicted, &out.join("predicted.u16"))?;
    save_map(&outcome.predicted, &Palette::distinct(k), &out.join("predicted_map.ppm"))?;
    save_map(&prep.truth, &Palette::distinct(k), &out.join("truth_map.ppm"))?;
    fs::write(out.join("metrics.txt"), outcome.metrics.to_table(&title))?;
    fs::write(out.join("metrics.kv"), outcome.metrics.to_kv())?;
    fs::write(out.join("confusion.txt"), outcome.confusion.to_text())?;
    let mut pixels = String::new();
    for s in &prep.test {
        let _ = writeln!(pixels, "{} {} {}", s.pixel.row, s.pixel.col, s.class);
    }
    fs::write(out.join("test_pixels.txt"), pixels)?;

    let mut manifest = config.to_text();
    let _ = writeln!(manifest, "result.n_train = {}", outcome.n_train);
    let _ = writeln!(manifest, "result.n_test = {}", outcome.n_test);
    let _ = writeln!(manifest, "result.failures = {}", outcome.failures);
    let _ = writeln!(manifest, "result.oa = {}", outcome.metrics.overall_accuracy);
    let _ = writeln!(manifest, "result.aa = {}", outcome.metrics.average_accuracy);
    let _ = writeln!(manifest, "result.kappa = {}", outcome.metrics.kappa);
    for (k, v) in extra {
        let _ = writeln!(manifest, "{k} = {v}");
    }
    let _ = writeln!(manifest, "timing.split_seconds = {:.3}", split_time.as_secs_f64());
    let _ = writeln!(manifest, "timing.total_seconds = {:.3}", outcome.elapsed.as_secs_f64());
    fs::write(out.join("manifest.txt"), manifest)?;
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub lambda2: Option<f64>,
    /// Validation OA, or the reason the point failed.
    pub result: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub selected: (f64, Option<f64>),
    pub test: ClassifyOutcome,
}

/// Picks the highest validation OA; ties go to the smaller λ, then smaller λ2.
pub fn select_best(points: &[SweepPoint]) -> Option<(f64, Option<f64>)> {
    let mut best: Option<(&SweepPoint, f64)> = None;
    for p in points {
        let Ok(oa) = p.result else { continue };
        let better = match best {
            None => true,
            Some((b, boa)) => {
                oa > boa
                    || (oa == boa
                        && (p.lambda, p.lambda2.unwrap_or(0.0)) < (b.lambda, b.lambda2.unwrap_or(0.0)))
            }
        };
        if better {
            best = Some((p, oa));
        }
    }
    best.map(|(p, _)| (p.lambda, p.lambda2))
}

/// Grid search on a stratified 80/20 split of the training pixels, then one
/// evaluation on the test set with the selected parameters.
pub fn run_sweep(config: &RunConfig) -> Result<SweepOutcome> {
    let start = Instant::now();
    let prep = prepare(config)?;
    let n_fit = ((prep.train.len() as f64 * SWEEP_FIT_FRACTION).round() as usize).min(prep.train.len() - 1);
    let (fit, validation) = stratified_partition(&prep.train, n_fit, config.seed, &SplitPolicy::Proportional)
        .map_err(|e| config_err(format!("cannot carve a validation set from the training pixels: {e}")))?;
    if validation.is_empty() {
        return Err(config_err("validation set is empty"));
    }
    let fit_dict = Dictionary::from_pixels(&prep.cube, &fit, config.normalize)?;
    log::info!("sweep: {} fitting and {} validation pixels", fit.len(), validation.len());

    let lambda2_grid: Vec<Option<f64>> = if config.prior.kind.has_lambda2() {
        config
            .lambda2_grid
            .clone()
            .unwrap_or_else(|| vec![config.prior.lambda2_or_zero()])
            .into_iter()
            .map(Some)
            .collect()
    } else {
        vec![None]
    };
    let mut points = Vec::new();
    for &lambda in &config.lambda_grid {
        for &lambda2 in &lambda2_grid {
            let result = PriorSpec::new(config.prior.kind, lambda, lambda2)
                .map(|p| p.with_weighted_l1(config.prior.weighted_l1))
                .and_then(|prior| {
                    let classifier = ClassifierConfig { prior, ..config.classifier()? };
                    evaluate(&prep.cube, &prep.truth, &fit_dict, &classifier, &validation, config.workers)
                })
                .map(|(_, _, m, _)| m.overall_accuracy)
                .map_err(|e| e.to_string());
            match &result {
                Ok(oa) => log::info!("sweep: lambda={lambda} lambda2={lambda2:?} OA={oa:.2}"),
                Err(e) => log::warn!("sweep: lambda={lambda} lambda2={lambda2:?} failed: {e}"),
            }
            points.push(SweepPoint { lambda, lambda2, result });
        }
    }
    let selected = select_best(&points).ok_or_else(|| config_err("every sweep point failed"))?;

    let mut chosen = config.clone();
    chosen.prior = PriorSpec::new(config.prior.kind, selected.0, selected.1)?.with_weighted_l1(config.prior.weighted_l1);
    let classifier = chosen.classifier()?;
    let split_time = start.elapsed();
    let (predicted, cm, m, failures) =
        evaluate(&prep.cube, &prep.truth, &prep.dictionary, &classifier, &prep.test, config.workers)?;
    let test = ClassifyOutcome {
        metrics: m,
        confusion: cm,
        predicted,
        n_train: prep.train.len(),
        n_test: prep.test.len(),
        failures,
        elapsed: start.elapsed(),
    };

    let mut table = String::from("lambda\tlambda2\tvalidation_oa\n");
    for p in &points {
        let l2 = p.lambda2.map_or("-".to_string(), |v| v.to_string());
        let r = match &p.result {
            Ok(oa) => format!("{oa:.4}"),
            Err(e) => format!("failed: {e}"),
        };
        let _ = writeln!(table, "{}\t{l2}\t{r}", p.lambda);
    }
    let extra = vec![
        ("sweep.points".to_string(), points.len().to_string()),
        ("sweep.failed".to_string(), points.iter().filter(|p| p.result.is_err()).count().to_string()),
        ("sweep.selected_lambda".to_string(), selected.0.to_string()),
    ];
    write_classify_outputs(&chosen, &prep, &test, split_time, &extra)?;
    fs::write(chosen.out_dir.join("sweep.txt"), table)?;
    Ok(SweepOutcome { points, selected, test })
}

/// Support statistics of one toy solve.
#[derive(Debug, Clone)]
pub struct ToyResult {
    pub prior: PriorKind,
    pub solver: SolverKind,
    pub coefficients: Matrix,
    pub stats: SupportStats,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct ToyOutcome {
    pub results: Vec<ToyResult>,
    /// Indicator of the rows of each pixel's own class.
    pub desired: Matrix,
    /// Class of each block column.
    pub column_classes: Vec<u16>,
    /// Atoms per dictionary group.
    pub group_sizes: Vec<usize>,
}

/// The six structured priors, each paired with the solver used for the toy run.
pub const TOY_PRIORS: [(PriorKind, SolverKind); 6] = [
    (PriorKind::JointSparsity, SolverKind::Admm),
    (PriorKind::Laplacian, SolverKind::Fss),
    (PriorKind::Group, SolverKind::Admm),
    (PriorKind::SparseGroup, SolverKind::Admm),
    (PriorKind::LowRank, SolverKind::Admm),
    (PriorKind::LowRankGroup, SolverKind::Admm),
];

/// Codes a block of test pixels from two classes under every structured prior
/// and writes one sparsity-pattern image per prior.
pub fn run_toy_pattern(config: &RunConfig) -> Result<ToyOutcome> {
    let prep = prepare(config)?;
    let (c1, c2) = config.toy_classes;
    let k = prep.dictionary.num_classes() as u16;
    if c1 > k || c2 > k {
        return Err(config_err(format!("toy classes {c1},{c2} exceed the {k} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen: Vec<LabeledPixel> = Vec::new();
    for class in [c1, c2] {
        let mut pool: Vec<LabeledPixel> = prep.test.iter().copied().filter(|s| s.class == class).collect();
        if pool.len() < config.toy_pixels {
            return Err(config_err(format!(
                "class {class} has {} test pixels, toy needs {}",
                pool.len(),
                config.toy_pixels
            )));
        }
        pool.shuffle(&mut rng);
        let mut picked = pool[..config.toy_pixels].to_vec();
        picked.sort_by_key(|s| s.pixel);
        chosen.extend(picked);
    }
    let y = Matrix::from_columns(
        &chosen.iter().map(|s| prep.cube.spectrum(s.pixel)).collect::<Vec<_>>(),
    );
    let column_classes: Vec<u16> = chosen.iter().map(|s| s.class).collect();
    let dict = &prep.dictionary;
    let mut desired = Matrix::zeros(dict.num_atoms(), y.ncols());
    for (j, &class) in column_classes.iter().enumerate() {
        let range = dict.groups().range(class as usize - 1);
        for i in range {
            desired[(i, j)] = 1.0;
        }
    }
    let graph: LaplacianGraph = build_similarity_weights(&y, config.kernel_sigma)?;

    let lambda = config.prior.lambda;
    let lambda2 = config.prior.lambda2.unwrap_or(lambda);
    let mut results = Vec::new();
    for (kind, solver) in TOY_PRIORS {
        let prior = if kind.has_lambda2() {
            PriorSpec::new(kind, lambda, Some(lambda2))?
        } else {
            PriorSpec::new(kind, lambda, None)?
        }
        .with_weighted_l1(config.prior.weighted_l1);
        let problem = Problem::new(dict, &y, prior, Some(&graph))?;
        let (x, report) = solve(&problem, solver, &config.params)?;
        let stats = SupportStats::measure(&x, dict.groups())?;
        results.push(ToyResult {
            prior: kind,
            solver,
            objective: problem.objective(&x)?,
            iterations: report.iterations,
            coefficients: x,
            stats,
        });
    }

    let out = &config.out_dir;
    fs::create_dir_all(out)?;
    save_pattern(&desired, &out.join("pattern_desired.pgm"))?;
    let mut table = String::from("prior\tsolver\tnonzero_rows\tactive_groups\tgroup_ranks\tobjective\titerations\n");
    for r in &results {
        save_pattern(&r.coefficients, &out.join(format!("pattern_{}.pgm", r.prior.short_name())))?;
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}\t{:.6e}\t{}",
            r.prior.short_name(),
            r.solver,
            r.stats.nonzero_rows,
            r.stats.active_groups,
            join(&r.stats.group_ranks),
            r.objective,
            r.iterations
        );
    }
    fs::write(out.join("support_stats.txt"), table)?;
    let mut manifest = config.to_text();
    let _ = writeln!(manifest, "result.block_pixels = {}", y.ncols());
    fs::write(out.join("manifest.txt"), manifest)?;
    let group_sizes = (0..dict.groups().num_groups()).map(|g| dict.groups().size(g)).collect();
    Ok(ToyOutcome { results, desired, column_classes, group_sizes })
}

/// Writes a synthetic scene as `scene.hdr`, `scene.raw`, `labels.u16` and `labels.ppm`.
pub fn run_synth(spec: &SceneSpec, seed: u64, out: &Path) -> Result<()> {
    let scene = synth_generate(spec, seed)?;
    fs::create_dir_all(out)?;
    let name = format!("synthetic {spec} seed {seed}");
    write_cube(&scene.cube, &out.join("scene.hdr"), &out.join("scene.raw"), Interleave::Bsq, Some(&name))?;
    save_labels(&scene.labels, &out.join("labels.u16"))?;
    save_map(&scene.labels, &Palette::distinct(spec.classes), &out.join("labels.ppm"))?;
    Ok(())
}

/// Reads `row col [class]` lines.
pub fn read_pixel_list(path: &Path) -> Result<Vec<Pixel>> {
    let text = fs::read_to_string(path)?;
    let mut pixels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let (Some(r), Some(c)) = (it.next(), it.next()) else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::Format(format!("{}:{}: expected 'row col'", path.display(), n + 1)));
        };
        let parse = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::Format(format!("{}:{}: bad coordinate '{v}'", path.display(), n + 1)))
        };
        pixels.push(Pixel::new(parse(r)?, parse(c)?));
    }
    Ok(pixels)
}

/// Scores a predicted label file against ground truth. Without a pixel list,
/// every labeled ground-truth pixel is scored.
pub fn run_eval(
    truth_path: &Path,
    predicted_path: &Path,
    width: usize,
    height: usize,
    pixels_path: Option<&Path>,
) -> Result<(ConfusionMatrix, Metrics)> {
    let truth = load_labels(truth_path, width, height)?;
    let predicted = load_labels(predicted_path, width, height)?;
    let pixels = match pixels_path {
        Some(p) => read_pixel_list(p)?,
        None => truth.labeled_pixels().map(|(p, _)| p).collect(),
    };
    let cm = confusion_matrix(&truth, &predicted, &pixels)?;
    let m = metrics(&cm)?;
    Ok((cm, m))
}
