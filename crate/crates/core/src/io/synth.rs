//! Synthetic union-of-subspaces scenes.
//!
//! Each class owns an orthonormal `P × d` basis; a pixel is the basis times a
//! nonnegative unit-norm code, so every clean pixel has unit energy.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cube::{HsiCube, LabelMap, Pixel};
use crate::error::{Error, Result};
use crate::prox::singular_values;
use crate::Matrix;

/// Bases whose largest principal cosine exceeds this are redrawn.
const MAX_PRINCIPAL_COSINE: f64 = 1.0 - 1e-6;
const MAX_BASIS_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Near-square grid of rectangles, filled row by row.
    Blocks,
    /// Vertical stripes of equal width.
    Stripes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Per-band standard deviation.
    Sigma(f64),
    /// Signal-to-noise ratio in dB relative to the unit pixel energy.
    SnrDb(f64),
}

impl Noise {
    pub fn sigma(self, bands: usize) -> f64 {
        match self {
            Noise::Sigma(s) => s,
            Noise::SnrDb(db) => (1.0 / (bands as f64 * 10f64.powf(db / 10.0))).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub layout: Layout,
    pub classes: usize,
    pub bands: usize,
    pub subspace_dim: usize,
    pub width: usize,
    pub height: usize,
    pub noise: Noise,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            layout: Layout::Blocks,
            classes: 3,
            bands: 50,
            subspace_dim: 3,
            width: 30,
            height: 30,
            noise: Noise::Sigma(0.0),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.classes > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("class count {} out of range", self.classes)));
        }
        if self.subspace_dim == 0 || self.subspace_dim >= self.bands {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension must satisfy 0 < d < P, got d = {}, P = {}",
                self.subspace_dim, self.bands
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("scene must have positive width and height".into()));
        }
        let fits = match self.layout {
            Layout::Stripes => self.classes <= self.width,
            Layout::Blocks => {
                let (rows, cols) = grid(self.classes);
                rows <= self.height && cols <= self.width
            }
        };
        if !fits {
            return Err(Error::InvalidArgument(format!(
                "{}x{} scene is too small for {} classes",
                self.width, self.height, self.classes
            )));
        }
        let sigma = self.noise.sigma(self.bands);
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid noise level {:?}", self.noise)));
        }
        Ok(())
    }

    /// Class id (1-based) of each pixel under the layout.
    pub fn label_map(&self) -> LabelMap {
        let (w, h, k) = (self.width, self.height, self.classes);
        let mut map = LabelMap::zeros(w, h);
        for r in 0..h {
            for c in 0..w {
                let class = match self.layout {
                    Layout::Stripes => c * k / w,
                    Layout::Blocks => {
                        let (rows, cols) = grid(k);
                        let br = r * rows / h;
                        let in_row = if br + 1 == rows { k - cols * (rows - 1) } else { cols };
                        br * cols + c * in_row / w
                    }
                };
                map.set(Pixel::new(r, c), class as u16 + 1);
            }
        }
        map
    }
}

fn grid(k: usize) -> (usize, usize) {
    let cols = (k as f64).sqrt().ceil() as usize;
    (k.div_ceil(cols), cols)
}

impl fmt::Display for SceneSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let layout = match self.layout {
            Layout::Blocks => "blocks",
            Layout::Stripes => "stripes",
        };
        write!(
            f,
            "{layout}:K={},P={},d={},w={},h={},",
            self.classes, self.bands, self.subspace_dim, self.width, self.height
        )?;
        match self.noise {
            Noise::Sigma(s) => write!(f, "sigma={s}"),
            Noise::SnrDb(db) => write!(f, "snr={db}"),
        }
    }
}

/// Parses `layout[:key=value,...]` with keys `K`, `P`, `d`, `w`, `h`, and
/// one of `sigma` or `snr`. Missing keys take the defaults.
impl FromStr for SceneSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (layout, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut spec = SceneSpec {
            layout: match layout.trim() {
                "blocks" => Layout::Blocks,
                "stripes" => Layout::Stripes,
                other => return Err(Error::Config(format!("unknown scene layout '{other}'"))),
            },
            ..SceneSpec::default()
        };
        let mut noise_set = false;
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("scene option '{item}' is not key=value")))?;
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("scene option '{key}' needs an integer, got '{value}'")))
            };
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("scene option '{key}' needs a number, got '{value}'")))
            };
            match key {
                "K" => spec.classes = int()?,
                "P" => spec.bands = int()?,
                "d" => spec.subspace_dim = int()?,
                "w" => spec.width = int()?,
                "h" => spec.height = int()?,
                "sigma" | "snr" => {
                    if noise_set {
                        return Err(Error::Config("give only one of 'sigma' and 'snr'".into()));
                    }
                    noise_set = true;
                    spec.noise = if key == "sigma" { Noise::Sigma(float()?) } else { Noise::SnrDb(float()?) };
                }
                other => return Err(Error::Config(format!("unknown scene option '{other}'"))),
            }
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub cube: HsiCube,
    pub labels: LabelMap,
    /// Orthonormal basis of each class, in class order.
    pub bases: Vec<Matrix>,
}

/// Deterministic for a given `(spec, seed)`.
pub fn synth_generate(spec: &SceneSpec, seed: u64) -> Result<SyntheticScene> {
    spec.validate()?;
    let (p, d, k) = (spec.bands, spec.subspace_dim, spec.classes);
    let bases = draw_bases(p, d, k, seed)?;
    let labels = spec.label_map();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let sigma = spec.noise.sigma(p);
    let plane = spec.width * spec.height;
    let mut data = vec![0.0; p * plane];
    for (idx, &label) in labels.labels().iter().enumerate() {
        let mut code = DVector::from_fn(d, |_, _| rng.random::<f64>());
        let norm = code.norm();
        if norm > 0.0 {
            code /= norm;
        } else {
            code[0] = 1.0;
        }
        let pixel = &bases[label as usize - 1] * code;
        for band in 0..p {
            let noise = if sigma > 0.0 { sigma * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            data[band * plane + idx] = pixel[band] + noise;
        }
    }
    let cube = HsiCube::new(spec.width, spec.height, p, data)?;
    Ok(SyntheticScene { cube, labels, bases })
}

fn draw_bases(p: usize, d: usize, k: usize, seed: u64) -> Result<Vec<Matrix>> {
    for attempt in 0..MAX_BASIS_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let bases: Vec<Matrix> = (0..k)
            .map(|_| {
                let g = Matrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
                g.qr().q()
            })
            .collect();
        if d * k > p || mutually_separated(&bases) {
            return Ok(bases);
        }
        log::debug!("synthetic bases degenerate on attempt {attempt}, redrawing");
    }
    Err(Error::Decomposition("could not draw separated class subspaces"))
}

/// True when every pair of bases has smallest principal angle above zero.
pub fn mutually_separated(bases: &[Matrix]) -> bool {
    largest_principal_cosine(bases) < MAX_PRINCIPAL_COSINE
}

/// Largest cosine of a principal angle over all pairs (0 for a single basis).
pub fn largest_principal_cosine(bases: &[Matrix]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            let cross = bases[i].transpose() * &bases[j];
            let top = singular_values(&cross)
                .map(|sv| sv.into_iter().fold(0.0, f64::max))
                .unwrap_or(1.0);
            worst = worst.max(top);
        }
    }
    worst
}
