//! Training dictionary construction and group bookkeeping.

use std::ops::Range;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cube::{HsiCube, LabelMap, Pixel};
use crate::error::{invalid, shape, Error, Result};
use crate::solvers::factor::GramFactor;
use crate::Matrix;

/// Contiguous partition of the dictionary columns into class groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    boundaries: Vec<usize>,
    weights: Vec<f64>,
}

impl GroupStructure {
    /// Groups of the given sizes weighted by `sqrt(size)`.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let weights = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
        Self::with_weights(sizes, weights)
    }

    pub fn with_weights(sizes: &[usize], weights: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(invalid("at least one group is required"));
        }
        if sizes.contains(&0) {
            return Err(invalid("group sizes must be positive"));
        }
        if weights.len() != sizes.len() {
            return Err(shape(format!(
                "{} weights for {} groups",
                weights.len(),
                sizes.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("group weights must be positive"));
        }
        let mut boundaries = Vec::with_capacity(sizes.len() + 1);
        boundaries.push(0);
        for s in sizes {
            boundaries.push(boundaries.last().unwrap() + s);
        }
        Ok(Self {
            boundaries,
            weights,
        })
    }

    /// A single group covering `n` rows.
    pub fn single(n: usize) -> Result<Self> {
        Self::from_sizes(&[n])
    }

    pub fn num_groups(&self) -> usize {
        self.weights.len()
    }

    /// Total number of rows (atoms) covered.
    pub fn len(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row range of the 0-based group index `g`.
    pub fn range(&self, g: usize) -> Range<usize> {
        self.boundaries[g]..self.boundaries[g + 1]
    }

    pub fn size(&self, g: usize) -> usize {
        self.boundaries[g + 1] - self.boundaries[g]
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.weights[g]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Range<usize>, f64)> + '_ {
        (0..self.num_groups()).map(|g| (self.range(g), self.weights[g]))
    }

    pub(crate) fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.len() {
            return Err(shape(format!(
                "groups cover {} rows, matrix has {rows}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Structured dictionary: class sub-dictionaries concatenated column-wise.
#[derive(Debug)]
pub struct Dictionary {
    atoms: Matrix,
    class_of_atom: Vec<u16>,
    groups: GroupStructure,
    gram: OnceLock<Matrix>,
    factor: OnceLock<GramFactor>,
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        Self {
            atoms: self.atoms.clone(),
            class_of_atom: self.class_of_atom.clone(),
            groups: self.groups.clone(),
            gram: OnceLock::new(),
            factor: OnceLock::new(),
        }
    }
}

impl Dictionary {
    /// Builds a dictionary from atoms whose class ids are non-decreasing and
    /// cover every class `1..=K`.
    pub fn new(atoms: Matrix, class_of_atom: Vec<u16>, normalize: bool) -> Result<Self> {
        if atoms.ncols() != class_of_atom.len() {
            return Err(shape(format!(
                "{} atoms but {} class ids",
                atoms.ncols(),
                class_of_atom.len()
            )));
        }
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(invalid("dictionary must have at least one atom and one band"));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(invalid("dictionary contains non-finite values"));
        }
        let mut sizes: Vec<usize> = Vec::new();
        let mut expected = 1u16;
        for (j, &c) in class_of_atom.iter().enumerate() {
            if c == expected {
                sizes.push(1);
                expected += 1;
            } else if c + 1 == expected && c != 0 {
                *sizes.last_mut().unwrap() += 1;
            } else {
                return Err(invalid(format!(
                    "atom {j} has class {c}; classes must be contiguous and numbered 1..=K"
                )));
            }
        }
        let groups = GroupStructure::from_sizes(&sizes)?;
        let atoms = if normalize {
            normalize_columns(&atoms)?
        } else {
            atoms
        };
        Ok(Self {
            atoms,
            class_of_atom,
            groups,
            gram: OnceLock::new(),
            factor: OnceLock::new(),
        })
    }

    /// Replaces the default `√size` group weights.
    pub fn with_group_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        let sizes: Vec<usize> = (0..self.groups.num_groups()).map(|g| self.groups.size(g)).collect();
        self.groups = GroupStructure::with_weights(&sizes, weights)?;
        Ok(self)
    }

    /// Stacks pixel spectra from `cube` as atoms, sorted by class.
    pub fn from_pixels(cube: &HsiCube, samples: &[LabeledPixel], normalize: bool) -> Result<Self> {
        let mut sorted = samples.to_vec();
        sorted.sort_by_key(|s| (s.class, s.pixel));
        let mut atoms = Matrix::zeros(cube.bands(), sorted.len());
        for (j, s) in sorted.iter().enumerate() {
            if !cube.contains(s.pixel) {
                return Err(invalid(format!("training pixel {:?} outside the cube", s.pixel)));
            }
            atoms.set_column(j, &cube.spectrum(s.pixel));
        }
        Self::new(atoms, sorted.iter().map(|s| s.class).collect(), normalize)
    }

    pub fn atoms(&self) -> &Matrix {
        &self.atoms
    }

    pub fn class_of_atom(&self) -> &[u16] {
        &self.class_of_atom
    }

    pub fn groups(&self) -> &GroupStructure {
        &self.groups
    }

    pub fn bands(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.groups.num_groups()
    }

    /// `AᵀA`, computed on first use.
    pub fn gram(&self) -> &Matrix {
        self.gram.get_or_init(|| self.atoms.tr_mul(&self.atoms))
    }

    /// Spectral factorization of `AᵀA` reused by every shifted solve against this dictionary.
    pub fn gram_factor(&self) -> Result<&GramFactor> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = GramFactor::new(&self.atoms)?;
        Ok(self.factor.get_or_init(|| f))
    }
}

/// Scales every column to unit ℓ2 norm.
pub fn normalize_columns(a: &Matrix) -> Result<Matrix> {
    let mut out = a.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroColumn(j));
        }
        col /= norm;
    }
    Ok(out)
}

/// Keeps the rows of class `class` (1-based) and zeros the rest.
pub fn group_mask(x: &Matrix, class: u16, groups: &GroupStructure) -> Result<Matrix> {
    groups.check_rows(x.nrows())?;
    let g = class as usize;
    if g == 0 || g > groups.num_groups() {
        return Err(invalid(format!(
            "class {class} outside 1..={}",
            groups.num_groups()
        )));
    }
    let range = groups.range(g - 1);
    let mut out = Matrix::zeros(x.nrows(), x.ncols());
    out.rows_mut(range.start, range.len())
        .copy_from(&x.rows(range.start, range.len()));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPixel {
    pub pixel: Pixel,
    pub class: u16,
}

/// How many training pixels each class contributes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Counts proportional to class size, rounded by largest remainder, at least one per class.
    #[default]
    Proportional,
    /// Explicit per-class counts (index 0 is class 1).
    PerClass(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct Split {
    pub dictionary: Dictionary,
    pub train: Vec<LabeledPixel>,
    /// Remaining labeled pixels in row-major order.
    pub test: Vec<LabeledPixel>,
}

/// Stratified random train/test split of the labeled pixels; the training
/// pixels become the dictionary atoms.
pub fn build_dictionary_split(
    cube: &HsiCube,
    labels: &LabelMap,
    n_train: usize,
    seed: u64,
    policy: &SplitPolicy,
    normalize: bool,
) -> Result<Split> {
    if !labels.same_shape(cube) {
        return Err(shape(format!(
            "labels are {}x{}, cube is {}x{}",
            labels.width(),
            labels.height(),
            cube.width(),
            cube.height()
        )));
    }
    let samples: Vec<LabeledPixel> = labels
        .labeled_pixels()
        .map(|(pixel, class)| LabeledPixel { pixel, class })
        .collect();
    let (train, test) = stratified_partition(&samples, n_train, seed, policy)?;
    let dictionary = Dictionary::from_pixels(cube, &train, normalize)?;
    Ok(Split {
        dictionary,
        train,
        test,
    })
}

/// Splits `samples` into `n_first` stratified picks and the remainder.
///
/// Classes are taken to be `1..=max class`; each must be present.
pub fn stratified_partition(
    samples: &[LabeledPixel],
    n_first: usize,
    seed: u64,
    policy: &SplitPolicy,
) -> Result<(Vec<LabeledPixel>, Vec<LabeledPixel>)> {
    let k = samples.iter().map(|s| s.class).max().unwrap_or(0) as usize;
    if k == 0 {
        return Err(invalid("no labeled pixels"));
    }
    let mut by_class: Vec<Vec<LabeledPixel>> = vec![Vec::new(); k];
    for s in samples {
        by_class[s.class as usize - 1].push(*s);
    }
    if let Some(g) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(g as u16 + 1));
    }
    let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let counts = match policy {
        SplitPolicy::Proportional => {
            if n_first >= samples.len() {
                return Err(invalid(format!(
                    "n_train = {n_first} must be below the {} labeled pixels",
                    samples.len()
                )));
            }
            proportional_counts(&sizes, n_first)?
        }
        SplitPolicy::PerClass(counts) => {
            if counts.len() != k {
                return Err(invalid(format!("{} per-class counts for {k} classes", counts.len())));
            }
            for (g, (&c, &s)) in counts.iter().zip(&sizes).enumerate() {
                if c == 0 || c > s {
                    return Err(invalid(format!(
                        "class {} asks for {c} training pixels out of {s}",
                        g + 1
                    )));
                }
            }
            counts.clone()
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut first = Vec::new();
    let mut rest = Vec::new();
    for (mut pixels, &count) in by_class.into_iter().zip(&counts) {
        pixels.sort_by_key(|s| s.pixel);
        pixels.shuffle(&mut rng);
        let mut picked = pixels[..count].to_vec();
        picked.sort_by_key(|s| s.pixel);
        first.extend(picked);
        rest.extend_from_slice(&pixels[count..]);
    }
    rest.sort_by_key(|s| s.pixel);
    Ok((first, rest))
}

/// Largest-remainder apportionment of `total` over classes of the given sizes,
/// with every class receiving at least one and at most its size.
pub fn proportional_counts(sizes: &[usize], total: usize) -> Result<Vec<usize>> {
    let k = sizes.len();
    let n: usize = sizes.iter().sum();
    if total < k {
        return Err(invalid(format!(
            "n_train = {total} is smaller than the number of classes {k}"
        )));
    }
    if total > n {
        return Err(invalid(format!("n_train = {total} exceeds {n} labeled pixels")));
    }
    let quotas: Vec<f64> = sizes
        .iter()
        .map(|&s| s as f64 * total as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = quotas
        .iter()
        .zip(sizes)
        .map(|(q, &s)| (q.floor() as usize).clamp(1, s))
        .collect();
    let mut assigned: usize = counts.iter().sum();
    while assigned < total {
        // Largest remainder first, ties to the lower class id.
        let g = (0..k)
            .filter(|&g| counts[g] < sizes[g])
            .max_by(|&a, &b| {
                let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
                ra.total_cmp(&rb).then(b.cmp(&a))
            })
            .expect("total <= n guarantees capacity");
        counts[g] += 1;
        assigned += 1;
    }
    while assigned > total {
        let g = (0..k)
            .filter(|&g| counts[g] > 1)
            .min_by(|&a, &b| {
                let (ra, rb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
                ra.total_cmp(&rb).then(a.cmp(&b))
            })
            .expect("total >= k guarantees a reducible class");
        counts[g] -= 1;
        assigned -= 1;
    }
    Ok(counts)
}
