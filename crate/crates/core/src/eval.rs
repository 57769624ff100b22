//! Confusion matrices and the OA / AA / κ accuracy measures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cube::{LabelMap, Pixel};
use crate::error::{invalid, shape, Error, Result};

/// `counts[t][p]` counts test pixels of true class `t + 1` predicted as
/// `p + 1`. Pixels predicted 0 (rejected, e.g. a solver failure) are kept in
/// `rejected[t]` outside the square matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub rejected: Vec<u64>,
    pub class_names: Option<Vec<String>>,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
            rejected: vec![0; k],
            class_names: None,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(shape("confusion matrix must be square"));
        }
        Ok(Self {
            counts,
            rejected: vec![0; k],
            class_names: None,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    /// All evaluated pixels, rejected ones included.
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.rejected.iter().sum::<u64>()
    }

    pub fn total_rejected(&self) -> u64 {
        self.rejected.iter().sum()
    }

    /// Elementwise sum; the result has the larger class count.
    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let k = self.num_classes().max(other.num_classes());
        let mut out = ConfusionMatrix::zeros(k);
        for m in [self, other] {
            for (t, row) in m.counts.iter().enumerate() {
                for (p, c) in row.iter().enumerate() {
                    out.counts[t][p] += c;
                }
                out.rejected[t] += m.rejected[t];
            }
        }
        out.class_names = self.class_names.clone().or_else(|| other.class_names.clone());
        out
    }

    /// Plain-text matrix: one row per true class, a final `rej` column.
    pub fn to_text(&self) -> String {
        let k = self.num_classes();
        let mut s = String::from("truth\\pred");
        for p in 1..=k {
            let _ = write!(s, "\t{p}");
        }
        s.push_str("\trej\n");
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{}", t + 1);
            for c in row {
                let _ = write!(s, "\t{c}");
            }
            let _ = writeln!(s, "\t{}", self.rejected[t]);
        }
        s
    }
}

/// Tallies predictions at `test_pixels`. The class count is the larger of
/// the two maps' maximum labels.
pub fn confusion_matrix(truth: &LabelMap, predicted: &LabelMap, test_pixels: &[Pixel]) -> Result<ConfusionMatrix> {
    if truth.width() != predicted.width() || truth.height() != predicted.height() {
        return Err(shape(format!(
            "truth is {}x{}, prediction is {}x{}",
            truth.width(),
            truth.height(),
            predicted.width(),
            predicted.height()
        )));
    }
    let k = truth.num_classes().max(predicted.num_classes()) as usize;
    let mut cm = ConfusionMatrix::zeros(k);
    for &p in test_pixels {
        if p.row >= truth.height() || p.col >= truth.width() {
            return Err(invalid(format!("test pixel {p:?} outside the map")));
        }
        let t = truth.get(p);
        if t == 0 {
            return Err(invalid(format!("test pixel {p:?} has no ground-truth label")));
        }
        match predicted.get(p) {
            0 => cm.rejected[t as usize - 1] += 1,
            l => cm.counts[t as usize - 1][l as usize - 1] += 1,
        }
    }
    Ok(cm)
}

/// Accuracy summary; percentages in `[0, 100]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub kappa: f64,
    /// Per-class accuracy, `None` for classes absent from the test set.
    pub per_class: Vec<Option<f64>>,
}

/// OA, AA and Cohen's κ.
///
/// Rejected pixels count as errors and form an extra prediction category for
/// κ. Classes with no test pixels are excluded from AA.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(invalid("confusion matrix is empty"));
    }
    let n = total as f64;
    let k = cm.num_classes();
    let diag: u64 = (0..k).map(|g| cm.counts[g][g]).sum();
    let row = |g: usize| cm.counts[g].iter().sum::<u64>() + cm.rejected[g];
    let col = |g: usize| (0..k).map(|t| cm.counts[t][g]).sum::<u64>();

    let per_class: Vec<Option<f64>> = (0..k)
        .map(|g| match row(g) {
            0 => None,
            r => Some(100.0 * cm.counts[g][g] as f64 / r as f64),
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let average_accuracy = defined.iter().sum::<f64>() / defined.len() as f64;

    let p_o = diag as f64 / n;
    // the rejection column has no truth mass, so it adds nothing to p_e
    let p_e: f64 = (0..k).map(|g| row(g) as f64 * col(g) as f64).sum::<f64>() / (n * n);
    let kappa = if p_e == 1.0 { 1.0 } else { (p_o - p_e) / (1.0 - p_e) };

    Ok(Metrics {
        overall_accuracy: 100.0 * p_o,
        average_accuracy,
        kappa,
        per_class,
    })
}

impl Metrics {
    /// Table with one row per class followed by OA, AA and κ.
    pub fn to_table(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Class\t{title}");
        for (g, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => {
                    let _ = writeln!(s, "{}\t{a:.2}", g + 1);
                }
                None => {
                    let _ = writeln!(s, "{}\tn/a", g + 1);
                }
            }
        }
        let _ = writeln!(s, "OA[%]\t{:.2}", self.overall_accuracy);
        let _ = writeln!(s, "AA[%]\t{:.2}", self.average_accuracy);
        let _ = writeln!(s, "kappa\t{:.3}", self.kappa);
        s
    }

    /// `key = value` lines; values printed with full round-trip precision.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "oa = {}", self.overall_accuracy);
        let _ = writeln!(s, "aa = {}", self.average_accuracy);
        let _ = writeln!(s, "kappa = {}", self.kappa);
        for (g, acc) in self.per_class.iter().enumerate() {
            match acc {
                Some(a) => {
                    let _ = writeln!(s, "class.{} = {a}", g + 1);
                }
                None => {
                    let _ = writeln!(s, "class.{} = n/a", g + 1);
                }
            }
        }
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut fields = BTreeMap::new();
        let mut per_class = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let parse = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{v}' for {key}")))
            };
            if let Some(idx) = key.strip_prefix("class.") {
                let g: usize = idx
                    .parse()
                    .map_err(|_| Error::Format(format!("bad class key '{key}'")))?;
                let v = if value == "n/a" { None } else { Some(parse(value)?) };
                per_class.insert(g, v);
            } else {
                fields.insert(key.to_string(), parse(value)?);
            }
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("missing key '{k}'")))
        };
        let per_class: Vec<Option<f64>> = per_class.into_values().collect();
        Ok(Self {
            overall_accuracy: get("oa")?,
            average_accuracy: get("aa")?,
            kappa: get("kappa")?,
            per_class,
        })
    }
}
