//! LIBSVM text parsing, synthetic dataset generation, and deterministic
//! stratified k-fold splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Dense instance matrix with contiguous class ids and normalized instance
/// weights. `original_labels[id]` recovers the label as it appeared on disk.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub original_labels: Vec<i64>,
}

impl Dataset {
    /// Uniform weights `1/d`.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, original_labels: Vec<i64>) -> Self {
        let d = features.len();
        Self {
            features,
            labels,
            weights: vec![1.0 / d as f64; d],
            original_labels,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.original_labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, |r| r.len())
    }

    /// Rows selected by index, weights renormalized to sum 1.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let features = idx.iter().map(|&i| self.features[i].clone()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        let raw: Vec<f64> = idx.iter().map(|&i| self.weights[i]).collect();
        let total: f64 = raw.iter().sum();
        Dataset {
            features,
            labels,
            weights: raw.iter().map(|w| w / total).collect(),
            original_labels: self.original_labels.clone(),
        }
    }
}

/// One parsed line of LIBSVM text, prior to densification.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub label: i64,
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {0}: missing label")]
    MissingLabel(usize),
    #[error("line {0}: malformed feature pair '{1}'")]
    MalformedPair(usize, String),
    #[error("line {0}: non-numeric value in '{1}'")]
    BadNumber(usize, String),
    #[error("line {0}: feature indices must be strictly increasing and >= 1")]
    BadIndexOrder(usize),
    #[error("no instances found")]
    Empty,
    #[error("fewer than two classes present")]
    SingleClass,
}

/// Parses the LIBSVM sparse format: `<label> <idx>:<val> ...`, 1-based
/// strictly increasing indices, optional `#` comment suffixes, blank lines
/// skipped. Feature width is the maximum index over the whole input.
pub fn parse_libsvm(text: &str) -> Result<Dataset, ParseError> {
    let mut rows: Vec<SparseRow> = Vec::new();
    let mut width = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let label_tok = parts.next().ok_or(ParseError::MissingLabel(lineno))?;
        // labels may be written as integers or integral floats ("1.0")
        let label = label_tok
            .parse::<i64>()
            .or_else(|_| {
                label_tok
                    .parse::<f64>()
                    .map_err(|_| ())
                    .and_then(|v| if v.fract() == 0.0 { Ok(v as i64) } else { Err(()) })
            })
            .map_err(|_| ParseError::BadNumber(lineno, label_tok.to_string()))?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev = 0usize;
        for tok in parts {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| ParseError::MalformedPair(lineno, tok.to_string()))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| ParseError::BadNumber(lineno, tok.to_string()))?;
            let val: f64 = val_s
                .parse()
                .map_err(|_| ParseError::BadNumber(lineno, tok.to_string()))?;
            if idx == 0 || idx <= prev {
                return Err(ParseError::BadIndexOrder(lineno));
            }
            prev = idx;
            width = width.max(idx);
            entries.push((idx, val));
        }
        rows.push(SparseRow { label, entries });
    }
    if rows.is_empty() {
        return Err(ParseError::Empty);
    }
    // contiguous ids in sorted original-label order, for reproducible reports
    let mut table: BTreeMap<i64, usize> = BTreeMap::new();
    for r in &rows {
        let next = table.len();
        table.entry(r.label).or_insert(next);
    }
    // BTreeMap iteration order re-assigns ids sorted by original label
    let original_labels: Vec<i64> = table.keys().cloned().collect();
    let id_of: BTreeMap<i64, usize> = original_labels
        .iter()
        .enumerate()
        .map(|(i, &l)| (l, i))
        .collect();
    if original_labels.len() < 2 {
        return Err(ParseError::SingleClass);
    }
    let features = rows
        .iter()
        .map(|r| {
            let mut dense = vec![0.0; width];
            for &(i, v) in &r.entries {
                dense[i - 1] = v;
            }
            dense
        })
        .collect();
    let labels = rows.iter().map(|r| id_of[&r.label]).collect();
    Ok(Dataset::new(features, labels, original_labels))
}

/// Full-precision serializer; `parse_libsvm(serialize(d))` reproduces every
/// value exactly. Zero features are omitted as the format intends.
pub fn serialize_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for (row, &label) in ds.features.iter().zip(&ds.labels) {
        out.push_str(&ds.original_labels[label].to_string());
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                out.push_str(&format!(" {}:{:.17e}", j + 1, v));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("k must be at least 2")]
    KTooSmall,
    #[error("k = {0} exceeds the number of instances {1}")]
    KTooLarge(usize, usize),
}

/// Per-instance fold ids in `[0, k)`.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub fold_of: Vec<usize>,
    pub k: usize,
}

impl FoldAssignment {
    pub fn fold_indices(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffled per-class round-robin assignment: fold sizes per class differ by
/// at most one, deterministic in the seed.
pub fn stratified_kfold(
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, SplitError> {
    if k < 2 {
        return Err(SplitError::KTooSmall);
    }
    if k > labels.len() {
        return Err(SplitError::KTooLarge(k, labels.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        by_class.entry(c).or_default().push(i);
    }
    let mut fold_of = vec![0usize; labels.len()];
    // offset rotates between classes so small classes do not all pile into fold 0
    let mut offset = 0usize;
    for members in by_class.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (j, &i) in shuffled.iter().enumerate() {
            fold_of[i] = (j + offset) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldAssignment { fold_of, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Blobs,
    TwoMoons,
    DoubleRing,
}

impl SyntheticKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "blobs" => Some(Self::Blobs),
            "two-moons" | "two_moons" => Some(Self::TwoMoons),
            "double-ring" | "double_ring" => Some(Self::DoubleRing),
            _ => None,
        }
    }
}

/// Deterministic 2-D point clouds with known separability regimes: `blobs`
/// is linearly separable at low noise, `two_moons` needs a nonlinear
/// boundary, `double_ring` is radially separable only.
pub fn make_synthetic(kind: SyntheticKind, per_class: usize, noise: f64, seed: u64) -> Dataset {
    assert!(per_class >= 4, "at least 4 instances per class");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = move |rng: &mut ChaCha8Rng| {
        // Box-Muller keeps the dependency surface small
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let mut features = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    match kind {
        SyntheticKind::Blobs => {
            for (class, center) in [(0usize, (-2.0, 0.0)), (1, (2.0, 0.0))] {
                for _ in 0..per_class {
                    features.push(vec![
                        center.0 + noise * gauss(&mut rng),
                        center.1 + noise * gauss(&mut rng),
                    ]);
                    labels.push(class);
                }
            }
        }
        SyntheticKind::TwoMoons => {
            for class in 0..2usize {
                for i in 0..per_class {
                    let t = std::f64::consts::PI * i as f64 / (per_class - 1) as f64;
                    let (x, y) = if class == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    features.push(vec![
                        x + noise * gauss(&mut rng),
                        y + noise * gauss(&mut rng),
                    ]);
                    labels.push(class);
                }
            }
        }
        SyntheticKind::DoubleRing => {
            for (class, radius) in [(0usize, 1.0), (1, 3.0)] {
                for i in 0..per_class {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / per_class as f64;
                    features.push(vec![
                        radius * t.cos() + noise * gauss(&mut rng),
                        radius * t.sin() + noise * gauss(&mut rng),
                    ]);
                    labels.push(class);
                }
            }
        }
    }
    Dataset::new(features, labels, vec![0, 1])
}
