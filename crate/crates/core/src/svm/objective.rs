//! The tuning objective: map (C, γ) to a weighted hinge loss under a
//! holdout split or stratified k-fold cross validation.

use thiserror::Error;

use super::ovo::{predict_multiclass, train_ovo, OvoEnsemble};
use super::smo::SmoParams;
use crate::data::{stratified_kfold, Dataset, SplitError};

#[derive(Debug, Clone)]
pub enum Protocol {
    /// Train on the full training set, evaluate on the supplied split.
    Holdout(Dataset),
    /// Average the loss over k stratified folds.
    StratifiedCv { k: usize, seed: u64 },
}

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("split: {0}")]
    Split(#[from] SplitError),
    #[error("every cross-validation fold is degenerate")]
    AllFoldsDegenerate,
    #[error("training set has fewer than two classes")]
    SingleClass,
    #[error("holdout validation set is empty")]
    EmptyValidation,
}

/// Mean of per-machine weighted hinge losses: each one-vs-one machine is
/// scored on the evaluation rows of its two classes, with weights
/// renormalized over those rows.
fn ensemble_hinge(ens: &OvoEnsemble, eval: &Dataset) -> f64 {
    let mut machine_losses = Vec::new();
    for (a, b, model) in &ens.machines {
        let mut margins = Vec::new();
        let mut weights = Vec::new();
        for i in 0..eval.len() {
            let label = eval.labels[i];
            if label != *a && label != *b {
                continue;
            }
            let y = if label == *a { 1.0 } else { -1.0 };
            margins.push(y * model.score(&eval.features[i]));
            weights.push(eval.weights[i]);
        }
        if margins.is_empty() {
            continue;
        }
        let total: f64 = weights.iter().sum();
        let loss: f64 = margins
            .iter()
            .zip(&weights)
            .map(|(&m, &w)| w / total * (1.0 - m).max(0.0))
            .sum();
        machine_losses.push(loss);
    }
    if machine_losses.is_empty() {
        f64::INFINITY
    } else {
        machine_losses.iter().sum::<f64>() / machine_losses.len() as f64
    }
}

/// Fraction of evaluation rows the ensemble classifies correctly.
pub fn accuracy(ens: &OvoEnsemble, eval: &Dataset) -> f64 {
    let correct = (0..eval.len())
        .filter(|&i| predict_multiclass(ens, &eval.features[i]) == eval.labels[i])
        .count();
    correct as f64 / eval.len() as f64
}

/// A deterministic (C, γ) → loss callable with its splits fixed at
/// construction time.
pub struct TuningObjective {
    train: Dataset,
    /// `(train indices, eval indices)` per usable fold; a single entry with
    /// the full training set for holdout.
    folds: Vec<(Vec<usize>, Vec<usize>)>,
    holdout: Option<Dataset>,
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Min-max scale features to [0,1], fitted on the training part of each
    /// split only.
    pub scale: bool,
}

/// Per-feature min-max transform fitted on `fit` and applied to both sets.
fn scale_pair(fit: &mut Dataset, apply: &mut Dataset) {
    let p = fit.n_features();
    let mut lo = vec![f64::INFINITY; p];
    let mut hi = vec![f64::NEG_INFINITY; p];
    for row in &fit.features {
        for j in 0..p {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let transform = |ds: &mut Dataset| {
        for row in &mut ds.features {
            for j in 0..p {
                if hi[j] > lo[j] {
                    row[j] = (row[j] - lo[j]) / (hi[j] - lo[j]);
                }
            }
        }
    };
    transform(fit);
    transform(apply);
}

/// Validates splits up front: folds whose training part lacks a class are
/// dropped with a warning; an error is returned only if nothing usable
/// remains.
pub fn objective_factory(
    dataset: Dataset,
    protocol: Protocol,
) -> Result<TuningObjective, ObjectiveError> {
    if dataset.n_classes() < 2 {
        return Err(ObjectiveError::SingleClass);
    }
    match protocol {
        Protocol::Holdout(validation) => {
            if validation.is_empty() {
                return Err(ObjectiveError::EmptyValidation);
            }
            Ok(TuningObjective {
                train: dataset,
                folds: Vec::new(),
                holdout: Some(validation),
                tol: 1e-3,
                max_iter: None,
                scale: false,
            })
        }
        Protocol::StratifiedCv { k, seed } => {
            let assignment = stratified_kfold(&dataset.labels, k, seed)?;
            let mut folds = Vec::new();
            for fold in 0..k {
                let (train_idx, eval_idx) = assignment.fold_indices(fold);
                let mut present = vec![false; dataset.n_classes()];
                for &i in &train_idx {
                    present[dataset.labels[i]] = true;
                }
                if present.iter().filter(|&&p| p).count() < 2 || eval_idx.is_empty() {
                    log::warn!("fold {fold} is degenerate; skipping");
                    continue;
                }
                folds.push((train_idx, eval_idx));
            }
            if folds.is_empty() {
                return Err(ObjectiveError::AllFoldsDegenerate);
            }
            Ok(TuningObjective {
                train: dataset,
                folds,
                holdout: None,
                tol: 1e-3,
                max_iter: None,
                scale: false,
            })
        }
    }
}

impl TuningObjective {
    fn params(&self, c: f64, gamma: f64) -> SmoParams {
        let mut p = SmoParams::new(c, gamma);
        p.tol = self.tol;
        p.max_iter = self.max_iter;
        p
    }

    /// Train/eval dataset pairs per split, scaled when requested.
    fn pairs(&self) -> Vec<(Dataset, Dataset)> {
        let mut out: Vec<(Dataset, Dataset)> = match &self.holdout {
            Some(validation) => vec![(self.train.clone(), validation.clone())],
            None => self
                .folds
                .iter()
                .map(|(t, e)| (self.train.subset(t), self.train.subset(e)))
                .collect(),
        };
        if self.scale {
            for (fit, apply) in &mut out {
                scale_pair(fit, apply);
            }
        }
        out
    }

    /// Weighted hinge loss at `(C, γ)`; averaged over folds under CV.
    pub fn loss(&self, c: f64, gamma: f64) -> f64 {
        if !(c > 0.0) || !(gamma > 0.0) {
            return f64::INFINITY;
        }
        let params = self.params(c, gamma);
        let pairs = self.pairs();
        let total: f64 = pairs
            .iter()
            .map(|(train, eval)| ensemble_hinge(&train_ovo(train, &params), eval))
            .sum();
        total / pairs.len() as f64
    }

    /// Validation accuracy at `(C, γ)` (fold-averaged under CV); used for
    /// reporting, not for tuning.
    pub fn accuracy(&self, c: f64, gamma: f64) -> f64 {
        let params = self.params(c, gamma);
        let pairs = self.pairs();
        let total: f64 = pairs
            .iter()
            .map(|(train, eval)| accuracy(&train_ovo(train, &params), eval))
            .sum();
        total / pairs.len() as f64
    }

    /// Adapter for the optimizer: `x = [C, γ]`.
    pub fn as_fn(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| self.loss(x[0], x[1])
    }
}
