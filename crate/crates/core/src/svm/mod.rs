//! RBF soft-margin SVM: SMO dual solver, one-vs-one multiclass wrapper,
//! and the weighted hinge-loss tuning objective.

mod objective;
mod ovo;
mod smo;

pub use objective::{objective_factory, ObjectiveError, Protocol, TuningObjective};
pub use ovo::{predict_multiclass, train_ovo, OvoEnsemble};
pub use smo::{smo_train, SmoParams, SvmModel};

/// Gaussian RBF kernel `exp(−γ‖h−h′‖²)`.
pub fn rbf(h: &[f64], h2: &[f64], gamma: f64) -> f64 {
    let sq: f64 = h.iter().zip(h2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * sq).exp()
}

/// Weighted average hinge loss `Σ wᵢ·max(0, 1 − mᵢ)` over margins `mᵢ`.
pub fn hinge_loss(margins: &[f64], weights: &[f64]) -> f64 {
    margins
        .iter()
        .zip(weights)
        .map(|(&m, &w)| w * (1.0 - m).max(0.0))
        .sum()
}
