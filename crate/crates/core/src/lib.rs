//! Derivative-free hyperparameter tuning: an Ortho-MADS driver with
//! Nelder-Mead and variable-neighborhood search stages, an RBF-SVM
//! objective, and reference baselines.

pub mod baselines;
pub mod data;
pub mod driver;
pub mod functions;
pub mod geometry;
pub mod nm;
pub mod ranking;
pub mod svm;
pub mod vns;
