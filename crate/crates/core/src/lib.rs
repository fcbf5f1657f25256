//! Separable canonical variate analysis and Gaussian tree-constraint
//! diagnostics for grouped two-dimensional functional data.
//!
//! The pipeline reduces grouped spectrogram-like matrices to an ordered
//! discriminant basis under a separable covariance model, projects the data
//! onto the retained components, and checks each component's between-group
//! cross-covariance against the tripod-tree positivity constraint. The
//! [`simlab`] module carries the Monte Carlo harnesses that validate the
//! diagnostic.

pub mod corpus;
pub mod cva;
pub mod error;
pub mod numeric;
pub mod sepcov;
pub mod simlab;
pub mod synth;
pub mod treecheck;

pub use corpus::{adjust_gender, compute_means, Corpus, Gender, LabeledSpectrogram, MeanSet};
pub use cva::{
    combine_kronecker, hadamard_interpret, project, select_components, solve_basis,
    solve_directional, CanonicalBasis, ScoreTable, Selection,
};
pub use error::{Error, Result};
pub use sepcov::{estimate_directional, estimate_directional_with, DirectionalCovariances};
pub use treecheck::{
    cross_covariance, positivity_check, sign_pattern_census, tripod_oracle, CrossCovariance,
    TreeDiagnostic,
};
