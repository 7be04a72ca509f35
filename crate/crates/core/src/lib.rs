//! Oaxaca-Blinder decomposition of mean wage gaps between two groups.
//!
//! The pipeline: validate and split a [`data::Dataset`] under a
//! [`data::ModelSpec`], encode each group into an intercept-first
//! [`design::DesignMatrix`], fit both wage equations by QR least squares
//! ([`ols::fit_ols`]), then decompose the gap in mean outcomes into
//! explained / unexplained parts ([`decomposition::twofold`]) or
//! endowments / coefficients / interaction ([`decomposition::threefold`]),
//! with per-variable detail and percentile bootstrap intervals
//! ([`inference::bootstrap_decomposition`]).
//!
//! [`mca`] builds a socioeconomic score from categorical asset variables,
//! [`synth`] generates data with known true components, and [`report`]
//! renders text, JSON and CSV output.

pub mod cli;
pub mod data;
pub mod decomposition;
pub mod design;
pub mod error;
pub mod inference;
pub mod mca;
pub mod ols;
mod qr;
pub mod report;
pub mod synth;

pub use data::{split_groups, validate, Cell, CsvOptions, Dataset, ModelSpec, OutcomeTransform, VariableKind, VariableSpec};
pub use decomposition::{consistency_check, detailed_by_variable, threefold, twofold, Reference};
pub use design::{build_design, column_means, DesignMatrix, MeanVector};
pub use error::{Error, Result};
pub use inference::{bootstrap_decomposition, BootstrapConfig, ComponentIntervals};
pub use mca::{fit_mca, score_individuals, McaModel};
pub use ols::{coefficient_intervals, fit_ols, significance_stars, OlsFit};
pub use qr::RANK_TOLERANCE;
