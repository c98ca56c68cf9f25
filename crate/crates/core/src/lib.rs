//! Synthetic categorical data with a known partition of subjects.
//!
//! Subjects are drawn from a latent-class mixture under local independence:
//! given its cluster, every variable of a subject is an independent draw from
//! that cluster's profile. Marginal dependence between variables comes only
//! from the mixture and is computed exactly by [`moments`]. [`patterns`] and
//! [`calibration`] build profiles whose homogenous groups reach a chosen
//! within-group covariance or correlation, and [`association`] measures what
//! the generated data actually shows.

pub mod association;
pub mod calibration;
pub mod config;
pub mod error;
pub mod generator;
pub mod matrix;
pub mod model;
pub mod moments;
pub mod patterns;
pub mod report;
pub mod sampling;

pub use error::{Error, Result};
pub use generator::{generate, GenerateOptions, GeneratorSpec};
pub use matrix::Matrix;
pub use model::{
    ClusterSpec, Dataset, DependenceTarget, GroupStructure, ProbabilityVector, ProfileMatrix,
    Variable, VariableDomain, VariableKind,
};
