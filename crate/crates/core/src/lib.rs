//! Analytical inverse kinematics of the Tricept 3-DoF parallel manipulator
//! and two neural surrogates trained to approximate it: a one-hidden-layer
//! perceptron fitted with Levenberg-Marquardt, and a Gaussian RBF network
//! grown one neuron at a time.
//!
//! Module map:
//!
//! - [`kinematics`]: joint positions, inverse kinematics, closure residuals,
//!   and a Newton forward-kinematics solver used as a round-trip oracle.
//! - [`numerics`]: the small dense linear algebra the trainers need.
//! - [`dataset`]: corpus generation, statistics, min-max scaling, splits, CSV.
//! - [`mlp`] and [`rbf`]: the two surrogates and their trainers.
//! - [`evaluation`]: metrics, error histograms, curve exports and reports.
//! - [`config`] and [`cli`]: the config-driven command-line pipeline.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kinematics;
pub mod mlp;
pub mod numerics;
pub mod rbf;

pub use error::{Error, Result};
