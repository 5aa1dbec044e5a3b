//! Fairness-aware training when sensitive-group labels are only partially
//! annotated.
//!
//! Most fairness-aware training methods assume every training row carries a
//! sensitive-group label. In practice group labels are expensive and
//! privacy-sensitive, so only a subset of rows has them. This crate provides
//! the building blocks for that setting:
//!
//! - [`data`]: tabular datasets with optional group labels, CSV I/O, and the
//!   group-labeled / group-unlabeled partition.
//! - [`metrics`]: equalized-odds disparity metrics (`delta_m`, `delta_a`) and
//!   per-(group, class) accuracy tables.
//! - [`mlp`] / [`train`]: a small two-layer softmax network with exact
//!   analytic gradients and an Adam trainer with plateau learning-rate decay.
//! - [`cgl`]: confidence-based group-label assignment — train an auxiliary
//!   group classifier, search a confidence threshold on a validation split,
//!   trust confident predictions and randomize the rest.
//! - [`fairtrain`]: fairness-aware trainers (reweighting, HSIC penalty,
//!   MMD distillation penalty) plus the accuracy-floor model-selection rule.
//! - [`kernels`]: finite-sample HSIC and squared-MMD estimators with the
//!   feature gradients the penalties need.
//! - [`world`]: exact finite joint distributions over (X, A, Y) used to
//!   verify the label-assignment transforms by enumeration.
//! - [`synth`]: seeded synthetic biased-dataset generators and group-label
//!   masking at a target ratio.
//! - [`harness`]: the experiment driver — ratio sweeps, the τ-study,
//!   aggregation into tables, and SVG plot emission.
//!
//! Every operation that draws randomness takes a [`rng::SeededRng`] so runs
//! are bit-reproducible. Start with the runnable programs under `examples/`.

pub mod cgl;
pub mod conditional;
pub mod data;
pub mod error;
pub mod fairtrain;
pub mod harness;
pub mod kernels;
pub mod metrics;
pub mod mlp;
pub mod rng;
pub mod synth;
pub mod train;
pub mod world;

pub use error::{Error, Result};
