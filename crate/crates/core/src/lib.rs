//! Numerically stable differential invariants of discrete planar curves.
//!
//! The crate learns curvature and arc-length invariants of planar curves with
//! respect to the Euclidean, equi-affine and full-affine transformation groups
//! through self-supervised Siamese training, and combines the trained models
//! into invariant signature curves. Axiomatic Euclidean estimators are
//! provided both as a baseline and as test oracles.
//!
//! Modules follow the pipeline order:
//!
//! - [`curves`]: discrete curve representation, non-uniform down-sampling,
//!   window extraction and canonical sample normalization.
//! - [`groups`]: planar transformation groups (SE(2), E(2), SA(2), A(2)),
//!   their actions, and bounded random sampling.
//! - [`dataset`]: grayscale images, Gaussian blur, level-curve extraction and
//!   curve dataset persistence.
//! - [`axiomatic`]: joint-invariant and closed-form differential-invariant
//!   estimators (circumcircle curvature, jet formulas, arc-length elements).
//! - [`net`]: a small feed-forward network with explicit reverse-mode
//!   gradients and an adaptive first-order optimizer.
//! - [`training`]: tuplet generation, the curvature and arc-length losses,
//!   and the training loops.
//! - [`signature`]: signature construction from trained models, calibration
//!   and signature comparison.
//!
//! Data-parallel inner loops (batch generation, batch gradients, per-point
//! signature evaluation) run on rayon when the default `parallel` feature is
//! enabled and fall back to equivalent sequential loops without it. Both
//! paths produce bitwise-identical results.

pub mod axiomatic;
pub mod curves;
pub mod dataset;
pub mod groups;
pub mod net;
pub mod par;
pub mod shapes;
pub mod signature;
pub mod training;

pub use curves::{PlanarCurve, Point2, PointSample, SampleKind, SamplingPmf};
pub use groups::{GroupElement, GroupKind};
pub use signature::Signature;
