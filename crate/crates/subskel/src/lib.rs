//! Sub-skeleton trajectory analysis.
//!
//! Turns labeled skeleton joint recordings into feature trajectories, compares
//! them with speed-invariant distance measures (continuous/discrete Fréchet,
//! DTW), greedily mines discriminative absolute/relative joint-set features,
//! and classifies with interpretable nearest-neighbor and distance-matrix
//! classifiers. Supporting pieces: sequence normalization, error-bounded curve
//! simplification, an exact metric k-NN index, Fourier-based segmentation of
//! repeated-sign recordings, and a synthetic data generator plus evaluation
//! harness for end-to-end experiments.

pub mod classify;
pub mod distances;
pub mod error;
pub mod features;
pub mod harness;
pub mod index;
pub mod mining;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod real;
pub mod segment;
pub mod simplify;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
pub use real::Real;

/// Coordinate scalar used by the data model and the pipeline.
pub type Scalar = f64;

/// `f64` trajectory (the pipeline default).
pub type Trajectory64 = trajectory::Trajectory<f64>;
/// `f32` trajectory for callers that trade precision for memory.
pub type Trajectory32 = trajectory::Trajectory<f32>;

pub use distances::{DistanceMeasure, MeasureKind};
pub use model::{Frame, FrameSequence, LabeledDataset, Skeleton, SplitSpec};
pub use trajectory::Trajectory;
