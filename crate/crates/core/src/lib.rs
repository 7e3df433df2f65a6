//! Surface-based anomaly detection for 3D point clouds.
//!
//! A signed distance field is learned from a handful of normal meshes: training
//! points are synthesized on and around the surface ([`npg`]), embedded through a
//! pyramid of learnable voxel feature grids ([`mlf`]), fused and decoded by a small
//! perceptron ([`isd`]) and optimized with Adam ([`train`]). At test time the
//! magnitude of the predicted distance is the per-point anomaly score and the
//! maximum over a cloud is the object score ([`infer`], [`metrics`]).
//!
//! The [`cli`] module backs the `sdfad` binary; [`synth`] produces synthetic
//! meshes and anomalous test clouds for desk-scale experiments.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod infer;
pub mod isd;
pub mod metrics;
pub mod mlf;
pub mod npg;
pub mod real;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{NormalizationTransform, PointCloud, TriangleMesh, Vec3};
pub use infer::{noise_sweep, score_points, NoiseSweepRow, ScoreReport};
pub use isd::{Activation, NetConfig, SdfNet};
pub use metrics::{aupr, auroc};
pub use mlf::{FeatureGridPyramid, FeatureVolume, PyramidConfig};
pub use npg::{generate_training_set, GeneratedPointSet, PointOrigin, SamplingConfig};
pub use real::Real;
pub use train::{train, ModelConfig, TrainConfig, TrainedModel};
