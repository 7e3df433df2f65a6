//! Meshes, point clouds, normalization into `[-1, 1]³` and exact signed
//! distance queries.

mod bvh;
mod closest;
pub mod io;
mod mesh;
mod noise;
mod normalize;
pub mod oracle;
mod vec3;

pub use bvh::Bvh;
pub use closest::{closest_point_on_triangle, ClosestFeature, TriangleHit};
pub use io::{load_labels, load_mesh, load_point_cloud, save_labels, save_mesh_obj, save_point_cloud};
pub use mesh::{SurfaceQuery, TriangleMesh};
pub use noise::inject_gaussian_noise;
pub use normalize::{normalize, normalize_shared, NormalizationTransform, DEFAULT_MARGIN};
pub use vec3::Vec3;

use crate::error::{Error, Result};

/// A set of 3D points with optional per-point anomaly labels (0 normal, 1 anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub labels: Option<Vec<u8>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            labels: None,
        }
    }

    pub fn with_labels(points: Vec<Vec3>, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        Ok(Self {
            points,
            labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
