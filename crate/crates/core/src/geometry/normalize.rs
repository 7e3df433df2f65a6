use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use super::vec3::Vec3;
use super::PointCloud;
use crate::error::{Error, Result};

/// Default margin: shapes fill `[-0.9, 0.9]³`, leaving headroom in `[-1, 1]³`.
pub const DEFAULT_MARGIN: f64 = 0.9;

/// Similarity transform `p ↦ (p − center) · scale` into the normalized cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub center: Vec3,
    pub scale: f64,
    pub margin: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        Self {
            center: Vec3::ZERO,
            scale: 1.0,
            margin: 1.0,
        }
    }

    /// Transform that maps the box `[min, max]` into `[-margin, margin]³`,
    /// centered, with uniform scale.
    pub fn from_bounds(min: Vec3, max: Vec3, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "margin must be in (0, 1], got {margin}"
            )));
        }
        let half_extent = 0.5 * (max - min).max_element();
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::DegenerateExtent);
        }
        Ok(Self {
            center: (min + max) * 0.5,
            scale: margin / half_extent,
            margin,
        })
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    #[inline]
    pub fn invert(&self, p: Vec3) -> Vec3 {
        p / self.scale + self.center
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> Result<TriangleMesh> {
        mesh.with_vertices(mesh.vertices.iter().map(|&v| self.apply(v)).collect())
    }

    pub fn apply_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud.points.iter().map(|&p| self.apply(p)).collect(),
            labels: cloud.labels.clone(),
        }
    }
}

/// Normalize a single mesh into `[-margin, margin]³`.
pub fn normalize(mesh: &TriangleMesh, margin: f64) -> Result<(TriangleMesh, NormalizationTransform)> {
    let (min, max) = mesh.bounds();
    let transform = NormalizationTransform::from_bounds(min, max, margin)?;
    Ok((transform.apply_mesh(mesh)?, transform))
}

/// Normalize several meshes with one transform built from their union bounds.
pub fn normalize_shared(
    meshes: &[TriangleMesh],
    margin: f64,
) -> Result<(Vec<TriangleMesh>, NormalizationTransform)> {
    if meshes.is_empty() {
        return Err(Error::InvalidArgument("no meshes to normalize".into()));
    }
    let (min, max) = meshes.iter().map(TriangleMesh::bounds).fold(
        (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
        |(lo, hi), (a, b)| (lo.min(a), hi.max(b)),
    );
    let transform = NormalizationTransform::from_bounds(min, max, margin)?;
    let normalized = meshes
        .iter()
        .map(|m| transform.apply_mesh(m))
        .collect::<Result<_>>()?;
    Ok((normalized, transform))
}
