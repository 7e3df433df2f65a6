//! Training point synthesis: area-weighted surface samples, Gaussian
//! near-surface samples and uniform samples of `[-1, 1]³`, each labelled with
//! its ground-truth signed distance.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};
use crate::rng::{self, PointClassStream};

/// Inverse-CDF table for choosing faces with probability proportional to area.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTable {
    pub cumulative_probability: Vec<f64>,
    pub total_area: f64,
}

impl SamplingTable {
    pub fn probability(&self, face: usize) -> f64 {
        let prev = if face == 0 {
            0.0
        } else {
            self.cumulative_probability[face - 1]
        };
        self.cumulative_probability[face] - prev
    }

    /// Face whose cumulative interval contains `u ∈ [0, 1)`. Zero-mass faces
    /// have empty intervals and are never returned.
    pub fn select(&self, u: f64) -> usize {
        let i = self.cumulative_probability.partition_point(|&c| c <= u);
        i.min(self.cumulative_probability.len() - 1)
    }
}

pub fn build_sampling_table(mesh: &TriangleMesh) -> Result<SamplingTable> {
    let total_area: f64 = mesh.face_areas.iter().sum();
    let last_valid = mesh
        .degenerate
        .iter()
        .rposition(|d| !d)
        .ok_or(Error::NoValidFaces)?;
    let mut acc = 0.0;
    let cumulative_probability = mesh
        .face_areas
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if i >= last_valid {
                1.0
            } else {
                acc += a / total_area;
                acc.min(1.0)
            }
        })
        .collect();
    Ok(SamplingTable {
        cumulative_probability,
        total_area,
    })
}

/// Uniform point on triangle `(p1, p2, p3)` from two uniform variates via the
/// square-root warp: `μ = 1 − √u1`, `ν = √u1 (1 − √u2)`.
pub fn sample_surface_point(face: [Vec3; 3], u1: f64, u2: f64) -> Vec3 {
    let [p1, p2, p3] = face;
    let s = u1.sqrt();
    let mu = 1.0 - s;
    let nu = s * (1.0 - u2.sqrt());
    p1 * (1.0 - mu - nu) + p2 * mu + p3 * nu
}

/// `count` surface samples, returned with the index of the face each came from.
pub fn sample_surface_indexed<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    table: &SamplingTable,
    count: usize,
    rng: &mut R,
) -> Vec<(usize, Vec3)> {
    (0..count)
        .map(|_| {
            let face = table.select(rng.random::<f64>());
            let u1 = rng.random::<f64>();
            let u2 = rng.random::<f64>();
            (face, sample_surface_point(mesh.triangle(face), u1, u2))
        })
        .collect()
}

pub fn sample_surface<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    table: &SamplingTable,
    count: usize,
    rng: &mut R,
) -> Vec<Vec3> {
    sample_surface_indexed(mesh, table, count, rng)
        .into_iter()
        .map(|(_, p)| p)
        .collect()
}

/// Offset every point by isotropic Gaussian noise `N(0, sigma² I)`.
pub fn sample_near_surface<R: Rng + ?Sized>(
    surface_points: &[Vec3],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("near-surface sigma must be > 0, got {sigma}")));
    }
    Ok(surface_points
        .iter()
        .map(|&p| {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            p + Vec3::new(x, y, z) * sigma
        })
        .collect())
}

/// Points uniformly distributed in `[-1, 1]³`.
pub fn sample_uniform<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<Vec3> {
    (0..count)
        .map(|_| {
            let x = rng.random_range(-1.0..=1.0);
            let y = rng.random_range(-1.0..=1.0);
            let z = rng.random_range(-1.0..=1.0);
            Vec3::new(x, y, z)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointOrigin {
    Surface,
    NearSurface,
    Uniform,
}

impl PointOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            PointOrigin::Surface => "surface",
            PointOrigin::NearSurface => "near",
            PointOrigin::Uniform => "uniform",
        }
    }
}

/// How many points of each class to generate and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Number of surface points `s`; the other classes scale with `ratio`.
    pub base_surface_count: usize,
    /// Proportions `(surface, near, uniform)`, anchored so `surface ↦ s`.
    pub ratio: [u32; 3],
    /// Standard deviation of near-surface offsets, in normalized units.
    pub near_sigma: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            base_surface_count: 20_000,
            ratio: [2, 2, 1],
            near_sigma: 0.05,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_surface_count == 0 {
            return Err(Error::InvalidArgument("base surface count must be positive".into()));
        }
        if self.ratio[0] == 0 {
            return Err(Error::InvalidArgument("surface ratio must be positive".into()));
        }
        if self.ratio[1] > 0 && !(self.near_sigma > 0.0 && self.near_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "near-surface sigma must be > 0, got {}",
                self.near_sigma
            )));
        }
        Ok(())
    }

    /// Per-class counts `round(s · α_class / α_surf)`.
    pub fn class_counts(&self) -> [usize; 3] {
        let s = self.base_surface_count as f64;
        let anchor = self.ratio[0] as f64;
        self.ratio.map(|a| (s * a as f64 / anchor).round() as usize)
    }
}

/// Training points with ground-truth signed distances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratedPointSet {
    pub points: Vec<Vec3>,
    pub gt_signed_distance: Vec<f64>,
    pub origin: Vec<PointOrigin>,
}

impl GeneratedPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, point: Vec3, d: f64, origin: PointOrigin) {
        self.points.push(point);
        self.gt_signed_distance.push(d);
        self.origin.push(origin);
    }

    pub fn extend(&mut self, other: GeneratedPointSet) {
        self.points.extend(other.points);
        self.gt_signed_distance.extend(other.gt_signed_distance);
        self.origin.extend(other.origin);
    }

    pub fn subset(&self, indices: &[usize]) -> GeneratedPointSet {
        GeneratedPointSet {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            gt_signed_distance: indices.iter().map(|&i| self.gt_signed_distance[i]).collect(),
            origin: indices.iter().map(|&i| self.origin[i]).collect(),
        }
    }

    pub fn count(&self, origin: PointOrigin) -> usize {
        self.origin.iter().filter(|&&o| o == origin).count()
    }

    /// CSV dump with header `x,y,z,d,origin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,d,origin\n");
        for i in 0..self.len() {
            let p = self.points[i];
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                p.x,
                p.y,
                p.z,
                self.gt_signed_distance[i],
                self.origin[i].as_str()
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::geometry::io::write_file(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Generate the training set for a single normalized mesh.
pub fn generate_training_set(mesh: &TriangleMesh, config: &SamplingConfig) -> Result<GeneratedPointSet> {
    generate_for_mesh(mesh, config, 0)
}

/// Generate the training set for training mesh number `mesh_index`; each
/// (mesh, class) pair draws from its own random stream.
pub fn generate_for_mesh(
    mesh: &TriangleMesh,
    config: &SamplingConfig,
    mesh_index: usize,
) -> Result<GeneratedPointSet> {
    config.validate()?;
    let (lo, hi) = mesh.bounds();
    if lo.min(-hi).to_array().iter().any(|&c| c < -1.0 - 1e-9) {
        return Err(Error::InvalidArgument("mesh must be normalized into [-1, 1]^3".into()));
    }
    let table = build_sampling_table(mesh)?;
    let [n_surf, n_near, n_uni] = config.class_counts();
    let stream = |c| rng::seeded(config.seed, rng::point_class_stream(mesh_index, c));

    let mut set = GeneratedPointSet::default();

    let surface = sample_surface(mesh, &table, n_surf, &mut stream(PointClassStream::Surface));
    for p in surface {
        set.push(p, 0.0, PointOrigin::Surface);
    }

    if n_near > 0 {
        let mut r = stream(PointClassStream::NearSurface);
        let base = sample_surface(mesh, &table, n_near, &mut r);
        for p in sample_near_surface(&base, config.near_sigma, &mut r)? {
            set.push(p, mesh.signed_distance(p)?, PointOrigin::NearSurface);
        }
    }

    for p in sample_uniform(n_uni, &mut stream(PointClassStream::Uniform)) {
        set.push(p, mesh.signed_distance(p)?, PointOrigin::Uniform);
    }
    Ok(set)
}
