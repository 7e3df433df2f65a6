//! Synthetic meshes and anomalous test clouds.
//!
//! A clean primitive serves as the training mesh. The test cloud is sampled
//! from a copy in which a geodesic patch around a random vertex has been
//! pushed outward (bump) or inward (dent); points farther than half the
//! displacement from the clean surface are labelled anomalous.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{save_labels, save_mesh_obj, save_point_cloud, PointCloud, TriangleMesh, Vec3};
use crate::npg::{build_sampling_table, sample_surface};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Box,
    Torus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    None,
    Bump,
    Dent,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Shape::Sphere),
            "box" => Ok(Shape::Box),
            "torus" => Ok(Shape::Torus),
            _ => Err(Error::InvalidArgument(format!("unknown shape `{s}` (sphere, box, torus)"))),
        }
    }
}

impl FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AnomalyKind::None),
            "bump" => Ok(AnomalyKind::Bump),
            "dent" => Ok(AnomalyKind::Dent),
            _ => Err(Error::InvalidArgument(format!("unknown anomaly `{s}` (none, bump, dent)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub shape: Shape,
    pub subdivisions: u32,
    pub anomaly: AnomalyKind,
    pub anomaly_radius: f64,
    pub anomaly_height: f64,
    /// Number of points in the test cloud.
    pub cloud_points: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            shape: Shape::Sphere,
            subdivisions: 4,
            anomaly: AnomalyKind::Bump,
            anomaly_radius: 0.2,
            anomaly_height: 0.1,
            cloud_points: 8192,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.anomaly != AnomalyKind::None && !(self.anomaly_radius > 0.0 && self.anomaly_height > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "anomaly radius and height must be > 0, got {} and {}",
                self.anomaly_radius, self.anomaly_height
            )));
        }
        if self.subdivisions > 8 {
            return Err(Error::InvalidArgument(format!(
                "at most 8 subdivisions, got {}",
                self.subdivisions
            )));
        }
        if self.cloud_points == 0 {
            return Err(Error::InvalidArgument("test cloud needs at least one point".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub mesh: TriangleMesh,
    pub anomalous_mesh: TriangleMesh,
    /// Displaced vertices (empty without an anomaly).
    pub patch: Vec<u32>,
    /// Test cloud with per-point labels.
    pub cloud: PointCloud,
}

/// Unit-radius icosphere.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(|p| Vec3::from(p).try_normalize().unwrap())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a as usize] + vertices[b as usize]) * 0.5;
                vertices.push(m.try_normalize().unwrap());
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Cube `[-1, 1]³` with `2^subdivisions` segments per edge.
pub fn box_mesh(subdivisions: u32) -> TriangleMesh {
    let n = 1i32 << subdivisions;
    let mut index: HashMap<[i32; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vertex = |c: [i32; 3], vertices: &mut Vec<Vec3>| -> u32 {
        *index.entry(c).or_insert_with(|| {
            vertices.push(Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * (2.0 / n as f64) - Vec3::splat(1.0));
            (vertices.len() - 1) as u32
        })
    };
    let mut faces = Vec::new();
    // Each side: fixed axis, its value, and the two in-plane axes ordered so
    // that (u × v) points outward.
    for (axis, side) in [(0usize, n), (0, 0), (1, n), (1, 0), (2, n), (2, 0)] {
        let (mut u, mut v) = ((axis + 1) % 3, (axis + 2) % 3);
        if side == 0 {
            std::mem::swap(&mut u, &mut v);
        }
        let at = |i: i32, j: i32| {
            let mut c = [0; 3];
            c[axis] = side;
            c[u] = i;
            c[v] = j;
            c
        };
        for i in 0..n {
            for j in 0..n {
                let a = vertex(at(i, j), &mut vertices);
                let b = vertex(at(i + 1, j), &mut vertices);
                let c = vertex(at(i + 1, j + 1), &mut vertices);
                let d = vertex(at(i, j + 1), &mut vertices);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("box is valid")
}

/// Torus around the z axis with major radius 1 and minor radius 0.4.
pub fn torus(subdivisions: u32) -> TriangleMesh {
    let (major, minor) = (1.0, 0.4);
    let nu = 12 * (subdivisions.max(1) as usize);
    let nv = 6 * (subdivisions.max(1) as usize);
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let a = std::f64::consts::TAU * i as f64 / nu as f64;
        for j in 0..nv {
            let b = std::f64::consts::TAU * j as f64 / nv as f64;
            let r = major + minor * b.cos();
            vertices.push(Vec3::new(r * a.cos(), r * a.sin(), minor * b.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces).expect("torus is valid")
}

pub fn primitive(shape: Shape, subdivisions: u32) -> TriangleMesh {
    match shape {
        Shape::Sphere => icosphere(subdivisions),
        Shape::Box => box_mesh(subdivisions),
        Shape::Torus => torus(subdivisions),
    }
}

/// Edge-graph geodesic distance from `source` to every vertex.
pub fn graph_geodesic(mesh: &TriangleMesh, source: usize) -> Vec<f64> {
    let n = mesh.vertices.len();
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new(); n];
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
    }
    let mut dist = vec![f64::INFINITY; n];
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((bits, v))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[v] {
            continue;
        }
        for &w in &adjacency[v] {
            let w = w as usize;
            let nd = d + (mesh.vertices[w] - mesh.vertices[v]).norm();
            if nd < dist[w] {
                dist[w] = nd;
                // Non-negative floats order like their bit patterns.
                heap.push(Reverse((nd.to_bits(), w)));
            }
        }
    }
    dist
}

/// Displace every vertex within geodesic `radius` of `center` by `height`
/// along its pseudonormal (negative height moves inward).
pub fn displace_patch(mesh: &TriangleMesh, center: usize, radius: f64, height: f64) -> Result<(TriangleMesh, Vec<u32>)> {
    let dist = graph_geodesic(mesh, center);
    let patch: Vec<u32> = (0..mesh.vertices.len())
        .filter(|&v| dist[v] <= radius)
        .map(|v| v as u32)
        .collect();
    let mut vertices = mesh.vertices.clone();
    for &v in &patch {
        vertices[v as usize] += mesh.vertex_pseudonormals[v as usize] * height;
    }
    Ok((mesh.with_vertices(vertices)?, patch))
}

pub fn synth(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mesh = primitive(spec.shape, spec.subdivisions);
    let (anomalous_mesh, patch) = match spec.anomaly {
        AnomalyKind::None => (mesh.clone(), Vec::new()),
        kind => {
            let mut r = rng::seeded(spec.seed, rng::SYNTH_ANOMALY);
            let center = r.random_range(0..mesh.vertices.len());
            let height = if kind == AnomalyKind::Bump {
                spec.anomaly_height
            } else {
                -spec.anomaly_height
            };
            displace_patch(&mesh, center, spec.anomaly_radius, height)?
        }
    };
    let table = build_sampling_table(&anomalous_mesh)?;
    let points = sample_surface(
        &anomalous_mesh,
        &table,
        spec.cloud_points,
        &mut rng::seeded(spec.seed, rng::SYNTH_CLOUD),
    );
    let labels = match spec.anomaly {
        AnomalyKind::None => vec![0; points.len()],
        _ => {
            let threshold = spec.anomaly_height / 2.0;
            points
                .iter()
                .map(|&p| Ok(u8::from(mesh.signed_distance(p)?.abs() > threshold)))
                .collect::<Result<_>>()?
        }
    };
    let cloud = PointCloud::with_labels(points, labels)?;
    Ok(SynthOutput {
        mesh,
        anomalous_mesh,
        patch,
        cloud,
    })
}

/// Write the clean mesh (OBJ), the test cloud (PLY) and its labels (CSV).
pub fn write_synth(
    spec: &SynthSpec,
    mesh_out: impl AsRef<Path>,
    cloud_out: impl AsRef<Path>,
    labels_out: impl AsRef<Path>,
) -> Result<SynthOutput> {
    let out = synth(spec)?;
    save_mesh_obj(mesh_out, &out.mesh)?;
    save_point_cloud(cloud_out, &out.cloud)?;
    save_labels(labels_out, out.cloud.labels.as_deref().unwrap_or_default())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_closed_and_outward() {
        for shape in [Shape::Sphere, Shape::Box, Shape::Torus] {
            let m = primitive(shape, 2);
            assert!(m.is_watertight(), "{shape:?}");
            let inside = if shape == Shape::Torus {
                Vec3::new(1.0, 0.0, 0.0)
            } else {
                Vec3::ZERO
            };
            assert!(m.signed_distance(inside).unwrap() < 0.0, "{shape:?}");
            assert!(m.signed_distance(Vec3::splat(3.0)).unwrap() > 0.0, "{shape:?}");
        }
    }

    #[test]
    fn icosphere_counts() {
        let m = icosphere(3);
        assert_eq!(m.face_count(), 20 * 64);
        assert_eq!(m.vertices.len(), 10 * 64 + 2);
    }

    #[test]
    fn torus_tube_center_depth() {
        let d = torus(4).signed_distance(Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((d + 0.4).abs() < 0.02, "{d}");
    }

    #[test]
    fn no_anomaly_means_no_positive_labels() {
        let out = synth(&SynthSpec {
            anomaly: AnomalyKind::None,
            cloud_points: 500,
            subdivisions: 2,
            ..Default::default()
        })
        .unwrap();
        assert!(out.cloud.labels.unwrap().iter().all(|&l| l == 0));
        assert!(out.patch.is_empty());
    }

    #[test]
    fn dent_moves_inward() {
        let spec = SynthSpec {
            anomaly: AnomalyKind::Dent,
            ..Default::default()
        };
        let out = synth(&spec).unwrap();
        assert!(!out.patch.is_empty());
        for &v in &out.patch {
            let p = out.anomalous_mesh.vertices[v as usize];
            assert!((p.norm() - 0.9).abs() < 1e-3);
        }
    }

    #[test]
    fn invalid_spec() {
        let spec = SynthSpec {
            anomaly_radius: 0.0,
            ..Default::default()
        };
        assert!(matches!(synth(&spec), Err(Error::InvalidArgument(_))));
    }
}
