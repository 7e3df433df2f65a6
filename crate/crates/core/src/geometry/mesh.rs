use std::collections::HashMap;
use std::sync::OnceLock;

use super::bvh::Bvh;
use super::closest::{ClosestFeature, TriangleHit};
use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Indexed triangle surface with the derived data needed for sampling and
/// signed distance queries.
///
/// Zero-area faces are kept in `faces` but flagged in `degenerate`; they carry
/// a zero normal, receive no sampling mass and are never closest-feature
/// candidates.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub face_areas: Vec<f64>,
    pub face_normals: Vec<Vec3>,
    pub degenerate: Vec<bool>,
    /// Angle-weighted vertex normals (zero for vertices with no valid face).
    pub vertex_pseudonormals: Vec<Vec3>,
    /// Per face, the pseudonormal of edges `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.
    pub edge_pseudonormals: Vec<[Vec3; 3]>,
    watertight: bool,
    bvh: OnceLock<Bvh>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = vertices.len();
        if let Some((i, f)) = faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&v| v as usize >= n))
        {
            return Err(Error::InvalidArgument(format!(
                "face {i} references vertex {:?} but mesh has {n} vertices",
                f
            )));
        }

        let mut face_areas = Vec::with_capacity(faces.len());
        let mut face_normals = Vec::with_capacity(faces.len());
        let mut degenerate = Vec::with_capacity(faces.len());
        for f in &faces {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(c - a);
            let area = 0.5 * cross.norm();
            match cross.try_normalize() {
                Some(normal) if area > 0.0 => {
                    face_areas.push(area);
                    face_normals.push(normal);
                    degenerate.push(false);
                }
                _ => {
                    face_areas.push(0.0);
                    face_normals.push(Vec3::ZERO);
                    degenerate.push(true);
                }
            }
        }

        let mut vertex_sum = vec![Vec3::ZERO; n];
        let mut edge_sum: HashMap<(u32, u32), (Vec3, u32)> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            if degenerate[fi] {
                continue;
            }
            let normal = face_normals[fi];
            for k in 0..3 {
                let p = vertices[f[k] as usize];
                let e1 = vertices[f[(k + 1) % 3] as usize] - p;
                let e2 = vertices[f[(k + 2) % 3] as usize] - p;
                let angle = e1.cross(e2).norm().atan2(e1.dot(e2));
                vertex_sum[f[k] as usize] += normal * angle;

                let entry = edge_sum.entry(edge_key(f[k], f[(k + 1) % 3])).or_default();
                entry.0 += normal;
                entry.1 += 1;
            }
        }

        let watertight = edge_sum.values().all(|&(_, count)| count == 2);
        if !watertight {
            log::warn!("mesh is not watertight; inside/outside signs may be unreliable");
        }

        let vertex_pseudonormals = vertex_sum
            .into_iter()
            .map(|v| v.try_normalize().unwrap_or(Vec3::ZERO))
            .collect();
        let edge_pseudonormals = faces
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                std::array::from_fn(|k| {
                    if degenerate[fi] {
                        return Vec3::ZERO;
                    }
                    edge_sum
                        .get(&edge_key(f[k], f[(k + 1) % 3]))
                        .and_then(|(sum, _)| sum.try_normalize())
                        .unwrap_or(face_normals[fi])
                })
            })
            .collect();

        Ok(Self {
            vertices,
            faces,
            face_areas,
            face_normals,
            degenerate,
            vertex_pseudonormals,
            edge_pseudonormals,
            watertight,
            bvh: OnceLock::new(),
        })
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn valid_face_count(&self) -> usize {
        self.degenerate.iter().filter(|d| !**d).count()
    }

    /// Every edge is shared by exactly two non-degenerate faces.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Axis-aligned bounds `(min, max)` of the vertices.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.vertices.iter().fold(
            (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY)),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    /// Same faces, new vertex positions (derived data recomputed).
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        Self::new(vertices, self.faces.clone())
    }

    /// Signed distance from `query` to the surface: negative inside, positive
    /// outside. The hierarchy is built on first use.
    pub fn signed_distance(&self, query: Vec3) -> Result<f64> {
        Ok(self.closest(query)?.signed_distance)
    }

    /// Closest surface point with its face, feature and signed distance.
    pub fn closest(&self, query: Vec3) -> Result<SurfaceQuery> {
        if self.valid_face_count() == 0 {
            return Err(Error::NoValidFaces);
        }
        let bvh = self.bvh.get_or_init(|| Bvh::build(self));
        let (face, hit) = bvh
            .closest(self, query)
            .expect("hierarchy over valid faces always yields a hit");
        Ok(self.finish_query(query, face, hit))
    }

    pub(crate) fn finish_query(&self, query: Vec3, face: usize, hit: TriangleHit) -> SurfaceQuery {
        let distance = hit.distance_squared.sqrt();
        let normal = match hit.feature {
            ClosestFeature::Face => self.face_normals[face],
            ClosestFeature::Edge(k) => self.edge_pseudonormals[face][k as usize],
            ClosestFeature::Vertex(k) => {
                self.vertex_pseudonormals[self.faces[face][k as usize] as usize]
            }
        };
        let signed_distance = if (query - hit.point).dot(normal) < 0.0 {
            -distance
        } else {
            distance
        };
        SurfaceQuery {
            face,
            point: hit.point,
            feature: hit.feature,
            signed_distance,
        }
    }
}

/// Result of a closest-point query against a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceQuery {
    pub face: usize,
    pub point: Vec3,
    pub feature: ClosestFeature,
    pub signed_distance: f64,
}

fn edge_key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}
