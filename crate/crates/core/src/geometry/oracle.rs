//! Exhaustive reference implementations used to cross-check accelerated queries.

use super::closest::closest_point_on_triangle;
use super::mesh::{SurfaceQuery, TriangleMesh};
use super::vec3::Vec3;
use crate::error::{Error, Result};

/// Closest-point query by scanning every non-degenerate face.
pub fn brute_force_closest(mesh: &TriangleMesh, query: Vec3) -> Result<SurfaceQuery> {
    let mut best = None;
    for face in 0..mesh.face_count() {
        if mesh.degenerate[face] {
            continue;
        }
        let [a, b, c] = mesh.triangle(face);
        let hit = closest_point_on_triangle(query, a, b, c);
        // Strict comparison keeps the lowest face index on ties.
        if best
            .as_ref()
            .is_none_or(|(_, h): &(usize, super::TriangleHit)| hit.distance_squared < h.distance_squared)
        {
            best = Some((face, hit));
        }
    }
    let (face, hit) = best.ok_or(Error::NoValidFaces)?;
    Ok(mesh.finish_query(query, face, hit))
}

/// Signed distance by scanning every non-degenerate face.
pub fn brute_force_signed_distance(mesh: &TriangleMesh, query: Vec3) -> Result<f64> {
    Ok(brute_force_closest(mesh, query)?.signed_distance)
}
