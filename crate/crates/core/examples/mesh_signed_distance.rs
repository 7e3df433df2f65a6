//! Signed distances to a triangle mesh: BVH queries against the brute-force
//! reference, sign conventions, and normalization into the unit cube.
//!
//!     cargo run --example mesh_signed_distance [mesh.obj|mesh.ply]

use sdfad::geometry::oracle::brute_force_signed_distance;
use sdfad::geometry::{load_mesh, normalize, DEFAULT_MARGIN};
use sdfad::synth::torus;
use sdfad::Vec3;

fn main() -> sdfad::Result<()> {
    let mesh = match std::env::args().nth(1) {
        Some(path) => load_mesh(path)?,
        None => torus(4),
    };
    let (lo, hi) = mesh.bounds();
    println!(
        "{} vertices, {} faces, watertight: {}, bounds {:?} .. {:?}",
        mesh.vertices.len(),
        mesh.face_count(),
        mesh.is_watertight(),
        lo.to_array(),
        hi.to_array()
    );

    let (unit, transform) = normalize(&mesh, DEFAULT_MARGIN)?;
    println!("normalized with center {:?}, scale {:.4}", transform.center.to_array(), transform.scale);

    for q in [Vec3::ZERO, Vec3::new(0.6, 0.0, 0.0), Vec3::new(0.9, 0.9, 0.9), Vec3::new(0.0, 0.0, 0.2)] {
        let hit = unit.closest(q)?;
        let reference = brute_force_signed_distance(&unit, q)?;
        println!(
            "{:>24} -> d = {:+.6} (face {}, {:?}), brute force {:+.6}",
            format!("{:?}", q.to_array()),
            hit.signed_distance,
            hit.face,
            hit.feature,
            reference
        );
    }
    Ok(())
}
