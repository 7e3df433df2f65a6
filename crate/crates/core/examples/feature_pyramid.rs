//! Multi-resolution feature grids: level sizes, trilinear queries, fusion by
//! summation, and the gradient scattered back to the eight cell corners.

use sdfad::mlf::{init_pyramid, PyramidConfig, Stencil, VolumeGrad};
use sdfad::rng::{seeded, PYRAMID_INIT};
use sdfad::Vec3;

fn main() -> sdfad::Result<()> {
    let config = PyramidConfig::default();
    let pyramid = init_pyramid::<f32, _>(&config, &mut seeded(0, PYRAMID_INIT))?;
    for v in &pyramid.levels {
        println!(
            "level {}: {}^3 cells, {} vertices x {} features",
            v.level,
            v.resolution,
            v.vertex_count(),
            v.dim
        );
    }
    println!(
        "{} parameters, ~{:.1} MiB with optimizer state",
        config.parameter_count(),
        config.estimated_bytes(4) as f64 / (1 << 20) as f64
    );

    let p = Vec3::new(0.3, -0.55, 0.1);
    let per_level = pyramid.query(p);
    let mut stencils = vec![
        Stencil {
            vertices: [0; 8],
            weights: [0.0; 8]
        };
        pyramid.levels.len()
    ];
    let mut fused = vec![0.0; pyramid.feature_dim()];
    pyramid.fused(p, &mut stencils, &mut fused);
    let sum0: f64 = per_level.iter().map(|f| f[0] as f64).sum();
    println!("feature 0 at {:?}: per level {:?}, fused {:.6} (sum {:.6})", p.to_array(), per_level.iter().map(|f| f[0]).collect::<Vec<_>>(), fused[0], sum0);

    let finest = pyramid.levels.last().unwrap();
    let mut grad = VolumeGrad::zeros_like(finest);
    finest.interpolate_backward(p, &vec![1.0; finest.dim], &mut grad);
    for &v in grad.touched() {
        println!(
            "  corner {:>6} at {:?} receives weight {:.4}",
            v,
            finest.vertex_position(v as usize).to_array(),
            grad.vertex(v as usize)[0]
        );
    }
    Ok(())
}
