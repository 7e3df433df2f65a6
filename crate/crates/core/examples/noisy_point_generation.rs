//! Build a training set of surface, near-surface and uniform points with
//! ground-truth signed distances, and optionally dump it as CSV.
//!
//!     cargo run --example noisy_point_generation [out.csv]

use sdfad::geometry::normalize;
use sdfad::synth::icosphere;
use sdfad::{generate_training_set, PointOrigin, SamplingConfig};

fn main() -> sdfad::Result<()> {
    let (mesh, _) = normalize(&icosphere(4), 0.9)?;
    let config = SamplingConfig {
        base_surface_count: 5000,
        ratio: [2, 2, 1],
        near_sigma: 0.05,
        seed: 7,
    };
    let set = generate_training_set(&mesh, &config)?;

    for origin in [PointOrigin::Surface, PointOrigin::NearSurface, PointOrigin::Uniform] {
        let d: Vec<f64> = (0..set.len())
            .filter(|&i| set.origin[i] == origin)
            .map(|i| set.gt_signed_distance[i])
            .collect();
        let inside = d.iter().filter(|&&x| x < 0.0).count();
        let mean_abs = d.iter().map(|x| x.abs()).sum::<f64>() / d.len() as f64;
        println!(
            "{:>8}: {:>5} points, mean |d*| {:.4}, {:>4} inside",
            origin.as_str(),
            d.len(),
            mean_abs,
            inside
        );
    }

    if let Some(path) = std::env::args().nth(1) {
        set.write_csv(&path)?;
        println!("wrote {path}");
    }
    Ok(())
}
