//! Synthetic shapes with bump and dent defects; writes mesh, test cloud and
//! labels for each combination into a directory.
//!
//!     cargo run --example synthetic_anomalies [out_dir]

use sdfad::synth::{write_synth, AnomalyKind, Shape, SynthSpec};

fn main() -> sdfad::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic".into());
    for shape in [Shape::Sphere, Shape::Box, Shape::Torus] {
        for anomaly in [AnomalyKind::Bump, AnomalyKind::Dent] {
            let spec = SynthSpec {
                shape,
                anomaly,
                ..Default::default()
            };
            let name = format!("{shape:?}_{anomaly:?}").to_lowercase();
            let dir = std::path::Path::new(&out).join(&name);
            std::fs::create_dir_all(&dir).map_err(|e| sdfad::Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let result = write_synth(&spec, dir.join("mesh.obj"), dir.join("cloud.ply"), dir.join("labels.csv"))?;
            let labels = result.cloud.labels.as_deref().unwrap_or_default();
            let positives = labels.iter().filter(|&&l| l == 1).count();
            println!(
                "{name:<13} {:>5} faces, patch of {:>3} vertices, {:>4}/{} anomalous points ({:.2}%)",
                result.mesh.face_count(),
                result.patch.len(),
                positives,
                labels.len(),
                100.0 * positives as f64 / labels.len() as f64
            );
        }
    }
    Ok(())
}
