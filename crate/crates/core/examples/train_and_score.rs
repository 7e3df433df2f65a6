//! Train on a clean icosphere, then score a test cloud with a bump defect and
//! a clean held-out cloud.
//!
//!     cargo run --release --example train_and_score [steps] [model.ckpt]

use std::time::Instant;

use sdfad::synth::{synth, AnomalyKind, SynthSpec};
use sdfad::train::{save_checkpoint, train_on_meshes};
use sdfad::{score_points, ModelConfig, SamplingConfig, TrainConfig};

fn main() -> sdfad::Result<()> {
    let steps = std::env::args().nth(1).map_or(2000, |s| s.parse().expect("steps"));

    let defect = synth(&SynthSpec::default())?;
    let clean = synth(&SynthSpec {
        anomaly: AnomalyKind::None,
        seed: 1,
        ..Default::default()
    })?;

    let t = Instant::now();
    let model = train_on_meshes(
        &[defect.mesh.clone()],
        &SamplingConfig::default(),
        &ModelConfig::default(),
        &TrainConfig {
            steps,
            ..Default::default()
        },
    )?;
    let losses = &model.loss_history;
    println!(
        "{steps} steps in {:.1?}: loss {:.3e} -> {:.3e}",
        t.elapsed(),
        losses[0],
        losses[losses.len() - 1]
    );

    let anomalous = score_points(&model, &defect.cloud)?;
    let held_out = score_points(&model, &clean.cloud)?;
    let metrics = anomalous.metrics.expect("test cloud has both classes");
    println!("point AUROC {:.4}  AUPR {:.4}", metrics.auroc, metrics.aupr);
    println!(
        "object score: defective {:.4}, clean {:.4}",
        anomalous.object_score, held_out.object_score
    );
    if let Some(path) = std::env::args().nth(2) {
        save_checkpoint(&model, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
