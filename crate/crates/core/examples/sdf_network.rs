//! The distance decoder: a batched forward pass, the mean-squared loss and its
//! gradients, checked against central finite differences in 64-bit.

use sdfad::npg::generate_training_set;
use sdfad::synth::icosphere;
use sdfad::train::gradient_check;
use sdfad::{ModelConfig, NormalizationTransform, SamplingConfig, TrainConfig, TrainedModel};

fn main() -> sdfad::Result<()> {
    let model: TrainedModel<f64> = TrainedModel::initialize(
        NormalizationTransform::identity(),
        SamplingConfig::default(),
        ModelConfig::default(),
        TrainConfig::default(),
    )?;
    let widths: Vec<String> = model
        .net
        .layers
        .iter()
        .map(|l| format!("{}x{}", l.fan_out, l.fan_in))
        .collect();
    println!("layers {} ({} parameters)", widths.join(", "), model.net.parameter_count());

    let sphere = icosphere(3);
    let sphere = sphere.with_vertices(sphere.vertices.iter().map(|&v| v * 0.9).collect())?;
    let data = generate_training_set(
        &sphere,
        &SamplingConfig {
            base_surface_count: 64,
            ..Default::default()
        },
    )?;
    let predictions = model.predict_normalized(&data.points[..4])?;
    println!("untrained predictions {predictions:.4?} vs targets {:.4?}", &data.gt_signed_distance[..4]);

    let report = gradient_check(&model, &data, 1e-5, 0)?;
    println!(
        "gradient check over {} parameters: max relative error {:.2e}",
        report.entries.len(),
        report.max_relative_error
    );
    for e in report.entries.iter().step_by(16) {
        println!(
            "  {:?}[{}]: analytic {:+.6e}, numeric {:+.6e}",
            e.block, e.index, e.analytic, e.numeric
        );
    }
    Ok(())
}
