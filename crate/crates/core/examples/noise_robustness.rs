//! Score a defective test cloud under increasing Gaussian noise.
//!
//!     cargo run --release --example noise_robustness [model.ckpt | steps]
//!
//! Without a checkpoint a model is trained first (500 steps by default).

use sdfad::infer::noise_sweep_csv;
use sdfad::synth::{synth, SynthSpec};
use sdfad::train::{load_checkpoint, train_on_meshes};
use sdfad::{noise_sweep, ModelConfig, SamplingConfig, TrainConfig};

fn main() -> sdfad::Result<()> {
    let data = synth(&SynthSpec::default())?;
    let model = match std::env::args().nth(1).filter(|a| a.ends_with(".ckpt")) {
        Some(path) => load_checkpoint(path)?,
        None => {
            let steps = std::env::args().nth(1).map_or(500, |s| s.parse().expect("steps"));
            let train = TrainConfig {
                steps,
                ..Default::default()
            };
            train_on_meshes(&[data.mesh.clone()], &SamplingConfig::default(), &ModelConfig::default(), &train)?
        }
    };
    let rows = noise_sweep(&model, &data.cloud, &[0.0, 0.001, 0.003, 0.005, 0.01], 0)?;
    print!("{}", noise_sweep_csv(&rows));
    Ok(())
}
