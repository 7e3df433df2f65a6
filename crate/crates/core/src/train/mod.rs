//! End-to-end optimization of the feature pyramid and the perceptron.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{load_mesh, normalize_shared, NormalizationTransform, TriangleMesh, Vec3, DEFAULT_MARGIN};
use crate::isd::{mse_loss, NetConfig, NetGrads, SdfNet};
use crate::mlf::{init_pyramid, FeatureGridPyramid, PyramidConfig, Stencil, VolumeGrad};
use crate::npg::{generate_for_mesh, GeneratedPointSet, SamplingConfig};
use crate::real::Real;
use crate::rng;

pub use adam::{adam_step, AdamState, LazyAdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gradcheck::{gradient_check, GradCheckReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            steps: 2000,
            batch_size: 4096,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.adam_epsilon));
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        Ok(())
    }
}

/// Architecture of the learned field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub pyramid: PyramidConfig,
    pub net: NetConfig,
    /// Normalization margin: training shapes fill `[-margin, margin]³`.
    pub margin: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            pyramid: PyramidConfig::default(),
            net: NetConfig::default(),
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T = f32> {
    pub pyramid: FeatureGridPyramid<T>,
    pub net: SdfNet<T>,
    /// Training-time normalization; test clouds go through the same transform.
    pub transform: NormalizationTransform,
    pub sampling: SamplingConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Mini-batch loss before each update.
    pub loss_history: Vec<f64>,
}

impl<T: Real> TrainedModel<T> {
    /// Freshly initialized (untrained) model.
    pub fn initialize(
        transform: NormalizationTransform,
        sampling: SamplingConfig,
        model: ModelConfig,
        train: TrainConfig,
    ) -> Result<Self> {
        let pyramid = init_pyramid(&model.pyramid, &mut rng::seeded(train.seed, rng::PYRAMID_INIT))?;
        let net = SdfNet::new(
            model.pyramid.feature_dim + 3,
            &model.net,
            &mut rng::seeded(train.seed, rng::NET_INIT),
        );
        Ok(Self {
            pyramid,
            net,
            transform,
            sampling,
            model,
            train,
            loss_history: Vec::new(),
        })
    }

    pub fn cast<U: Real>(&self) -> TrainedModel<U> {
        TrainedModel {
            pyramid: self.pyramid.cast(),
            net: self.net.cast(),
            transform: self.transform,
            sampling: self.sampling.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            loss_history: self.loss_history.clone(),
        }
    }

    /// Predicted signed distances for points already in normalized space.
    pub fn predict_normalized(&self, points: &[Vec3]) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(CHUNK) {
            let (input, _) = assemble_input(&self.pyramid, chunk);
            let tape = self.net.forward_batch(&input, chunk.len())?;
            out.extend(tape.predictions().iter().map(|p| p.as_f64()));
        }
        Ok(out)
    }
}

/// Build the `batch × (dim + 3)` network input and remember each sample's
/// per-level stencils for the backward pass.
fn assemble_input<T: Real>(pyramid: &FeatureGridPyramid<T>, points: &[Vec3]) -> (Vec<T>, Vec<Stencil>) {
    let dim = pyramid.feature_dim();
    let levels = pyramid.levels.len();
    let width = dim + 3;
    let mut input = Vec::with_capacity(points.len() * width);
    let empty = Stencil {
        vertices: [0; 8],
        weights: [0.0; 8],
    };
    let mut stencils = vec![empty; points.len() * levels];
    let mut fused = vec![0.0f64; dim];
    for (b, p) in points.iter().enumerate() {
        pyramid.fused(*p, &mut stencils[b * levels..(b + 1) * levels], &mut fused);
        input.extend(fused.iter().map(|&f| T::from_f64(f)));
        input.extend(p.to_array().map(T::from_f64));
    }
    (input, stencils)
}

/// Mean squared error of the batch together with network gradients; grid
/// gradients are added into `grid_grads` (one buffer per level).
pub fn loss_and_gradients<T: Real>(
    pyramid: &FeatureGridPyramid<T>,
    net: &SdfNet<T>,
    points: &[Vec3],
    targets: &[f64],
    grid_grads: &mut [VolumeGrad],
) -> Result<(f64, NetGrads<T>)> {
    if points.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = pyramid.feature_dim();
    let levels = pyramid.levels.len();
    let width = dim + 3;
    let (input, stencils) = assemble_input(pyramid, points);
    let tape = net.forward_batch(&input, points.len())?;
    let predictions: Vec<f64> = tape.predictions().iter().map(|p| p.as_f64()).collect();
    let (loss, dloss) = mse_loss(&predictions, targets)?;
    let upstream: Vec<T> = dloss.iter().map(|&g| T::from_f64(g)).collect();
    let (net_grads, input_grad) = net.backward_batch(&tape, &upstream)?;

    // Fusion is a sum, so every level receives the same feature gradient.
    let mut g = vec![0.0f64; dim];
    for b in 0..points.len() {
        for (k, v) in input_grad[b * width..b * width + dim].iter().enumerate() {
            g[k] = v.as_f64();
        }
        for l in 0..levels {
            grid_grads[l].scatter(&stencils[b * levels + l], &g);
        }
    }
    Ok((loss, net_grads))
}

/// Loss only (no gradients).
pub fn batch_loss<T: Real>(
    pyramid: &FeatureGridPyramid<T>,
    net: &SdfNet<T>,
    points: &[Vec3],
    targets: &[f64],
) -> Result<f64> {
    let (input, _) = assemble_input(pyramid, points);
    let tape = net.forward_batch(&input, points.len())?;
    let predictions: Vec<f64> = tape.predictions().iter().map(|p| p.as_f64()).collect();
    Ok(mse_loss(&predictions, targets)?.0)
}

/// Walks a (re)shuffled permutation of the training set.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    shuffle: bool,
    rng: rng::Rng,
}

impl BatchSampler {
    fn new(len: usize, shuffle: bool, seed: u64) -> Self {
        let mut s = Self {
            order: (0..len).collect(),
            cursor: 0,
            shuffle,
            rng: rng::seeded(seed, rng::BATCH_ORDER),
        };
        if shuffle {
            s.order.shuffle(&mut s.rng);
        }
        s
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.order.len());
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.cursor == self.order.len() {
                self.cursor = 0;
                if self.shuffle {
                    self.order.shuffle(&mut self.rng);
                }
            }
            let take = (size - batch.len()).min(self.order.len() - self.cursor);
            batch.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        batch
    }
}

/// Adam state for every trainable tensor.
struct Optimizer {
    weights: Vec<AdamState>,
    biases: Vec<AdamState>,
    grid: Vec<LazyAdamState>,
}

impl Optimizer {
    fn new<T: Real>(model: &TrainedModel<T>) -> Self {
        Self {
            weights: model.net.layers.iter().map(|l| AdamState::new(l.weight.len())).collect(),
            biases: model.net.layers.iter().map(|l| AdamState::new(l.bias.len())).collect(),
            grid: model
                .pyramid
                .levels
                .iter()
                .map(|v| LazyAdamState::new(v.vertex_count(), v.dim))
                .collect(),
        }
    }

    fn step<T: Real>(
        &mut self,
        model: &mut TrainedModel<T>,
        net_grads: &NetGrads<T>,
        grid_grads: &[VolumeGrad],
    ) -> Result<()> {
        let cfg = &model.train;
        for (li, layer) in model.net.layers.iter_mut().enumerate() {
            adam_step(&mut layer.weight, &net_grads.weights[li], &mut self.weights[li], cfg)?;
            adam_step(&mut layer.bias, &net_grads.biases[li], &mut self.biases[li], cfg)?;
        }
        for ((volume, state), grad) in model.pyramid.levels.iter_mut().zip(&mut self.grid).zip(grid_grads) {
            state.step(&mut volume.features, grad, cfg)?;
        }
        Ok(())
    }
}

/// Train on already-normalized point data.
pub fn fit<T: Real>(model: &mut TrainedModel<T>, data: &GeneratedPointSet) -> Result<()> {
    model.train.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut optimizer = Optimizer::new(model);
    let mut grid_grads: Vec<VolumeGrad> = model.pyramid.levels.iter().map(VolumeGrad::zeros_like).collect();
    let mut sampler = BatchSampler::new(data.len(), model.train.shuffle, model.train.seed);
    let mut points = Vec::with_capacity(model.train.batch_size);
    let mut targets = Vec::with_capacity(model.train.batch_size);
    for step in 0..model.train.steps {
        let idx = sampler.next_batch(model.train.batch_size);
        points.clear();
        targets.clear();
        points.extend(idx.iter().map(|&i| data.points[i]));
        targets.extend(idx.iter().map(|&i| data.gt_signed_distance[i]));

        for g in &mut grid_grads {
            g.clear();
        }
        let (loss, net_grads) = loss_and_gradients(&model.pyramid, &model.net, &points, &targets, &mut grid_grads)
            .map_err(|e| match e {
                Error::NonFiniteActivation { .. } => Error::DivergedLoss { step, loss: f64::NAN },
                other => other,
            })?;
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { step, loss });
        }
        model.loss_history.push(loss);
        optimizer.step(model, &net_grads, &grid_grads)?;
        if step % 500 == 0 {
            log::debug!("step {step}: loss {loss:.6e}");
        }
    }
    Ok(())
}

/// Normalize the meshes with one shared transform and pool their generated
/// training points.
pub fn prepare_training_data(
    meshes: &[TriangleMesh],
    sampling: &SamplingConfig,
    margin: f64,
) -> Result<(Vec<TriangleMesh>, NormalizationTransform, GeneratedPointSet)> {
    let (normalized, transform) = normalize_shared(meshes, margin)?;
    let mut data = GeneratedPointSet::default();
    for (i, mesh) in normalized.iter().enumerate() {
        data.extend(generate_for_mesh(mesh, sampling, i)?);
    }
    Ok((normalized, transform, data))
}

/// Train a model from in-memory meshes.
pub fn train_on_meshes(
    meshes: &[TriangleMesh],
    sampling: &SamplingConfig,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainedModel<f32>> {
    train_cfg.validate()?;
    sampling.validate()?;
    let (_, transform, data) = prepare_training_data(meshes, sampling, model_cfg.margin)?;
    let mut model = TrainedModel::initialize(transform, sampling.clone(), model_cfg.clone(), train_cfg.clone())?;
    fit(&mut model, &data)?;
    Ok(model)
}

/// Train a model from mesh files.
pub fn train(
    mesh_paths: &[impl AsRef<Path>],
    sampling: &SamplingConfig,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainedModel<f32>> {
    if mesh_paths.is_empty() {
        return Err(Error::InvalidArgument("at least one training mesh is required".into()));
    }
    let meshes = mesh_paths.iter().map(load_mesh).collect::<Result<Vec<_>>>()?;
    train_on_meshes(&meshes, sampling, model_cfg, train_cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_covers_every_index_per_epoch() {
        let mut s = BatchSampler::new(10, true, 3);
        let mut seen: Vec<usize> = s.next_batch(4);
        seen.extend(s.next_batch(6));
        seen.sort();
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
        assert_eq!(s.next_batch(25).len(), 10);
    }

    #[test]
    fn unshuffled_sampler_is_sequential() {
        let mut s = BatchSampler::new(5, false, 0);
        assert_eq!(s.next_batch(3), vec![0, 1, 2]);
        assert_eq!(s.next_batch(3), vec![3, 4, 0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { steps: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { adam_beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
