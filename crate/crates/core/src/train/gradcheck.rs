//! Finite-difference verification of the training gradients.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mlf::VolumeGrad;
use crate::npg::GeneratedPointSet;
use crate::rng;

use super::{batch_loss, loss_and_gradients, TrainedModel};

/// Parameters sampled from each weight matrix, bias vector and grid level.
pub const PER_BLOCK: usize = 8;
const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum ParamBlock {
    Weight(usize),
    Bias(usize),
    Grid(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckEntry {
    pub block: ParamBlock,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn covers(&self, pred: impl Fn(ParamBlock) -> bool) -> bool {
        self.entries.iter().any(|e| pred(e.block))
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Compare analytic gradients of the batch loss with central differences of
/// step `epsilon` on a random subsample of parameters from every block.
pub fn gradient_check(
    model: &TrainedModel<f64>,
    batch: &GeneratedPointSet,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    let points = &batch.points;
    let targets = &batch.gt_signed_distance;
    let mut grid_grads: Vec<VolumeGrad> = model.pyramid.levels.iter().map(VolumeGrad::zeros_like).collect();
    let (_, net_grads) = loss_and_gradients(&model.pyramid, &model.net, points, targets, &mut grid_grads)?;

    let mut r = rng::seeded(seed, rng::GRADCHECK);
    let mut picks: Vec<(ParamBlock, usize, f64)> = Vec::new();
    for (l, layer) in model.net.layers.iter().enumerate() {
        for i in sample(&mut r, layer.weight.len(), PER_BLOCK.min(layer.weight.len())) {
            picks.push((ParamBlock::Weight(l), i, net_grads.weights[l][i]));
        }
        for i in sample(&mut r, layer.bias.len(), PER_BLOCK.min(layer.bias.len())) {
            picks.push((ParamBlock::Bias(l), i, net_grads.biases[l][i]));
        }
    }
    for (l, grad) in grid_grads.iter().enumerate() {
        let touched = grad.touched();
        if touched.is_empty() {
            continue;
        }
        for _ in 0..PER_BLOCK {
            let v = touched[r.random_range(0..touched.len())] as usize;
            let k = r.random_range(0..grad.dim);
            let i = v * grad.dim + k;
            picks.push((ParamBlock::Grid(l), i, grad.values[i]));
        }
    }

    let mut probe = model.clone();
    let mut entries = Vec::with_capacity(picks.len());
    for (block, index, analytic) in picks {
        let original = *param(&mut probe, block, index);
        *param(&mut probe, block, index) = original + epsilon;
        let plus = batch_loss(&probe.pyramid, &probe.net, points, targets)?;
        *param(&mut probe, block, index) = original - epsilon;
        let minus = batch_loss(&probe.pyramid, &probe.net, points, targets)?;
        *param(&mut probe, block, index) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        entries.push(GradCheckEntry {
            block,
            index,
            analytic,
            numeric,
            relative_error: relative_error(analytic, numeric),
        });
    }
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        epsilon,
        max_relative_error,
        entries,
    })
}

fn param(model: &mut TrainedModel<f64>, block: ParamBlock, index: usize) -> &mut f64 {
    match block {
        ParamBlock::Weight(l) => &mut model.net.layers[l].weight[index],
        ParamBlock::Bias(l) => &mut model.net.layers[l].bias[index],
        ParamBlock::Grid(l) => &mut model.pyramid.levels[l].features[index],
    }
}
