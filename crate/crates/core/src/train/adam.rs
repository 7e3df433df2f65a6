//! Adam with bias correction, in a dense form for network tensors and a lazy
//! form for feature grids.

use crate::error::{Error, Result};
use crate::mlf::VolumeGrad;
use crate::real::Real;

use super::TrainConfig;

/// First and second moment estimates for a parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Coefficients {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
}

impl Coefficients {
    fn at_step(config: &TrainConfig, t: u64) -> Self {
        Self {
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_epsilon,
            bias1: 1.0 - config.adam_beta1.powf(t as f64),
            bias2: 1.0 - config.adam_beta2.powf(t as f64),
        }
    }
}

#[inline]
fn update<T: Real>(theta: &mut T, g: f64, m: &mut f64, v: &mut f64, c: &Coefficients) {
    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
    let m_hat = *m / c.bias1;
    let v_hat = *v / c.bias2;
    *theta = T::from_f64(theta.as_f64() - c.lr * m_hat / (v_hat.sqrt() + c.eps));
}

/// One in-place Adam update of `params` with gradient `grads`.
pub fn adam_step<T: Real, G: Real>(
    params: &mut [T],
    grads: &[G],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    state.step_count += 1;
    let c = Coefficients::at_step(config, state.step_count);
    for (i, (theta, g)) in params.iter_mut().zip(grads).enumerate() {
        update(theta, g.as_f64(), &mut state.first_moment[i], &mut state.second_moment[i], &c);
    }
    Ok(())
}

/// Adam over a feature volume whose moments are allocated on a vertex's first
/// gradient. Every vertex that ever had state is updated at each step, which
/// makes this bit-for-bit equal to [`adam_step`] over the whole volume: a
/// vertex that never received gradient has zero moments, so a dense update
/// would leave it unchanged as well.
#[derive(Debug, Clone, PartialEq)]
pub struct LazyAdamState {
    dim: usize,
    slot: Vec<u32>,
    active: Vec<u32>,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    pub step_count: u64,
}

const NO_SLOT: u32 = u32::MAX;

impl LazyAdamState {
    pub fn new(vertex_count: usize, dim: usize) -> Self {
        Self {
            dim,
            slot: vec![NO_SLOT; vertex_count],
            active: Vec::new(),
            first_moment: Vec::new(),
            second_moment: Vec::new(),
            step_count: 0,
        }
    }

    pub fn active_vertices(&self) -> usize {
        self.active.len()
    }

    pub fn step<T: Real>(&mut self, features: &mut [T], grad: &VolumeGrad, config: &TrainConfig) -> Result<()> {
        if features.len() != self.slot.len() * self.dim || grad.values.len() != features.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} features, {} gradients, {} vertices of dim {}",
                features.len(),
                grad.values.len(),
                self.slot.len(),
                self.dim
            )));
        }
        for &v in grad.touched() {
            let s = &mut self.slot[v as usize];
            if *s == NO_SLOT {
                *s = self.active.len() as u32;
                self.active.push(v);
                self.first_moment.extend(std::iter::repeat_n(0.0, self.dim));
                self.second_moment.extend(std::iter::repeat_n(0.0, self.dim));
            }
        }
        self.step_count += 1;
        let c = Coefficients::at_step(config, self.step_count);
        let dim = self.dim;
        for (s, &v) in self.active.iter().enumerate() {
            let v = v as usize;
            let params = &mut features[v * dim..(v + 1) * dim];
            let g = &grad.values[v * dim..(v + 1) * dim];
            let m = &mut self.first_moment[s * dim..(s + 1) * dim];
            let sm = &mut self.second_moment[s * dim..(s + 1) * dim];
            for k in 0..dim {
                update(&mut params[k], g[k], &mut m[k], &mut sm[k], &c);
            }
        }
        Ok(())
    }
}
