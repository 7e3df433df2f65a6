//! Feature fusion and the signed-distance perceptron.
//!
//! The network maps `concat(fused_feature, xyz)` through four affine layers
//! with a smooth activation after the first three. Forward and backward passes
//! are batched (rows are samples) and run on GEMM kernels; the single-sample
//! entry points are batches of one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
    Relu,
    /// No nonlinearity; turns the network into a linear map (used in tests).
    Identity,
}

impl Activation {
    /// Returns `(act(x), act'(x))`.
    #[inline]
    pub fn eval<T: Real>(self, x: T) -> (T, T) {
        match self {
            Activation::Softplus => {
                // e ∈ (0, 1], so ln(1 + e) is exact to rounding in absolute terms.
                let e = (-x.abs()).exp();
                let one = T::one();
                let value = x.max(T::zero()) + (one + e).ln();
                let r = one / (one + e);
                let slope = if x >= T::zero() { r } else { e * r };
                (value, slope)
            }
            Activation::Relu => {
                if x > T::zero() {
                    (x, T::one())
                } else {
                    (T::zero(), T::zero())
                }
            }
            Activation::Identity => (x, T::one()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 128],
            activation: Activation::Softplus,
        }
    }
}

/// Affine layer `y = W x + b` with `W` stored row-major as `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weight: vec![T::zero(); fan_in * fan_out],
            bias: vec![T::zero(); fan_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfNet<T> {
    pub layers: Vec<Linear<T>>,
    pub activation: Activation,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T> {
    pub batch: usize,
    pub input: Vec<T>,
    /// Pre-activation of every layer, `batch × fan_out`.
    pub pre: Vec<Vec<T>>,
    /// Post-activation of every hidden layer.
    pub post: Vec<Vec<T>>,
    /// Activation derivative at every hidden pre-activation.
    pub slope: Vec<Vec<T>>,
}

impl<T: Real> Tape<T> {
    pub fn predictions(&self) -> &[T] {
        self.pre.last().expect("tape has at least one layer")
    }
}

/// Per-parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> SdfNet<T> {
    /// Xavier-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, config: &NetConfig, rng: &mut R) -> Self {
        let mut widths = vec![input_dim];
        widths.extend(&config.hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Linear::zeros(fan_in, fan_out);
                for x in &mut layer.weight {
                    *x = T::from_f64(rng.random_range(-bound..bound));
                }
                layer
            })
            .collect();
        Self {
            layers,
            activation: config.activation,
        }
    }

    /// Network with every parameter zero.
    pub fn zeros(input_dim: usize, config: &NetConfig) -> Self {
        let mut widths = vec![input_dim];
        widths.extend(&config.hidden);
        widths.push(1);
        Self {
            layers: widths.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
            activation: config.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.fan_in * l.fan_out + l.fan_out).sum()
    }

    pub fn cast<U: Real>(&self) -> SdfNet<U> {
        SdfNet {
            layers: self
                .layers
                .iter()
                .map(|l| Linear {
                    fan_in: l.fan_in,
                    fan_out: l.fan_out,
                    weight: l.weight.iter().map(|w| U::from_f64(w.as_f64())).collect(),
                    bias: l.bias.iter().map(|b| U::from_f64(b.as_f64())).collect(),
                })
                .collect(),
            activation: self.activation,
        }
    }

    pub fn zero_grads(&self) -> NetGrads<T> {
        NetGrads {
            weights: self.layers.iter().map(|l| vec![T::zero(); l.weight.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![T::zero(); l.bias.len()]).collect(),
        }
    }

    /// Batched forward pass; `input` is `batch × input_dim`, row-major.
    pub fn forward_batch(&self, input: &[T], batch: usize) -> Result<Tape<T>> {
        let in_dim = self.input_dim();
        if input.len() != batch * in_dim {
            return Err(Error::DimensionMismatch {
                expected: batch * in_dim,
                found: input.len(),
            });
        }
        let depth = self.layers.len();
        let mut pre = Vec::with_capacity(depth);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(depth - 1);
        let mut slope = Vec::with_capacity(depth - 1);
        for (li, layer) in self.layers.iter().enumerate() {
            let x: &[T] = if li == 0 { input } else { &post[li - 1] };
            let mut z = Vec::with_capacity(batch * layer.fan_out);
            for _ in 0..batch {
                z.extend_from_slice(&layer.bias);
            }
            // z (B×out) += x (B×in) · Wᵀ (in×out)
            T::gemm(
                batch,
                layer.fan_in,
                layer.fan_out,
                x,
                (layer.fan_in, 1),
                &layer.weight,
                (1, layer.fan_in),
                T::one(),
                &mut z,
                (layer.fan_out, 1),
            );
            let mut finite = true;
            if li + 1 < depth {
                let mut a = vec![T::zero(); z.len()];
                let mut s = vec![T::zero(); z.len()];
                for ((&v, a), s) in z.iter().zip(&mut a).zip(&mut s) {
                    finite &= v.is_finite();
                    (*a, *s) = self.activation.eval(v);
                }
                post.push(a);
                slope.push(s);
            } else {
                finite = z.iter().all(|v| v.is_finite());
            }
            if !finite {
                return Err(Error::NonFiniteActivation { layer: li });
            }
            pre.push(z);
        }
        Ok(Tape {
            batch,
            input: input.to_vec(),
            pre,
            post,
            slope,
        })
    }

    /// Reverse pass for a batched tape. `upstream[b]` is `∂loss/∂prediction_b`.
    /// Returns parameter gradients summed over the batch and the gradient with
    /// respect to every input row.
    pub fn backward_batch(&self, tape: &Tape<T>, upstream: &[T]) -> Result<(NetGrads<T>, Vec<T>)> {
        self.check_tape(tape)?;
        let batch = tape.batch;
        if upstream.len() != batch {
            return Err(Error::DimensionMismatch {
                expected: batch,
                found: upstream.len(),
            });
        }
        let mut grads = self.zero_grads();
        let mut dz = upstream.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x: &[T] = if li == 0 { &tape.input } else { &tape.post[li - 1] };
            // dW (out×in) = dzᵀ (out×B) · x (B×in)
            T::gemm(
                layer.fan_out,
                batch,
                layer.fan_in,
                &dz,
                (1, layer.fan_out),
                x,
                (layer.fan_in, 1),
                T::zero(),
                &mut grads.weights[li],
                (layer.fan_in, 1),
            );
            let db = &mut grads.biases[li];
            for o in 0..layer.fan_out {
                let s: f64 = (0..batch).map(|b| dz[b * layer.fan_out + o].as_f64()).sum();
                db[o] = T::from_f64(s);
            }
            // dx (B×in) = dz (B×out) · W (out×in)
            let mut dx = vec![T::zero(); batch * layer.fan_in];
            T::gemm(
                batch,
                layer.fan_out,
                layer.fan_in,
                &dz,
                (layer.fan_out, 1),
                &layer.weight,
                (layer.fan_in, 1),
                T::zero(),
                &mut dx,
                (layer.fan_in, 1),
            );
            if li > 0 {
                for (g, s) in dx.iter_mut().zip(&tape.slope[li - 1]) {
                    *g = *g * *s;
                }
            }
            dz = dx;
        }
        Ok((grads, dz))
    }

    fn check_tape(&self, tape: &Tape<T>) -> Result<()> {
        let depth = self.layers.len();
        if tape.pre.len() != depth || tape.post.len() != depth - 1 || tape.slope.len() != depth - 1 {
            return Err(Error::TapeMismatch(format!(
                "tape has {} layers, network has {depth}",
                tape.pre.len()
            )));
        }
        if tape.input.len() != tape.batch * self.input_dim() {
            return Err(Error::TapeMismatch("input width differs".into()));
        }
        for (li, layer) in self.layers.iter().enumerate() {
            if tape.pre[li].len() != tape.batch * layer.fan_out {
                return Err(Error::TapeMismatch(format!("layer {li} width differs")));
            }
        }
        Ok(())
    }
}

/// Element-wise sum of the per-level features.
pub fn fuse<T: Real>(per_level: &[Vec<T>]) -> Result<Vec<T>> {
    let first = per_level
        .first()
        .ok_or_else(|| Error::InvalidArgument("no feature levels to fuse".into()))?;
    let mut out = first.clone();
    for level in &per_level[1..] {
        if level.len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: level.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(level) {
            *o = *o + *v;
        }
    }
    Ok(out)
}

/// Single-sample forward pass on `concat(fused, xyz)`.
pub fn sdf_forward<T: Real>(net: &SdfNet<T>, fused: &[T], xyz: Vec3) -> Result<(T, Tape<T>)> {
    let mut input = fused.to_vec();
    input.extend(xyz.to_array().map(T::from_f64));
    let tape = net.forward_batch(&input, 1)?;
    Ok((tape.predictions()[0], tape))
}

/// Single-sample backward pass; the returned input gradient has the fused
/// feature entries first and the three coordinate entries last.
pub fn sdf_backward<T: Real>(net: &SdfNet<T>, tape: &Tape<T>, upstream: T) -> Result<(NetGrads<T>, Vec<T>)> {
    if tape.batch != 1 {
        return Err(Error::TapeMismatch(format!("expected a single-sample tape, got batch {}", tape.batch)));
    }
    net.backward_batch(tape, &[upstream])
}

/// Mean squared error and its gradient with respect to each prediction.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: predictions.len(),
            found: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let r = p - t;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn small_config(activation: Activation) -> NetConfig {
        NetConfig {
            hidden: vec![6, 5, 4],
            activation,
        }
    }

    #[test]
    fn parameter_count_formula() {
        let net: SdfNet<f32> = SdfNet::new(35, &NetConfig::default(), &mut seeded(0, 0));
        assert_eq!(net.layers.len(), 4);
        assert_eq!(net.parameter_count(), 35 * 128 + 128 + 2 * (128 * 128 + 128) + 128 + 1);
    }

    #[test]
    fn fuse_cases() {
        let a = vec![1.0f64, 2.0, 3.0];
        assert_eq!(fuse(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(fuse(&[a.clone(), vec![3.0, 4.0, 5.0]]).unwrap(), vec![4.0, 6.0, 8.0]);
        assert_eq!(fuse(&vec![vec![0.0f64; 3]; 4]).unwrap(), vec![0.0; 3]);
        assert!(matches!(fuse(&[a, vec![1.0]]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn constant_network() {
        let mut net: SdfNet<f64> = SdfNet::zeros(7, &small_config(Activation::Softplus));
        net.layers[3].bias[0] = 0.75;
        let (d, _) = sdf_forward(&net, &[0.3, -2.0, 1.0, 0.0], Vec3::new(5.0, 1.0, -3.0)).unwrap();
        assert_eq!(d, 0.75);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Relu), &mut seeded(1, 0));
        for l in &mut net.layers {
            l.bias.fill(0.0);
        }
        let (d, _) = sdf_forward(&net, &[0.0; 4], Vec3::ZERO).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn forward_is_repeatable() {
        let net: SdfNet<f32> = SdfNet::new(35, &NetConfig::default(), &mut seeded(7, 0));
        let f: Vec<f32> = (0..32).map(|i| (i as f32 * 0.37).sin()).collect();
        let p = Vec3::new(0.1, 0.2, -0.3);
        let (a, ta) = sdf_forward(&net, &f, p).unwrap();
        let (b, tb) = sdf_forward(&net, &f, p).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ta, tb);
    }

    #[test]
    fn non_finite_is_reported() {
        let net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Softplus), &mut seeded(1, 0));
        let r = sdf_forward(&net, &[f64::NAN, 0.0, 0.0, 0.0], Vec3::ZERO);
        assert!(matches!(r, Err(Error::NonFiniteActivation { layer: 0 })));
    }

    #[test]
    fn mse_examples() {
        let (l, g) = mse_loss(&[0.5, -1.0], &[0.5, -1.0]).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        let (l, g) = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(matches!(mse_loss(&[], &[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn mse_gradient_matches_finite_difference() {
        let mut r = seeded(11, 0);
        let preds: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
        let targets: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
        let (_, g) = mse_loss(&preds, &targets).unwrap();
        let h = 1e-6;
        for i in 0..preds.len() {
            let mut p = preds.clone();
            p[i] += h;
            let plus = mse_loss(&p, &targets).unwrap().0;
            p[i] -= 2.0 * h;
            let minus = mse_loss(&p, &targets).unwrap().0;
            assert!(((plus - minus) / (2.0 * h) - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Softplus), &mut seeded(2, 0));
        let (_, tape) = sdf_forward(&net, &[0.1, 0.2, 0.3, 0.4], Vec3::new(0.5, 0.6, 0.7)).unwrap();
        let (g, dx) = sdf_backward(&net, &tape, 0.0).unwrap();
        assert!(g.weights.iter().chain(&g.biases).flatten().all(|&x| x == 0.0));
        assert!(dx.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tape_mismatch_detected() {
        let net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Softplus), &mut seeded(2, 0));
        let other: SdfNet<f64> = SdfNet::new(7, &NetConfig { hidden: vec![3], activation: Activation::Relu }, &mut seeded(2, 0));
        let (_, tape) = sdf_forward(&other, &[0.0; 4], Vec3::ZERO).unwrap();
        assert!(matches!(sdf_backward(&net, &tape, 1.0), Err(Error::TapeMismatch(_))));
    }

    /// Finite differences over every parameter of a small network.
    fn check_all_parameters(activation: Activation, h: f64, tol: f64) {
        let mut net: SdfNet<f64> = SdfNet::new(7, &small_config(activation), &mut seeded(3, 0));
        for l in &mut net.layers {
            for b in &mut l.bias {
                *b = 0.1;
            }
        }
        let feat = [0.3, -0.4, 0.8, 0.1];
        let xyz = Vec3::new(0.2, -0.6, 0.35);
        let (_, tape) = sdf_forward(&net, &feat, xyz).unwrap();
        let (grads, dx) = sdf_backward(&net, &tape, 1.0).unwrap();

        let eval = |n: &SdfNet<f64>| sdf_forward(n, &feat, xyz).unwrap().0;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-10);
        for li in 0..net.layers.len() {
            for k in 0..net.layers[li].weight.len() {
                let orig = net.layers[li].weight[k];
                net.layers[li].weight[k] = orig + h;
                let plus = eval(&net);
                net.layers[li].weight[k] = orig - h;
                let minus = eval(&net);
                net.layers[li].weight[k] = orig;
                let num = (plus - minus) / (2.0 * h);
                assert!(rel(grads.weights[li][k], num) < tol, "w{li}[{k}] {} vs {num}", grads.weights[li][k]);
            }
            for k in 0..net.layers[li].bias.len() {
                let orig = net.layers[li].bias[k];
                net.layers[li].bias[k] = orig + h;
                let plus = eval(&net);
                net.layers[li].bias[k] = orig - h;
                let minus = eval(&net);
                net.layers[li].bias[k] = orig;
                let num = (plus - minus) / (2.0 * h);
                assert!(rel(grads.biases[li][k], num) < tol, "b{li}[{k}]");
            }
        }
        // Input gradient for the feature entries.
        for k in 0..feat.len() {
            let mut f = feat;
            f[k] += h;
            let plus = sdf_forward(&net, &f, xyz).unwrap().0;
            f[k] -= 2.0 * h;
            let minus = sdf_forward(&net, &f, xyz).unwrap().0;
            assert!(rel(dx[k], (plus - minus) / (2.0 * h)) < tol);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        check_all_parameters(Activation::Softplus, 1e-5, 1e-6);
    }

    #[test]
    fn linear_network_matches_closed_form() {
        // With identity activations the network is d = w·x + c for
        // w = W4 W3 W2 W1; the least-squares gradient of ½(d − t)² with
        // respect to the input is (d − t)·w.
        let net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Identity), &mut seeded(4, 0));
        let mut w = net.layers[0].weight.clone(); // rows = fan_out
        let mut rows = net.layers[0].fan_out;
        for layer in &net.layers[1..] {
            let mut next = vec![0.0; layer.fan_out * 7];
            for o in 0..layer.fan_out {
                for i in 0..7 {
                    next[o * 7 + i] = (0..rows).map(|k| layer.weight[o * rows + k] * w[k * 7 + i]).sum();
                }
            }
            w = next;
            rows = layer.fan_out;
        }
        let feat = [0.5, -0.1, 0.2, 0.9];
        let xyz = Vec3::new(-0.3, 0.4, 0.1);
        let (d, tape) = sdf_forward(&net, &feat, xyz).unwrap();
        let target = 0.25;
        let (_, dx) = sdf_backward(&net, &tape, d - target).unwrap();
        for i in 0..7 {
            assert!((dx[i] - (d - target) * w[i]).abs() < 1e-12);
        }
        check_all_parameters(Activation::Identity, 1e-3, 1e-9);
    }

    #[test]
    fn batched_rows_are_independent() {
        let net: SdfNet<f64> = SdfNet::new(7, &small_config(Activation::Softplus), &mut seeded(5, 0));
        let rows: Vec<f64> = (0..21).map(|i| (i as f64 * 0.13).cos()).collect();
        let tape = net.forward_batch(&rows, 3).unwrap();
        for b in 0..3 {
            let single = net.forward_batch(&rows[b * 7..(b + 1) * 7], 1).unwrap();
            assert!((single.predictions()[0] - tape.predictions()[b]).abs() < 1e-14);
        }
    }
}
