//! Multi-resolution learnable feature grids.
//!
//! Level `l` (1-based) partitions `[-1, 1]³` into `s_l = 2^(l + base_lod)`
//! cells per axis and stores a feature vector at each of the `(s_l + 1)³`
//! lattice vertices. A query point reads the trilinear blend of the eight
//! corners of its cell. Vertices are laid out x-fastest:
//! `index = ix + n·(iy + n·iz)` with `n = s_l + 1`.
//!
//! Corner `j` of a cell has offset bits `(j & 1, (j >> 1) & 1, (j >> 2) & 1)`
//! along `(x, y, z)`, i.e. x is the least significant bit.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::real::Real;

pub const FEATURE_DIM: usize = 32;
pub const MAX_LEVELS: usize = 6;

/// Default parameter-memory budget: 2 GiB.
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// Cell containing a point and the point's position inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelLocation {
    pub cell_index: [usize; 3],
    pub local: [f64; 3],
}

/// The eight corner vertices of a query's cell and their blend weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub vertices: [u32; 8],
    pub weights: [f64; 8],
}

/// Corner weights for a position inside a unit cell, ordered by corner bit
/// pattern (x least significant).
pub fn trilinear_weights(local: [f64; 3]) -> [f64; 8] {
    let [tx, ty, tz] = local;
    let wx = [1.0 - tx, tx];
    let wy = [1.0 - ty, ty];
    let wz = [1.0 - tz, tz];
    std::array::from_fn(|j| wx[j & 1] * wy[(j >> 1) & 1] * wz[(j >> 2) & 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume<T> {
    pub level: usize,
    pub resolution: usize,
    pub cell_width: f64,
    pub dim: usize,
    pub features: Vec<T>,
}

impl<T: Real> FeatureVolume<T> {
    pub fn zeros(level: usize, resolution: usize, dim: usize) -> Self {
        let n = resolution + 1;
        Self {
            level,
            resolution,
            cell_width: 2.0 / resolution as f64,
            dim,
            features: vec![T::zero(); n * n * n * dim],
        }
    }

    pub fn vertices_per_axis(&self) -> usize {
        self.resolution + 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices_per_axis().pow(3)
    }

    pub fn vertex_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.vertices_per_axis();
        ix + n * (iy + n * iz)
    }

    /// Lattice position of vertex `v` in `[-1, 1]³`.
    pub fn vertex_position(&self, v: usize) -> Vec3 {
        let n = self.vertices_per_axis();
        let coord = |i: usize| -1.0 + i as f64 * self.cell_width;
        Vec3::new(coord(v % n), coord((v / n) % n), coord(v / (n * n)))
    }

    pub fn feature(&self, vertex: usize) -> &[T] {
        &self.features[vertex * self.dim..(vertex + 1) * self.dim]
    }

    pub fn feature_mut(&mut self, vertex: usize) -> &mut [T] {
        &mut self.features[vertex * self.dim..(vertex + 1) * self.dim]
    }

    /// Owning cell of `point` after clamping to `[-1, 1]³`. Interior cell
    /// boundaries belong to the higher cell; `+1` belongs to the last cell with
    /// local coordinate 1.
    pub fn locate(&self, point: Vec3) -> VoxelLocation {
        let s = self.resolution;
        let mut cell_index = [0usize; 3];
        let mut local = [0.0f64; 3];
        for axis in 0..3 {
            let c = point[axis].clamp(-1.0, 1.0);
            // (c + 1) / d_l, written so that c = ±1 and c = 0 are exact.
            let t = (c + 1.0) * 0.5 * s as f64;
            let i = (t.floor() as usize).min(s - 1);
            cell_index[axis] = i;
            local[axis] = (t - i as f64).clamp(0.0, 1.0);
        }
        VoxelLocation { cell_index, local }
    }

    pub fn stencil(&self, point: Vec3) -> Stencil {
        let loc = self.locate(point);
        let [ix, iy, iz] = loc.cell_index;
        let vertices = std::array::from_fn(|j| {
            self.vertex_index(ix + (j & 1), iy + ((j >> 1) & 1), iz + ((j >> 2) & 1)) as u32
        });
        Stencil {
            vertices,
            weights: trilinear_weights(loc.local),
        }
    }

    /// Add the interpolated feature at `point` into `out` (64-bit accumulation).
    pub fn accumulate_interpolated(&self, stencil: &Stencil, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for (&v, &w) in stencil.vertices.iter().zip(&stencil.weights) {
            if w == 0.0 {
                continue;
            }
            for (o, f) in out.iter_mut().zip(self.feature(v as usize)) {
                *o += w * f.as_f64();
            }
        }
    }

    /// Trilinearly interpolated feature at `point`.
    pub fn interpolate(&self, point: Vec3) -> Vec<T> {
        let mut acc = vec![0.0; self.dim];
        self.accumulate_interpolated(&self.stencil(point), &mut acc);
        acc.into_iter().map(T::from_f64).collect()
    }

    /// Add `w_j · upstream` to the gradient of each corner feature of the cell
    /// containing `point`. The query position itself receives no gradient.
    pub fn interpolate_backward(&self, point: Vec3, upstream: &[f64], accumulator: &mut VolumeGrad) {
        accumulator.scatter(&self.stencil(point), upstream);
    }

    pub fn cast<U: Real>(&self) -> FeatureVolume<U> {
        FeatureVolume {
            level: self.level,
            resolution: self.resolution,
            cell_width: self.cell_width,
            dim: self.dim,
            features: self.features.iter().map(|f| U::from_f64(f.as_f64())).collect(),
        }
    }
}

/// Dense 64-bit gradient buffer for one feature volume that also remembers
/// which vertices received a contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrad {
    pub dim: usize,
    pub values: Vec<f64>,
    touched: Vec<u32>,
    mark: Vec<bool>,
}

impl VolumeGrad {
    pub fn zeros_like<T: Real>(volume: &FeatureVolume<T>) -> Self {
        Self {
            dim: volume.dim,
            values: vec![0.0; volume.features.len()],
            touched: Vec::new(),
            mark: vec![false; volume.vertex_count()],
        }
    }

    pub fn scatter(&mut self, stencil: &Stencil, upstream: &[f64]) {
        debug_assert_eq!(upstream.len(), self.dim);
        for (&v, &w) in stencil.vertices.iter().zip(&stencil.weights) {
            let v = v as usize;
            if !self.mark[v] {
                self.mark[v] = true;
                self.touched.push(v as u32);
            }
            let slot = &mut self.values[v * self.dim..(v + 1) * self.dim];
            for (g, u) in slot.iter_mut().zip(upstream) {
                *g += w * u;
            }
        }
    }

    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.values[v * self.dim..(v + 1) * self.dim]
    }

    /// Vertices that received a contribution since the last `clear`, in first-touch order.
    pub fn touched(&self) -> &[u32] {
        &self.touched
    }

    pub fn is_touched(&self, v: usize) -> bool {
        self.mark[v]
    }

    /// Zero the touched entries only.
    pub fn clear(&mut self) {
        for &v in &self.touched {
            let v = v as usize;
            self.values[v * self.dim..(v + 1) * self.dim].fill(0.0);
            self.mark[v] = false;
        }
        self.touched.clear();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidConfig {
    pub base_lod: u32,
    pub levels: usize,
    pub feature_dim: usize,
    /// Standard deviation of the Gaussian feature initialization.
    pub init_scale: f64,
    pub memory_cap_bytes: u64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            base_lod: 2,
            levels: 3,
            feature_dim: FEATURE_DIM,
            init_scale: 0.01,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }
}

impl PyramidConfig {
    pub fn resolution(&self, level: usize) -> usize {
        1usize << (level as u32 + self.base_lod)
    }

    pub fn parameter_count(&self) -> u64 {
        (1..=self.levels)
            .map(|l| (self.resolution(l) as u64 + 1).pow(3) * self.feature_dim as u64)
            .sum()
    }

    /// Bytes for parameters plus a 64-bit gradient and two 64-bit Adam moments each.
    pub fn estimated_bytes(&self, bytes_per_param: usize) -> u64 {
        self.parameter_count() * (bytes_per_param as u64 + 24)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::InvalidArgument(format!(
                "level count must be in 1..={MAX_LEVELS}, got {}",
                self.levels
            )));
        }
        if self.base_lod > 8 {
            return Err(Error::InvalidArgument(format!("base_lod {} is too large", self.base_lod)));
        }
        if self.feature_dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad init scale {}", self.init_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGridPyramid<T> {
    pub base_lod: u32,
    pub levels: Vec<FeatureVolume<T>>,
}

impl<T: Real> FeatureGridPyramid<T> {
    pub fn feature_dim(&self) -> usize {
        self.levels[0].dim
    }

    pub fn parameter_count(&self) -> usize {
        self.levels.iter().map(|v| v.features.len()).sum()
    }

    /// Per-level interpolated features, ordered level 1..L.
    pub fn query(&self, point: Vec3) -> Vec<Vec<T>> {
        self.levels.iter().map(|v| v.interpolate(point)).collect()
    }

    /// Sum of the per-level features, accumulated in 64 bits.
    pub fn fused(&self, point: Vec3, stencils: &mut [Stencil], out: &mut [f64]) {
        out.fill(0.0);
        for (volume, st) in self.levels.iter().zip(stencils.iter_mut()) {
            *st = volume.stencil(point);
            volume.accumulate_interpolated(st, out);
        }
    }

    pub fn cast<U: Real>(&self) -> FeatureGridPyramid<U> {
        FeatureGridPyramid {
            base_lod: self.base_lod,
            levels: self.levels.iter().map(FeatureVolume::cast).collect(),
        }
    }
}

/// Allocate the pyramid with i.i.d. `N(0, init_scale²)` features.
pub fn init_pyramid<T: Real, R: Rng + ?Sized>(config: &PyramidConfig, rng: &mut R) -> Result<FeatureGridPyramid<T>> {
    config.validate()?;
    let required = config.estimated_bytes(T::BYTES);
    if required > config.memory_cap_bytes {
        return Err(Error::MemoryBudgetExceeded {
            required,
            budget: config.memory_cap_bytes,
        });
    }
    let levels = (1..=config.levels)
        .map(|l| {
            let mut v = FeatureVolume::zeros(l, config.resolution(l), config.feature_dim);
            if config.init_scale > 0.0 {
                for f in &mut v.features {
                    let z: f64 = rng.sample(StandardNormal);
                    *f = T::from_f64(z * config.init_scale);
                }
            }
            v
        })
        .collect();
    Ok(FeatureGridPyramid {
        base_lod: config.base_lod,
        levels,
    })
}

/// Free-function form of [`FeatureGridPyramid::query`].
pub fn query_pyramid<T: Real>(pyramid: &FeatureGridPyramid<T>, point: Vec3) -> Vec<Vec<T>> {
    pyramid.query(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn volume(res: usize, dim: usize, seed: u64) -> FeatureVolume<f64> {
        let mut v = FeatureVolume::zeros(1, res, dim);
        let mut r = seeded(seed, 0);
        for f in &mut v.features {
            *f = r.random_range(-1.0..1.0);
        }
        v
    }

    #[test]
    fn level_sizes() {
        let c = PyramidConfig::default();
        assert_eq!(c.resolution(1), 8);
        assert_eq!(c.resolution(5), 128);
        let p: FeatureGridPyramid<f32> = init_pyramid(&c, &mut seeded(0, 0)).unwrap();
        assert_eq!(p.levels[0].vertex_count(), 729);
        assert_eq!(p.levels[0].features.len(), 729 * 32);
        for v in &p.levels {
            assert!((v.cell_width * v.resolution as f64 - 2.0).abs() < 1e-12);
        }
        assert_eq!((c.resolution(5) + 1).pow(3), 2_146_689);
    }

    #[test]
    fn memory_cap_enforced() {
        let c = PyramidConfig {
            levels: 5,
            memory_cap_bytes: 1 << 20,
            ..Default::default()
        };
        assert!(matches!(
            init_pyramid::<f32, _>(&c, &mut seeded(0, 0)),
            Err(Error::MemoryBudgetExceeded { .. })
        ));
        let c = PyramidConfig {
            levels: 7,
            ..Default::default()
        };
        assert!(init_pyramid::<f32, _>(&c, &mut seeded(0, 0)).is_err());
    }

    #[test]
    fn zero_init_interpolates_to_zero() {
        let c = PyramidConfig {
            init_scale: 0.0,
            ..Default::default()
        };
        let p: FeatureGridPyramid<f32> = init_pyramid(&c, &mut seeded(0, 0)).unwrap();
        assert!(p.levels.iter().all(|v| v.features.iter().all(|&f| f == 0.0)));
        for f in p.query(Vec3::new(0.3, -0.7, 0.1)) {
            assert!(f.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn locate_corners_and_center() {
        let v = FeatureVolume::<f64>::zeros(1, 8, 1);
        let lo = v.locate(Vec3::splat(-1.0));
        assert_eq!(lo.cell_index, [0, 0, 0]);
        assert_eq!(lo.local, [0.0; 3]);
        let hi = v.locate(Vec3::splat(1.0));
        assert_eq!(hi.cell_index, [7, 7, 7]);
        assert_eq!(hi.local, [1.0; 3]);
        let mid = v.locate(Vec3::ZERO);
        assert_eq!(mid.cell_index, [4, 4, 4]);
        assert_eq!(mid.local, [0.0; 3]);
        let out = v.locate(Vec3::new(3.0, -2.0, 0.0));
        assert_eq!(out.cell_index, [7, 0, 4]);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(trilinear_weights([0.5; 3]), [0.125; 8]);
        let w = trilinear_weights([0.0; 3]);
        assert_eq!(w[0], 1.0);
        assert!(w[1..].iter().all(|&x| x == 0.0));
        let w = trilinear_weights([0.25, 0.5, 1.0]);
        assert_eq!(w[0], 0.0);
        assert_eq!(w[7], 0.125);
    }

    #[test]
    fn constant_corners_give_constant() {
        let mut v = FeatureVolume::<f64>::zeros(1, 4, 3);
        for f in v.features.chunks_mut(3) {
            f.copy_from_slice(&[1.5, -2.0, 0.25]);
        }
        assert_eq!(v.interpolate(Vec3::new(0.13, -0.77, 0.41)), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn backward_zero_upstream_is_noop() {
        let v = volume(4, 2, 1);
        let mut g = VolumeGrad::zeros_like(&v);
        v.interpolate_backward(Vec3::new(0.1, 0.2, 0.3), &[0.0, 0.0], &mut g);
        assert!(g.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_at_vertex_lands_on_one_vertex() {
        let v = volume(4, 2, 1);
        let mut g = VolumeGrad::zeros_like(&v);
        let p = Vec3::new(-0.5, 0.0, 0.5);
        v.interpolate_backward(p, &[2.0, -3.0], &mut g);
        let target = v.vertex_index(1, 2, 3);
        assert_eq!(g.vertex(target), &[2.0, -3.0]);
        let nonzero = (0..v.vertex_count()).filter(|&k| g.vertex(k).iter().any(|&x| x != 0.0)).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn clear_resets_touched() {
        let v = volume(4, 1, 1);
        let mut g = VolumeGrad::zeros_like(&v);
        v.interpolate_backward(Vec3::new(0.1, 0.2, 0.3), &[1.0], &mut g);
        assert_eq!(g.touched().len(), 8);
        g.clear();
        assert!(g.touched().is_empty());
        assert!(g.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn finite_difference_matches_backward() {
        let mut v = volume(4, 3, 2);
        let p = Vec3::new(0.37, -0.61, 0.05);
        let upstream = [0.7, -1.3, 0.4];
        let mut g = VolumeGrad::zeros_like(&v);
        v.interpolate_backward(p, &upstream, &mut g);
        let h = 1e-5;
        for &vert in g.touched().to_vec().iter() {
            for k in 0..3 {
                let idx = vert as usize * 3 + k;
                let orig = v.features[idx];
                let objective = |v: &FeatureVolume<f64>| {
                    v.interpolate(p).iter().zip(&upstream).map(|(a, b)| a * b).sum::<f64>()
                };
                v.features[idx] = orig + h;
                let plus = objective(&v);
                v.features[idx] = orig - h;
                let minus = objective(&v);
                v.features[idx] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = g.values[idx];
                let rel = (numeric - analytic).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
                assert!(rel < 1e-6, "vertex {vert} dim {k}: {analytic} vs {numeric}");
            }
        }
    }

    #[test]
    fn single_level_query_equals_interpolate() {
        let c = PyramidConfig {
            levels: 1,
            feature_dim: 4,
            init_scale: 1.0,
            ..Default::default()
        };
        let p: FeatureGridPyramid<f64> = init_pyramid(&c, &mut seeded(5, 0)).unwrap();
        let q = Vec3::new(0.2, 0.9, -0.4);
        assert_eq!(query_pyramid(&p, q), vec![p.levels[0].interpolate(q)]);
    }
}
