use proptest::prelude::*;
use rand::Rng;
use sdfad::mlf::{init_pyramid, trilinear_weights, FeatureVolume, PyramidConfig, Stencil, VolumeGrad};
use sdfad::rng::seeded;
use sdfad::{Error, Vec3};

/// Per-channel trilinear polynomial `Σ c_ijk x^i y^j z^k`, i, j, k ∈ {0, 1}.
fn trilinear_poly(c: &[f64; 8], p: Vec3) -> f64 {
    (0..8)
        .map(|j| {
            let mut t = c[j];
            if j & 1 == 1 {
                t *= p.x;
            }
            if j & 2 == 2 {
                t *= p.y;
            }
            if j & 4 == 4 {
                t *= p.z;
            }
            t
        })
        .sum()
}

fn random_volume(res: usize, dim: usize, seed: u64) -> FeatureVolume<f64> {
    let mut v = FeatureVolume::zeros(1, res, dim);
    let mut r = seeded(seed, 0);
    for f in &mut v.features {
        *f = r.random_range(-1.0..1.0);
    }
    v
}

fn random_point<R: Rng>(r: &mut R) -> Vec3 {
    Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

#[test]
fn reproduces_trilinear_polynomials() {
    let mut r = seeded(21, 0);
    let dim = 3;
    let coeffs: Vec<[f64; 8]> = (0..dim).map(|_| std::array::from_fn(|_| r.random_range(-2.0..2.0))).collect();
    for res in [1, 4, 16] {
        let mut v = FeatureVolume::<f64>::zeros(1, res, dim);
        for vert in 0..v.vertex_count() {
            let p = v.vertex_position(vert);
            for (k, c) in coeffs.iter().enumerate() {
                v.feature_mut(vert)[k] = trilinear_poly(c, p);
            }
        }
        // A trilinear polynomial in world coordinates is trilinear in every cell.
        for _ in 0..100 {
            let p = random_point(&mut r);
            let got = v.interpolate(p);
            for (k, c) in coeffs.iter().enumerate() {
                assert!((got[k] - trilinear_poly(c, p)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn shared_faces_agree_from_both_cells() {
    let v = random_volume(8, 4, 3);
    let mut r = seeded(22, 0);
    let eval = |cell: [usize; 3], local: [f64; 3]| {
        let vertices = std::array::from_fn(|j| {
            v.vertex_index(cell[0] + (j & 1), cell[1] + ((j >> 1) & 1), cell[2] + ((j >> 2) & 1)) as u32
        });
        let mut acc = vec![0.0; 4];
        v.accumulate_interpolated(&Stencil { vertices, weights: trilinear_weights(local) }, &mut acc);
        acc
    };
    for _ in 0..100 {
        // Shared face x = i between cells i-1 and i.
        let i = r.random_range(1..8);
        let (cy, cz) = (r.random_range(0..8), r.random_range(0..8));
        let (ty, tz) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
        let below = eval([i - 1, cy, cz], [1.0, ty, tz]);
        let above = eval([i, cy, cz], [0.0, ty, tz]);
        for k in 0..4 {
            assert!((below[k] - above[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn outside_queries_clamp_to_the_cube() {
    let v = random_volume(4, 2, 4);
    let pairs = [
        (Vec3::new(1.7, 0.2, -0.3), Vec3::new(1.0, 0.2, -0.3)),
        (Vec3::new(-5.0, -5.0, 5.0), Vec3::new(-1.0, -1.0, 1.0)),
        (Vec3::new(0.1, -1.01, 0.4), Vec3::new(0.1, -1.0, 0.4)),
    ];
    for (out, clamped) in pairs {
        assert_eq!(v.interpolate(out), v.interpolate(clamped));
    }
}

#[test]
fn vertex_queries_return_vertex_features() {
    let v = random_volume(4, 3, 5);
    for vert in [0, 7, 31, v.vertex_count() - 1] {
        let got = v.interpolate(v.vertex_position(vert));
        assert_eq!(got, v.feature(vert));
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut v = random_volume(4, 3, 6);
    let mut r = seeded(23, 0);
    let eps = 1e-5;
    for _ in 0..20 {
        let p = random_point(&mut r);
        let upstream: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut g = VolumeGrad::zeros_like(&v);
        v.interpolate_backward(p, &upstream, &mut g);
        let objective = |v: &FeatureVolume<f64>| -> f64 {
            v.interpolate(p).iter().zip(&upstream).map(|(a, b)| a * b).sum()
        };
        for &vert in g.touched() {
            for k in 0..3 {
                let i = vert as usize * 3 + k;
                let orig = v.features[i];
                v.features[i] = orig + eps;
                let plus = objective(&v);
                v.features[i] = orig - eps;
                let minus = objective(&v);
                v.features[i] = orig;
                let numeric = (plus - minus) / (2.0 * eps);
                let analytic = g.values[i];
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-6, "{numeric} vs {analytic}");
            }
        }
    }
}

#[test]
fn pyramid_shapes_and_budget() {
    let cfg = PyramidConfig::default();
    let p = init_pyramid::<f32, _>(&cfg, &mut seeded(0, 0)).unwrap();
    let res: Vec<usize> = p.levels.iter().map(|v| v.resolution).collect();
    assert_eq!(res, vec![8, 16, 32]);
    assert_eq!(p.parameter_count() as u64, cfg.parameter_count());
    let tight = PyramidConfig {
        memory_cap_bytes: 1 << 20,
        ..cfg
    };
    assert!(matches!(
        init_pyramid::<f32, _>(&tight, &mut seeded(0, 0)),
        Err(Error::MemoryBudgetExceeded { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_partition_unity(local in prop::array::uniform3(0.0f64..=1.0)) {
        let w = trilinear_weights(local);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn locate_stays_in_range(p in prop::array::uniform3(-3.0f64..3.0), lod in 0u32..5) {
        let v = FeatureVolume::<f32>::zeros(1, 1 << lod, 1);
        let loc = v.locate(Vec3::from(p));
        for a in 0..3 {
            prop_assert!(loc.cell_index[a] < v.resolution);
            prop_assert!((0.0..=1.0).contains(&loc.local[a]));
        }
    }
}
