//! Acceptance suite: one PASS/FAIL line per criterion. Failures are reported
//! but only make the process exit non-zero with `ACCEPTANCE_STRICT=1`, so a
//! known failure does not stop the rest of `cargo test` from running.
//!
//! The expensive criteria train full-size models on a single core; the whole
//! run takes a quarter of an hour or more.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use sdfad::geometry::closest_point_on_triangle;
use sdfad::geometry::oracle::brute_force_signed_distance;
use sdfad::metrics::oracle::{aupr_thresholds, auroc_all_pairs};
use sdfad::mlf::{trilinear_weights, FeatureVolume};
use sdfad::npg::{build_sampling_table, generate_training_set, sample_surface_indexed, sample_surface_point};
use sdfad::rng::seeded;
use sdfad::synth::{box_mesh, icosphere, synth, torus, AnomalyKind, SynthOutput, SynthSpec};
use sdfad::train::checkpoint::encode;
use sdfad::train::gradcheck::ParamBlock;
use sdfad::train::{gradient_check, load_checkpoint, save_checkpoint, train_on_meshes};
use sdfad::{
    aupr, auroc, noise_sweep, score_points, ModelConfig, NormalizationTransform, SamplingConfig, TrainConfig,
    TrainedModel, TriangleMesh, Vec3,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

/// Training and scoring products shared by the end-to-end criteria.
struct Task {
    defect: SynthOutput,
    clean: SynthOutput,
}

impl Task {
    fn new() -> Self {
        Self {
            defect: synth(&SynthSpec::default()).expect("synthetic defect"),
            clean: synth(&SynthSpec {
                anomaly: AnomalyKind::None,
                seed: 1,
                ..Default::default()
            })
            .expect("synthetic clean cloud"),
        }
    }

    fn train(&self, sampling: SamplingConfig, model: ModelConfig, seed: u64) -> TrainedModel {
        let sampling = SamplingConfig { seed, ..sampling };
        let train = TrainConfig {
            seed,
            ..Default::default()
        };
        train_on_meshes(&[self.defect.mesh.clone()], &sampling, &model, &train).expect("training")
    }

    fn point_auroc(&self, model: &TrainedModel) -> f64 {
        score_points(model, &self.defect.cloud)
            .expect("scoring")
            .metrics
            .expect("both classes")
            .auroc
    }
}

fn trilinear_exactness() -> Verdict {
    let start = Instant::now();
    let mut r = seeded(101, 0);
    let mut v = FeatureVolume::<f64>::zeros(1, 8, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let cell: [usize; 3] = std::array::from_fn(|_| r.random_range(0..8));
        let c: [f64; 8] = std::array::from_fn(|_| r.random_range(-3.0..3.0));
        // Polynomial in world coordinates restricted to the cell.
        let poly = |p: Vec3| {
            c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.z + c[4] * p.x * p.y + c[5] * p.x * p.z + c[6] * p.y * p.z
                + c[7] * p.x * p.y * p.z
        };
        for j in 0..8 {
            let vert = v.vertex_index(cell[0] + (j & 1), cell[1] + ((j >> 1) & 1), cell[2] + ((j >> 2) & 1));
            let pos = v.vertex_position(vert);
            v.feature_mut(vert)[0] = poly(pos);
        }
        let q = Vec3::new(
            -1.0 + (cell[0] as f64 + r.random_range(0.0..1.0)) * 0.25,
            -1.0 + (cell[1] as f64 + r.random_range(0.0..1.0)) * 0.25,
            -1.0 + (cell[2] as f64 + r.random_range(0.0..1.0)) * 0.25,
        );
        worst = worst.max((v.interpolate(q)[0] - poly(q)).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max error {worst:.2e} over 100 queries in {elapsed:.2?}"),
    )
}

fn partition_of_unity() -> Verdict {
    let mut r = seeded(102, 0);
    let mut worst: f64 = 0.0;
    let mut in_range = true;
    for _ in 0..100_000 {
        let w = trilinear_weights(std::array::from_fn(|_| r.random_range(0.0..=1.0)));
        worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
        in_range &= w.iter().all(|x| (0.0..=1.0).contains(x));
    }
    verdict(
        worst <= 1e-12 && in_range,
        format!("max |sum - 1| {worst:.2e}, all weights in [0, 1]: {in_range}"),
    )
}

fn gradient_check_criterion() -> Verdict {
    let start = Instant::now();
    let model: TrainedModel<f64> = TrainedModel::initialize(
        NormalizationTransform::identity(),
        SamplingConfig::default(),
        ModelConfig::default(),
        TrainConfig::default(),
    )
    .expect("model");
    let sphere = icosphere(4);
    let sphere = sphere.with_vertices(sphere.vertices.iter().map(|&v| v * 0.9).collect()).unwrap();
    let data = generate_training_set(
        &sphere,
        &SamplingConfig {
            base_surface_count: 26,
            ..Default::default()
        },
    )
    .expect("batch");
    let report = gradient_check(&model, &data, 1e-5, 0).expect("gradient check");
    let layers = (0..4).all(|l| report.covers(|b| matches!(b, ParamBlock::Weight(i) | ParamBlock::Bias(i) if i == l)));
    let levels = (0..3).filter(|&l| report.covers(|b| b == ParamBlock::Grid(l))).count();
    let elapsed = start.elapsed();
    verdict(
        report.entries.len() >= 50
            && layers
            && levels >= 2
            && report.max_relative_error < 1e-4
            && elapsed < Duration::from_secs(30),
        format!(
            "{} parameters ({} grid levels, all 4 layers: {layers}), max relative error {:.2e}, {elapsed:.2?}",
            report.entries.len(),
            levels,
            report.max_relative_error
        ),
    )
}

fn sampling_law() -> Verdict {
    let areas = [0.5, 1.0, 1.5, 2.0, 2.5];
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, a) in areas.iter().enumerate() {
        let leg = (2.0f64 * a).sqrt();
        let b = vertices.len() as u32;
        vertices.extend([
            Vec3::new(0.0, 0.0, i as f64),
            Vec3::new(leg, 0.0, i as f64),
            Vec3::new(0.0, leg, i as f64),
        ]);
        faces.push([b, b + 1, b + 2]);
    }
    let mesh = TriangleMesh::new(vertices, faces).unwrap();
    let table = build_sampling_table(&mesh).unwrap();
    let n = 10_000;
    let mut counts = [0usize; 5];
    for (f, _) in sample_surface_indexed(&mesh, &table, n, &mut seeded(104, 1)) {
        counts[f] += 1;
    }
    let total: f64 = areas.iter().sum();
    let chi2: f64 = counts
        .iter()
        .zip(areas)
        .map(|(&c, a)| {
            let e = n as f64 * a / total;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p = ChiSquared::new(4.0).unwrap().sf(chi2);
    let (p1, p2, p3) = (Vec3::new(0.1, 0.2, 0.3), Vec3::new(-1.5, 2.0, 0.7), Vec3::new(3.0, -0.25, 1.0));
    let endpoints = sample_surface_point([p1, p2, p3], 0.0, 0.5) == p2
        && sample_surface_point([p1, p2, p3], 1.0, 1.0) == p1
        && sample_surface_point([p1, p2, p3], 1.0, 0.0) == p3;
    verdict(
        p > 0.001 && endpoints,
        format!("chi2 {chi2:.3} (p = {p:.4}), counts {counts:?}, endpoints exact: {endpoints}"),
    )
}

fn signed_distance_oracle() -> Verdict {
    let mut r = seeded(105, 0);
    let mut worst: f64 = 0.0;
    for mesh in [icosphere(3), box_mesh(3), torus(4)] {
        for _ in 0..200 {
            let q = Vec3::new(r.random_range(-1.5..1.5), r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
            let fast = mesh.signed_distance(q).unwrap();
            worst = worst.max((fast - brute_force_signed_distance(&mesh, q).unwrap()).abs());
            // Unsigned distance straight from the per-triangle minimum.
            let min = (0..mesh.face_count())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    closest_point_on_triangle(q, a, b, c).distance_squared
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            worst = worst.max((fast.abs() - min).abs());
        }
    }
    let center = icosphere(4).signed_distance(Vec3::ZERO).unwrap();
    let rel = (center + 1.0).abs();
    verdict(
        worst <= 1e-12 && rel < 0.02,
        format!("max BVH/brute-force gap {worst:.2e} over 600 queries; icosphere center {center:.5} (r = 1)"),
    )
}

fn metric_oracles() -> Verdict {
    let mut r = seeded(106, 0);
    let mut auroc_exact = true;
    let mut aupr_gap: f64 = 0.0;
    let mut instances = 0;
    while instances < 100 {
        let n = r.random_range(2..=200);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..10) as f64 / 10.0).collect();
        let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..=1)).collect();
        if !(labels.contains(&0) && labels.contains(&1)) {
            continue;
        }
        instances += 1;
        auroc_exact &= auroc(&scores, &labels).unwrap() == auroc_all_pairs(&scores, &labels).unwrap();
        aupr_gap = aupr_gap.max((aupr(&scores, &labels).unwrap() - aupr_thresholds(&scores, &labels).unwrap()).abs());
    }
    let perfect = auroc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
    let ties = auroc(&[0.5; 4], &[1, 0, 0, 1]).unwrap();
    verdict(
        auroc_exact && aupr_gap <= 1e-12 && perfect == 1.0 && ties == 0.5,
        format!("AUROC exact on 100 instances: {auroc_exact}; max AUPR gap {aupr_gap:.1e}; perfect {perfect}, ties {ties}"),
    )
}

fn end_to_end(task: &Task) -> (Verdict, TrainedModel) {
    let start = Instant::now();
    let model = task.train(SamplingConfig::default(), ModelConfig::default(), 0);
    let defect = score_points(&model, &task.defect.cloud).expect("scoring");
    let clean = score_points(&model, &task.clean.cloud).expect("scoring");
    let elapsed = start.elapsed();
    let a = defect.metrics.expect("both classes").auroc;
    let v = verdict(
        a >= 0.95 && defect.object_score > clean.object_score && elapsed < Duration::from_secs(300),
        format!(
            "point AUROC {a:.4}; object score defective {:.4} vs clean {:.4}; {elapsed:.1?}",
            defect.object_score, clean.object_score
        ),
    );
    (v, model)
}

fn ablation(task: &Task) -> Verdict {
    let sampling = SamplingConfig {
        ratio: [2, 0, 0],
        ..Default::default()
    };
    let a = task.point_auroc(&task.train(sampling, ModelConfig::default(), 0));
    verdict(a <= 0.6, format!("surface-only point AUROC {a:.4}"))
}

fn lod_direction(task: &Task, l3_seed0: f64) -> Verdict {
    let mut l1 = Vec::new();
    let mut l3 = vec![l3_seed0];
    for seed in 0..3 {
        let mut model = ModelConfig::default();
        model.pyramid.levels = 1;
        l1.push(task.point_auroc(&task.train(SamplingConfig::default(), model, seed)));
        if seed > 0 {
            l3.push(task.point_auroc(&task.train(SamplingConfig::default(), ModelConfig::default(), seed)));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m1, m3) = (mean(&l1), mean(&l3));
    verdict(
        m3 >= m1 - 0.02,
        format!("mean point AUROC L=3 {m3:.4} {l3:.4?} vs L=1 {m1:.4} {l1:.4?}"),
    )
}

fn noise_robustness(task: &Task, model: &TrainedModel) -> Verdict {
    let rows = noise_sweep(model, &task.defect.cloud, &[0.0, 0.005], 0).expect("sweep");
    let (clean, noisy) = (rows[0].metrics.auroc, rows[1].metrics.auroc);
    verdict(
        clean - noisy < 0.1,
        format!("point AUROC at sigma 0: {clean:.4}, at sigma 0.005: {noisy:.4}"),
    )
}

fn determinism(dir: &Path) -> Verdict {
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let d = dir.join(tag);
        let exe = env!("CARGO_BIN_EXE_sdfad");
        let ok = |args: &[&str]| {
            let out = Command::new(exe).args(args).output().expect("binary runs");
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        };
        let p = |name: &str| d.join(name).to_str().unwrap().to_string();
        ok(&["synth", "--seed", "3", "--out", &p("")]);
        ok(&[
            "train", "--mesh", &p("mesh.obj"), "--seed", "3", "--steps", "200", "--out", &p("model.ckpt"),
        ]);
        ok(&["score", "--model", &p("model.ckpt"), "--cloud", &p("cloud.ply"), "--out", &p("scores.csv")]);
        (
            std::fs::read(d.join("model.ckpt")).unwrap(),
            std::fs::read(d.join("scores.csv")).unwrap(),
        )
    };
    let (ckpt_a, scores_a) = run("a");
    let (ckpt_b, scores_b) = run("b");
    verdict(
        ckpt_a == ckpt_b && scores_a == scores_b,
        format!(
            "checkpoints identical: {} ({} bytes); score files identical: {}",
            ckpt_a == ckpt_b,
            ckpt_a.len(),
            scores_a == scores_b
        ),
    )
}

fn checkpoint_round_trip(model: &TrainedModel, dir: &Path) -> Verdict {
    let (a, b) = (dir.join("first.ckpt"), dir.join("second.ckpt"));
    save_checkpoint(model, &a).unwrap();
    let loaded = load_checkpoint(&a).unwrap();
    save_checkpoint(&loaded, &b).unwrap();
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let same = x == y && encode(&loaded).unwrap() == x;
    verdict(same, format!("save -> load -> save byte-identical: {same} ({} bytes)", x.len()))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, v: Verdict| {
        if !v.pass {
            failures += 1;
        }
        println!("{} [{id:>2}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    };
    report(1, "trilinear exactness", trilinear_exactness());
    report(2, "partition of unity", partition_of_unity());
    report(3, "gradient check", gradient_check_criterion());
    report(4, "sampling law", sampling_law());
    report(5, "signed-distance oracle", signed_distance_oracle());
    report(6, "metric oracles", metric_oracles());

    let task = Task::new();
    let (v, model) = end_to_end(&task);
    report(7, "end-to-end synthetic detection", v);
    let l3_seed0 = task.point_auroc(&model);
    report(8, "noisy-point ablation", ablation(&task));
    report(9, "level-of-detail direction", lod_direction(&task, l3_seed0));
    report(10, "noise robustness", noise_robustness(&task, &model));

    let dir = tempfile::tempdir().unwrap();
    report(11, "determinism", determinism(dir.path()));
    report(12, "checkpoint round trip", checkpoint_round_trip(&model, dir.path()));

    if failures > 0 {
        println!("{failures} criterion(s) failed");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
