//! Scoring test clouds with a trained field.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{inject_gaussian_noise, PointCloud};
use crate::metrics::{aupr, auroc};
use crate::real::Real;
use crate::rng;
use crate::train::TrainedModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub auroc: f64,
    pub aupr: f64,
}

impl Metrics {
    pub fn compute(scores: &[f64], labels: &[u8]) -> Result<Self> {
        Ok(Self {
            auroc: auroc(scores, labels)?,
            aupr: aupr(scores, labels)?,
        })
    }

    /// `{"auroc":…,"aupr":…}`
    pub fn to_json(&self) -> String {
        format!("{{\"auroc\":{},\"aupr\":{}}}", self.auroc, self.aupr)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::geometry::io::write_file(path.as_ref(), format!("{}\n", self.to_json()).as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// `|d̃|` per input point, in input order.
    pub point_scores: Vec<f64>,
    /// Maximum of the point scores.
    pub object_score: f64,
    /// Point-level metrics, present when the cloud carried labels of both classes.
    pub metrics: Option<Metrics>,
}

impl ScoreReport {
    pub fn from_scores(point_scores: Vec<f64>) -> Self {
        let object_score = point_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            point_scores,
            object_score,
            metrics: None,
        }
    }

    /// Scores CSV: `index,score` rows followed by `# object_score=<value>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,score\n");
        for (i, s) in self.point_scores.iter().enumerate() {
            let _ = writeln!(out, "{i},{s}");
        }
        let _ = writeln!(out, "# object_score={}", self.object_score);
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::geometry::io::write_file(path.as_ref(), self.to_csv().as_bytes())
    }
}

/// Read a scores CSV written by [`ScoreReport::write_csv`].
pub fn load_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut scores = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (n == 0 && line.starts_with("index")) {
            continue;
        }
        let loc = format!("line {}", n + 1);
        let (idx, score) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, &loc, "expected `index,score`"))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, &loc, "bad index"))?;
        if idx != scores.len() {
            return Err(Error::parse(path, &loc, format!("expected index {}, found {idx}", scores.len())));
        }
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, &loc, "bad score"))?;
        scores.push(score);
    }
    Ok(scores)
}

/// Score every point of `cloud` (given in the coordinates of the training
/// meshes) by the magnitude of the predicted signed distance.
pub fn score_points<T: Real>(model: &TrainedModel<T>, cloud: &PointCloud) -> Result<ScoreReport> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let normalized: Vec<_> = cloud.points.iter().map(|&p| model.transform.apply(p)).collect();
    let scores = model.predict_normalized(&normalized)?.into_iter().map(f64::abs).collect();
    let mut report = ScoreReport::from_scores(scores);
    if let Some(labels) = &cloud.labels {
        if labels.contains(&0) && labels.contains(&1) {
            report.metrics = Some(Metrics::compute(&report.point_scores, labels)?);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSweepRow {
    pub sigma: f64,
    pub report: ScoreReport,
    pub metrics: Metrics,
}

/// Score the labelled `cloud` after Gaussian corruption at each σ (given in
/// normalized units, i.e. relative to the unit cube the model was trained in).
/// Row `i` draws its noise from its own stream, so rows are independent of
/// each other and of the order of `sigmas`.
pub fn noise_sweep<T: Real>(
    model: &TrainedModel<T>,
    cloud: &PointCloud,
    sigmas: &[f64],
    seed: u64,
) -> Result<Vec<NoiseSweepRow>> {
    let labels = cloud
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("noise sweep needs a labelled cloud".into()))?;
    let mut rows = Vec::with_capacity(sigmas.len());
    for (i, &sigma) in sigmas.iter().enumerate() {
        let mut r = rng::seeded(seed, rng::NOISE_BASE + i as u64);
        let noisy = inject_gaussian_noise(cloud, sigma / model.transform.scale, &mut r)?;
        let mut report = score_points(model, &noisy)?;
        let metrics = Metrics::compute(&report.point_scores, labels)?;
        report.metrics = Some(metrics);
        rows.push(NoiseSweepRow { sigma, report, metrics });
    }
    Ok(rows)
}

/// Sweep table as CSV: `sigma,auroc,aupr,object_score`.
pub fn noise_sweep_csv(rows: &[NoiseSweepRow]) -> String {
    let mut out = String::from("sigma,auroc,aupr,object_score\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.sigma, r.metrics.auroc, r.metrics.aupr, r.report.object_score
        );
    }
    out
}
