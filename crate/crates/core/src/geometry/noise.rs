use rand::Rng;
use rand_distr::StandardNormal;

use super::vec3::Vec3;
use super::PointCloud;
use crate::error::{Error, Result};

/// Perturb every coordinate by independent `N(0, sigma²)` noise. Labels are
/// carried over; `sigma == 0` returns an exact copy.
pub fn inject_gaussian_noise<R: Rng + ?Sized>(
    cloud: &PointCloud,
    sigma: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let points = cloud
        .points
        .iter()
        .map(|&p| {
            let e = Vec3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            p + e * sigma
        })
        .collect();
    Ok(PointCloud {
        points,
        labels: cloud.labels.clone(),
    })
}
