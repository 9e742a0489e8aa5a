use rand::Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::features::CipFeature;
use crate::raw::RawImage;
use crate::Point2;

/// Gaussian noise with standard deviation `sigma` on intensities scaled to
/// `[0, 1]`, then clamped and re-quantized to 8 bits.
pub fn add_sensor_noise(img: &RawImage, sigma: f64, seed: u64) -> RawImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    let data = img
        .data
        .iter()
        .map(|&v| {
            let n: f64 = rng.sample(StandardNormal);
            let x = f64::from(v) / 255.0 + sigma * n;
            (x.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    RawImage { width: img.width, height: img.height, data }
}

/// Independent Gaussian offsets of standard deviation `sigma_px` on both
/// coordinates of every feature.
pub fn add_observation_noise(features: &[CipFeature], sigma_px: f64, seed: u64) -> Vec<CipFeature> {
    if sigma_px == 0.0 {
        return features.to_vec();
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    features
        .iter()
        .map(|f| {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            CipFeature {
                position_px: Point2::new(f.position_px.x + sigma_px * dx, f.position_px.y + sigma_px * dy),
                ..*f
            }
        })
        .collect()
}
