//! Corner features from raw light-field images.
//!
//! Each micro-image is cropped, filtered by brightness, searched for line
//! segments, and the validated segment intersections are averaged into one
//! centroid-of-intersection-points (CIP) feature. Lenses observing the same
//! board corner are then grouped by density clustering over lens indices.

mod cluster;
mod correspond;
mod csv_io;
pub mod lsd;
mod micro;
mod validate;

pub use cluster::cluster_lenses;
pub use correspond::{build_correspondences, cluster_features, Correspondence};
pub use csv_io::{read_features_csv, write_features_csv, FeatureRow};
pub use lsd::{detect_segments, LsdParams, Segment};
pub use micro::{brightness_measure, extract_micro_images, MicroImage};
pub use validate::{
    compute_cip, constraint_score, merge_collinear, quadrant_means, validate_intersection, IntensityQuadruple,
};

use validate::validate_on_lines;

/// Collinearity tolerances for refitting supporting lines.
const MERGE_ANGLE_TOL: f64 = 0.35;
const MERGE_DIST_TOL_PX: f64 = 1.0;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::LensIndex;
use crate::raw::{GrayF, RawImage};
use crate::{MlaGeometry, Point2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("MLA grid does not match the raw image: {0}")]
    GridMismatch(String),
    #[error("empty patch")]
    EmptyPatch,
    #[error("segments are parallel")]
    ParallelSegments,
    #[error("intersection lies outside the patch")]
    OutOfPatch,
    #[error("empty point list")]
    EmptyList,
    #[error("found {found} corner clusters, board has {expected}")]
    CountMismatch { expected: usize, found: usize },
    #[error("cannot order clusters into board rows and columns: {0}")]
    AmbiguousOrdering(String),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

/// One corner feature observed by one micro-lens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CipFeature {
    /// Sub-pixel sensor position.
    pub position_px: Point2,
    pub lens_idx: LensIndex,
    pub n_intersections: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub m_low: f64,
    pub m_high: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Quadrant sampling radius, px.
    pub r: f64,
    /// Samples per quadrant.
    pub n_samples: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Gaussian smoothing for a second segment search on patches where the
    /// raw search finds no corner; 0 disables.
    pub presmooth_sigma: f64,
    /// Estimated noise standard deviation, intensity units, above which a
    /// patch counts as noisy and the smoothed search is allowed.
    pub noise_gate: f64,
    /// Patches whose validated points spread further than this from their
    /// centroid are dropped, px.
    pub max_cip_spread: f64,
    pub lsd: LsdParams,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            m_low: 0.1,
            m_high: 0.9,
            tau1: 100.0,
            tau2: 125.0,
            r: 5.0,
            n_samples: 5,
            dbscan_eps: std::f64::consts::SQRT_2,
            dbscan_min_pts: 2,
            presmooth_sigma: 1.5,
            noise_gate: 2.0,
            max_cip_spread: 5.0,
            lsd: LsdParams::default(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0 <= self.m_low && self.m_low < self.m_high && self.m_high <= 1.0) {
            return Err("brightness thresholds must satisfy 0 <= m_low < m_high <= 1".into());
        }
        if !(self.tau1 > 0.0 && self.tau2 > 0.0) {
            return Err("tau1 and tau2 must be positive".into());
        }
        if !(self.r >= 1.0) || self.n_samples < 1 {
            return Err("r and N must be at least 1".into());
        }
        if !(self.presmooth_sigma >= 0.0) {
            return Err("presmooth_sigma must be non-negative".into());
        }
        if !(self.noise_gate >= 0.0) {
            return Err("noise_gate must be non-negative".into());
        }
        Ok(())
    }
}

/// Robust noise estimate from the median absolute horizontal difference.
/// Flat areas dominate a micro-image, so edges barely move the median.
fn noise_level(img: &GrayF) -> f64 {
    let mut d: Vec<f64> = (0..img.height)
        .flat_map(|y| (1..img.width).map(move |x| (y, x)))
        .map(|(y, x)| (img.get(x, y) - img.get(x - 1, y)).abs())
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    1.4826 * *m / std::f64::consts::SQRT_2
}

/// CIP of a single micro-image, if it holds a validated corner.
pub fn detect_in_patch(micro: &MicroImage, params: &DetectorParams) -> Option<CipFeature> {
    let m = brightness_measure(micro).ok()?;
    if m < params.m_low || m > params.m_high {
        return None;
    }
    // Segments come from the raw patch first. Only when that yields no
    // validated corner on a noisy patch is the search repeated on a smoothed
    // copy, since smoothing rounds corners and shifts the lines. Quadrant
    // samples always use the raw patch, where contrast is sharpest.
    let img = micro.to_gray();
    let mut points = Vec::new();
    let smooth = params.presmooth_sigma > 0.0 && noise_level(&img) > params.noise_gate;
    let passes: &[f64] = if smooth { &[0.0, params.presmooth_sigma] } else { &[0.0] };
    for &sigma in passes {
        if !points.is_empty() {
            break;
        }
        let segments = detect_segments(&img.gaussian_blur(sigma), &params.lsd);
        let lines = merge_collinear(&segments, MERGE_ANGLE_TOL, MERGE_DIST_TOL_PX);
        for k in 0..segments.len() {
            for l in k + 1..segments.len() {
                if let Ok(Some(c)) = validate_on_lines(&img, (&segments[k], &lines[k]), (&segments[l], &lines[l]), params) {
                    points.push(c);
                }
            }
        }
    }
    let cip = compute_cip(&points).ok()?;
    let spread = points.iter().map(|p| p.distance(&cip)).fold(0.0, f64::max);
    if spread > params.max_cip_spread {
        return None;
    }
    Some(CipFeature {
        position_px: Point2::new(cip.x + micro.origin_px.0 as f64, cip.y + micro.origin_px.1 as f64),
        lens_idx: micro.lens_idx,
        n_intersections: points.len(),
    })
}

/// Full per-image pipeline: crop, filter, detect, validate and average.
/// Output is ordered by lens index `(i, j)` and holds at most one feature per
/// micro-lens.
pub fn detect_features(raw: &RawImage, mla: &MlaGeometry, params: &DetectorParams) -> Result<Vec<CipFeature>> {
    let micros = extract_micro_images(raw, mla)?;
    let mut out: Vec<CipFeature> = micros.par_iter().filter_map(|m| detect_in_patch(m, params)).collect();
    out.sort_by_key(|f| f.lens_idx);
    Ok(out)
}
