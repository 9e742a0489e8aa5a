use serde::{Deserialize, Serialize};

use super::{CalibError, Result};
use crate::features::CipFeature;
use crate::{MlaGeometry, Point2};

/// Per-corner blend factor and virtual point, from one cluster of CIPs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha_x: f64,
    pub alpha_y: f64,
    /// Virtual point in pixel units.
    pub virtual_px: Point2,
    /// RMS of the linear fit residuals, px.
    pub residual_rms: f64,
}

impl AlphaEstimate {
    /// Single alpha per corner, used for reporting.
    pub fn alpha(&self) -> f64 {
        0.5 * (self.alpha_x + self.alpha_y)
    }
}

/// Fits `u = alpha c + b` on one axis. Returns `(alpha, b, sum of squared residuals)`.
fn fit_axis(c: &[f64], u: &[f64]) -> Result<(f64, f64, f64)> {
    let n = c.len() as f64;
    let cm = c.iter().sum::<f64>() / n;
    let um = u.iter().sum::<f64>() / n;
    let (mut scc, mut scu) = (0.0, 0.0);
    let mut scale = 0.0;
    for (&ci, &ui) in c.iter().zip(u) {
        scc += (ci - cm) * (ci - cm);
        scu += (ci - cm) * (ui - um);
        scale += ci * ci;
    }
    if !(scc > 64.0 * f64::EPSILON * scale.max(1.0)) {
        return Err(CalibError::RankDeficient);
    }
    let alpha = scu / scc;
    let b = um - alpha * cm;
    let sse = c.iter().zip(u).map(|(&ci, &ui)| (ui - alpha * ci - b).powi(2)).sum();
    Ok((alpha, b, sse))
}

/// Linear least-squares estimate of `alpha` and the virtual point from the
/// CIPs of one board corner, with each axis solved independently.
pub fn estimate_alpha_virtual(features: &[CipFeature], mla: &MlaGeometry) -> Result<AlphaEstimate> {
    if features.len() < 4 {
        return Err(CalibError::TooFewFeatures(features.len()));
    }
    let mut cx = Vec::with_capacity(features.len());
    let mut cy = Vec::with_capacity(features.len());
    for f in features {
        let c = mla.lens_center(f.lens_idx.0, f.lens_idx.1)?;
        cx.push(c.x);
        cy.push(c.y);
    }
    let ux: Vec<f64> = features.iter().map(|f| f.position_px.x).collect();
    let uy: Vec<f64> = features.iter().map(|f| f.position_px.y).collect();
    let (ax, bx, ex) = fit_axis(&cx, &ux)?;
    let (ay, by, ey) = fit_axis(&cy, &uy)?;
    if (1.0 - ax).abs() < 1e-9 || (1.0 - ay).abs() < 1e-9 {
        return Err(CalibError::AlphaNearOne);
    }
    Ok(AlphaEstimate {
        alpha_x: ax,
        alpha_y: ay,
        virtual_px: Point2::new(bx / (1.0 - ax), by / (1.0 - ay)),
        residual_rms: ((ex + ey) / (2.0 * features.len() as f64)).sqrt(),
    })
}

/// Residuals below this never count as outliers, px.
const OUTLIER_FLOOR_PX: f64 = 1.0;

/// Drops CIPs that disagree with the rest of their cluster, worst first,
/// while more than four remain. A CIP is an outlier when its residual under
/// the linear fit exceeds both the floor and 3.5 robust standard deviations.
pub fn trim_cluster(features: &[CipFeature], mla: &MlaGeometry) -> Vec<CipFeature> {
    let mut kept = features.to_vec();
    while kept.len() > 4 {
        let Ok(e) = estimate_alpha_virtual(&kept, mla) else { break };
        let res: Vec<f64> = kept
            .iter()
            .map(|f| {
                mla.lens_center(f.lens_idx.0, f.lens_idx.1).map_or(f64::INFINITY, |c| {
                    let px = e.alpha_x * c.x + (1.0 - e.alpha_x) * e.virtual_px.x;
                    let py = e.alpha_y * c.y + (1.0 - e.alpha_y) * e.virtual_px.y;
                    (f.position_px.x - px).hypot(f.position_px.y - py)
                })
            })
            .collect();
        let mut sorted = res.clone();
        sorted.sort_by(f64::total_cmp);
        let sigma = sorted[sorted.len() / 2] / (2.0 * std::f64::consts::LN_2).sqrt();
        let (worst, r) = res.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        if *r <= (3.5 * sigma).max(OUTLIER_FLOOR_PX) {
            break;
        }
        kept.remove(worst);
    }
    kept
}
