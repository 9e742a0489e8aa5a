use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::alpha::{estimate_alpha_virtual, trim_cluster, AlphaEstimate};
use super::bundle::{adjust, params_to_pose, pose_to_params, Layout, ViewBundle};
use super::depth::estimate_dc_dm;
use super::lm::{solve, LmOptions, LmReport};
use super::mainlens::{calibrate_main_lens, VirtualObservation};
use super::{CalibError, Result};
use crate::board::BoardSpec;
use crate::eval::{r_squared, reprojection_rmse};
use crate::features::{
    build_correspondences, cluster_features, CipFeature, Correspondence, DetectorParams, FeatureError,
};
use crate::model::{alpha_of_depth, project_full, virtual_pixel, LensIndex};
use crate::{CameraModel, MlaGeometry, Point2, Point3, Pose};

/// Detected features of one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewFeatures {
    pub view_id: usize,
    pub features: Vec<CipFeature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibConfig {
    pub board: BoardSpec,
    pub f_nominal_mm: f64,
    /// Pixel pitch, mm.
    pub sx: f64,
    pub sy: f64,
    /// Micro-lens grid. Its `d_c`/`d_m` are not used as starting values.
    pub mla: MlaGeometry,
    pub detector: DetectorParams,
    pub lm: LmOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewCorrespondences {
    pub view_id: usize,
    pub correspondences: Vec<Correspondence>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerAlpha {
    pub view_id: usize,
    pub corner: (usize, usize),
    pub board_point: Point3,
    pub estimate: AlphaEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewPose {
    pub view_id: usize,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedView {
    pub view_id: usize,
    pub reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Virtual-point reprojection RMSE of the main-lens model, px.
    pub rmse_mainlens_px: f64,
    /// Raw-image reprojection RMSE of the full model, px.
    pub rmse_lightfield_px: f64,
    /// Fit of per-corner alpha against the alpha predicted from pose depth.
    pub r_squared_alpha: f64,
    pub iterations_main: usize,
    pub iterations_joint: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSolution {
    pub cam: CameraModel,
    pub poses: Vec<ViewPose>,
    pub per_corner: Vec<CornerAlpha>,
    pub diagnostics: Diagnostics,
    pub skipped: Vec<SkippedView>,
}

impl CalibrationSolution {
    pub fn pose(&self, view_id: usize) -> Option<&Pose> {
        self.poses.iter().find(|p| p.view_id == view_id).map(|p| &p.pose)
    }
}

/// Clusters, orders and fits alpha for every view. Views whose clusters
/// cannot be matched to the board, or with fewer than four corners carrying
/// four or more CIPs, are reported and left out.
pub fn prepare_views(
    views: &[ViewFeatures],
    board: &BoardSpec,
    mla: &MlaGeometry,
    detector: &DetectorParams,
) -> (Vec<ViewCorrespondences>, Vec<CornerAlpha>, Vec<SkippedView>) {
    let mut used = Vec::new();
    let mut alphas = Vec::new();
    let mut skipped = Vec::new();
    for v in views {
        let clusters = cluster_features(&v.features, detector);
        let corr = match correspond_repaired(&clusters, board, mla) {
            Ok(mut c) => {
                for k in &mut c {
                    k.features = trim_cluster(&k.features, mla);
                }
                c
            }
            Err(e) => {
                skipped.push(SkippedView { view_id: v.view_id, reason: e.to_string() });
                continue;
            }
        };
        let est: Vec<CornerAlpha> = corr
            .iter()
            .filter_map(|c| {
                let e = estimate_alpha_virtual(&c.features, mla).ok()?;
                plausible_virtual_point(&e, &c.features, mla).then_some(CornerAlpha {
                    view_id: v.view_id,
                    corner: c.corner,
                    board_point: c.board_point,
                    estimate: e,
                })
            })
            .collect();
        if est.len() < 4 {
            skipped.push(SkippedView {
                view_id: v.view_id,
                reason: format!("only {} corners with at least 4 CIPs", est.len()),
            });
            continue;
        }
        alphas.extend(est);
        used.push(ViewCorrespondences { view_id: v.view_id, correspondences: corr });
    }
    // All corners image on the same side of the MLA, so 1 - alpha keeps one
    // sign; the rare opposite sign comes from a noise-dominated fit.
    let positive = alphas.iter().filter(|a| a.estimate.alpha() < 1.0).count();
    let keep_below = 2 * positive >= alphas.len();
    alphas.retain(|a| (a.estimate.alpha() < 1.0) == keep_below);
    (used, alphas, skipped)
}

/// Most surplus clusters dropped when repairing a view. Every drop choice is
/// tried, so this stays small.
const MAX_DROP: usize = 2;
/// Most merged clusters split when repairing a view; one candidate only.
const MAX_SPLIT: usize = 4;

/// [`build_correspondences`], retried after repairing a small mismatch
/// between cluster and corner counts. Under sensor noise two stray CIPs in
/// neighbouring lenses can form a cluster of their own, and extra CIPs
/// between corners can bridge two clusters into one. Surplus clusters are
/// dropped smallest first; for a deficit the worst-fitting clusters are
/// split. The lattice check inside [`build_correspondences`] rejects a wrong
/// repair.
fn correspond_repaired(
    clusters: &[Vec<CipFeature>],
    board: &BoardSpec,
    mla: &MlaGeometry,
) -> std::result::Result<Vec<Correspondence>, FeatureError> {
    let n = board.corner_count();
    let first = build_correspondences(clusters, board, mla);
    if first.is_ok() || clusters.len() > n + MAX_DROP || clusters.len() + MAX_SPLIT < n {
        return first;
    }
    let candidates: Vec<Vec<Vec<CipFeature>>> = if clusters.len() > n {
        let surplus = clusters.len() - n;
        let mut by_size: Vec<usize> = (0..clusters.len()).collect();
        by_size.sort_by_key(|&k| (clusters[k].len(), k));
        let pool = &by_size[..(surplus + 3).min(clusters.len())];
        combinations(pool.len(), surplus)
            .into_iter()
            .map(|pick| {
                let removed: Vec<usize> = pick.iter().map(|&p| pool[p]).collect();
                clusters.iter().enumerate().filter(|(k, _)| !removed.contains(k)).map(|(_, c)| c.clone()).collect()
            })
            .collect()
    } else {
        split_worst(clusters, n - clusters.len(), mla)
    };
    candidates.iter().find_map(|c| build_correspondences(c, board, mla).ok()).map_or(first, Ok)
}

/// Candidate repairs that split `count` of the `count + 2` clusters with
/// the largest fit residual in two, worst first. Each CIP is mapped to its
/// own virtual point `(u - alpha c) / (1 - alpha)` with the median alpha of
/// the view, and the two halves come from 2-means on those points.
fn split_worst(clusters: &[Vec<CipFeature>], count: usize, mla: &MlaGeometry) -> Vec<Vec<Vec<CipFeature>>> {
    let fits: Vec<Option<AlphaEstimate>> = clusters.iter().map(|c| estimate_alpha_virtual(c, mla).ok()).collect();
    let mut alphas: Vec<f64> = fits.iter().flatten().map(|e| e.alpha()).collect();
    if alphas.is_empty() {
        return Vec::new();
    }
    alphas.sort_by(f64::total_cmp);
    let alpha = alphas[alphas.len() / 2];
    if (1.0 - alpha).abs() < 1e-9 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..clusters.len()).filter(|&k| fits[k].is_some()).collect();
    order.sort_by(|&a, &b| {
        let r = |k: usize| fits[k].map_or(0.0, |e| e.residual_rms);
        r(b).total_cmp(&r(a))
    });
    order.truncate(count + 2);
    let halves: Vec<Option<(Vec<CipFeature>, Vec<CipFeature>)>> =
        order.iter().map(|&k| split_cluster(&clusters[k], alpha, mla)).collect();
    let splittable: Vec<usize> = (0..order.len()).filter(|&i| halves[i].is_some()).collect();
    let mut out = Vec::new();
    for pick in combinations(splittable.len(), count) {
        let chosen: Vec<usize> = pick.iter().map(|&p| splittable[p]).collect();
        let mut repaired = Vec::with_capacity(clusters.len() + count);
        for (k, c) in clusters.iter().enumerate() {
            match chosen.iter().find(|&&i| order[i] == k) {
                Some(&i) => {
                    let (a, b) = halves[i].clone().expect("splittable");
                    repaired.push(a);
                    repaired.push(b);
                }
                None => repaired.push(c.clone()),
            }
        }
        out.push(repaired);
    }
    out
}

fn split_cluster(c: &[CipFeature], alpha: f64, mla: &MlaGeometry) -> Option<(Vec<CipFeature>, Vec<CipFeature>)> {
    let v: Vec<Point2> = c
        .iter()
        .map(|f| {
            let ctr = mla.lens_center(f.lens_idx.0, f.lens_idx.1).unwrap_or(f.position_px);
            Point2::new((f.position_px.x - alpha * ctr.x) / (1.0 - alpha), (f.position_px.y - alpha * ctr.y) / (1.0 - alpha))
        })
        .collect();
    let labels = two_means(&v)?;
    let (a, b): (Vec<_>, Vec<_>) = c.iter().zip(&labels).partition(|(_, &l)| l);
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    Some((a.into_iter().map(|(f, _)| *f).collect(), b.into_iter().map(|(f, _)| *f).collect()))
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Two-cluster Lloyd iteration seeded with the farthest pair of points.
fn two_means(pts: &[Point2]) -> Option<Vec<bool>> {
    if pts.len() < 2 {
        return None;
    }
    let (mut ca, mut cb) = (pts[0], pts[1]);
    let mut far = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            if p.distance(q) > far {
                far = p.distance(q);
                (ca, cb) = (*p, *q);
            }
        }
    }
    let mut labels = vec![false; pts.len()];
    for _ in 0..20 {
        let new: Vec<bool> = pts.iter().map(|p| p.distance(&ca) <= p.distance(&cb)).collect();
        let mean = |sel: bool| {
            let m: Vec<&Point2> = pts.iter().zip(&new).filter(|(_, &l)| l == sel).map(|(p, _)| p).collect();
            let n = m.len() as f64;
            (n > 0.0).then(|| Point2::new(m.iter().map(|p| p.x).sum::<f64>() / n, m.iter().map(|p| p.y).sum::<f64>() / n))
        };
        ca = mean(true)?;
        cb = mean(false)?;
        let done = new == labels;
        labels = new;
        if done {
            break;
        }
    }
    Some(labels)
}

/// The lenses seeing a corner surround its virtual point, so an estimate
/// far outside their footprint comes from an ill-conditioned fit.
fn plausible_virtual_point(e: &AlphaEstimate, features: &[CipFeature], mla: &MlaGeometry) -> bool {
    let centers: Vec<Point2> = features.iter().filter_map(|f| mla.lens_center(f.lens_idx.0, f.lens_idx.1).ok()).collect();
    let n = centers.len() as f64;
    let m = centers.iter().fold(Point2::new(0.0, 0.0), |s, c| Point2::new(s.x + c.x / n, s.y + c.y / n));
    let reach = centers.iter().map(|c| c.distance(&m)).fold(0.0, f64::max) + mla.pitch_w().max(mla.pitch_h());
    e.virtual_px.distance(&m) <= reach
}

fn virtual_depth(cam: &CameraModel, pose: &Pose, board: Point3) -> Option<f64> {
    let z = pose.transform(board).z;
    let f = cam.lens.focal_length;
    (z - f != 0.0).then(|| f * z / (z - f))
}

/// `d_c`/`d_m` from raw CIPs with the main-lens model fixed. With the
/// virtual point `V` and depth `Z'` of each corner known,
/// `u - c = D (V - c) / (Z' - d_m)` with `D = d_c - d_m`. For fixed `d_m`
/// the best `D` is closed-form, so `d_m` is found by a scan on both sides
/// of the observed depth range followed by golden-section refinement.
fn dc_dm_from_raw(
    cam: &CameraModel,
    pose_of: &HashMap<usize, Pose>,
    correspondences: &[ViewCorrespondences],
) -> Option<(f64, f64)> {
    // (u - c, V - c, Z') per feature.
    let mut rows = Vec::new();
    for vc in correspondences {
        let pose = pose_of.get(&vc.view_id)?;
        for c in &vc.correspondences {
            let Ok(v) = virtual_pixel(pose.transform(c.board_point), cam) else { continue };
            for f in &c.features {
                let Ok(ctr) = cam.mla.lens_center(f.lens_idx.0, f.lens_idx.1) else { continue };
                rows.push((f.position_px - ctr, v.pixel - ctr, v.depth));
            }
        }
    }
    if rows.len() < 2 {
        return None;
    }
    let fit = |d_m: f64| -> (f64, f64) {
        let (mut ww, mut wu, mut uu) = (0.0, 0.0, 0.0);
        for (du, dv, z) in &rows {
            let s = 1.0 / (z - d_m);
            ww += s * s * (dv.x * dv.x + dv.y * dv.y);
            wu += s * (du.x * dv.x + du.y * dv.y);
            uu += du.x * du.x + du.y * du.y;
        }
        let big_d = wu / ww;
        (big_d, uu - wu * wu / ww)
    };
    let z_min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let z_max = rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    let span = (z_max - z_min).max(1e-3 * z_max.abs());
    // Offsets of d_m from the depth range, geometrically spaced.
    let offsets: Vec<f64> = (0..200).map(|k| span * 1e-2 * 1.05f64.powi(k)).filter(|o| *o < z_min).collect();
    let grid: Vec<f64> = offsets.iter().map(|o| z_min - o).chain(offsets.iter().map(|o| z_max + o)).collect();
    let best = grid.iter().enumerate().min_by(|a, b| fit(*a.1).1.total_cmp(&fit(*b.1).1))?.0;
    // Bracket with the grid neighbours on the same side.
    let side = offsets.len();
    let (lo_k, hi_k) = if best < side {
        (best.saturating_sub(1), (best + 1).min(side - 1))
    } else {
        ((best - 1).max(side), (best + 1).min(grid.len() - 1))
    };
    let (mut lo, mut hi) = (grid[lo_k].min(grid[hi_k]), grid[lo_k].max(grid[hi_k]));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if fit(a).1 < fit(b).1 {
            hi = b;
        } else {
            lo = a;
        }
    }
    let d_m = 0.5 * (lo + hi);
    let (big_d, _) = fit(d_m);
    Some((d_m + big_d, d_m))
}

fn raw_cost(cam: &CameraModel, pose_of: &HashMap<usize, Pose>, correspondences: &[ViewCorrespondences]) -> f64 {
    let mut cost = 0.0;
    for vc in correspondences {
        let Some(pose) = pose_of.get(&vc.view_id) else { continue };
        for c in &vc.correspondences {
            for f in &c.features {
                match project_full(c.board_point, pose, cam, f.lens_idx) {
                    Ok(p) => cost += (p - f.position_px).norm().powi(2),
                    Err(_) => return f64::INFINITY,
                }
            }
        }
    }
    cost
}

/// Error metrics of a solution over its correspondences.
pub fn compute_diagnostics(
    cam: &CameraModel,
    poses: &[ViewPose],
    per_corner: &[CornerAlpha],
    correspondences: &[ViewCorrespondences],
) -> (f64, f64, f64) {
    let pose_of: HashMap<usize, &Pose> = poses.iter().map(|p| (p.view_id, &p.pose)).collect();
    let mut main = Vec::new();
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for c in per_corner {
        let Some(pose) = pose_of.get(&c.view_id) else { continue };
        if let Ok(v) = virtual_pixel(pose.transform(c.board_point), cam) {
            main.push(v.pixel - c.estimate.virtual_px);
            if let Ok(a) = alpha_of_depth(v.depth, &cam.mla) {
                observed.push(c.estimate.alpha());
                predicted.push(a);
            }
        }
    }
    let mut raw = Vec::new();
    for vc in correspondences {
        let Some(pose) = pose_of.get(&vc.view_id) else { continue };
        for c in &vc.correspondences {
            for f in &c.features {
                if let Ok(p) = project_full(c.board_point, pose, cam, f.lens_idx) {
                    raw.push(p - f.position_px);
                }
            }
        }
    }
    (
        reprojection_rmse(&main).unwrap_or(f64::NAN),
        reprojection_rmse(&raw).unwrap_or(f64::NAN),
        r_squared(&observed, &predicted).unwrap_or(f64::NAN),
    )
}

type RawObs = (Point3, LensIndex, Point2);

fn raw_observations(vc: &ViewCorrespondences) -> Vec<RawObs> {
    vc.correspondences
        .iter()
        .flat_map(|c| c.features.iter().map(move |f| (c.board_point, f.lens_idx, f.position_px)))
        .collect()
}

/// Outlier cut of the joint refinement, in robust standard deviations.
const TRIM_SIGMAS: f64 = 3.5;
/// Residuals below this are never trimmed, px.
const TRIM_FLOOR_PX: f64 = 1.0;

/// Runs the bundle adjustment once per `(lens, distortion)` stage, always
/// with the MLA distances free.
fn run_stages(
    cam: &CameraModel,
    poses: &[Pose],
    obs: &[Vec<RawObs>],
    stages: &[(bool, bool)],
    opts: &LmOptions,
) -> Result<(CameraModel, Vec<Pose>, usize, bool)> {
    let rows: Vec<usize> = obs.iter().map(|o| 2 * o.len()).collect();
    let residuals = |cam: &CameraModel, pose: &Pose, v: usize| {
        let mut r = Vec::with_capacity(2 * obs[v].len());
        for &(b, lens, u) in &obs[v] {
            let q = project_full(b, pose, cam, lens).ok()?;
            r.push(q.x - u.x);
            r.push(q.y - u.y);
        }
        Some(r)
    };
    let (mut cam, mut poses) = (*cam, poses.to_vec());
    let (mut iters, mut converged) = (0, true);
    for &(lens, distortion) in stages {
        let layout = Layout { lens, distortion, mla: true };
        let (c, p, rep) = adjust(&cam, &poses, rows.clone(), layout, opts, residuals)?;
        cam = c;
        poses = p;
        iters += rep.iters;
        converged &= rep.converged;
    }
    Ok((cam, poses, iters, converged))
}



/// Joint refinement of focal length, principal point, distortion, `d_c`,
/// `d_m` and every pose on raw-pixel residuals. The micro-lens grid stays
/// fixed.
pub fn refine_joint(
    initial: &CalibrationSolution,
    correspondences: &[ViewCorrespondences],
    opts: &LmOptions,
) -> Result<CalibrationSolution> {
    let pose_of: HashMap<usize, Pose> = initial.poses.iter().map(|p| (p.view_id, p.pose)).collect();
    let views: Vec<&ViewCorrespondences> = correspondences.iter().filter(|v| pose_of.contains_key(&v.view_id)).collect();
    if views.is_empty() {
        return Err(CalibError::InsufficientData("no correspondences match the initial poses".into()));
    }
    let mut obs: Vec<Vec<RawObs>> = views.iter().map(|v| raw_observations(v)).collect();
    let poses0: Vec<Pose> = views.iter().map(|v| pose_of[&v.view_id]).collect();
    // Parameters are released in stages, MLA distances first, then the main
    // lens, then distortion, so that a rough start does not drift into a
    // wrong basin.
    let stages = [(false, false), (true, false), (true, true)];
    let (mut cam, mut poses_fit, mut iters, mut converged) = run_stages(&initial.cam, &poses0, &obs, &stages, opts)?;
    // Stray CIPs from noisy micro-images would otherwise pull the fit; drop
    // observations beyond TRIM_SIGMAS robust standard deviations and refit.
    let norms: Vec<Vec<f64>> = obs
        .iter()
        .zip(&poses_fit)
        .map(|(o, pose)| {
            o.iter()
                .map(|&(b, lens, u)| project_full(b, pose, &cam, lens).map_or(f64::INFINITY, |q| q.distance(&u)))
                .collect()
        })
        .collect();
    let mut all: Vec<f64> = norms.iter().flatten().copied().filter(|r| r.is_finite()).collect();
    if !all.is_empty() {
        all.sort_by(f64::total_cmp);
        // The median of a 2-D Gaussian error norm is sigma * sqrt(2 ln 2).
        let sigma = all[all.len() / 2] / (2.0 * std::f64::consts::LN_2).sqrt();
        let cut = (TRIM_SIGMAS * sigma).max(TRIM_FLOOR_PX);
        let before: usize = obs.iter().map(Vec::len).sum();
        for (o, n) in obs.iter_mut().zip(&norms) {
            let mut k = 0;
            o.retain(|_| {
                k += 1;
                n[k - 1] <= cut
            });
        }
        let after: usize = obs.iter().map(Vec::len).sum();
        if after < before && obs.iter().all(|o| o.len() >= 3) {
            let (c, p, it, conv) = run_stages(&cam, &poses_fit, &obs, &stages[2..], opts)?;
            cam = c;
            poses_fit = p;
            iters += it;
            converged = conv;
        }
    }
    let poses: Vec<ViewPose> =
        views.iter().zip(poses_fit).map(|(v, pose)| ViewPose { view_id: v.view_id, pose }).collect();
    let (rm, rl, r2) = compute_diagnostics(&cam, &poses, &initial.per_corner, correspondences);
    Ok(CalibrationSolution {
        cam,
        poses,
        per_corner: initial.per_corner.clone(),
        diagnostics: Diagnostics {
            rmse_mainlens_px: rm,
            rmse_lightfield_px: rl,
            r_squared_alpha: r2,
            iterations_main: initial.diagnostics.iterations_main,
            iterations_joint: iters,
            converged: initial.diagnostics.converged && converged,
        },
        skipped: initial.skipped.clone(),
    })
}

/// End-to-end calibration from per-view CIP features.
pub fn calibrate_full(views: &[ViewFeatures], cfg: &CalibConfig) -> Result<CalibrationSolution> {
    let (corrs, alphas, skipped) = prepare_views(views, &cfg.board, &cfg.mla, &cfg.detector);
    if corrs.len() < 3 {
        return Err(CalibError::InsufficientData(format!(
            "{} usable views, need 3 ({} skipped)",
            corrs.len(),
            skipped.len()
        )));
    }
    let virtual_views: Vec<Vec<VirtualObservation>> = corrs
        .iter()
        .map(|vc| {
            alphas
                .iter()
                .filter(|a| a.view_id == vc.view_id)
                .map(|a| VirtualObservation { board: a.board_point, virtual_px: a.estimate.virtual_px })
                .collect()
        })
        .collect();
    // Virtual points are too noisy to pin distortion down; the raw-point
    // refinement estimates it.
    let fit = calibrate_main_lens(&virtual_views, cfg.f_nominal_mm, cfg.sx, cfg.sy, &cfg.mla, false, &cfg.lm)?;
    let poses: Vec<ViewPose> =
        corrs.iter().zip(&fit.poses).map(|(vc, p)| ViewPose { view_id: vc.view_id, pose: *p }).collect();

    let main_cam = CameraModel { lens: fit.lens, dist: fit.dist, mla: cfg.mla };
    let pose_of: HashMap<usize, Pose> = poses.iter().map(|p| (p.view_id, p.pose)).collect();
    let mut obs = Vec::with_capacity(2 * alphas.len());
    for a in &alphas {
        if let Some(z) = virtual_depth(&main_cam, &pose_of[&a.view_id], a.board_point) {
            obs.push((a.estimate.alpha_x, z));
            obs.push((a.estimate.alpha_y, z));
        }
    }
    // The alpha regression is exact without noise but inherits the spread of
    // per-corner alpha; the raw-point fit does not. Start from whichever
    // reprojects the raw features better.
    let from_alpha = estimate_dc_dm(&obs)?;
    let candidates = [Some(from_alpha), dc_dm_from_raw(&main_cam, &pose_of, &corrs)];
    let cam = candidates
        .iter()
        .flatten()
        .filter(|(d_c, d_m)| d_c > d_m && *d_m > 0.0)
        .map(|&(d_c, d_m)| CameraModel { mla: MlaGeometry { d_c, d_m, ..cfg.mla }, ..main_cam })
        .min_by(|a, b| raw_cost(a, &pose_of, &corrs).total_cmp(&raw_cost(b, &pose_of, &corrs)))
        .ok_or(CalibError::ImplausibleMla { d_c: from_alpha.0, d_m: from_alpha.1 })?;
    let (rm, rl, r2) = compute_diagnostics(&cam, &poses, &alphas, &corrs);
    let initial = CalibrationSolution {
        cam,
        poses,
        per_corner: alphas,
        diagnostics: Diagnostics {
            rmse_mainlens_px: rm,
            rmse_lightfield_px: rl,
            r_squared_alpha: r2,
            iterations_main: fit.report.iters,
            iterations_joint: 0,
            converged: fit.report.converged,
        },
        skipped,
    };
    refine_joint(&initial, &corrs, &cfg.lm)
}

/// Pose-only refinement on raw-pixel residuals with the camera held fixed.
pub fn refine_pose_lightfield(
    cam: &CameraModel,
    correspondences: &[Correspondence],
    initial: &Pose,
    opts: &LmOptions,
) -> Result<(Pose, LmReport)> {
    let obs = raw_observations(&ViewCorrespondences { view_id: 0, correspondences: correspondences.to_vec() });
    if obs.len() < 3 {
        return Err(CalibError::TooFewObservations(obs.len()));
    }
    let problem = ViewBundle {
        n_global: 0,
        rows: vec![2 * obs.len()],
        eval: |_: &[f64], p: &[f64], _: usize| {
            let pose = params_to_pose(p);
            let mut r = Vec::with_capacity(2 * obs.len());
            for &(b, lens, u) in &obs {
                let q = project_full(b, &pose, cam, lens).ok()?;
                r.push(q.x - u.x);
                r.push(q.y - u.y);
            }
            Some(r)
        },
    };
    let rep = solve(&problem, &pose_to_params(initial), opts)?;
    Ok((params_to_pose(&rep.x), rep))
}
