use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{cluster_lenses, CipFeature, DetectorParams, FeatureError, Result};
use crate::board::BoardSpec;
use crate::calibrate::{apply_homography, estimate_alpha_virtual, fit_homography, trim_cluster};
use crate::{MlaGeometry, Point2, Point3};

/// A board corner together with every CIP observing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// `(row, col)` of the inner corner on the board.
    pub corner: (usize, usize),
    pub board_point: Point3,
    pub features: Vec<CipFeature>,
}

/// Groups features into per-corner clusters by DBSCAN over their lens
/// indices. Noise features are dropped.
pub fn cluster_features(features: &[CipFeature], params: &DetectorParams) -> Vec<Vec<CipFeature>> {
    let by_lens: HashMap<_, _> = features.iter().map(|f| (f.lens_idx, *f)).collect();
    let idx: Vec<_> = features.iter().map(|f| f.lens_idx).collect();
    cluster_lenses(&idx, params.dbscan_eps, params.dbscan_min_pts)
        .into_iter()
        .map(|c| c.iter().map(|k| by_lens[k]).collect())
        .collect()
}

fn virtual_point(cluster: &[CipFeature], mla: &MlaGeometry) -> Point2 {
    if let Ok(e) = estimate_alpha_virtual(&trim_cluster(cluster, mla), mla) {
        if e.virtual_px.is_finite() {
            return e.virtual_px;
        }
    }
    // Too few CIPs for the linear fit: the observing lenses surround the
    // virtual point, so their mean center is a usable stand-in.
    let n = cluster.len() as f64;
    let (sx, sy) = cluster.iter().fold((0.0, 0.0), |(x, y), f| {
        let c = mla.lens_center(f.lens_idx.0, f.lens_idx.1).unwrap_or(f.position_px);
        (x + c.x, y + c.y)
    });
    Point2::new(sx / n, sy / n)
}

/// Principal axes of a 2D point set, major axis first.
fn principal_axes(pts: &[Point2]) -> (Point2, Point2) {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        sxx += (p.x - mx) * (p.x - mx);
        syy += (p.y - my) * (p.y - my);
        sxy += (p.x - mx) * (p.y - my);
    }
    let t = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (Point2::new(t.cos(), t.sin()), Point2::new(-t.sin(), t.cos()))
}

fn dot(a: Point2, b: Point2) -> f64 {
    a.x * b.x + a.y * b.y
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local lattice step vectors, estimated from nearest-neighbor differences
/// and classified against the principal axes.
fn lattice_vectors(pts: &[Point2]) -> Result<(Point2, Point2)> {
    let (e1, e2) = principal_axes(pts);
    let mut class1 = Vec::new();
    let mut class2 = Vec::new();
    for (k, p) in pts.iter().enumerate() {
        let nn = pts
            .iter()
            .enumerate()
            .filter(|&(q, _)| q != k)
            .map(|(_, o)| o.distance(p))
            .fold(f64::INFINITY, f64::min);
        for (q, o) in pts.iter().enumerate() {
            if q == k || o.distance(p) > 1.3 * nn {
                continue;
            }
            let w = *o - *p;
            if dot(w, e1).abs() >= dot(w, e2).abs() {
                class1.push(if dot(w, e1) >= 0.0 { w } else { Point2::new(-w.x, -w.y) });
            } else {
                class2.push(if dot(w, e2) >= 0.0 { w } else { Point2::new(-w.x, -w.y) });
            }
        }
    }
    if class1.is_empty() || class2.is_empty() {
        return Err(FeatureError::AmbiguousOrdering("no lattice structure among corner points".into()));
    }
    let med = |c: &[Point2]| {
        Point2::new(median(c.iter().map(|w| w.x).collect()), median(c.iter().map(|w| w.y).collect()))
    };
    Ok((med(&class1), med(&class2)))
}

fn lattice_coords(pts: &[Point2], a1: Point2, a2: Point2, origin: Point2) -> Result<Vec<Point2>> {
    let det = a1.x * a2.y - a1.y * a2.x;
    if !(det.abs() > 1e-12 * a1.norm() * a2.norm()) {
        return Err(FeatureError::AmbiguousOrdering("lattice vectors are parallel".into()));
    }
    Ok(pts
        .iter()
        .map(|p| {
            let d = *p - origin;
            Point2::new((d.x * a2.y - d.y * a2.x) / det, (a1.x * d.y - a1.y * d.x) / det)
        })
        .collect())
}

/// Rounds lattice coordinates, rejecting points that sit further than a
/// quarter step from a node. This is the same as requiring the spread within
/// a row or column to stay below half the gap between rows or columns.
fn round_checked(g: &[Point2]) -> Result<Vec<(i64, i64)>> {
    let mut out = Vec::with_capacity(g.len());
    for p in g {
        let r = (p.x.round(), p.y.round());
        let off = (p.x - r.0).abs().max((p.y - r.1).abs());
        if off > 0.25 {
            return Err(FeatureError::AmbiguousOrdering(format!(
                "corner sits {off:.2} steps from the nearest grid node"
            )));
        }
        out.push((r.0 as i64, r.1 as i64));
    }
    Ok(out)
}

/// Lattice coordinates under perspective. Starting from the 3x3
/// neighbourhood of the origin in the uniform-lattice guess, a homography
/// from grid nodes to points is refitted while the accepted region grows
/// ring by ring, so distant corners are judged against a local model.
fn grow_lattice(pts: &[Point2], guess: &[Point2]) -> Result<Vec<Point2>> {
    let mut coords = guess.to_vec();
    let mut radius = 1;
    loop {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (g, p) in coords.iter().zip(pts) {
            let r = (g.x.round(), g.y.round());
            let off = (g.x - r.0).abs().max((g.y - r.1).abs());
            if r.0.abs().max(r.1.abs()) as i64 <= radius && off <= 0.25 {
                src.push(Point2::new(r.0, r.1));
                dst.push(*p);
            }
        }
        let h = if src.len() >= 4 { fit_homography(&src, &dst).and_then(|h| h.try_inverse()) } else { None };
        let Some(h) = h else {
            return Err(FeatureError::AmbiguousOrdering("degenerate corner layout".into()));
        };
        coords = pts.iter().map(|&p| apply_homography(&h, p)).collect();
        if src.len() == pts.len() || radius as usize > pts.len() {
            return Ok(coords);
        }
        radius += 1;
    }
}

fn order_1d(pts: &[Point2]) -> Vec<usize> {
    let (e1, _) = principal_axes(pts);
    let e1 = if e1.x.abs() >= e1.y.abs() { if e1.x < 0.0 { Point2::new(-e1.x, -e1.y) } else { e1 } } else if e1.y < 0.0 {
        Point2::new(-e1.x, -e1.y)
    } else {
        e1
    };
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| dot(pts[a], e1).total_cmp(&dot(pts[b], e1)));
    idx
}

/// Assigns each corner cluster to one board corner.
///
/// The virtual point of each cluster is estimated, the virtual points are
/// arranged on a lattice aligned with their principal axes, refined with a
/// homography from the board grid, and matched to `(row, col)` with board
/// `+x` along image `+x` and board `+y` along image `+y`.
pub fn build_correspondences(
    clusters: &[Vec<CipFeature>],
    board: &BoardSpec,
    mla: &MlaGeometry,
) -> Result<Vec<Correspondence>> {
    let n = board.corner_count();
    if clusters.len() != n {
        return Err(FeatureError::CountMismatch { expected: n, found: clusters.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let pts: Vec<Point2> = clusters.iter().map(|c| virtual_point(c, mla)).collect();
    let mut cells: Vec<(usize, usize)> = vec![(0, 0); n];

    if board.rows == 1 || board.cols == 1 {
        for (rank, k) in order_1d(&pts).into_iter().enumerate() {
            cells[k] = if board.rows == 1 { (0, rank) } else { (rank, 0) };
        }
    } else {
        let (a1, a2) = lattice_vectors(&pts)?;
        let n_f = n as f64;
        let centroid = pts.iter().fold(Point2::new(0.0, 0.0), |s, p| Point2::new(s.x + p.x / n_f, s.y + p.y / n_f));
        let origin = *pts
            .iter()
            .min_by(|a, b| a.distance(&centroid).total_cmp(&b.distance(&centroid)))
            .expect("non-empty");
        let fine = grow_lattice(&pts, &lattice_coords(&pts, a1, a2, origin)?)?;
        let fine = round_checked(&fine)?;

        let (min1, max1) = fine.iter().fold((i64::MAX, i64::MIN), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
        let (min2, max2) = fine.iter().fold((i64::MAX, i64::MIN), |(lo, hi), c| (lo.min(c.1), hi.max(c.1)));
        let span1 = (max1 - min1 + 1) as usize;
        let span2 = (max2 - min2 + 1) as usize;
        // Axis 1 runs along board columns (x) unless the extents say otherwise.
        let first_is_x = if board.rows == board.cols {
            a1.x.abs() >= a2.x.abs()
        } else if (span1, span2) == (board.cols, board.rows) {
            true
        } else if (span1, span2) == (board.rows, board.cols) {
            false
        } else {
            return Err(FeatureError::AmbiguousOrdering(format!(
                "corner lattice spans {span1}x{span2}, board is {}x{}",
                board.cols, board.rows
            )));
        };
        if (span1 * span2) != n {
            return Err(FeatureError::AmbiguousOrdering("corner lattice has holes".into()));
        }
        let (ax, ay) = if first_is_x { (a1, a2) } else { (a2, a1) };
        let flip_x = ax.x < 0.0;
        let flip_y = ay.y < 0.0;
        for (k, &(g1, g2)) in fine.iter().enumerate() {
            let (gx, gy, minx, miny, maxx, maxy) =
                if first_is_x { (g1, g2, min1, min2, max1, max2) } else { (g2, g1, min2, min1, max2, max1) };
            let col = if flip_x { maxx - gx } else { gx - minx } as usize;
            let row = if flip_y { maxy - gy } else { gy - miny } as usize;
            cells[k] = (row, col);
        }
    }

    let unique: HashSet<_> = cells.iter().collect();
    if unique.len() != n || cells.iter().any(|&(r, c)| r >= board.rows || c >= board.cols) {
        return Err(FeatureError::AmbiguousOrdering("corner assignment is not one-to-one".into()));
    }
    let mut out: Vec<Correspondence> = cells
        .iter()
        .zip(clusters)
        .map(|(&(r, c), feats)| Correspondence { corner: (r, c), board_point: board.corner(r, c), features: feats.clone() })
        .collect();
    out.sort_by_key(|c| c.corner);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mla() -> MlaGeometry {
        MlaGeometry {
            d_c: 58.0,
            d_m: 57.0,
            n_h: 60,
            n_w: 80,
            sensor_h: 1200,
            sensor_w: 1600,
            offset_x: 0.0,
            offset_y: 0.0,
            theta: 0.0,
        }
    }

    /// Synthetic clusters: every lens within `radius` px of a corner's
    /// virtual point sees it through the blend with alpha.
    fn clusters_for(points: &[Point2], alpha: f64, radius: f64) -> Vec<Vec<CipFeature>> {
        let g = mla();
        points
            .iter()
            .map(|v| {
                g.lens_indices()
                    .filter_map(|(i, j)| {
                        let c = g.lens_center(i, j).unwrap();
                        (c.distance(v) < radius).then(|| CipFeature {
                            position_px: Point2::new(alpha * c.x + (1.0 - alpha) * v.x, alpha * c.y + (1.0 - alpha) * v.y),
                            lens_idx: (i, j),
                            n_intersections: 4,
                        })
                    })
                    .collect()
            })
            .collect()
    }

    fn board_image(board: &BoardSpec, angle_deg: f64, step: f64) -> Vec<Point2> {
        let (s, c) = angle_deg.to_radians().sin_cos();
        board
            .corners()
            .iter()
            .map(|p| {
                let (x, y) = (p.x / board.square_mm * step, p.y / board.square_mm * step);
                Point2::new(800.0 + c * x - s * y, 600.0 + s * x + c * y)
            })
            .collect()
    }

    fn check(board: &BoardSpec, pts: &[Point2], mut order: Vec<usize>) {
        let truth: Vec<(usize, usize)> = (0..board.rows).flat_map(|r| (0..board.cols).map(move |c| (r, c))).collect();
        // Shuffle cluster order to make sure nothing relies on it.
        order.reverse();
        let clusters_all = clusters_for(pts, 0.7, 30.0);
        let clusters: Vec<_> = order.iter().map(|&k| clusters_all[k].clone()).collect();
        let corr = build_correspondences(&clusters, board, &mla()).unwrap();
        assert_eq!(corr.len(), board.corner_count());
        for c in &corr {
            let k = clusters.iter().position(|cl| cl == &c.features).unwrap();
            assert_eq!(c.corner, truth[order[k]]);
            assert_eq!(c.board_point, board.corner(c.corner.0, c.corner.1));
        }
    }

    #[test]
    fn frontal_nine_by_six() {
        let board = BoardSpec::new(6, 9, 5.0);
        let pts = board_image(&board, 0.0, 85.0);
        check(&board, &pts, (0..54).collect());
    }

    #[test]
    fn rotated_in_plane() {
        let board = BoardSpec::new(6, 9, 5.0);
        for angle in [10.0, -25.0] {
            let pts = board_image(&board, angle, 85.0);
            check(&board, &pts, (0..54).collect());
        }
    }

    #[test]
    fn count_mismatch() {
        let board = BoardSpec::new(6, 9, 5.0);
        let pts = board_image(&board, 0.0, 85.0);
        let clusters = clusters_for(&pts[..53], 0.7, 30.0);
        assert_eq!(
            build_correspondences(&clusters, &board, &mla()),
            Err(FeatureError::CountMismatch { expected: 54, found: 53 })
        );
    }

    #[test]
    fn scrambled_layout_is_ambiguous() {
        let board = BoardSpec::new(2, 3, 5.0);
        let pts: Vec<Point2> = [(400.0, 300.0), (470.0, 310.0), (560.0, 290.0), (420.0, 500.0), (620.0, 560.0), (700.0, 333.0)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let clusters = clusters_for(&pts, 0.7, 30.0);
        assert!(matches!(build_correspondences(&clusters, &board, &mla()), Err(FeatureError::AmbiguousOrdering(_))));
    }
}
