use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::Point2;

fn normalizer(pts: &[Point2]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x / n, y + p.y / n));
    let mean_dist = pts.iter().map(|p| (p.x - mx).hypot(p.y - my)).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

/// Normalized DLT estimate of `H` with `dst ~ H src`. Needs at least four
/// correspondences; returns `None` when the system is degenerate.
pub fn fit_homography(src: &[Point2], dst: &[Point2]) -> Option<Matrix3<f64>> {
    let n = src.len();
    if n < 4 || dst.len() != n {
        return None;
    }
    let ts = normalizer(src);
    let td = normalizer(dst);
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for k in 0..n {
        let s = ts * Vector3::new(src[k].x, src[k].y, 1.0);
        let d = td * Vector3::new(dst[k].x, dst[k].y, 1.0);
        let (x, y) = (s.x / s.z, s.y / s.z);
        let (u, v) = (d.x / d.z, d.y / d.z);
        let r = 2 * k;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t?;
    let (mut best, mut best_sv) = (0, f64::INFINITY);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s < best_sv {
            best_sv = s;
            best = k;
        }
    }
    // A second near-zero singular value means the points do not pin H down.
    let mut sorted: Vec<f64> = svd.singular_values.iter().copied().collect();
    sorted.sort_by(|a, b| a.total_cmp(b));
    if sorted[1] <= 1e-9 * sorted[8].max(f64::MIN_POSITIVE) {
        return None;
    }
    let h = vt.row(best);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let h = td.try_inverse()? * hn * ts;
    let scale = h[(2, 2)];
    let h = if scale.abs() > f64::EPSILON * h.norm() { h / scale } else { h / h.norm() };
    h.iter().all(|v| v.is_finite()).then_some(h)
}

pub fn apply_homography(h: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = h * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}
