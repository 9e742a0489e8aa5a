use super::{DetectorParams, FeatureError, Result, Segment};
use crate::raw::GrayF;
use crate::Point2;

/// Mean intensities `I_1..I_4` of the quadrants `(+,+), (+,-), (-,-), (-,+)`
/// spanned by the two segment directions.
pub type IntensityQuadruple = [f64; 4];

const QUADRANTS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];

/// Number of satisfied corner constraints, 0 to 4. Opposite quadrants must
/// be alike (`I1 - I3 < tau1`, `I2 - I4 < tau1`) and adjacent ones must
/// differ (`I1 - I2 > tau2`, `I3 - I4 > tau2`).
pub fn constraint_score(q: &IntensityQuadruple, tau1: f64, tau2: f64) -> u8 {
    let s = [q[0] - q[2] < tau1, q[1] - q[3] < tau1, q[0] - q[1] > tau2, q[2] - q[3] > tau2];
    s.iter().filter(|&&b| b).count() as u8
}

/// Samples `c0 + r (i / N) (k1 v1 + k2 v2)`, `i = 1..=N`, in each quadrant
/// with bilinear interpolation. Samples falling outside the patch are
/// skipped; a quadrant keeping fewer than half of its samples yields `None`.
pub fn quadrant_means(
    img: &GrayF,
    c0: Point2,
    v1: Point2,
    v2: Point2,
    r: f64,
    n: usize,
) -> Option<IntensityQuadruple> {
    let need = n.div_ceil(2);
    let mut out = [0.0; 4];
    for (q, &(k1, k2)) in QUADRANTS.iter().enumerate() {
        let dx = k1 * v1.x + k2 * v2.x;
        let dy = k1 * v1.y + k2 * v2.y;
        let (mut sum, mut count) = (0.0, 0usize);
        for i in 1..=n {
            let t = r * i as f64 / n as f64;
            if let Some(v) = img.sample(c0.x + t * dx, c0.y + t * dy) {
                sum += v;
                count += 1;
            }
        }
        if count < need {
            return None;
        }
        out[q] = sum / count as f64;
    }
    Some(out)
}

fn line_intersection(s1: &Segment, s2: &Segment) -> Result<Point2> {
    let (d1, d2) = (s1.direction, s2.direction);
    let cross = d1.x * d2.y - d1.y * d2.x;
    if cross.abs() < 1e-3 {
        return Err(FeatureError::ParallelSegments);
    }
    let w = s2.a - s1.a;
    let t = (w.x * d2.y - w.y * d2.x) / cross;
    Ok(Point2::new(s1.a.x + t * d1.x, s1.a.y + t * d1.y))
}

/// Intersects the supporting lines of two segments and checks the corner
/// constraints around the intersection.
///
/// Returns `Ok(None)` for candidates that are rejected: intersection outside
/// the patch or too far from either segment's nearest endpoint, or fewer
/// than four satisfied constraints. Both orientations of `s1` are tried so
/// that the verdict does not depend on which side of a segment is bright.
pub fn validate_intersection(
    img: &GrayF,
    s1: &Segment,
    s2: &Segment,
    params: &DetectorParams,
) -> Result<Option<Point2>> {
    validate_on_lines(img, (s1, s1), (s2, s2), params)
}

/// As [`validate_intersection`], but the candidate point and the sampling
/// directions come from refined supporting lines `(segment, line)` while
/// the endpoint rule still uses the detected segments.
pub(crate) fn validate_on_lines(
    img: &GrayF,
    (s1, l1): (&Segment, &Segment),
    (s2, l2): (&Segment, &Segment),
    params: &DetectorParams,
) -> Result<Option<Point2>> {
    let c0 = line_intersection(l1, l2)?;
    let inside = c0.x >= 0.0 && c0.y >= 0.0 && c0.x < img.width as f64 && c0.y < img.height as f64;
    if !inside {
        return Ok(None);
    }
    let reach = 1.5 * params.r;
    if s1.endpoint_distance(&c0) > reach || s2.endpoint_distance(&c0) > reach {
        return Ok(None);
    }
    let v2 = l2.direction;
    for v1 in [l1.direction, Point2::new(-l1.direction.x, -l1.direction.y)] {
        if let Some(q) = quadrant_means(img, c0, v1, v2, params.r, params.n_samples) {
            if constraint_score(&q, params.tau1, params.tau2) == 4 {
                return Ok(Some(c0));
            }
        }
    }
    Ok(None)
}

/// Refits the supporting line of every segment over all segments lying on
/// the same line. A checkerboard edge through a corner splits into two
/// segments of opposite polarity, and fitting both arms together keeps a
/// short arm from tilting the line. Each returned segment keeps the
/// orientation of its input.
pub fn merge_collinear(segments: &[Segment], angle_tol: f64, dist_tol: f64) -> Vec<Segment> {
    let n = segments.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn root(g: &mut [usize], mut k: usize) -> usize {
        while g[k] != k {
            g[k] = g[g[k]];
            k = g[k];
        }
        k
    }
    let mid = |s: &Segment| Point2::new(0.5 * (s.a.x + s.b.x), 0.5 * (s.a.y + s.b.y));
    let off_line = |s: &Segment, p: Point2| ((p.x - s.a.x) * s.direction.y - (p.y - s.a.y) * s.direction.x).abs();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&segments[i], &segments[j]);
            let sin = (a.direction.x * b.direction.y - a.direction.y * b.direction.x).abs();
            // Short arms fit their angle poorly, so the angle allowance grows
            // as the shorter segment shrinks (capped at 45 degrees) and its
            // endpoints are tested against the longer one's line.
            let (long, short) = if a.length() >= b.length() { (a, b) } else { (b, a) };
            let tol = angle_tol.max((2.0 * dist_tol / short.length()).atan()).min(std::f64::consts::FRAC_PI_4);
            if sin < tol.sin() && off_line(long, short.a) < dist_tol && off_line(long, short.b) < dist_tol {
                let (ri, rj) = (root(&mut group, i), root(&mut group, j));
                group[ri] = rj;
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|k| root(&mut group, k)).collect();
    (0..n)
        .map(|k| {
            let members: Vec<&Segment> = (0..n).filter(|&m| roots[m] == roots[k]).map(|m| &segments[m]).collect();
            if members.len() == 1 {
                return segments[k];
            }
            // Scatter of points spread uniformly along each member, weighted
            // by length.
            let wsum: f64 = members.iter().map(|s| s.length()).sum();
            let (mx, my) = members.iter().fold((0.0, 0.0), |(x, y), s| {
                let (m, w) = (mid(s), s.length());
                (x + w * m.x, y + w * m.y)
            });
            let c = Point2::new(mx / wsum, my / wsum);
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for s in &members {
                let (w, m, d) = (s.length(), mid(s), s.b - s.a);
                let (ex, ey) = (m.x - c.x, m.y - c.y);
                sxx += w * (d.x * d.x / 12.0 + ex * ex);
                sxy += w * (d.x * d.y / 12.0 + ex * ey);
                syy += w * (d.y * d.y / 12.0 + ey * ey);
            }
            let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
            let mut dir = Point2::new(theta.cos(), theta.sin());
            let own = segments[k].direction;
            if dir.x * own.x + dir.y * own.y < 0.0 {
                dir = Point2::new(-dir.x, -dir.y);
            }
            let project = |p: Point2| {
                let t = (p.x - c.x) * dir.x + (p.y - c.y) * dir.y;
                Point2::new(c.x + t * dir.x, c.y + t * dir.y)
            };
            Segment::new(project(segments[k].a), project(segments[k].b), segments[k].support).unwrap_or(segments[k])
        })
        .collect()
}

/// Arithmetic centroid of validated intersection points.
pub fn compute_cip(points: &[Point2]) -> Result<Point2> {
    if points.is_empty() {
        return Err(FeatureError::EmptyList);
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    Ok(Point2::new(sx / n, sy / n))
}
