//! Gradient region-growing line segment detector.
//!
//! Pixels are grouped by level-line orientation starting from the strongest
//! gradients, each grouped region is fitted with a rectangle, and rectangles
//! that are too sparse are shrunk toward their seed. Every gradient sample
//! belongs to at most one segment.

use crate::raw::GrayF;
use crate::Point2;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LsdParams {
    /// Minimum gradient magnitude, intensity units per pixel.
    pub gradient_threshold: f64,
    /// Level-line angle tolerance, radians.
    pub angle_tolerance: f64,
    /// Shortest segment kept, pixels.
    pub min_length: f64,
    /// Smallest region (gradient samples) considered.
    pub min_region: usize,
    /// Minimum fraction of the fitted rectangle covered by region samples.
    pub min_density: f64,
}

impl Default for LsdParams {
    fn default() -> Self {
        let tol = 22.5f64.to_radians();
        Self {
            gradient_threshold: 2.0 / tol.sin(),
            angle_tolerance: tol,
            min_length: 2.0,
            min_region: 4,
            min_density: 0.7,
        }
    }
}

/// A detected segment in patch coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
    /// Unit vector from `a` to `b`; points along the level line, so the
    /// brighter side is on its right in image coordinates (y down).
    pub direction: Point2,
    /// Number of gradient samples supporting the segment.
    pub support: usize,
}

impl Segment {
    pub fn new(a: Point2, b: Point2, support: usize) -> Option<Self> {
        let d = b - a;
        let len = d.norm();
        if !(len > 0.0) {
            return None;
        }
        Some(Self { a, b, direction: Point2::new(d.x / len, d.y / len), support })
    }

    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }

    /// Distance from `p` to the closer endpoint.
    pub fn endpoint_distance(&self, p: &Point2) -> f64 {
        self.a.distance(p).min(self.b.distance(p))
    }
}

struct Gradients {
    w: usize,
    h: usize,
    mag: Vec<f64>,
    angle: Vec<f64>,
}

/// 2x2 gradients; sample `(x, y)` sits at the shared corner of pixels
/// `x..=x+1, y..=y+1`, i.e. continuous position `(x + 1, y + 1)`.
fn gradients(img: &GrayF) -> Option<Gradients> {
    if img.width < 2 || img.height < 2 {
        return None;
    }
    let (w, h) = (img.width - 1, img.height - 1);
    let mut mag = vec![0.0; w * h];
    let mut angle = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let a = img.get(x, y);
            let b = img.get(x + 1, y);
            let c = img.get(x, y + 1);
            let d = img.get(x + 1, y + 1);
            let gx = (b + d - a - c) / 2.0;
            let gy = (c + d - a - b) / 2.0;
            mag[y * w + x] = gx.hypot(gy);
            angle[y * w + x] = gx.atan2(-gy);
        }
    }
    Some(Gradients { w, h, mag, angle })
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let mut d = (a - b) % std::f64::consts::TAU;
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    } else if d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    d.abs()
}

struct Rect {
    center: Point2,
    dir: Point2,
    l_min: f64,
    l_max: f64,
    w_min: f64,
    w_max: f64,
}

impl Rect {
    fn length(&self) -> f64 {
        self.l_max - self.l_min
    }

    fn density(&self, n: usize) -> f64 {
        let area = self.length().max(1.0) * (self.w_max - self.w_min).max(1.0);
        n as f64 / area
    }
}

fn fit_rect(region: &[usize], g: &Gradients, region_angle: f64) -> Option<Rect> {
    let pos = |k: usize| ((k % g.w) as f64 + 1.0, (k / g.w) as f64 + 1.0);
    let mut sw = 0.0;
    let (mut cx, mut cy) = (0.0, 0.0);
    for &k in region {
        let (x, y) = pos(k);
        let wgt = g.mag[k];
        sw += wgt;
        cx += wgt * x;
        cy += wgt * y;
    }
    if !(sw > 0.0) {
        return None;
    }
    cx /= sw;
    cy /= sw;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &k in region {
        let (x, y) = pos(k);
        let wgt = g.mag[k];
        sxx += wgt * (x - cx) * (x - cx);
        syy += wgt * (y - cy) * (y - cy);
        sxy += wgt * (x - cx) * (y - cy);
    }
    // Major axis of the weighted scatter.
    let mut theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if angle_diff(theta, region_angle) > std::f64::consts::FRAC_PI_2 {
        theta += std::f64::consts::PI;
    }
    let dir = Point2::new(theta.cos(), theta.sin());
    let (mut l_min, mut l_max, mut w_min, mut w_max) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &k in region {
        let (x, y) = pos(k);
        let (dx, dy) = (x - cx, y - cy);
        let l = dx * dir.x + dy * dir.y;
        let w = -dx * dir.y + dy * dir.x;
        l_min = l_min.min(l);
        l_max = l_max.max(l);
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    Some(Rect { center: Point2::new(cx, cy), dir, l_min, l_max, w_min, w_max })
}

fn region_angle(region: &[usize], g: &Gradients) -> f64 {
    let (s, c) = region
        .iter()
        .fold((0.0, 0.0), |(s, c), &k| (s + g.angle[k].sin(), c + g.angle[k].cos()));
    s.atan2(c)
}

/// Detects line segments in `img`. Coordinates follow the raster convention
/// of [`GrayF::sample`].
pub fn detect_segments(img: &GrayF, params: &LsdParams) -> Vec<Segment> {
    let Some(g) = gradients(img) else {
        return Vec::new();
    };
    let n = g.w * g.h;
    let mut order: Vec<usize> = (0..n).filter(|&k| g.mag[k] > params.gradient_threshold).collect();
    order.sort_by(|&a, &b| g.mag[b].total_cmp(&g.mag[a]).then(a.cmp(&b)));
    let mut used = vec![false; n];
    let mut segments = Vec::new();

    for &seed in &order {
        if used[seed] {
            continue;
        }
        let mut region = vec![seed];
        used[seed] = true;
        let (mut ss, mut sc) = (g.angle[seed].sin(), g.angle[seed].cos());
        let mut angle = g.angle[seed];
        let mut head = 0;
        while head < region.len() {
            let k = region[head];
            head += 1;
            let (x, y) = ((k % g.w) as isize, (k / g.w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (xx, yy) = (x + dx, y + dy);
                    if xx < 0 || yy < 0 || xx >= g.w as isize || yy >= g.h as isize {
                        continue;
                    }
                    let q = yy as usize * g.w + xx as usize;
                    if used[q] || g.mag[q] <= params.gradient_threshold {
                        continue;
                    }
                    if angle_diff(g.angle[q], angle) <= params.angle_tolerance {
                        used[q] = true;
                        region.push(q);
                        ss += g.angle[q].sin();
                        sc += g.angle[q].cos();
                        angle = ss.atan2(sc);
                    }
                }
            }
        }
        if let Some(seg) = region_to_segment(seed, region, &g, params) {
            segments.push(seg);
        }
    }
    segments
}

fn region_to_segment(
    seed: usize,
    mut region: Vec<usize>,
    g: &Gradients,
    params: &LsdParams,
) -> Option<Segment> {
    let seed_pos = ((seed % g.w) as f64, (seed / g.w) as f64);
    loop {
        if region.len() < params.min_region {
            return None;
        }
        let angle = region_angle(&region, g);
        let rect = fit_rect(&region, g, angle)?;
        if rect.length() < params.min_length {
            return None;
        }
        if rect.density(region.len()) >= params.min_density {
            let a = Point2::new(
                rect.center.x + rect.l_min * rect.dir.x,
                rect.center.y + rect.l_min * rect.dir.y,
            );
            let b = Point2::new(
                rect.center.x + rect.l_max * rect.dir.x,
                rect.center.y + rect.l_max * rect.dir.y,
            );
            return Segment::new(a, b, region.len());
        }
        // Too sparse: shrink the region around its seed and refit.
        let dist = |k: usize| {
            let (x, y) = ((k % g.w) as f64, (k / g.w) as f64);
            (x - seed_pos.0).hypot(y - seed_pos.1)
        };
        let radius = region.iter().map(|&k| dist(k)).fold(0.0, f64::max) * 0.75;
        let before = region.len();
        region.retain(|&k| dist(k) <= radius);
        if region.len() == before {
            return None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(w: usize, h: usize, f: impl Fn(f64, f64) -> f64) -> GrayF {
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(f(x as f64 + 0.5, y as f64 + 0.5));
            }
        }
        GrayF { width: w, height: h, data }
    }

    /// Smooth step of unit width centered at zero.
    fn ramp(t: f64) -> f64 {
        (t + 0.5).clamp(0.0, 1.0)
    }

    #[test]
    fn constant_patch_has_no_segments() {
        let img = raster(20, 20, |_, _| 128.0);
        assert!(detect_segments(&img, &LsdParams::default()).is_empty());
    }

    #[test]
    fn vertical_step_edge() {
        let img = raster(20, 20, |x, _| 255.0 * ramp(x - 10.0));
        let segs = detect_segments(&img, &LsdParams::default());
        assert!(!segs.is_empty());
        let s = segs.iter().max_by(|a, b| a.length().total_cmp(&b.length())).unwrap();
        assert!(s.direction.x.abs() < 0.05, "not vertical: {:?}", s.direction);
        assert!((s.a.x - 10.0).abs() <= 1.0 && (s.b.x - 10.0).abs() <= 1.0);
        assert!(s.length() > 10.0);
    }

    #[test]
    fn checkerboard_corner_gives_orthogonal_segments() {
        let img = raster(20, 20, |x, y| {
            let sx = ramp(x - 10.3) * 2.0 - 1.0;
            let sy = ramp(y - 9.6) * 2.0 - 1.0;
            127.5 + 127.5 * sx * sy
        });
        let segs = detect_segments(&img, &LsdParams::default());
        assert!(segs.len() >= 2);
        let mut found = false;
        for (i, s) in segs.iter().enumerate() {
            for t in &segs[i + 1..] {
                let cos = (s.direction.x * t.direction.x + s.direction.y * t.direction.y).abs();
                let angle = cos.acos().to_degrees();
                if (80.0..=100.0).contains(&angle) {
                    found = true;
                }
            }
        }
        assert!(found, "no orthogonal pair among {segs:?}");
    }

    #[test]
    fn samples_are_exclusive() {
        let img = raster(20, 20, |x, y| {
            let sx = ramp(x - 10.0) * 2.0 - 1.0;
            let sy = ramp(y - 10.0) * 2.0 - 1.0;
            127.5 + 127.5 * sx * sy
        });
        let segs = detect_segments(&img, &LsdParams::default());
        let total: usize = segs.iter().map(|s| s.support).sum();
        assert!(total <= 19 * 19);
    }
}
