use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

/// Integer micro-lens index `(i, j)`: `i` counts lenses along the sensor x
/// axis (columns), `j` along y (rows).
pub type LensIndex = (usize, usize);

/// Square-packed micro-lens array and the sensor it covers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlaGeometry<T> {
    /// Main lens to sensor distance, mm.
    pub d_c: T,
    /// Main lens to micro-lens array distance, mm.
    pub d_m: T,
    /// Lens counts along y and x.
    pub n_h: usize,
    pub n_w: usize,
    /// Sensor size in pixels.
    pub sensor_h: usize,
    pub sensor_w: usize,
    /// Array offset in pixels.
    pub offset_x: T,
    pub offset_y: T,
    /// In-plane rotation of the array about the pixel origin, radians.
    pub theta: T,
}

impl<T: Real> MlaGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_m > T::zero() && self.d_c > self.d_m) {
            return Err(ModelError::InvalidParameter(format!(
                "need d_c > d_m > 0, got d_c={:?} d_m={:?}",
                self.d_c, self.d_m
            )));
        }
        if self.n_h == 0 || self.n_w == 0 || self.sensor_h == 0 || self.sensor_w == 0 {
            return Err(ModelError::InvalidParameter("empty lens grid or sensor".into()));
        }
        if !(self.offset_x.is_finite() && self.offset_y.is_finite() && self.theta.is_finite()) {
            return Err(ModelError::InvalidParameter("non-finite grid offset or rotation".into()));
        }
        Ok(())
    }

    /// Micro-lens pitch along y, `L_h = S_h / n_h`, pixels.
    pub fn pitch_h(&self) -> T {
        T::lit(self.sensor_h as f64) / T::lit(self.n_h as f64)
    }

    /// Micro-lens pitch along x, `L_w = S_w / n_w`, pixels.
    pub fn pitch_w(&self) -> T {
        T::lit(self.sensor_w as f64) / T::lit(self.n_w as f64)
    }

    pub fn lens_count(&self) -> usize {
        self.n_h * self.n_w
    }

    /// Grid position of lens `(i, j)` before the array rotation is applied.
    fn unrotated_center(&self, i: usize, j: usize) -> Point2<T> {
        let (lw, lh) = (self.pitch_w(), self.pitch_h());
        let half = T::lit(0.5);
        Point2::new(
            T::lit(i as f64) * lw - self.offset_x + lw * half,
            T::lit(j as f64) * lh - self.offset_y + lh * half,
        )
    }

    /// Center of micro-lens `(i, j)` in sensor pixels.
    pub fn lens_center(&self, i: usize, j: usize) -> Result<Point2<T>> {
        if i >= self.n_w || j >= self.n_h {
            return Err(ModelError::IndexOutOfRange { i, j, n_w: self.n_w, n_h: self.n_h });
        }
        Ok(self.lens_center_unchecked(i, j))
    }

    #[inline]
    pub(crate) fn lens_center_unchecked(&self, i: usize, j: usize) -> Point2<T> {
        let p = self.unrotated_center(i, j);
        let (s, c) = self.theta.sin_cos();
        Point2::new(c * p.x - s * p.y, s * p.x + c * p.y)
    }

    /// Lens whose center is nearest to the sensor point `p` (pixels), if the
    /// point falls inside the array.
    pub fn nearest_lens(&self, p: Point2<T>) -> Option<LensIndex> {
        let (s, c) = self.theta.sin_cos();
        // Undo the array rotation, then locate the square cell.
        let qx = c * p.x + s * p.y + self.offset_x;
        let qy = -s * p.x + c * p.y + self.offset_y;
        let fi = (qx / self.pitch_w()).floor();
        let fj = (qy / self.pitch_h()).floor();
        if fi < T::zero() || fj < T::zero() {
            return None;
        }
        let (i, j) = (fi.to_usize()?, fj.to_usize()?);
        (i < self.n_w && j < self.n_h).then_some((i, j))
    }

    pub fn lens_indices(&self) -> impl Iterator<Item = LensIndex> + '_ {
        (0..self.n_h).flat_map(move |j| (0..self.n_w).map(move |i| (i, j)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn grid(sensor: usize, n: usize) -> MlaGeometry<f64> {
        MlaGeometry {
            d_c: 58.0,
            d_m: 57.0,
            n_h: n,
            n_w: n,
            sensor_h: sensor,
            sensor_w: sensor,
            offset_x: 0.0,
            offset_y: 0.0,
            theta: 0.0,
        }
    }

    #[test]
    fn first_lens_center() {
        let g = grid(600, 100);
        assert_eq!(g.lens_center(0, 0).unwrap(), Point2::new(3.0, 3.0));
        let shifted = MlaGeometry { offset_x: 1.0, ..g };
        assert_eq!(shifted.lens_center(0, 0).unwrap(), Point2::new(2.0, 3.0));
    }

    #[test]
    fn out_of_range_index() {
        let g = grid(600, 100);
        assert!(matches!(g.lens_center(100, 0), Err(ModelError::IndexOutOfRange { .. })));
        assert!(matches!(g.lens_center(0, 100), Err(ModelError::IndexOutOfRange { .. })));
    }

    #[test]
    fn pitch_reconstructs_sensor() {
        let g = MlaGeometry { n_h: 60, n_w: 80, sensor_h: 1200, sensor_w: 1600, ..grid(1, 1) };
        assert_eq!(g.pitch_h() * g.n_h as f64, 1200.0);
        assert_eq!(g.pitch_w() * g.n_w as f64, 1600.0);
        assert_eq!(g.pitch_w(), 20.0);
    }

    #[test]
    fn rejects_inverted_distances() {
        let g = MlaGeometry { d_c: 57.0, d_m: 58.0, ..grid(600, 100) };
        assert!(g.validate().is_err());
    }

    #[test]
    fn regular_grid_steps() {
        let g = grid(600, 100);
        for (i, j) in [(0usize, 0usize), (10, 40), (98, 3)] {
            let a = g.lens_center(i, j).unwrap();
            let b = g.lens_center(i + 1, j).unwrap();
            let c = g.lens_center(i, j + 1).unwrap();
            assert_eq!(b - a, Point2::new(6.0, 0.0));
            assert_eq!(c - a, Point2::new(0.0, 6.0));
        }
    }

    #[test]
    fn nearest_lens_owns_its_center() {
        let g = MlaGeometry { theta: 0.002, offset_x: 1.5, offset_y: -0.7, ..grid(600, 100) };
        for (i, j) in [(1usize, 1usize), (50, 50), (98, 97)] {
            let c = g.lens_center(i, j).unwrap();
            assert_eq!(g.nearest_lens(c), Some((i, j)));
        }
        assert_eq!(g.nearest_lens(Point2::new(-5.0, 3.0)), None);
    }

    proptest! {
        #[test]
        fn rotation_preserves_distances(theta in -0.1f64..0.1, i in 0usize..99, j in 0usize..99, k in 0usize..99, l in 0usize..99) {
            let flat = grid(600, 100);
            let rot = MlaGeometry { theta, ..flat };
            let d0 = flat.lens_center(i, j).unwrap().distance(&flat.lens_center(k, l).unwrap());
            let d1 = rot.lens_center(i, j).unwrap().distance(&rot.lens_center(k, l).unwrap());
            prop_assert!((d0 - d1).abs() < 1e-9);
        }
    }
}
