use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::geometry::Point2;
use crate::scalar::Real;

const MAX_UNDISTORT_ITERS: usize = 50;

/// Radial (`k1`, `k2`) and tangential (`t1`, `t2`) distortion of the main
/// lens, applied on the normalized plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Distortion<T> {
    pub k1: T,
    pub k2: T,
    pub t1: T,
    pub t2: T,
}

impl<T: Real> Distortion<T> {
    pub fn new(k1: T, k2: T, t1: T, t2: T) -> Self {
        Self { k1, k2, t1, t2 }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.k1 == T::zero() && self.k2 == T::zero() && self.t1 == T::zero() && self.t2 == T::zero()
    }

    pub fn is_finite(&self) -> bool {
        self.k1.is_finite() && self.k2.is_finite() && self.t1.is_finite() && self.t2.is_finite()
    }

    pub fn distort(&self, p: Point2<T>) -> Point2<T> {
        let (x, y) = (p.x, p.y);
        let two = T::lit(2.0);
        let r2 = x * x + y * y;
        let radial = T::one() + self.k1 * r2 + self.k2 * r2 * r2;
        Point2::new(
            x * radial + self.t1 * (r2 + two * x * x) + two * self.t2 * x * y,
            y * radial + self.t2 * (r2 + two * y * y) + two * self.t1 * x * y,
        )
    }

    /// Jacobian of [`Self::distort`], row-major.
    fn jacobian(&self, p: Point2<T>) -> [[T; 2]; 2] {
        let (x, y) = (p.x, p.y);
        let two = T::lit(2.0);
        let r2 = x * x + y * y;
        let radial = T::one() + self.k1 * r2 + self.k2 * r2 * r2;
        // d(radial)/dx = (2 k1 + 4 k2 r2) x
        let dr = two * self.k1 + T::lit(4.0) * self.k2 * r2;
        let dxx = radial + x * dr * x + self.t1 * T::lit(6.0) * x + two * self.t2 * y;
        let dxy = x * dr * y + self.t1 * two * y + two * self.t2 * x;
        let dyx = y * dr * x + self.t2 * two * x + two * self.t1 * y;
        let dyy = radial + y * dr * y + self.t2 * T::lit(6.0) * y + two * self.t1 * x;
        [[dxx, dxy], [dyx, dyy]]
    }

    /// Inverts [`Self::distort`] by Newton iteration started at `p_d`.
    ///
    /// Fails with [`ModelError::NoConvergence`] when the iteration does not
    /// settle or lands on a fold of the map, where radial magnification has
    /// turned over.
    pub fn undistort(&self, p_d: Point2<T>) -> Result<Point2<T>> {
        if self.is_identity() {
            return Ok(p_d);
        }
        let tol = T::epsilon() * T::lit(64.0) * (T::one() + p_d.norm());
        let mut p = p_d;
        for _ in 0..MAX_UNDISTORT_ITERS {
            let f = self.distort(p);
            let (ex, ey) = (f.x - p_d.x, f.y - p_d.y);
            if !(ex.is_finite() && ey.is_finite()) {
                return Err(ModelError::NoConvergence);
            }
            if ex.abs().max(ey.abs()) <= tol {
                return self.check_unfolded(p);
            }
            let j = self.jacobian(p);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < T::epsilon() {
                return Err(ModelError::NoConvergence);
            }
            let dx = (j[1][1] * ex - j[0][1] * ey) / det;
            let dy = (j[0][0] * ey - j[1][0] * ex) / det;
            p = Point2::new(p.x - dx, p.y - dy);
        }
        Err(ModelError::NoConvergence)
    }

    fn check_unfolded(&self, p: Point2<T>) -> Result<Point2<T>> {
        let r2 = p.x * p.x + p.y * p.y;
        let radial = T::one() + self.k1 * r2 + self.k2 * r2 * r2;
        let slope = T::one() + T::lit(3.0) * self.k1 * r2 + T::lit(5.0) * self.k2 * r2 * r2;
        let j = self.jacobian(p);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if radial > T::zero() && slope > T::zero() && det > T::zero() {
            Ok(p)
        } else {
            Err(ModelError::NoConvergence)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Point2<f64>, b: Point2<f64>, tol: f64) -> bool {
        (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol
    }

    #[test]
    fn zero_coefficients_are_identity() {
        let d = Distortion::<f64>::none();
        let p = Point2::new(0.3, -0.7);
        assert_eq!(d.distort(p), p);
        assert_eq!(d.undistort(p).unwrap(), p);
    }

    #[test]
    fn radial_and_tangential_examples() {
        let d = Distortion::new(0.1, 0.0, 0.0, 0.0);
        assert!(close(d.distort(Point2::new(1.0, 0.0)), Point2::new(1.1, 0.0), 1e-15));
        let t = Distortion::new(0.0, 0.0, 0.01, 0.0);
        assert!(close(t.distort(Point2::new(0.0, 1.0)), Point2::new(0.01, 1.0), 1e-15));
    }

    #[test]
    fn undistort_inverts_radial_example() {
        let d = Distortion::new(0.1, 0.0, 0.0, 0.0);
        let p = d.undistort(Point2::new(1.1, 0.0)).unwrap();
        assert!(close(p, Point2::new(1.0, 0.0), 1e-8));
    }

    #[test]
    fn non_invertible_coefficients_fail() {
        let d = Distortion::new(-10.0, 0.0, 0.0, 0.0);
        assert_eq!(d.undistort(Point2::new(1.0, 0.0)), Err(ModelError::NoConvergence));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let d = Distortion::new(0.2, -0.1, 0.01, -0.02);
        let p = Point2::new(0.3, -0.4);
        let j = d.jacobian(p);
        let h = 1e-6;
        let fx = |q: Point2<f64>| d.distort(q);
        let ddx = (fx(Point2::new(p.x + h, p.y)) - fx(Point2::new(p.x - h, p.y))).x / (2.0 * h);
        let ddy = (fx(Point2::new(p.x, p.y + h)) - fx(Point2::new(p.x, p.y - h))).y / (2.0 * h);
        let dyx = (fx(Point2::new(p.x + h, p.y)) - fx(Point2::new(p.x - h, p.y))).y / (2.0 * h);
        assert!((j[0][0] - ddx).abs() < 1e-8);
        assert!((j[1][1] - ddy).abs() < 1e-8);
        assert!((j[1][0] - dyx).abs() < 1e-8);
    }

    #[test]
    fn works_in_single_precision() {
        let d = Distortion::<f32>::new(0.1, 0.0, 0.0, 0.0);
        let p = d.undistort(Point2::new(1.1, 0.0)).unwrap();
        assert!((p.x - 1.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn distort_undistort_round_trip(
            x in -0.5f64..0.5, y in -0.5f64..0.5,
            k1 in -0.5f64..0.5, k2 in -0.5f64..0.5,
            t1 in -0.05f64..0.05, t2 in -0.05f64..0.05,
        ) {
            prop_assume!(x * x + y * y <= 0.25);
            let d = Distortion::new(k1, k2, t1, t2);
            let p = Point2::new(x, y);
            let u = d.undistort(d.distort(p)).unwrap();
            prop_assert!(close(u, p, 1e-8));
        }
    }
}
