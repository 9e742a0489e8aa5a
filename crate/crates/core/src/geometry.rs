//! Points and rigid transforms shared by every module.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> std::ops::Sub for Point2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> std::ops::Add for Point2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

/// Rigid transform taking board-frame points into the camera frame:
/// `p_cam = R * p_board + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    /// Row-major rotation matrix.
    pub rotation: [[T; 3]; 3],
    /// Translation in millimeters.
    pub translation: [T; 3],
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z, z, z],
        }
    }

    pub fn new(rotation: [[T; 3]; 3], translation: [T; 3]) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: [T; 3]) -> Self {
        Self { translation, ..Self::identity() }
    }

    /// `R = Rz(rz) * Ry(ry) * Rx(rx)`, angles in radians.
    pub fn from_euler_xyz(rx: T, ry: T, rz: T, translation: [T; 3]) -> Self {
        let (sa, ca) = rx.sin_cos();
        let (sb, cb) = ry.sin_cos();
        let (sc, cc) = rz.sin_cos();
        let rotation = [
            [cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa],
            [sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa],
            [-sb, cb * sa, cb * ca],
        ];
        Self { rotation, translation }
    }

    /// Rodrigues formula for an axis-angle vector (radians).
    pub fn from_rotation_vector(w: [T; 3], translation: [T; 3]) -> Self {
        let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        let o = T::one();
        let (a, b) = if theta < T::lit(1e-8) {
            // Second order series keeps the map smooth at the origin.
            let t2 = theta * theta;
            (o - t2 / T::lit(6.0), T::lit(0.5) - t2 / T::lit(24.0))
        } else {
            (theta.sin() / theta, (o - theta.cos()) / (theta * theta))
        };
        let k = [
            [T::zero(), -w[2], w[1]],
            [w[2], T::zero(), -w[0]],
            [-w[1], w[0], T::zero()],
        ];
        let mut rotation = [[T::zero(); 3]; 3];
        for (r, row) in rotation.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                let mut k2 = T::zero();
                for m in 0..3 {
                    k2 = k2 + k[r][m] * k[m][c];
                }
                let id = if r == c { o } else { T::zero() };
                *v = id + a * k[r][c] + b * k2;
            }
        }
        Self { rotation, translation }
    }

    /// Axis-angle vector of the rotation, the inverse of
    /// [`Self::from_rotation_vector`] for angles in `[0, pi]`.
    pub fn rotation_vector(&self) -> [T; 3] {
        let r = &self.rotation;
        let half = T::lit(0.5);
        let tr = r[0][0] + r[1][1] + r[2][2];
        let cos = ((tr - T::one()) * half).max(-T::one()).min(T::one());
        let theta = cos.acos();
        let v = [r[2][1] - r[1][2], r[0][2] - r[2][0], r[1][0] - r[0][1]];
        if theta < T::lit(1e-6) {
            // sin(theta) / theta ~ 1 - theta^2 / 6
            let s = half * (T::one() + theta * theta / T::lit(6.0));
            return [v[0] * s, v[1] * s, v[2] * s];
        }
        if theta < T::lit(std::f64::consts::PI - 1e-4) {
            let s = theta / (T::lit(2.0) * theta.sin());
            return [v[0] * s, v[1] * s, v[2] * s];
        }
        // Near pi the antisymmetric part vanishes; read the axis off the
        // symmetric part R = 2 a a^T - I (approximately).
        let d = [r[0][0], r[1][1], r[2][2]];
        let k = if d[0] >= d[1] && d[0] >= d[2] { 0 } else if d[1] >= d[2] { 1 } else { 2 };
        let mut a = [T::zero(); 3];
        a[k] = ((d[k] - cos) / (T::one() - cos)).max(T::zero()).sqrt();
        for m in 0..3 {
            if m != k {
                a[m] = (r[m][k] + r[k][m]) / (T::lit(2.0) * a[k] * (T::one() - cos));
            }
        }
        // Sign from the (small) antisymmetric part.
        let sdot = a[0] * v[0] + a[1] * v[1] + a[2] * v[2];
        let sign = if sdot < T::zero() { -T::one() } else { T::one() };
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        [sign * theta * a[0] / n, sign * theta * a[1] / n, sign * theta * a[2] / n]
    }

    /// Camera-frame coordinates of a board-frame point.
    #[inline]
    pub fn transform(&self, p: Point3<T>) -> Point3<T> {
        let v = p.to_array();
        let r = &self.rotation;
        let t = &self.translation;
        let row = |i: usize| r[i][0] * v[0] + r[i][1] * v[1] + r[i][2] * v[2] + t[i];
        Point3::new(row(0), row(1), row(2))
    }

    /// Board-frame coordinates of a camera-frame point, `R^T (p - t)`.
    #[inline]
    pub fn inverse_transform(&self, p: Point3<T>) -> Point3<T> {
        let t = &self.translation;
        let d = [p.x - t[0], p.y - t[1], p.z - t[2]];
        let r = &self.rotation;
        let col = |j: usize| r[0][j] * d[0] + r[1][j] * d[1] + r[2][j] * d[2];
        Point3::new(col(0), col(1), col(2))
    }

    /// Board normal (third column of `R`) expressed in the camera frame.
    pub fn plane_normal(&self) -> [T; 3] {
        let r = &self.rotation;
        [r[0][2], r[1][2], r[2][2]]
    }

    /// Checks `R^T R = I` and `det R = +1` within `tol`.
    pub fn is_rotation(&self, tol: T) -> bool {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = T::zero();
                for k in 0..3 {
                    dot = dot + r[k][i] * r[k][j];
                }
                let id = if i == j { T::one() } else { T::zero() };
                if (dot - id).abs() > tol {
                    return false;
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        (det - T::one()).abs() <= tol
    }
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_and_rodrigues_are_rotations() {
        let p = Pose::from_euler_xyz(0.3, -0.4, 0.5, [1.0, 2.0, 3.0]);
        assert!(p.is_rotation(1e-12));
        let q = Pose::from_rotation_vector([0.2, -0.1, 0.7], [0.0; 3]);
        assert!(q.is_rotation(1e-12));
        let small = Pose::from_rotation_vector([1e-10, 0.0, 0.0], [0.0; 3]);
        assert!(small.is_rotation(1e-12));
    }

    #[test]
    fn rotation_vector_round_trip() {
        for w in [[0.2f64, -0.1, 0.7], [1e-9, 2e-9, 0.0], [0.0, 0.0, 0.0], [3.1, 0.2, -0.1], [0.0, -3.1, 0.0]] {
            let p = Pose::from_rotation_vector(w, [0.0; 3]);
            let back = Pose::from_rotation_vector(p.rotation_vector(), [0.0; 3]);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((p.rotation[i][j] - back.rotation[i][j]).abs() < 1e-9, "{w:?}");
                }
            }
        }
        let w = Pose::from_rotation_vector([0.2f64, -0.1, 0.7], [0.0; 3]).rotation_vector();
        assert!((w[0] - 0.2).abs() < 1e-12 && (w[1] + 0.1).abs() < 1e-12 && (w[2] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trip() {
        let p = Pose::from_euler_xyz(0.1, 0.2, -0.3, [5.0, -4.0, 300.0]);
        let x = Point3::new(10.0f64, -3.0, 0.0);
        let back = p.inverse_transform(p.transform(x));
        assert!((back.x - x.x).abs() < 1e-12);
        assert!((back.y - x.y).abs() < 1e-12);
        assert!(back.z.abs() < 1e-12);
    }

    #[test]
    fn rotation_about_z_by_rotation_vector() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let p = Pose::from_rotation_vector([0.0, 0.0, half_pi], [0.0; 3]);
        let e = Pose::from_euler_xyz(0.0, 0.0, half_pi, [0.0; 3]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.rotation[i][j] - e.rotation[i][j]).abs() < 1e-12);
            }
        }
    }
}
