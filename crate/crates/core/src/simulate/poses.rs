use crate::Pose;

/// Pins the random stream used for scene generation: SplitMix64 with
/// uniform variates `(next >> 11) * 2^-53`, so pose lists are identical on
/// every platform.
pub struct SplitMixStream(rand_xoshiro::SplitMix64);

impl SplitMixStream {
    pub fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Self(rand_xoshiro::SplitMix64::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        use rand::RngCore;
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-a, a)`.
    pub fn symmetric(&mut self, a: f64) -> f64 {
        (2.0 * self.uniform() - 1.0) * a
    }
}

/// Random board poses: Euler angles uniform in `+-rot_range_deg` about all
/// three axes, translation uniform in `+-trans_range_mm` around
/// `(0, 0, base_distance_mm)`.
pub fn generate_random_poses(
    n: usize,
    rot_range_deg: f64,
    trans_range_mm: f64,
    base_distance_mm: f64,
    seed: u64,
) -> Vec<Pose> {
    let mut rng = SplitMixStream::new(seed);
    let rot = rot_range_deg.to_radians();
    (0..n)
        .map(|_| {
            let rx = rng.symmetric(rot);
            let ry = rng.symmetric(rot);
            let rz = rng.symmetric(rot);
            let t = [
                rng.symmetric(trans_range_mm),
                rng.symmetric(trans_range_mm),
                base_distance_mm + rng.symmetric(trans_range_mm),
            ];
            Pose::from_euler_xyz(rx, ry, rz, t)
        })
        .collect()
}

/// Poses at `z_min, z_min + step, ...` up to `z_max`, keeping the rotation
/// and lateral offset of `base_pose`.
pub fn generate_translation_sweep(z_min: f64, z_max: f64, step: f64, base_pose: &Pose) -> Vec<Pose> {
    if !(z_min < z_max && step > 0.0) {
        return Vec::new();
    }
    let count = ((z_max - z_min) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| {
            let mut p = *base_pose;
            p.translation[2] = z_min + k as f64 * step;
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_pose_contract() {
        assert!(generate_random_poses(0, 30.0, 10.0, 300.0, 1).is_empty());
        let a = generate_random_poses(200, 30.0, 10.0, 300.0, 5);
        assert_eq!(a, generate_random_poses(200, 30.0, 10.0, 300.0, 5));
        assert_ne!(a, generate_random_poses(200, 30.0, 10.0, 300.0, 6));
        let mut rng = SplitMixStream::new(5);
        for p in &a {
            let rx = rng.symmetric(30f64.to_radians());
            let ry = rng.symmetric(30f64.to_radians());
            let rz = rng.symmetric(30f64.to_radians());
            for a in [rx, ry, rz] {
                assert!(a.abs() <= 30f64.to_radians());
            }
            let t: Vec<f64> = (0..3).map(|_| rng.symmetric(10.0)).collect();
            assert!(t.iter().all(|v| v.abs() <= 10.0));
            assert_eq!(p.translation, [t[0], t[1], 300.0 + t[2]]);
            assert!((p.translation[2] - 300.0).abs() <= 10.0);
        }
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut s = SplitMixStream::new(0);
        for _ in 0..10000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
        // SplitMix64 reference output for seed 0.
        assert_eq!(SplitMixStream::new(0).next_u64(), 0xe220a8397b1dcdaf);
    }

    #[test]
    fn sweep_examples() {
        let base = Pose::identity();
        let z: Vec<f64> = generate_translation_sweep(400.0, 500.0, 50.0, &base).iter().map(|p| p.translation[2]).collect();
        assert_eq!(z, vec![400.0, 450.0, 500.0]);
        let one = generate_translation_sweep(400.0, 500.0, 150.0, &base);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].translation[2], 400.0);
        assert_eq!(generate_translation_sweep(450.0, 900.0, 50.0, &base).len(), 10);
    }
}
