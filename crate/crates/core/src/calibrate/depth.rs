use super::{CalibError, Result};

/// Linear estimate of `(d_c, d_m)` from `(alpha, Z')` pairs.
///
/// Each pair gives one row of `-d_c + alpha d_m = Z' (alpha - 1)`; the
/// least-squares solution is computed in centered form, which is the same
/// solution as the normal equations with better conditioning.
pub fn estimate_dc_dm(observations: &[(f64, f64)]) -> Result<(f64, f64)> {
    if observations.len() < 2 {
        return Err(CalibError::TooFewObservations(observations.len()));
    }
    let n = observations.len() as f64;
    let z: Vec<f64> = observations.iter().map(|&(a, zp)| zp * (a - 1.0)).collect();
    let am = observations.iter().map(|o| o.0).sum::<f64>() / n;
    let zm = z.iter().sum::<f64>() / n;
    let (mut saa, mut saz, mut scale) = (0.0, 0.0, 0.0);
    for (&(a, _), &zi) in observations.iter().zip(&z) {
        saa += (a - am) * (a - am);
        saz += (a - am) * (zi - zm);
        scale += a * a;
    }
    if !(saa > 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)) {
        return Err(CalibError::SingularSystem);
    }
    let d_m = saz / saa;
    let d_c = d_m * am - zm;
    Ok((d_c, d_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::alpha_of_depth;
    use crate::MlaGeometry;

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

    #[test]
    fn exact_recovery_over_sweep() {
        let g = mla();
        let obs: Vec<(f64, f64)> = (0..=25)
            .map(|k| {
                let z = 58.5 + 0.1 * k as f64;
                (alpha_of_depth(z, &g).unwrap(), z)
            })
            .collect();
        let (dc, dm) = estimate_dc_dm(&obs).unwrap();
        assert!((dc - 58.0).abs() / 58.0 < 1e-9 && (dm - 57.0).abs() / 57.0 < 1e-9);
    }

    #[test]
    fn two_points_are_interpolated() {
        let g = mla();
        let obs = [(alpha_of_depth(59.0, &g).unwrap(), 59.0), (alpha_of_depth(60.5, &g).unwrap(), 60.5)];
        let (dc, dm) = estimate_dc_dm(&obs).unwrap();
        assert!((dc - 58.0).abs() < 1e-9 && (dm - 57.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(estimate_dc_dm(&[(0.5, 59.0); 5]), Err(CalibError::SingularSystem));
        assert_eq!(estimate_dc_dm(&[(0.5, 59.0)]), Err(CalibError::TooFewObservations(1)));
    }
}
