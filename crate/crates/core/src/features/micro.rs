use super::{FeatureError, Result};
use crate::model::LensIndex;
use crate::raw::{GrayF, RawImage};
use crate::MlaGeometry;

/// Square crop of the raw image behind one micro-lens.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroImage {
    pub lens_idx: LensIndex,
    /// Top-left pixel of the patch in the raw image.
    pub origin_px: (usize, usize),
    pub patch: RawImage,
}

impl MicroImage {
    pub fn side(&self) -> usize {
        self.patch.width
    }

    pub fn to_gray(&self) -> GrayF {
        GrayF::from_u8(self.patch.width, self.patch.height, &self.patch.data)
    }
}

/// Crops one square patch of side `floor(min(L_h, L_w))` around every lens
/// center. Patches that would cross the image border are left out.
pub fn extract_micro_images(raw: &RawImage, mla: &MlaGeometry) -> Result<Vec<MicroImage>> {
    let (lh, lw) = (mla.pitch_h(), mla.pitch_w());
    let grid_h = mla.n_h as f64 * lh;
    let grid_w = mla.n_w as f64 * lw;
    if (grid_h - raw.height as f64).abs() > 1.0 || (grid_w - raw.width as f64).abs() > 1.0 {
        return Err(FeatureError::GridMismatch(format!(
            "grid spans {grid_w}x{grid_h} px, image is {}x{}",
            raw.width, raw.height
        )));
    }
    let side = lh.min(lw).floor();
    if side < 1.0 {
        return Err(FeatureError::GridMismatch("micro-lens pitch below one pixel".into()));
    }
    let s = side as usize;
    let mut out = Vec::with_capacity(mla.lens_count());
    for (i, j) in mla.lens_indices() {
        let c = mla.lens_center(i, j).expect("index from lens_indices");
        let ox = (c.x - side / 2.0).round();
        let oy = (c.y - side / 2.0).round();
        if ox < 0.0 || oy < 0.0 || ox as usize + s > raw.width || oy as usize + s > raw.height {
            continue;
        }
        let (ox, oy) = (ox as usize, oy as usize);
        let mut data = Vec::with_capacity(s * s);
        for y in oy..oy + s {
            data.extend_from_slice(&raw.data[y * raw.width + ox..y * raw.width + ox + s]);
        }
        out.push(MicroImage {
            lens_idx: (i, j),
            origin_px: (ox, oy),
            patch: RawImage { width: s, height: s, data },
        });
    }
    Ok(out)
}

/// Fraction of patch pixels strictly brighter than 127.
pub fn brightness_measure(micro: &MicroImage) -> Result<f64> {
    let data = &micro.patch.data;
    if data.is_empty() {
        return Err(FeatureError::EmptyPatch);
    }
    let bright = data.iter().filter(|&&v| v > 127).count();
    Ok(bright as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, size: usize) -> MlaGeometry {
        MlaGeometry {
            d_c: 58.0,
            d_m: 57.0,
            n_h: n,
            n_w: n,
            sensor_h: size,
            sensor_w: size,
            offset_x: 0.0,
            offset_y: 0.0,
            theta: 0.0,
        }
    }

    fn micro(data: Vec<u8>, side: usize) -> MicroImage {
        MicroImage { lens_idx: (0, 0), origin_px: (0, 0), patch: RawImage::new(side, side, data).unwrap() }
    }

    #[test]
    fn patch_count_and_size() {
        let raw = RawImage::filled(600, 600, 0);
        let m = extract_micro_images(&raw, &grid(100, 600)).unwrap();
        assert_eq!(m.len(), 10000);
        assert!(m.iter().all(|p| p.side() == 6));
    }

    #[test]
    fn patches_centered_on_rounded_centers() {
        let raw = RawImage::filled(600, 600, 0);
        let g = grid(100, 600);
        for m in extract_micro_images(&raw, &g).unwrap() {
            let c = g.lens_center(m.lens_idx.0, m.lens_idx.1).unwrap();
            assert_eq!(m.origin_px.0 as f64, (c.x - 3.0).round());
            assert_eq!(m.origin_px.1 as f64, (c.y - 3.0).round());
        }
    }

    #[test]
    fn border_patches_are_omitted() {
        let raw = RawImage::filled(100, 100, 0);
        let g = MlaGeometry { offset_x: 3.0, ..grid(10, 100) };
        let m = extract_micro_images(&raw, &g).unwrap();
        // Lens column 0 is shifted left past the border.
        assert_eq!(m.len(), 90);
        assert!(m.iter().all(|p| p.lens_idx.0 != 0));
    }

    #[test]
    fn grid_mismatch() {
        let raw = RawImage::filled(600, 597, 0);
        assert!(matches!(extract_micro_images(&raw, &grid(100, 600)), Err(FeatureError::GridMismatch(_))));
    }

    #[test]
    fn brightness_examples() {
        assert_eq!(brightness_measure(&micro(vec![0; 36], 6)).unwrap(), 0.0);
        assert_eq!(brightness_measure(&micro(vec![255; 36], 6)).unwrap(), 1.0);
        let half: Vec<u8> = (0..36).map(|k| if k % 6 < 3 { 0 } else { 255 }).collect();
        assert_eq!(brightness_measure(&micro(half, 6)).unwrap(), 0.5);
        assert_eq!(brightness_measure(&micro(vec![127; 36], 6)).unwrap(), 0.0);
        let empty = MicroImage { lens_idx: (0, 0), origin_px: (0, 0), patch: RawImage::filled(0, 0, 0) };
        assert_eq!(brightness_measure(&empty), Err(FeatureError::EmptyPatch));
    }
}
