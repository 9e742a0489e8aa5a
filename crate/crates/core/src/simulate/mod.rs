//! Raw light-field image synthesis by reverse chief-ray tracing, and pose
//! generation for calibration and evaluation scenes.

mod poses;
mod render;
mod scene;

pub use poses::{generate_random_poses, generate_translation_sweep, SplitMixStream};
pub use render::{render_raw, trace_pixel};
pub use scene::{CameraConfig, DistConfig, SceneConfig, SimSection, SweepConfig};


use crate::board::BoardSpec;
use crate::model::ModelError;
use crate::raw::{GrayF, RawImage};
use crate::CameraModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("target reaches the main-lens focal plane or behind it")]
    TargetBehindFocalPlane,
    #[error("no pixel sees the target")]
    EmptyFieldOfView,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Alternating 0/255 squares, `(rows + 1) x (cols + 1)` of them, so the
/// pattern has `rows x cols` inner corners. The top-left square is dark.
/// `rows` counts along the raster height.
pub fn make_checkerboard_texture(rows: usize, cols: usize, square_px: usize) -> RawImage {
    let w = (cols + 1) * square_px;
    let h = (rows + 1) * square_px;
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let dark = (x / square_px + y / square_px).is_multiple_of(2);
            data.push(if dark { 0 } else { 255 });
        }
    }
    RawImage { width: w, height: h, data }
}

/// Planar textured target. The texture spans `extent_mm` and is centered on
/// the board-frame origin, with texture `+x`/`+y` along board `+x`/`+y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub texture: RawImage,
    pub extent_mm: (f64, f64),
    gray: GrayF,
}

impl Target {
    pub fn new(texture: RawImage, extent_mm: (f64, f64)) -> Result<Self> {
        if texture.width == 0 || texture.height == 0 {
            return Err(SimError::InvalidConfig("empty texture".into()));
        }
        if !(extent_mm.0 > 0.0 && extent_mm.1 > 0.0) {
            return Err(SimError::InvalidConfig("target extent must be positive".into()));
        }
        let gray = GrayF::from_u8(texture.width, texture.height, &texture.data);
        Ok(Self { texture, extent_mm, gray })
    }

    pub fn checkerboard(board: &BoardSpec, square_px: usize) -> Result<Self> {
        if board.rows == 0 || board.cols == 0 || square_px == 0 {
            return Err(SimError::InvalidConfig("board and texture sizes must be positive".into()));
        }
        Self::new(make_checkerboard_texture(board.rows, board.cols, square_px), board.extent_mm())
    }

    /// Texture value at board coordinates (mm), `None` off the target.
    #[inline]
    pub fn sample(&self, x_mm: f64, y_mm: f64) -> Option<f64> {
        let (w, h) = self.extent_mm;
        let tx = (x_mm / w + 0.5) * self.texture.width as f64;
        let ty = (y_mm / h + 0.5) * self.texture.height as f64;
        self.gray.sample(tx, ty)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub cam: CameraModel,
    pub target: Target,
    pub background: u8,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_shapes() {
        let t = make_checkerboard_texture(1, 1, 10);
        assert_eq!((t.width, t.height), (20, 20));
        assert_eq!((t.get(0, 0), t.get(10, 0), t.get(0, 10), t.get(10, 10)), (0, 255, 255, 0));
        let t = make_checkerboard_texture(9, 6, 50);
        // 9 rows of inner corners along the height, 6 along the width.
        assert_eq!((t.height, t.width), (500, 350));
        let mut corners = 0;
        for r in 1..10 {
            for c in 1..7 {
                let (x, y) = (c * 50, r * 50);
                if t.get(x - 1, y - 1) == t.get(x, y) && t.get(x - 1, y) != t.get(x, y) {
                    corners += 1;
                }
            }
        }
        assert_eq!(corners, 54);
    }

    #[test]
    fn target_maps_corners_to_texture_corners() {
        let board = BoardSpec::new(2, 3, 10.0);
        let t = Target::checkerboard(&board, 4).unwrap();
        // Just inside the top-left square.
        assert_eq!(t.sample(-19.0, -14.0), Some(0.0));
        assert_eq!(t.sample(-19.0, -3.0), Some(255.0));
        assert_eq!(t.sample(25.0, 0.0), None);
    }
}
