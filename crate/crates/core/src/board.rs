//! Checkerboard target description.

use serde::{Deserialize, Serialize};

use crate::Point3;

/// Checkerboard with `rows x cols` inner corners, `rows` counted along the
/// board y axis. The board frame is centered on the inner-corner grid with
/// `z = 0` on the board surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub rows: usize,
    pub cols: usize,
    /// Square edge, mm.
    pub square_mm: f64,
}

impl BoardSpec {
    pub fn new(rows: usize, cols: usize, square_mm: f64) -> Self {
        Self { rows, cols, square_mm }
    }

    pub fn corner_count(&self) -> usize {
        self.rows * self.cols
    }

    /// Board-frame position of inner corner `(row, col)`.
    pub fn corner(&self, row: usize, col: usize) -> Point3 {
        let cx = (self.cols as f64 - 1.0) / 2.0;
        let cy = (self.rows as f64 - 1.0) / 2.0;
        Point3::new((col as f64 - cx) * self.square_mm, (row as f64 - cy) * self.square_mm, 0.0)
    }

    /// All inner corners in row-major order.
    pub fn corners(&self) -> Vec<Point3> {
        (0..self.rows).flat_map(|r| (0..self.cols).map(move |c| self.corner(r, c))).collect()
    }

    /// Physical size of the full board (including the outer squares), mm.
    pub fn extent_mm(&self) -> (f64, f64) {
        ((self.cols + 1) as f64 * self.square_mm, (self.rows + 1) as f64 * self.square_mm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_are_centered() {
        let b = BoardSpec::new(6, 9, 10.0);
        assert_eq!(b.corners().len(), 54);
        assert_eq!(b.corner(0, 0), Point3::new(-40.0, -25.0, 0.0));
        assert_eq!(b.corner(5, 8), Point3::new(40.0, 25.0, 0.0));
        assert_eq!(b.extent_mm(), (100.0, 70.0));
    }
}
