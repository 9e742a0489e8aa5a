use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::CipFeature;
use crate::Point2;

/// One line of the feature dump.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub view_id: usize,
    pub lens_i: usize,
    pub lens_j: usize,
    pub u_px: f64,
    pub v_px: f64,
    pub n_intersections: usize,
}

impl FeatureRow {
    pub fn new(view_id: usize, f: &CipFeature) -> Self {
        Self {
            view_id,
            lens_i: f.lens_idx.0,
            lens_j: f.lens_idx.1,
            u_px: f.position_px.x,
            v_px: f.position_px.y,
            n_intersections: f.n_intersections,
        }
    }

    pub fn feature(&self) -> CipFeature {
        CipFeature {
            position_px: Point2::new(self.u_px, self.v_px),
            lens_idx: (self.lens_i, self.lens_j),
            n_intersections: self.n_intersections,
        }
    }
}

/// Writes `view_id,lens_i,lens_j,u_px,v_px,n_intersections` rows.
pub fn write_features_csv<W: Write>(out: W, rows: &[FeatureRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> csv::Result<Vec<FeatureRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}
