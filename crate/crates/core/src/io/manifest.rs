use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::board::BoardSpec;
use crate::simulate::CameraConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Calibration,
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestView {
    pub view_id: usize,
    /// Relative paths are resolved against the manifest's directory.
    pub image_path: PathBuf,
    pub role: Role,
}

/// What is known about the camera before calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraNominal {
    #[serde(rename = "F_mm")]
    pub f_mm: f64,
    pub pixel_um: f64,
    pub sensor_w: usize,
    pub sensor_h: usize,
    pub n_w: usize,
    pub n_h: usize,
    #[serde(default)]
    pub theta_deg: f64,
    #[serde(default)]
    pub offset_x_px: f64,
    #[serde(default)]
    pub offset_y_px: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewTruth {
    pub view_id: usize,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t_mm: [f64; 3],
}

/// Ground truth of a simulated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub camera: CameraConfig,
    pub views: Vec<ViewTruth>,
}

/// Dataset description. The layout is specific to this tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub views: Vec<ManifestView>,
    pub board: BoardSpec,
    pub camera_nominal: CameraNominal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest")]
    Parse(#[from] serde_json::Error),
    #[error("image not found: {0}")]
    MissingImage(PathBuf),
    #[error("duplicate view id {0}")]
    DuplicateView(usize),
}

impl DatasetManifest {
    /// Loads a manifest and checks that every referenced image exists.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ManifestError> {
        let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
        let m: Self = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut seen = std::collections::HashSet::new();
        for v in &m.views {
            if !seen.insert(v.view_id) {
                return Err(ManifestError::DuplicateView(v.view_id));
            }
            let p = m.resolve(&base, v);
            if !p.is_file() {
                return Err(ManifestError::MissingImage(p));
            }
        }
        Ok((m, base))
    }

    pub fn resolve(&self, base: &Path, view: &ManifestView) -> PathBuf {
        if view.image_path.is_absolute() {
            view.image_path.clone()
        } else {
            base.join(&view.image_path)
        }
    }

    pub fn views_with_role(&self, role: Role) -> impl Iterator<Item = &ManifestView> {
        self.views.iter().filter(move |v| v.role == role)
    }

    pub fn truth_for(&self, view_id: usize) -> Option<&ViewTruth> {
        self.ground_truth.as_ref()?.views.iter().find(|v| v.view_id == view_id)
    }
}
