use serde::{Deserialize, Serialize};

use super::{generate_random_poses, generate_translation_sweep, Result, SimConfig, SimError, Target};
use crate::board::BoardSpec;
use crate::model::MainLensIntrinsics;
use crate::{CameraModel, Distortion, MlaGeometry, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct DistConfig {
    pub k1: f64,
    pub k2: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    #[serde(rename = "F_mm")]
    pub f_mm: f64,
    pub dc_mm: f64,
    pub dm_mm: f64,
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
    #[serde(default)]
    pub dist: DistConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

fn default_rot() -> f64 {
    30.0
}

fn default_trans() -> f64 {
    10.0
}

fn default_square_px() -> usize {
    12
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSection {
    pub n_views: usize,
    pub seed: u64,
    pub base_z_mm: f64,
    pub sweep: SweepConfig,
    #[serde(default = "default_rot")]
    pub rot_range_deg: f64,
    #[serde(default = "default_trans")]
    pub trans_range_mm: f64,
    /// Texture resolution, pixels per board square.
    #[serde(default = "default_square_px")]
    pub texture_square_px: usize,
    #[serde(default)]
    pub background: u8,
}

/// Scene description read from and written to JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub camera: CameraConfig,
    pub board: BoardSpec,
    pub sim: SimSection,
}

impl SceneConfig {
    /// Desk-scale scene: 1600x1200 sensor behind 80x60 lenses of 20 px.
    pub fn desk() -> Self {
        Self {
            camera: CameraConfig {
                f_mm: 50.0,
                dc_mm: 58.0,
                dm_mm: 57.0,
                pixel_um: 14.4,
                sensor_w: 1600,
                sensor_h: 1200,
                n_w: 80,
                n_h: 60,
                theta_deg: 0.0,
                offset_x_px: 0.0,
                offset_y_px: 0.0,
                dist: DistConfig::default(),
            },
            board: BoardSpec::new(6, 9, 6.8),
            sim: SimSection {
                n_views: 12,
                seed: 2024,
                base_z_mm: 265.0,
                sweep: SweepConfig { min: 247.0, max: 283.0, step: 4.0 },
                rot_range_deg: 30.0,
                trans_range_mm: 10.0,
                texture_square_px: 12,
                background: 0,
            },
        }
    }

    /// Full-resolution sensor of 6500x4700 px at 3.6 um, used for timing.
    pub fn full_scale() -> Self {
        let mut s = Self::desk();
        s.camera.pixel_um = 3.6;
        s.camera.sensor_w = 6500;
        s.camera.sensor_h = 4700;
        s.camera.n_w = 325;
        s.camera.n_h = 235;
        s.board = BoardSpec::new(6, 9, 52.5);
        s.sim.base_z_mm = 1400.0;
        s.sim.sweep = SweepConfig { min: 1350.0, max: 1800.0, step: 50.0 };
        s
    }

    pub fn camera_model(&self) -> Result<CameraModel> {
        let c = &self.camera;
        let s = c.pixel_um * 1e-3;
        let lens = MainLensIntrinsics::new(c.f_mm, c.sensor_w as f64 / 2.0, c.sensor_h as f64 / 2.0, s, s)?;
        let mla = MlaGeometry {
            d_c: c.dc_mm,
            d_m: c.dm_mm,
            n_h: c.n_h,
            n_w: c.n_w,
            sensor_h: c.sensor_h,
            sensor_w: c.sensor_w,
            offset_x: c.offset_x_px,
            offset_y: c.offset_y_px,
            theta: c.theta_deg.to_radians(),
        };
        let dist = Distortion::new(c.dist.k1, c.dist.k2, c.dist.t1, c.dist.t2);
        Ok(CameraModel::new(lens, dist, mla)?)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        if self.sim.texture_square_px == 0 {
            return Err(SimError::InvalidConfig("texture_square_px must be positive".into()));
        }
        Ok(SimConfig {
            cam: self.camera_model()?,
            target: Target::checkerboard(&self.board, self.sim.texture_square_px)?,
            background: self.sim.background,
        })
    }

    /// Free-hand calibration poses.
    pub fn calibration_poses(&self) -> Vec<Pose> {
        let s = &self.sim;
        generate_random_poses(s.n_views, s.rot_range_deg, s.trans_range_mm, s.base_z_mm, s.seed)
    }

    /// Frontal poses along the optical axis.
    pub fn sweep_poses(&self) -> Vec<Pose> {
        let s = &self.sim.sweep;
        generate_translation_sweep(s.min, s.max, s.step, &Pose::identity())
    }
}
