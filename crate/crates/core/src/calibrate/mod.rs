//! Calibration of the main lens, the micro-lens array distances and the
//! board poses from CIP features.
//!
//! Order of work: per-corner alpha and virtual point by linear least squares,
//! a planar main-lens calibration on the virtual points, `d_c`/`d_m` from the
//! alpha versus virtual depth relation, and a joint refinement of everything
//! on raw-pixel residuals.

mod alpha;
mod bundle;
mod depth;
mod homography;
mod lm;
mod mainlens;
mod pipeline;
mod report;

pub use alpha::{estimate_alpha_virtual, trim_cluster, AlphaEstimate};
pub use depth::estimate_dc_dm;
pub use homography::{apply_homography, fit_homography};
pub use lm::{diff_step, levenberg_marquardt, numeric_jacobian, solve, LeastSquares, LmOptions, LmReport};
pub use mainlens::{calibrate_main_lens, estimate_pose_planar, init_main_lens, MainLensFit, VirtualObservation};
pub use pipeline::{
    calibrate_full, compute_diagnostics, prepare_views, refine_joint, CalibConfig, CalibrationSolution,
    CornerAlpha, Diagnostics, SkippedView, ViewCorrespondences, ViewFeatures, ViewPose, refine_pose_lightfield,
};
pub use report::CalibrationReport;

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CalibError {
    #[error("need at least 4 features, got {0}")]
    TooFewFeatures(usize),
    #[error("lens centers do not span both axes")]
    RankDeficient,
    #[error("alpha too close to one")]
    AlphaNearOne,
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("board lies behind the camera")]
    BehindCamera,
    #[error("need at least 3 views, got {0}")]
    TooFewViews(usize),
    #[error("all alpha observations are equal")]
    SingularSystem,
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("residuals are not finite at the starting point")]
    NonFiniteResidual,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("estimated MLA distances violate d_c > d_m > 0: d_c = {d_c}, d_m = {d_m}")]
    ImplausibleMla { d_c: f64, d_m: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, CalibError>;
