//! `lftcam` command-line front end.
//!
//! Exit codes: 0 on success, 2 for bad input (missing files, malformed
//! JSON/CSV, invalid flags), 3 when a numerical stage fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use lftcam::calibrate::{calibrate_full, CalibConfig, CalibrationReport, LmOptions, ViewFeatures};
use lftcam::eval::{add_observation_noise, add_sensor_noise, evaluate_views};
use lftcam::features::{detect_features, read_features_csv, write_features_csv, DetectorParams, FeatureRow};
use lftcam::io::{
    read_image, run_benchmark, write_image, CameraNominal, DatasetManifest, GroundTruth, ManifestView, Role, ViewTruth,
};
use lftcam::simulate::{render_raw, SceneConfig};
use lftcam::{CameraModel, Distortion, MainLensIntrinsics, MlaGeometry};

#[derive(Parser)]
#[command(name = "lftcam", version, about = "Plenoptic camera simulation, corner detection and calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render calibration and evaluation views and write a manifest.
    Simulate(SimulateArgs),
    /// Detect corner features in every view of a manifest.
    Detect(DetectArgs),
    /// Calibrate from a manifest's calibration views.
    Calibrate(CalibrateArgs),
    /// Evaluate a calibration on a manifest's evaluation views.
    Evaluate(EvaluateArgs),
    /// Time the renderer.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Scene config JSON; defaults to the desk-scale scene.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the pose seed of the scene config.
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian noise std on [0, 1] intensities added to every image.
    #[arg(long, default_value_t = 0.0)]
    noise_sensor: f64,
    /// Write PNG instead of PGM.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Detector parameters JSON; defaults to the built-in values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian noise std on [0, 1] intensities added before detection.
    #[arg(long, default_value_t = 0.0)]
    noise_sensor: f64,
    /// Seed of the injected noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Feature CSV from `detect`; features are detected on the fly without it.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Detector parameters JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian noise std in pixels added to every feature position.
    #[arg(long, default_value_t = 0.0)]
    noise_obs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    manifest: PathBuf,
    /// Calibration report JSON from `calibrate`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    noise_obs: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Scene config JSON; defaults to the desk-scale scene.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the 6500x4700 full-scale scene instead of the default.
    #[arg(long, conflicts_with = "config")]
    full_scale: bool,
    #[arg(long, default_value_t = 10)]
    images: usize,
    #[arg(long)]
    seed: Option<u64>,
}

/// Error tagged with the exit code it maps to.
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn numerical<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Numerical(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => with_threads(&a.common, || simulate(&a)),
        Command::Detect(a) => with_threads(&a.common, || detect(&a)),
        Command::Calibrate(a) => with_threads(&a.common, || calibrate(&a)),
        Command::Evaluate(a) => with_threads(&a.common, || evaluate(&a)),
        Command::Bench(a) => with_threads(&a.common, || bench(&a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn with_threads(common: &Common, f: impl FnOnce() -> Outcome + Send) -> Outcome {
    fs::create_dir_all(&common.out).with_context(|| format!("cannot create {}", common.out.display()))?;
    match common.threads {
        Some(0) => Err(Failure::Input(anyhow!("--threads must be positive"))),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f),
        None => f(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Outcome {
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn load_scene(path: Option<&Path>, seed: Option<u64>) -> Outcome<SceneConfig> {
    let mut scene = match path {
        Some(p) => read_json(p)?,
        None => SceneConfig::desk(),
    };
    if let Some(s) = seed {
        scene.sim.seed = s;
    }
    Ok(scene)
}

fn load_detector(path: Option<&Path>) -> Outcome<DetectorParams> {
    let params = match path {
        Some(p) => read_json(p)?,
        None => DetectorParams::default(),
    };
    params.validate().map_err(|e| anyhow!("invalid detector parameters: {e}"))?;
    Ok(params)
}

fn check_sigma(name: &str, sigma: f64) -> Outcome {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(anyhow!("--{name} must be a non-negative number")))
    }
}

/// Micro-lens grid of the nominal camera. The distances are placeholders;
/// calibration estimates them and never reads these values.
fn nominal_mla(n: &CameraNominal) -> MlaGeometry {
    MlaGeometry {
        d_c: n.f_mm + 8.0,
        d_m: n.f_mm + 7.0,
        n_h: n.n_h,
        n_w: n.n_w,
        sensor_h: n.sensor_h,
        sensor_w: n.sensor_w,
        offset_x: n.offset_x_px,
        offset_y: n.offset_y_px,
        theta: n.theta_deg.to_radians(),
    }
}

fn pose_entry(view_id: usize, pose: &lftcam::Pose) -> ViewTruth {
    let r = pose.rotation;
    ViewTruth {
        view_id,
        r: [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]],
        t_mm: pose.translation,
    }
}

fn simulate(a: &SimulateArgs) -> Outcome {
    check_sigma("noise-sensor", a.noise_sensor)?;
    let scene = load_scene(a.config.as_deref(), a.seed)?;
    let cfg = scene.sim_config()?;
    let ext = if a.png { "png" } else { "pgm" };
    let calib = scene.calibration_poses();
    let sweep = scene.sweep_poses();
    let mut views = Vec::new();
    let mut truth = Vec::new();
    let roles = calib.iter().map(|p| (Role::Calibration, p)).chain(sweep.iter().map(|p| (Role::Evaluation, p)));
    for (view_id, (role, pose)) in roles.enumerate() {
        let mut img = render_raw(&cfg, pose).map_err(numerical)?;
        if a.noise_sensor > 0.0 {
            img = add_sensor_noise(&img, a.noise_sensor, scene.sim.seed ^ (view_id as u64).wrapping_mul(0x9e37_79b9));
        }
        let name = PathBuf::from(format!("view_{view_id:03}.{ext}"));
        write_image(&img, &a.common.out.join(&name))?;
        views.push(ManifestView { view_id, image_path: name, role });
        truth.push(pose_entry(view_id, pose));
    }
    let c = &scene.camera;
    let manifest = DatasetManifest {
        views,
        board: scene.board,
        camera_nominal: CameraNominal {
            f_mm: c.f_mm,
            pixel_um: c.pixel_um,
            sensor_w: c.sensor_w,
            sensor_h: c.sensor_h,
            n_w: c.n_w,
            n_h: c.n_h,
            theta_deg: c.theta_deg,
            offset_x_px: c.offset_x_px,
            offset_y_px: c.offset_y_px,
        },
        ground_truth: Some(GroundTruth { camera: *c, views: truth }),
    };
    write_json(&a.common.out.join("manifest.json"), &manifest)?;
    write_json(&a.common.out.join("scene.json"), &scene)?;
    println!("wrote {} calibration and {} evaluation views to {}", calib.len(), sweep.len(), a.common.out.display());
    Ok(())
}

/// Detects features in the manifest views with `role`, or in all views.
fn detect_views(
    m: &DatasetManifest,
    base: &Path,
    role: Option<Role>,
    params: &DetectorParams,
    noise: f64,
    seed: u64,
) -> Outcome<Vec<ViewFeatures>> {
    let mla = nominal_mla(&m.camera_nominal);
    let mut out = Vec::new();
    for v in m.views.iter().filter(|v| role.is_none_or(|r| v.role == r)) {
        let path = m.resolve(base, v);
        let mut img = read_image(&path).with_context(|| format!("cannot load {}", path.display()))?;
        if (img.width, img.height) != (mla.sensor_w, mla.sensor_h) {
            return Err(Failure::Input(anyhow!(
                "{} is {}x{}, the manifest camera is {}x{}",
                path.display(),
                img.width,
                img.height,
                mla.sensor_w,
                mla.sensor_h
            )));
        }
        if noise > 0.0 {
            img = add_sensor_noise(&img, noise, seed ^ (v.view_id as u64).wrapping_mul(0x9e37_79b9));
        }
        let features = detect_features(&img, &mla, params)?;
        out.push(ViewFeatures { view_id: v.view_id, features });
    }
    Ok(out)
}

fn detect(a: &DetectArgs) -> Outcome {
    check_sigma("noise-sensor", a.noise_sensor)?;
    let (m, base) = DatasetManifest::load(&a.manifest)?;
    let params = load_detector(a.config.as_deref())?;
    let views = detect_views(&m, &base, None, &params, a.noise_sensor, a.seed)?;
    let rows: Vec<FeatureRow> =
        views.iter().flat_map(|v| v.features.iter().map(move |f| FeatureRow::new(v.view_id, f))).collect();
    let path = a.common.out.join("features.csv");
    write_features_csv(fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?, &rows)?;
    println!("{} features in {} views -> {}", rows.len(), views.len(), path.display());
    Ok(())
}

/// Features of the manifest views with `role`, from a CSV or by detection,
/// with optional observation noise.
fn gather_features(
    m: &DatasetManifest,
    base: &Path,
    role: Role,
    features: Option<&Path>,
    params: &DetectorParams,
    noise_obs: f64,
    seed: u64,
) -> Outcome<Vec<ViewFeatures>> {
    check_sigma("noise-obs", noise_obs)?;
    let mut views = match features {
        Some(p) => {
            let rows = read_features_csv(fs::File::open(p).with_context(|| format!("cannot read {}", p.display()))?)
                .with_context(|| format!("malformed feature CSV {}", p.display()))?;
            let mut by_view: BTreeMap<usize, Vec<_>> =
                m.views_with_role(role).map(|v| (v.view_id, Vec::new())).collect();
            for r in rows {
                if let Some(list) = by_view.get_mut(&r.view_id) {
                    list.push(r.feature());
                }
            }
            by_view.into_iter().map(|(view_id, features)| ViewFeatures { view_id, features }).collect()
        }
        None => detect_views(m, base, Some(role), params, 0.0, seed)?,
    };
    if noise_obs > 0.0 {
        for v in &mut views {
            v.features = add_observation_noise(&v.features, noise_obs, seed ^ (v.view_id as u64).wrapping_mul(0x9e37_79b9));
        }
    }
    Ok(views)
}

fn calibrate(a: &CalibrateArgs) -> Outcome {
    let (m, base) = DatasetManifest::load(&a.manifest)?;
    let params = load_detector(a.config.as_deref())?;
    let views = gather_features(&m, &base, Role::Calibration, a.features.as_deref(), &params, a.noise_obs, a.seed)?;
    let n = &m.camera_nominal;
    let cfg = CalibConfig {
        board: m.board,
        f_nominal_mm: n.f_mm,
        sx: n.pixel_um * 1e-3,
        sy: n.pixel_um * 1e-3,
        mla: nominal_mla(n),
        detector: params,
        lm: LmOptions::default(),
    };
    let sol = calibrate_full(&views, &cfg).map_err(numerical)?;
    let report = CalibrationReport::from(&sol);
    write_json(&a.common.out.join("calibration.json"), &report)?;
    write_json(&a.common.out.join("skipped.json"), &sol.skipped)?;
    println!(
        "F {:.4} mm, d_c {:.4} mm, d_m {:.4} mm, light-field RMSE {:.3} px, {} views used, {} skipped",
        report.f_mm,
        report.dc_mm,
        report.dm_mm,
        report.rmse_lightfield_px,
        sol.poses.len(),
        sol.skipped.len()
    );
    Ok(())
}

fn camera_from_report(r: &CalibrationReport, n: &CameraNominal) -> Outcome<CameraModel> {
    let s = n.pixel_um * 1e-3;
    let lens = MainLensIntrinsics::new(r.f_mm, r.u0_px, r.v0_px, s, s)?;
    let dist = Distortion::new(r.k1, r.k2, r.t1, r.t2);
    let mla = MlaGeometry { d_c: r.dc_mm, d_m: r.dm_mm, ..nominal_mla(n) };
    Ok(CameraModel::new(lens, dist, mla)?)
}

fn evaluate(a: &EvaluateArgs) -> Outcome {
    let (m, base) = DatasetManifest::load(&a.manifest)?;
    let report: CalibrationReport = read_json(&a.report)?;
    let cam = camera_from_report(&report, &m.camera_nominal)?;
    let params = load_detector(a.config.as_deref())?;
    let views = gather_features(&m, &base, Role::Evaluation, a.features.as_deref(), &params, a.noise_obs, a.seed)?;
    if views.is_empty() {
        return Err(Failure::Input(anyhow!("the manifest has no evaluation views")));
    }
    let truth: Option<Vec<f64>> = views.iter().map(|v| m.truth_for(v.view_id).map(|t| t.t_mm[2])).collect();
    let truth = truth.unwrap_or_default();
    let ev = evaluate_views(&cam, &views, &truth, &m.board, &params, &LmOptions::default()).map_err(numerical)?;
    let out = &a.common.out;
    write_json(&out.join("evaluation.json"), &ev)?;
    ev.write_epsilon_csv(&out.join("epsilon_z.csv"))?;
    ev.write_depth_csv(&out.join("alpha_depth.csv"))?;
    println!(
        "{} frames, epsilon_z {:.3}% +- {:.3}%, depth error {:.4} mm, R^2 {:.5}",
        ev.frames.len(),
        100.0 * ev.epsilon_z_mean,
        100.0 * ev.epsilon_z_std,
        ev.depth_abs_err_mean_mm,
        ev.r_squared_alpha_calibrated
    );
    Ok(())
}

fn bench(a: &BenchArgs) -> Outcome {
    if a.images == 0 {
        return Err(Failure::Input(anyhow!("--images must be positive")));
    }
    let mut scene = if a.full_scale { SceneConfig::full_scale() } else { load_scene(a.config.as_deref(), None)? };
    if let Some(s) = a.seed {
        scene.sim.seed = s;
    }
    scene.sim.n_views = a.images;
    let cfg = scene.sim_config()?;
    let rep = run_benchmark(&cfg, &scene.calibration_poses()).map_err(numerical)?;
    write_json(&a.common.out.join("bench.json"), &rep)?;
    rep.write_csv(&a.common.out.join("bench.csv"))?;
    println!(
        "{}x{}: {:.3} +- {:.3} s per image on {} threads",
        rep.sensor_w, rep.sensor_h, rep.mean_s, rep.std_s, rep.threads
    );
    Ok(())
}
