//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process exits non-zero
//! when any criterion fails.

use std::time::Instant;

use lftcam::calibrate::{
    calibrate_full, estimate_alpha_virtual, estimate_dc_dm, levenberg_marquardt, CalibConfig, CalibrationSolution,
    LmOptions, ViewFeatures,
};
use lftcam::eval::{add_observation_noise, add_sensor_noise, evaluate_views};
use lftcam::features::{cluster_lenses, constraint_score, detect_features, CipFeature, DetectorParams};
use lftcam::io::run_benchmark;
use lftcam::model::{alpha_of_depth, depth_of_alpha};
use lftcam::raw::RawImage;
use lftcam::simulate::{render_raw, SceneConfig, SimConfig, SplitMixStream};
use lftcam::{Distortion, MlaGeometry, Point2, Pose};

const F_TRUE: f64 = 50.0;
const DC_TRUE: f64 = 58.0;
const DM_TRUE: f64 = 57.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn single_thread<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Relative errors of `(F, d_c, d_m)`.
fn intrinsic_errors(sol: &CalibrationSolution) -> [f64; 3] {
    [rel(sol.cam.lens.focal_length, F_TRUE), rel(sol.cam.mla.d_c, DC_TRUE), rel(sol.cam.mla.d_m, DM_TRUE)]
}

fn calib_config(scene: &SceneConfig, cfg: &SimConfig) -> CalibConfig {
    CalibConfig {
        board: scene.board,
        f_nominal_mm: F_TRUE,
        sx: cfg.cam.lens.sx,
        sy: cfg.cam.lens.sy,
        mla: cfg.cam.mla,
        detector: DetectorParams::default(),
        lm: LmOptions::default(),
    }
}

fn render_all(cfg: &SimConfig, poses: &[Pose]) -> Vec<RawImage> {
    poses.iter().map(|p| render_raw(cfg, p).expect("render")).collect()
}

fn detect_all(cfg: &SimConfig, images: &[RawImage]) -> Vec<ViewFeatures> {
    images
        .iter()
        .enumerate()
        .map(|(k, img)| ViewFeatures {
            view_id: k,
            features: detect_features(img, &cfg.cam.mla, &DetectorParams::default()).expect("detect"),
        })
        .collect()
}

fn criterion_1(scene: &SceneConfig) -> (Outcome, Option<CalibrationSolution>) {
    let cfg = scene.sim_config().unwrap();
    let start = Instant::now();
    let result = single_thread(|| {
        let views = detect_all(&cfg, &render_all(&cfg, &scene.calibration_poses()));
        calibrate_full(&views, &calib_config(scene, &cfg))
    });
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(sol) => {
            let e = intrinsic_errors(&sol);
            let rl = sol.diagnostics.rmse_lightfield_px;
            let pass = e.iter().all(|v| *v <= 0.005) && rl <= 0.5 && secs <= 120.0 && sol.poses.len() == 12;
            let detail = format!(
                "F {:.3}% d_c {:.3}% d_m {:.3}%, light-field RMSE {rl:.3} px, {} of 12 views, {secs:.1} s single-threaded",
                100.0 * e[0],
                100.0 * e[1],
                100.0 * e[2],
                sol.poses.len()
            );
            (Outcome { pass, detail }, Some(sol))
        }
        Err(err) => (Outcome { pass: false, detail: format!("calibration failed: {err}") }, None),
    }
}

fn criteria_2_to_4(scene: &SceneConfig, sol: Option<&CalibrationSolution>) -> [Outcome; 3] {
    let Some(sol) = sol else {
        let skip = || Outcome { pass: false, detail: "no calibration from criterion 1".into() };
        return [skip(), skip(), skip()];
    };
    let cfg = scene.sim_config().unwrap();
    let poses = scene.sweep_poses();
    let z: Vec<f64> = poses.iter().map(|p| p.translation[2]).collect();
    let views = detect_all(&cfg, &render_all(&cfg, &poses));
    let det = DetectorParams::default();
    let report = match evaluate_views(&sol.cam, &views, &z, &scene.board, &det, &LmOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            let fail = || Outcome { pass: false, detail: format!("evaluation failed: {e}") };
            return [fail(), fail(), fail()];
        }
    };
    let frames = report.frames.len();
    let enough = frames >= 10;
    let r2 = report.r_squared_alpha_calibrated;
    let c2 = Outcome {
        pass: enough && r2 >= 0.999,
        detail: format!(
            "R^2 {r2:.6} with calibrated d_c/d_m ({:.6} with d_c/d_m refitted on the sweep), {frames} frames",
            report.r_squared_alpha
        ),
    };
    let dep = report.depth_abs_err_mean_mm;
    let c3 = Outcome {
        pass: enough && dep <= 0.05,
        detail: format!(
            "mean |Z'(alpha) - Z'(PnP)| {dep:.4} mm (std {:.4}) over {} corners",
            report.depth_abs_err_std_mm,
            report.depth_rows.len()
        ),
    };
    let eps = report.epsilon_z_mean;
    let c4 = Outcome {
        pass: enough && eps <= 0.01,
        detail: format!("mean epsilon_z {:.3}% (std {:.3}%), {frames} frames", 100.0 * eps, 100.0 * report.epsilon_z_std),
    };
    [c2, c3, c4]
}

fn test_mla() -> MlaGeometry {
    MlaGeometry {
        d_c: DC_TRUE,
        d_m: DM_TRUE,
        n_h: 60,
        n_w: 80,
        sensor_h: 1200,
        sensor_w: 1600,
        offset_x: 0.0,
        offset_y: 0.0,
        theta: 0.0,
    }
}

fn criterion_5() -> Outcome {
    let mut rng = SplitMixStream::new(5);
    let mut failures = Vec::new();
    let mla = test_mla();

    // Alpha and virtual point from exact forward CIPs.
    let mut worst_alpha: f64 = 0.0;
    for _ in 0..200 {
        let alpha = 0.3 + 1.4 * rng.uniform();
        if (1.0 - alpha).abs() < 0.05 {
            continue;
        }
        let v = Point2::new(400.0 + 800.0 * rng.uniform(), 300.0 + 600.0 * rng.uniform());
        let (ci, cj) = ((v.x / 20.0) as usize, (v.y / 20.0) as usize);
        let mut feats = Vec::new();
        for i in ci - 1..=ci + 1 {
            for j in cj - 1..=cj + 1 {
                let c = mla.lens_center(i, j).unwrap();
                feats.push(CipFeature {
                    position_px: Point2::new(alpha * c.x + (1.0 - alpha) * v.x, alpha * c.y + (1.0 - alpha) * v.y),
                    lens_idx: (i, j),
                    n_intersections: 4,
                });
            }
        }
        let e = estimate_alpha_virtual(&feats, &mla).unwrap();
        worst_alpha = worst_alpha
            .max(rel(e.alpha_x, alpha))
            .max(rel(e.alpha_y, alpha))
            .max(rel(e.virtual_px.x, v.x))
            .max(rel(e.virtual_px.y, v.y));
    }
    if worst_alpha > 1e-9 {
        failures.push(format!("alpha/virtual {worst_alpha:.1e}"));
    }

    // d_c, d_m from exact (alpha, Z') pairs.
    let mut worst_d: f64 = 0.0;
    for _ in 0..200 {
        let d_m = 20.0 + 60.0 * rng.uniform();
        let d_c = d_m + 0.2 + 3.0 * rng.uniform();
        let g = MlaGeometry { d_c, d_m, ..mla };
        let obs: Vec<(f64, f64)> = (0..12)
            .map(|_| {
                let z = d_c + 1.0 + 30.0 * rng.uniform();
                (alpha_of_depth(z, &g).unwrap(), z)
            })
            .collect();
        let (ec, em) = estimate_dc_dm(&obs).unwrap();
        worst_d = worst_d.max(rel(ec, d_c)).max(rel(em, d_m));
    }
    if worst_d > 1e-9 {
        failures.push(format!("d_c/d_m {worst_d:.1e}"));
    }

    // Depth and alpha are inverse maps.
    let mut worst_z: f64 = 0.0;
    for _ in 0..1000 {
        let z = 40.0 + 100.0 * rng.uniform();
        if (z - DM_TRUE).abs() < 0.5 {
            continue;
        }
        let back = depth_of_alpha(alpha_of_depth(z, &mla).unwrap(), &mla).unwrap();
        worst_z = worst_z.max(rel(back, z));
    }
    if worst_z > 1e-9 {
        failures.push(format!("depth/alpha {worst_z:.1e}"));
    }

    // Distortion round trip on the normalized plane.
    let mut worst_dist: f64 = 0.0;
    for _ in 0..1000 {
        let d = Distortion::new(rng.symmetric(0.2), rng.symmetric(0.05), rng.symmetric(0.01), rng.symmetric(0.01));
        let p = Point2::new(rng.symmetric(0.4), rng.symmetric(0.3));
        let back = d.undistort(d.distort(p)).unwrap();
        worst_dist = worst_dist.max(back.distance(&p));
    }
    if worst_dist > 1e-8 {
        failures.push(format!("distortion {worst_dist:.1e}"));
    }

    // LM cost never increases along accepted steps.
    let mut monotone = true;
    for _ in 0..50 {
        let (a, b, c) = (1.0 + rng.uniform(), 0.5 * rng.uniform(), rng.symmetric(1.0));
        let ts: Vec<f64> = (0..30).map(|k| k as f64 / 10.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| a * (-b * t).exp() + c).collect();
        let rep = levenberg_marquardt(
            |x: &[f64]| ts.iter().zip(&ys).map(|(t, y)| x[0] * (-x[1] * t).exp() + x[2] - y).collect(),
            &[3.0, 2.0, 0.0],
            &LmOptions::default(),
        )
        .unwrap();
        monotone &= rep.cost_history.windows(2).all(|w| w[1] <= w[0]);
    }
    if !monotone {
        failures.push("LM cost increased".into());
    }

    // DBSCAN over lens indices ignores input order.
    let mut order_ok = true;
    for _ in 0..50 {
        let mut idx: Vec<(usize, usize)> =
            (0..40).map(|_| ((rng.uniform() * 12.0) as usize, (rng.uniform() * 12.0) as usize)).collect();
        idx.sort();
        idx.dedup();
        let base = cluster_lenses(&idx, std::f64::consts::SQRT_2, 2);
        for _ in 0..5 {
            for k in (1..idx.len()).rev() {
                let j = (rng.next_u64() % (k as u64 + 1)) as usize;
                idx.swap(k, j);
            }
            order_ok &= cluster_lenses(&idx, std::f64::consts::SQRT_2, 2) == base;
        }
    }
    if !order_ok {
        failures.push("DBSCAN depends on input order".into());
    }

    // The renderer is bit-identical across pool sizes.
    let scene = SceneConfig::desk();
    let cfg = scene.sim_config().unwrap();
    let pose = scene.calibration_poses()[0];
    let render_with = |n: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(|| render_raw(&cfg, &pose).unwrap())
    };
    let reference = render_with(1);
    let deterministic = [2, 3, 4].iter().all(|&n| render_with(n) == reference);
    if !deterministic {
        failures.push("render differs across thread counts".into());
    }

    let detail = format!(
        "alpha/virtual {worst_alpha:.1e}, d_c/d_m {worst_d:.1e}, depth/alpha {worst_z:.1e}, distortion {worst_dist:.1e}, \
         LM monotone {monotone}, DBSCAN order-invariant {order_ok}, render deterministic {deterministic}"
    );
    Outcome { pass: failures.is_empty(), detail }
}

fn criterion_6() -> Outcome {
    let valid = [195.8, 48.6, 231.6, 99.4];
    let invalid = [216.8, 211.0, 174.0, 65.8];
    let sv = constraint_score(&valid, 100.0, 125.0);
    let si = constraint_score(&invalid, 100.0, 125.0);
    Outcome {
        pass: sv == 4 && si < 4,
        detail: format!("published valid quadruple scores {sv}/4, invalid scores {si}/4"),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean relative error of each intrinsic over completed trials, and the
/// number of failed calibrations.
struct Level {
    errors: Vec<[f64; 3]>,
    failed: usize,
}

impl Level {
    fn push(&mut self, r: Result<CalibrationSolution, lftcam::calibrate::CalibError>) {
        match r {
            Ok(s) => self.errors.push(intrinsic_errors(&s)),
            Err(_) => self.failed += 1,
        }
    }

    fn means(&self) -> [f64; 3] {
        let col = |k: usize| mean(&self.errors.iter().map(|e| e[k]).collect::<Vec<_>>());
        [col(0), col(1), col(2)]
    }

    fn worst_mean(&self) -> f64 {
        self.means().into_iter().fold(0.0, f64::max)
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let obs_sigmas = [0.1, 0.5, 1.0, 1.5];
    let sensor_sigmas = [0.1, 0.2, 0.4];
    let mut obs: Vec<Level> = obs_sigmas.iter().map(|_| Level { errors: Vec::new(), failed: 0 }).collect();
    let mut sensor: Vec<Level> = sensor_sigmas.iter().map(|_| Level { errors: Vec::new(), failed: 0 }).collect();

    for trial in 0..20u64 {
        let mut scene = SceneConfig::desk();
        scene.sim.seed = 7000 + trial;
        let cfg = scene.sim_config().unwrap();
        let cc = calib_config(&scene, &cfg);
        let images = render_all(&cfg, &scene.calibration_poses());
        let clean = detect_all(&cfg, &images);
        for (level, &sigma) in obs.iter_mut().zip(&obs_sigmas) {
            let noisy: Vec<ViewFeatures> = clean
                .iter()
                .map(|v| ViewFeatures {
                    view_id: v.view_id,
                    features: add_observation_noise(&v.features, sigma, (trial << 16) ^ (v.view_id as u64) ^ 0x0b5),
                })
                .collect();
            level.push(calibrate_full(&noisy, &cc));
        }
        if trial < 10 {
            for (level, &sigma) in sensor.iter_mut().zip(&sensor_sigmas) {
                let noisy: Vec<RawImage> = images
                    .iter()
                    .enumerate()
                    .map(|(k, img)| add_sensor_noise(img, sigma, (trial << 16) ^ (k as u64) ^ 0x5e5))
                    .collect();
                level.push(calibrate_full(&detect_all(&cfg, &noisy), &cc));
            }
        }
    }
    let minutes = start.elapsed().as_secs_f64() / 60.0;

    let fmt = |name: &str, sigmas: &[f64], levels: &[Level]| {
        sigmas
            .iter()
            .zip(levels)
            .map(|(s, l)| {
                let m = l.means();
                format!(
                    "{name} {s}: F {:.2}% d_c {:.2}% d_m {:.2}% ({} failed)",
                    100.0 * m[0],
                    100.0 * m[1],
                    100.0 * m[2],
                    l.failed
                )
            })
            .collect::<Vec<_>>()
            .join("; ")
    };
    let obs_ok = obs.iter().all(|l| l.failed == 0)
        && obs[1].worst_mean() <= 0.01
        && obs[3].worst_mean() <= 0.03;
    let sensor_ok = sensor.iter().all(|l| l.failed == 0 && l.worst_mean() <= 0.01);
    Outcome {
        pass: obs_ok && sensor_ok && minutes <= 30.0,
        detail: format!(
            "{} | {} | {minutes:.1} min",
            fmt("obs", &obs_sigmas, &obs),
            fmt("sensor", &sensor_sigmas, &sensor)
        ),
    }
}

fn criterion_8() -> Outcome {
    let full = SceneConfig::full_scale();
    let full_cfg = full.sim_config().unwrap();
    let full_report = run_benchmark(&full_cfg, &full.calibration_poses()[..2]);
    let desk = SceneConfig::desk();
    let desk_cfg = desk.sim_config().unwrap();
    let desk_report = single_thread(|| run_benchmark(&desk_cfg, &desk.calibration_poses()[..3]));
    match (full_report, desk_report) {
        (Ok(f), Ok(d)) => Outcome {
            pass: f.mean_s.is_finite() && f.sensor_w == 6500 && f.sensor_h == 4700 && d.threads == 1 && d.mean_s <= 1.0,
            detail: format!(
                "full scale {}x{} {:.3} s/image on {} threads (reference figure 1.001 s); desk {:.3} s/image single-threaded",
                f.sensor_w, f.sensor_h, f.mean_s, f.threads, d.mean_s
            ),
        },
        (f, d) => Outcome { pass: false, detail: format!("benchmark failed: {:?} / {:?}", f.err(), d.err()) },
    }
}

fn main() {
    let scene = SceneConfig::desk();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let (c1, sol) = criterion_1(&scene);
    results.push((1, "noise-free end-to-end calibration", c1));
    let [c2, c3, c4] = criteria_2_to_4(&scene, sol.as_ref());
    results.push((2, "alpha/depth law", c2));
    results.push((3, "depth from alpha", c3));
    results.push((4, "controlled translation", c4));
    results.push((5, "estimator exactness", criterion_5()));
    results.push((6, "feature-validation fidelity", criterion_6()));
    results.push((7, "robustness sweeps", criterion_7()));
    results.push((8, "render benchmark", criterion_8()));

    let mut all = true;
    for (k, name, o) in &results {
        println!("{} criterion {k} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if !all {
        std::process::exit(1);
    }
}
