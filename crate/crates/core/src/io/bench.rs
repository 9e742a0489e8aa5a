use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::simulate::{render_raw, SimConfig, SimError};
use crate::Pose;

/// Wall-clock timings of repeated full renders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub sensor_w: usize,
    pub sensor_h: usize,
    pub threads: usize,
    pub per_image_s: Vec<f64>,
    pub mean_s: f64,
    pub std_s: f64,
    pub images_per_s: f64,
}

impl BenchReport {
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "image,seconds")?;
        for (i, s) in self.per_image_s.iter().enumerate() {
            writeln!(f, "{i},{s}")?;
        }
        f.flush()
    }
}

/// Renders every pose once and records the time taken per image. Runs on
/// the current rayon pool, so wrap the call in `ThreadPool::install` to
/// pin the thread count.
pub fn run_benchmark(cfg: &SimConfig, poses: &[Pose]) -> Result<BenchReport, SimError> {
    let mut per_image_s = Vec::with_capacity(poses.len());
    for pose in poses {
        let start = Instant::now();
        let img = render_raw(cfg, pose)?;
        per_image_s.push(start.elapsed().as_secs_f64());
        std::hint::black_box(img);
    }
    let n = per_image_s.len().max(1) as f64;
    let mean_s = per_image_s.iter().sum::<f64>() / n;
    let var = per_image_s.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / n;
    Ok(BenchReport {
        sensor_w: cfg.cam.mla.sensor_w,
        sensor_h: cfg.cam.mla.sensor_h,
        threads: rayon::current_num_threads(),
        per_image_s,
        mean_s,
        std_s: var.sqrt(),
        images_per_s: if mean_s > 0.0 { 1.0 / mean_s } else { f64::INFINITY },
    })
}
