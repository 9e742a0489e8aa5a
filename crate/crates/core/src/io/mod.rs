//! Image files, dataset manifests and render benchmarks.

mod bench;
mod image_io;
mod manifest;

pub use bench::{run_benchmark, BenchReport};
pub use image_io::{read_image, write_image, ImageIoError};
pub use manifest::{CameraNominal, DatasetManifest, GroundTruth, ManifestError, ManifestView, Role, ViewTruth};
