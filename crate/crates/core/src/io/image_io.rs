use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, ExtendedColorType, ImageEncoder, ImageError, ImageFormat, ImageReader};

use crate::raw::RawImage;

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn classify(e: ImageError) -> ImageIoError {
    match e {
        ImageError::Unsupported(u) => ImageIoError::UnsupportedFormat(u.to_string()),
        ImageError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => ImageIoError::CorruptFile(io.to_string()),
        ImageError::IoError(io) => ImageIoError::Io(io),
        other => ImageIoError::CorruptFile(other.to_string()),
    }
}

/// Reads an 8-bit grayscale image from a binary PGM (P5) or PNG file.
pub fn read_image(path: &Path) -> Result<RawImage, ImageIoError> {
    let reader = ImageReader::open(path)?.with_guessed_format()?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(f) => return Err(ImageIoError::UnsupportedFormat(format!("{f:?}"))),
        None => return Err(ImageIoError::UnsupportedFormat("unrecognized file signature".into())),
    }
    let img = reader.decode().map_err(classify)?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok(RawImage { width: w as usize, height: h as usize, data: buf.into_raw() })
        }
        other => Err(ImageIoError::UnsupportedFormat(format!("{:?}, expected 8-bit grayscale", other.color()))),
    }
}

/// Writes `img` as binary PGM for `.pgm` paths and PNG otherwise.
pub fn write_image(img: &RawImage, path: &Path) -> Result<(), ImageIoError> {
    let ext = path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase());
    let (w, h) = (img.width as u32, img.height as u32);
    match ext.as_deref() {
        Some("pgm") => {
            let f = BufWriter::new(std::fs::File::create(path)?);
            PnmEncoder::new(f)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(&img.data, w, h, ExtendedColorType::L8)
                .map_err(classify)
        }
        Some("png") => image::save_buffer_with_format(path, &img.data, w, h, ColorType::L8, ImageFormat::Png).map_err(classify),
        other => Err(ImageIoError::UnsupportedFormat(format!("extension {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RawImage {
        RawImage { width: 7, height: 5, data: (0..35).map(|v| (v * 7) as u8).collect() }
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.pgm", "a.png"] {
            let p = dir.path().join(name);
            write_image(&sample(), &p).unwrap();
            assert_eq!(read_image(&p).unwrap(), sample());
        }
        let bytes = std::fs::read(dir.path().join("a.pgm")).unwrap();
        assert!(bytes.starts_with(b"P5"));
    }

    #[test]
    fn truncated_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["t.pgm", "t.png"] {
            let p = dir.path().join(name);
            write_image(&sample(), &p).unwrap();
            let bytes = std::fs::read(&p).unwrap();
            std::fs::write(&p, &bytes[..bytes.len() - 12]).unwrap();
            assert!(matches!(read_image(&p), Err(ImageIoError::CorruptFile(_))), "{name}");
        }
    }

    #[test]
    fn sixteen_bit_png_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("deep.png");
        let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_pixel(4, 4, image::Luma([1000]));
        buf.save(&p).unwrap();
        assert!(matches!(read_image(&p), Err(ImageIoError::UnsupportedFormat(_))));
    }
}
