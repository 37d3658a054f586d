//! Image loading with format sniffing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::ScalarField;

use super::pgm::{decode_pgm, GrayImage};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Loads a PGM (P2/P5) or grayscale PNG file with intensities mapped to
/// `[0, 255]`.
pub fn load_image(path: &Path) -> Result<ScalarField> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)?.into_field()
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected a P2/P5 graymap or a PNG file".into(),
        ))
    }
}

#[cfg(feature = "png")]
fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    use png::{BitDepth, ColorType};

    let corrupt = |e: png::DecodingError| Error::CorruptFile {
        offset: 0,
        reason: e.to_string(),
    };
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(corrupt)?;
    let channels = match info.color_type {
        ColorType::Grayscale => 1,
        ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG color type {other:?}; only grayscale is accepted"
            )))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let raster = &buf[..info.buffer_size()];
    let data: Vec<f64> = match info.bit_depth {
        BitDepth::Eight => raster.chunks(channels).map(|px| px[0] as f64).collect(),
        BitDepth::Sixteen => raster
            .chunks(2 * channels)
            .map(|px| u16::from_be_bytes([px[0], px[1]]) as f64 * 255.0 / 65535.0)
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "PNG bit depth {other:?}; only 8 and 16 bit are accepted"
            )))
        }
    };
    Ok(GrayImage {
        width,
        height,
        data,
    })
}

#[cfg(not(feature = "png"))]
fn decode_png(_: &[u8]) -> Result<GrayImage> {
    Err(Error::UnsupportedFormat(
        "PNG support was not compiled in (enable the `png` feature)".into(),
    ))
}
