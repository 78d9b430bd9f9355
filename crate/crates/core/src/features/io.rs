use std::io::BufWriter;
use std::path::Path;

use super::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"SMFX";
const HEADER_LEN: usize = 4 + 4 + 4 + 1;
const PNG_MIN_KEY: &str = "soundmix:min";
const PNG_MAX_KEY: &str = "soundmix:max";

/// Writes `magic | u32 rows | u32 cols | kind | f32 values`, all
/// little-endian, values row-major.
pub fn write_features(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = m.values.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * rows * cols);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    buf.push(m.kind.code());
    for &v in m.values.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN || &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::FeatureFile(format!("{} lacks the SMFX header", path.display())));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let kind = FeatureKind::from_code(bytes[12])
        .ok_or_else(|| Error::FeatureFile(format!("unknown feature kind byte {}", bytes[12])))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * rows * cols {
        return Err(Error::FeatureFile(format!(
            "{}: {rows}x{cols} needs {} data bytes, found {}",
            path.display(),
            4 * rows * cols,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureMatrix::new(kind, Matrix::from_vec(rows, cols, data)))
}

/// 8-bit grayscale rendering, `[min, max]` mapped linearly onto
/// `[0, 255]`, low rows at the bottom of the image. The value range is
/// stored in text chunks so [`import_png`] can undo the mapping.
pub fn export_png(m: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = m.values.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("cannot render an empty matrix"));
    }
    let values = m.values.as_slice();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Png("matrix contains non-finite values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in (0..rows).rev() {
        for &v in m.values.row(r) {
            let level = if span > 0.0 {
                ((v - min) / span * 255.0).round()
            } else {
                0.0
            };
            pixels.push(level as u8);
        }
    }

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), cols as u32, rows as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Png(e.to_string());
    encoder
        .add_text_chunk(PNG_MIN_KEY.into(), format!("{min:e}"))
        .map_err(png_err)?;
    encoder
        .add_text_chunk(PNG_MAX_KEY.into(), format!("{max:e}"))
        .map_err(png_err)?;
    let mut writer = encoder.write_header().map_err(png_err)?;
    writer.write_image_data(&pixels).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Inverse of [`export_png`], exact up to one gray level.
pub fn import_png(path: impl AsRef<Path>, kind: FeatureKind) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(file)
        .read_info()
        .map_err(|e| Error::Png(e.to_string()))?;
    let find = |key: &str| -> Option<f64> {
        reader
            .info()
            .uncompressed_latin1_text
            .iter()
            .find(|t| t.keyword == key)
            .and_then(|t| t.text.parse().ok())
    };
    let (min, max) = (find(PNG_MIN_KEY).unwrap_or(0.0), find(PNG_MAX_KEY).unwrap_or(255.0));
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Png("expected 8-bit grayscale".into()));
    }
    let (cols, rows) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size()];
    reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Png(e.to_string()))?;
    let span = max - min;
    let values = Matrix::from_fn(rows, cols, |r, c| {
        let g = buf[(rows - 1 - r) * cols + c] as f64;
        min + g / 255.0 * span
    });
    Ok(FeatureMatrix::new(kind, values))
}
