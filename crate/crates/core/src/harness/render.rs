use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `(min, max)` over all panels, for a colour scale shared between them.
pub fn shared_scale(panels: &[&[f64]]) -> Option<(f64, f64)> {
    let mut it = panels.iter().flat_map(|p| p.iter().copied()).filter(|v| v.is_finite());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
}

/// 8-bit grey levels, row 0 at `j = 0`. A degenerate scale maps to mid-grey.
pub fn to_gray(field: &[f64], scale: (f64, f64)) -> Vec<u8> {
    let (lo, hi) = scale;
    field
        .iter()
        .map(|&v| {
            if !(hi > lo) {
                128
            } else {
                (255.0 * ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).round() as u8
            }
        })
        .collect()
}

/// Writes an `nx × ny` grey-scale image of `field` (x fastest). The format
/// follows the extension: `.png` gives PNG, anything else binary PGM.
pub fn render_heatmap(field: &[f64], nx: usize, ny: usize, path: &Path, scale: Option<(f64, f64)>) -> Result<()> {
    if field.len() != nx * ny {
        return Err(Error::arg(format!("{} values for a {nx}x{ny} image", field.len())));
    }
    let bad = field.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::domain(format!("field has {bad} non-finite values")));
    }
    let scale = scale.or_else(|| shared_scale(&[field])).unwrap_or((0.0, 0.0));
    let pixels = to_gray(field, scale);
    let mut out = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        let mut enc = png::Encoder::new(&mut out, nx as u32, ny as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(png_error)?;
        w.write_image_data(&pixels).map_err(png_error)?;
        w.finish().map_err(png_error)?;
    } else {
        write!(out, "P5\n{nx} {ny}\n255\n")?;
        out.write_all(&pixels)?;
    }
    out.flush()?;
    Ok(())
}

fn png_error(e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::arg(other.to_string()),
    }
}
