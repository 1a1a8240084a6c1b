//! Graymap images of the solid phase and raster mask input.
//!
//! Pixel column `c` is node `i = c mod n`; row `r` counts from the top, so it is node
//! `j = n - 1 - (r mod n)`. Solid nodes (`psi <= 0`) are black, fluid nodes white.

use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat, Luma};

use super::write_atomic;
use crate::error::{Error, Result};
use crate::levelset::{LevelSet, ShapeSpec};

pub const SOLID: u8 = 0;
pub const FLUID: u8 = 255;

/// `sign(psi)` repeated `m x m` times, `m n` pixels on a side.
pub fn tile(psi: &LevelSet, m: usize) -> Result<GrayImage> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "tile repetition count must be at least 1".into(),
        ));
    }
    let n = psi.grid().n();
    let side = (m * n) as u32;
    Ok(GrayImage::from_fn(side, side, |c, r| {
        let i = c as usize % n;
        let j = n - 1 - r as usize % n;
        Luma([if psi.get(i, j) <= 0.0 { SOLID } else { FLUID }])
    }))
}

/// Pixels that differ from the periodic continuation of the top-left `n x n` tile.
pub fn seam_mismatches(image: &GrayImage, n: usize) -> usize {
    image
        .enumerate_pixels()
        .filter(|(c, r, p)| {
            let base = image.get_pixel(c % n as u32, r % n as u32);
            base != *p
        })
        .count()
}

/// Plain-text (`P2`) graymap.
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut bytes = Vec::new();
    PnmEncoder::new(&mut bytes)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Ascii))
        .write_image(
            image.as_raw(),
            image.width(),
            image.height(),
            ExtendedColorType::L8,
        )
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Reads any portable graymap (`P2` or `P5`) as 8-bit gray.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path)?;
    let image = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(image.to_luma8())
}

/// Square raster as a mask shape: a graymap (`.pgm`, dark = solid) or a CSV grid of `n`
/// rows of `n` values (`<= 0` solid), row `k` holding nodes `j = k`.
pub fn read_mask(path: &Path) -> Result<ShapeSpec> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("pnm"));
    if is_pgm {
        let image = read_pgm(path)?;
        let n = image.width() as usize;
        if image.height() as usize != n {
            return Err(Error::format(
                path,
                format!("mask must be square, got {}x{}", n, image.height()),
            ));
        }
        let mut values = vec![0.0; n * n];
        for (c, r, p) in image.enumerate_pixels() {
            let j = n - 1 - r as usize;
            values[j * n + c as usize] = f64::from(p[0]) / 255.0 - 0.5;
        }
        return Ok(ShapeSpec::Mask { n, values });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::format(path, format!("`{field}`: {e}")))?,
            );
        }
        rows += 1;
    }
    if rows == 0 || values.len() != rows * rows {
        return Err(Error::format(
            path,
            format!(
                "expected a square grid, got {} values in {rows} rows",
                values.len()
            ),
        ));
    }
    Ok(ShapeSpec::Mask { n: rows, values })
}
