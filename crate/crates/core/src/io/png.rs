//! 8-bit RGB PNG images.

use std::path::Path;

use crate::error::{Error, Result};
use crate::render::Image;

/// Clamps to [0, 1], scales by 255 and rounds half to even.
pub fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data.iter().map(|&v| to_u8(v)).collect();
    image::save_buffer(path, &bytes, img.width, img.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

pub fn read_png(path: &Path) -> Result<Image> {
    let dynamic = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let rgb = dynamic.to_rgb8();
    Ok(Image {
        width: rgb.width(),
        height: rgb.height(),
        data: rgb.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
    })
}
