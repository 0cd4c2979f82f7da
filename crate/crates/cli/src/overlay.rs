use std::path::Path;

use parcel_trace::io::save_rgb;
use parcel_trace::{BinaryRaster, GrayRaster, Result};

pub const DETECTED: [u8; 3] = [255, 0, 0];
pub const REFERENCE: [u8; 3] = [0, 0, 255];
pub const AGREEMENT: [u8; 3] = [0, 255, 0];

/// Comparison figure: the image in gray, detected-only pixels red,
/// reference-only pixels blue, pixels in both green.
pub fn overlay_rgb(img: &GrayRaster, detected: &BinaryRaster, reference: Option<&BinaryRaster>) -> Result<Vec<u8>> {
    img.ensure_same_dims(detected)?;
    if let Some(r) = reference {
        img.ensure_same_dims(r)?;
    }
    let mut rgb = Vec::with_capacity(img.data().len() * 3);
    for (i, &v) in img.data().iter().enumerate() {
        let d = detected.data()[i];
        let r = reference.is_some_and(|r| r.data()[i]);
        rgb.extend(match (d, r) {
            (true, true) => AGREEMENT,
            (true, false) => DETECTED,
            (false, true) => REFERENCE,
            (false, false) => [v; 3],
        });
    }
    Ok(rgb)
}

pub fn emit_overlay(
    img: &GrayRaster,
    detected: &BinaryRaster,
    reference: Option<&BinaryRaster>,
    path: &Path,
) -> Result<()> {
    let rgb = overlay_rgb(img, detected, reference)?;
    save_rgb(img.width(), img.height(), &rgb, path)
}
