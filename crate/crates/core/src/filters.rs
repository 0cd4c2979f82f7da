//! Pre-processing filters for imagery. Borders are handled by reflection
//! and every output is clamped to `0..=255`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::raster::GrayRaster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    #[default]
    None,
    #[serde(rename = "highpass", alias = "high-pass")]
    HighPass,
    Laplacian,
    Sharpen,
    #[serde(rename = "sharpen-laplacian")]
    SharpenThenLaplacian,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] = [
        FilterKind::None,
        FilterKind::HighPass,
        FilterKind::Laplacian,
        FilterKind::Sharpen,
        FilterKind::SharpenThenLaplacian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::None => "none",
            FilterKind::HighPass => "highpass",
            FilterKind::Laplacian => "laplacian",
            FilterKind::Sharpen => "sharpen",
            FilterKind::SharpenThenLaplacian => "sharpen-laplacian",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "high-pass" && *k == FilterKind::HighPass))
            .ok_or_else(|| Error::Config(format!("unknown filter {s:?}")))
    }
}

const MID_GRAY: i32 = 128;

/// Response of the 8-neighbor Laplacian `[[1,1,1],[1,-8,1],[1,1,1]]` at
/// every pixel, with reflected borders.
pub fn laplacian_response(img: &GrayRaster) -> Vec<i32> {
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let center = img.get(x as usize, y as usize) as i32;
            let mut sum = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx != 0 || dy != 0 {
                        sum += img.get_reflected(x + dx, y + dy) as i32;
                    }
                }
            }
            out.push(sum - 8 * center);
        }
    }
    out
}

fn clamp_u8(v: i32) -> u8 {
    v.clamp(0, 255) as u8
}

fn laplacian(img: &GrayRaster) -> GrayRaster {
    let resp = laplacian_response(img);
    GrayRaster::new(
        img.width(),
        img.height(),
        resp.into_iter().map(|l| clamp_u8(MID_GRAY + l)).collect(),
    )
    .expect("dimensions preserved")
}

fn sharpen(img: &GrayRaster) -> GrayRaster {
    let resp = laplacian_response(img);
    GrayRaster::new(
        img.width(),
        img.height(),
        img.data()
            .iter()
            .zip(resp)
            .map(|(&v, l)| clamp_u8(v as i32 - l))
            .collect(),
    )
    .expect("dimensions preserved")
}

/// `img - box3(img)`, where the 3x3 mean is kept exact as `sum / 9` and
/// the difference is rounded half away from zero.
fn high_pass(img: &GrayRaster) -> GrayRaster {
    let (w, h) = img.dims();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut sum = 0i32;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    sum += img.get_reflected(x + dx, y + dy) as i32;
                }
            }
            let num = 9 * img.get(x as usize, y as usize) as i32 - sum;
            let q = if num >= 0 { (num + 4) / 9 } else { -((-num + 4) / 9) };
            out.push(clamp_u8(q));
        }
    }
    GrayRaster::new(w, h, out).expect("dimensions preserved")
}

pub fn apply_filter(img: &GrayRaster, kind: FilterKind) -> GrayRaster {
    match kind {
        FilterKind::None => img.clone(),
        FilterKind::HighPass => high_pass(img),
        FilterKind::Laplacian => laplacian(img),
        FilterKind::Sharpen => sharpen(img),
        FilterKind::SharpenThenLaplacian => laplacian(&sharpen(img)),
    }
}
