//! Three-class training masks from instance annotations.
//!
//! Each field is eroded by one pixel so that neighboring fields cannot
//! merge, then a boundary band of `buffer` pixels (Chebyshev distance) is
//! laid around the eroded fields. Everything else is background.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::dilate_square;
use crate::raster::{BinaryRaster, Class, ClassMask, LabelRaster, Raster};

/// Boundary buffer widths used for training masks.
pub const STANDARD_BUFFERS: [u32; 3] = [1, 2, 5];

/// Field erosion radius in pixels. Fixed.
pub const EROSION_RADIUS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub buffer: u32,
    /// Permits buffers outside [`STANDARD_BUFFERS`].
    #[serde(default)]
    pub allow_any_buffer: bool,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            buffer: 2,
            allow_any_buffer: false,
        }
    }
}

impl MaskConfig {
    pub fn new(buffer: u32) -> Result<Self> {
        let cfg = MaskConfig {
            buffer,
            allow_any_buffer: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.allow_any_buffer && !STANDARD_BUFFERS.contains(&self.buffer) {
            return Err(Error::Config(format!(
                "boundary buffer {} not in {STANDARD_BUFFERS:?}",
                self.buffer
            )));
        }
        Ok(())
    }
}

/// Result of [`erode_fields`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Eroded {
    pub labels: LabelRaster,
    /// Labels whose whole region eroded away, ascending.
    pub vanished: Vec<u32>,
}

/// Erodes every labelled region independently by the 3x3 square: a pixel
/// keeps its label iff every in-bounds 8-neighbor carries the same label.
/// Pixels beyond the raster edge do not cause erosion.
pub fn erode_fields(inst: &LabelRaster) -> Eroded {
    let (w, h) = inst.dims();
    let labels = Raster::from_fn(w, h, |x, y| {
        let l = inst.get(x, y);
        if l == 0 {
            return 0;
        }
        let keeps = (-1..=1).all(|dy| {
            (-1..=1).all(|dx| {
                inst.get_signed(x as isize + dx, y as isize + dy)
                    .is_none_or(|n| n == l)
            })
        });
        if keeps {
            l
        } else {
            0
        }
    });
    let before: BTreeSet<u32> = inst.data().iter().copied().filter(|&l| l != 0).collect();
    let after: BTreeSet<u32> = labels.data().iter().copied().filter(|&l| l != 0).collect();
    Eroded {
        labels,
        vanished: before.difference(&after).copied().collect(),
    }
}

/// Result of [`build_semantic_mask`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticMask {
    pub mask: ClassMask,
    pub warnings: Vec<String>,
}

pub fn build_semantic_mask(inst: &LabelRaster, cfg: &MaskConfig) -> Result<SemanticMask> {
    cfg.validate()?;
    let eroded = erode_fields(inst);
    let field: BinaryRaster = eroded.labels.map(|l| l != 0);
    let band = dilate_square(&field, cfg.buffer as usize);
    let data = field
        .data()
        .iter()
        .zip(band.data())
        .map(|(&f, &b)| match (f, b) {
            (true, _) => Class::Field,
            (false, true) => Class::Boundary,
            (false, false) => Class::Background,
        })
        .collect();
    let warnings = eroded
        .vanished
        .iter()
        .map(|l| format!("field {l} vanished under erosion"))
        .collect();
    Ok(SemanticMask {
        mask: ClassMask::new(inst.width(), inst.height(), data)?,
        warnings,
    })
}
