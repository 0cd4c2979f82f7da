//! Buffered boundary evaluation.
//!
//! The reference boundary (1 px wide) is widened to a band of total width
//! `bf` pixels: every pixel whose center lies within Euclidean distance
//! `bf / 2` of a reference pixel center. Detected pixels are not
//! buffered. Recall is scaled by `bf` to bring the band area back to line
//! length.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryRaster, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Zone {
    #[default]
    Rural,
    Urban,
}

impl Zone {
    /// Admissible boundary tolerance in meters.
    pub fn limit_m(self) -> f64 {
        match self {
            Zone::Rural => 2.4,
            Zone::Urban => 0.3,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Zone::Rural => "rural",
            Zone::Urban => "urban",
        })
    }
}

impl FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rural" => Ok(Zone::Rural),
            "urban" => Ok(Zone::Urban),
            _ => Err(Error::Config(format!("unknown zone {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Total band width in pixels.
    pub bf: u32,
    pub zone: Zone,
    /// Meters per pixel.
    pub gsd: f64,
    pub clamp_recall: bool,
}

impl EvalConfig {
    pub fn new(bf: u32) -> Self {
        EvalConfig {
            bf,
            zone: Zone::Rural,
            gsd: 1.0,
            clamp_recall: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bf < 1 {
            return Err(Error::Config("BF must be at least 1 pixel".into()));
        }
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return Err(Error::Config(format!("GSD must be positive, got {}", self.gsd)));
        }
        Ok(())
    }

    /// True when the band half-width stays within the zone's tolerance.
    pub fn is_admissible(&self) -> bool {
        half_width_m(self.bf, self.gsd) <= self.zone.limit_m() + LIMIT_SLACK_M
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub counts: ConfusionCounts,
    pub bf: u32,
    pub precision: f64,
    pub recall: f64,
    pub raw_recall: f64,
    pub fscore: f64,
}

impl EvalResult {
    /// Fixed-order one-line report.
    pub fn report(&self) -> String {
        format!(
            "precision={:.6}, recall={:.6}, raw_recall={:.6}, fscore={:.6}, TP={}, FP={}, FN={}",
            self.precision,
            self.recall,
            self.raw_recall,
            self.fscore,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_
        )
    }
}

/// Pixel offsets `(dx, dy)` with `dx^2 + dy^2 <= (bf/2)^2`, compared in
/// integers as `4 (dx^2 + dy^2) <= bf^2`.
pub fn disk_offsets(bf: u32) -> Vec<(isize, isize)> {
    let r = (bf / 2) as isize + 1;
    let lim = (bf as i64) * (bf as i64);
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if 4 * ((dx * dx + dy * dy) as i64) <= lim {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Reference pixels widened to the Euclidean band of total width `bf`.
pub fn buffer_reference(reference: &BinaryRaster, bf: u32) -> BinaryRaster {
    let (w, h) = reference.dims();
    let offsets = disk_offsets(bf);
    let mut out = Raster::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if !reference.get(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
    }
    out
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, BF-scaled recall and F-score from confusion counts.
pub fn scores(counts: ConfusionCounts, bf: u32, clamp_recall: bool) -> EvalResult {
    let ConfusionCounts { tp, fp, fn_ } = counts;
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let raw_recall = ratio(bf as f64 * tp as f64, (tp + fn_) as f64);
    let recall = if clamp_recall {
        raw_recall.min(1.0)
    } else {
        raw_recall
    };
    let fscore = ratio(2.0 * precision * recall, precision + recall);
    EvalResult {
        counts,
        bf,
        precision,
        recall,
        raw_recall,
        fscore,
    }
}

pub fn evaluate(detected: &BinaryRaster, reference: &BinaryRaster, cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    detected.ensure_same_dims(reference)?;
    let band = buffer_reference(reference, cfg.bf);
    let mut counts = ConfusionCounts::default();
    for (&d, &r) in detected.data().iter().zip(band.data()) {
        match (d, r) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(scores(counts, cfg.bf, cfg.clamp_recall))
}

/// Rounding slack when comparing a half-width against the zone limit.
const LIMIT_SLACK_M: f64 = 1e-9;

/// Band half-width in meters.
pub fn half_width_m(bf: u32, gsd: f64) -> f64 {
    bf as f64 * gsd / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferChoice {
    pub bf: u32,
    pub half_width_cm: f64,
}

/// Every BF whose half-width `bf * gsd / 2` stays within the zone limit,
/// ascending.
pub fn select_buffers(gsd: f64, zone: Zone) -> Result<Vec<BufferChoice>> {
    if !(gsd > 0.0 && gsd.is_finite()) {
        return Err(Error::Config(format!("GSD must be positive, got {gsd}")));
    }
    let limit = zone.limit_m() + LIMIT_SLACK_M;
    Ok((1u32..)
        .take_while(|&bf| half_width_m(bf, gsd) <= limit)
        .map(|bf| BufferChoice {
            bf,
            half_width_cm: half_width_m(bf, gsd) * 100.0,
        })
        .collect())
}
