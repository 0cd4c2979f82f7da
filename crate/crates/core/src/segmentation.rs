//! Class maps from predictions, a deterministic non-learned segmenter and
//! a synthetic farmland generator.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::laplacian_response;
use crate::io::read_cbt;
use crate::mask::{build_semantic_mask, MaskConfig};
use crate::morphology::close3;
use crate::raster::{stitch_tensor, BinaryRaster, Class, ClassMask, GrayRaster, LabelRaster, Raster, Tensor, TileGrid};
use crate::scalar::Scalar;
use crate::skeleton::thin;

/// Default Laplacian magnitude that marks a boundary pixel.
pub const DEFAULT_EDGE_THRESHOLD: i32 = 32;

/// Per-pixel argmax over three class channels; ties go to the lowest
/// class index.
pub fn argmax_classes<T: Scalar>(p: &Tensor<T>) -> Result<ClassMask> {
    if p.channels() != 3 {
        return Err(Error::SizeMismatch {
            left: format!("{} channels", p.channels()),
            right: "3 channels".into(),
        });
    }
    let data = p
        .pixels()
        .map(|px| {
            let mut best = 0;
            for c in 1..3 {
                if px[c] > px[best] {
                    best = c;
                }
            }
            Class::from_index(best).expect("three classes")
        })
        .collect();
    Raster::new(p.width(), p.height(), data)
}

/// Reads `tile_<row>_<col>.cbt` for every grid cell, stitches the
/// probabilities and takes the argmax.
pub fn ingest_predictions(dir: impl AsRef<Path>, grid: &TileGrid) -> Result<ClassMask> {
    grid.validate()?;
    let dir = dir.as_ref();
    let positions: Vec<(usize, usize)> = grid.positions().collect();
    let tiles = positions
        .par_iter()
        .map(|&(r, c)| {
            let path = dir.join(TileGrid::tile_name(r, c, "cbt"));
            if !path.exists() {
                return Err(Error::MissingTile(path));
            }
            let t = read_cbt(&path)?;
            let s = grid.tile_size;
            if t.height() != s || t.width() != s || t.channels() != 3 {
                return Err(Error::TileMismatch(format!(
                    "{} is {}, expected {s}x{s}x3",
                    path.display(),
                    t.shape_string()
                )));
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    argmax_classes(&stitch_tensor(&tiles, grid)?)
}

/// Non-learned segmenter: boundary where the 8-neighbor Laplacian
/// magnitude reaches `threshold`, closed with a 3x3 square; non-boundary
/// pixels reachable from the raster edge (4-connected) are background and
/// enclosed ones are field.
pub fn baseline_segment(img: &GrayRaster, threshold: i32) -> ClassMask {
    let (w, h) = img.dims();
    let edges = Raster::new(
        w,
        h,
        laplacian_response(img)
            .into_iter()
            .map(|l| l.abs() >= threshold)
            .collect(),
    )
    .expect("dimensions preserved");
    let boundary = close3(&edges);
    let outside = flood_from_edges(&boundary);
    Raster::from_fn(w, h, |x, y| {
        if boundary.get(x, y) {
            Class::Boundary
        } else if outside.get(x, y) {
            Class::Background
        } else {
            Class::Field
        }
    })
}

/// Pixels not in `walls` that are 4-connected to the raster edge.
fn flood_from_edges(walls: &BinaryRaster) -> BinaryRaster {
    let (w, h) = walls.dims();
    let mut seen = Raster::filled(w, h, false);
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for x in 0..w {
        stack.push((x, 0));
        stack.push((x, h - 1));
    }
    for y in 0..h {
        stack.push((0, y));
        stack.push((w - 1, y));
    }
    while let Some((x, y)) = stack.pop() {
        if walls.get(x, y) || seen.get(x, y) {
            continue;
        }
        seen.set(x, y, true);
        if x > 0 {
            stack.push((x - 1, y));
        }
        if x + 1 < w {
            stack.push((x + 1, y));
        }
        if y > 0 {
            stack.push((x, y - 1));
        }
        if y + 1 < h {
            stack.push((x, y + 1));
        }
    }
    seen
}

/// Separator and frame width in the synthetic scenes.
pub const SEPARATOR_WIDTH: usize = 2;
/// Intensity of separators.
pub const SEPARATOR_LEVEL: u8 = 20;
/// Smallest parcel side produced by [`synth_scene`].
pub const MIN_PARCEL_SIDE: usize = 8;
const PARCEL_LEVELS: std::ops::RangeInclusive<u8> = 80..=240;

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn can_split(&self, horizontal: bool) -> bool {
        let side = if horizontal { self.h } else { self.w };
        side >= 2 * MIN_PARCEL_SIDE + SEPARATOR_WIDTH
    }
}

/// Rectangular-mosaic farmland: parcels of distinct uniform intensity,
/// separated by dark 2-px lines, inside a dark 2-px frame. Returns the
/// image and the matching instance labels (separators are 0, parcels
/// `1..=parcels`). Deterministic in `seed`.
pub fn synth_scene(seed: u64, width: usize, height: usize, parcels: usize) -> Result<(GrayRaster, LabelRaster)> {
    if parcels == 0 {
        return Err(Error::Config("parcel count must be at least 1".into()));
    }
    let levels = PARCEL_LEVELS.count();
    if parcels > levels {
        return Err(Error::Config(format!(
            "at most {levels} parcels have distinct intensities, {parcels} requested"
        )));
    }
    let frame = SEPARATOR_WIDTH;
    if width < 2 * frame + MIN_PARCEL_SIDE || height < 2 * frame + MIN_PARCEL_SIDE {
        return Err(Error::Config(format!(
            "{width}x{height} is too small for a single parcel"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rects = vec![Rect {
        x: frame,
        y: frame,
        w: width - 2 * frame,
        h: height - 2 * frame,
    }];
    while rects.len() < parcels {
        let pick = rects
            .iter()
            .enumerate()
            .filter(|(_, r)| r.can_split(true) || r.can_split(false))
            .max_by_key(|(i, r)| (r.w * r.h, usize::MAX - i))
            .map(|(i, _)| i);
        let Some(i) = pick else {
            return Err(Error::Config(format!(
                "{width}x{height} cannot hold {parcels} parcels of side >= {MIN_PARCEL_SIDE}"
            )));
        };
        let r = rects[i];
        let horizontal = match (r.can_split(true), r.can_split(false)) {
            (true, true) => {
                if r.h == r.w {
                    rng.gen_bool(0.5)
                } else {
                    r.h > r.w
                }
            }
            (h, _) => h,
        };
        let side = if horizontal { r.h } else { r.w };
        let cut = rng.gen_range(MIN_PARCEL_SIDE..=side - MIN_PARCEL_SIDE - SEPARATOR_WIDTH);
        let rest = side - cut - SEPARATOR_WIDTH;
        let (a, b) = if horizontal {
            (
                Rect { h: cut, ..r },
                Rect {
                    y: r.y + cut + SEPARATOR_WIDTH,
                    h: rest,
                    ..r
                },
            )
        } else {
            (
                Rect { w: cut, ..r },
                Rect {
                    x: r.x + cut + SEPARATOR_WIDTH,
                    w: rest,
                    ..r
                },
            )
        };
        rects[i] = a;
        rects.push(b);
    }

    let mut palette: Vec<u8> = PARCEL_LEVELS.collect();
    palette.shuffle(&mut rng);

    let mut labels = LabelRaster::filled(width, height, 0);
    let mut image = GrayRaster::filled(width, height, SEPARATOR_LEVEL);
    for (k, r) in rects.iter().enumerate() {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                labels.set(x, y, k as u32 + 1);
                image.set(x, y, palette[k]);
            }
        }
    }
    Ok((image, labels))
}

/// 1-px reference boundary for an instance raster: the boundary class of
/// its semantic mask, thinned.
pub fn reference_boundary(inst: &LabelRaster, buffer: u32) -> Result<BinaryRaster> {
    let cfg = MaskConfig {
        buffer,
        allow_any_buffer: true,
    };
    let m = build_semantic_mask(inst, &cfg)?;
    Ok(thin(&m.mask.select(Class::Boundary)))
}
