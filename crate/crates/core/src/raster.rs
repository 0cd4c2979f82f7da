//! Raster data model: pixel grids, class masks, probability tensors and
//! affine georeferencing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major 2-D grid of pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Raster<P> {
    width: usize,
    height: usize,
    data: Vec<P>,
}

/// 8-bit intensities.
pub type GrayRaster = Raster<u8>;
/// Instance labels, 0 is background.
pub type LabelRaster = Raster<u32>;
/// Three-class semantic mask.
pub type ClassMask = Raster<Class>;
/// Binary foreground mask.
pub type BinaryRaster = Raster<bool>;

impl<P: Copy> Raster<P> {
    pub fn new(width: usize, height: usize, data: Vec<P>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if width.checked_mul(height) != Some(data.len()) {
            return Err(Error::InvalidRaster(format!(
                "{width}x{height} raster needs {} values, got {}",
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            data,
        })
    }

    /// Raster with every pixel set to `value`.
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: P) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        Raster {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> P) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[P] {
        &self.data
    }

    pub fn into_data(self) -> Vec<P> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> P {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.data[y * self.width + x] = value;
    }

    /// Pixel at signed coordinates, `None` outside the raster.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> Option<P> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    /// Pixel at signed coordinates with out-of-range indices mirrored
    /// across the edge (the edge pixel itself is not repeated).
    #[inline]
    pub fn get_reflected(&self, x: isize, y: isize) -> P {
        self.get(reflect(x, self.width), reflect(y, self.height))
    }

    pub fn map<Q: Copy>(&self, f: impl FnMut(P) -> Q) -> Raster<Q> {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    /// Fails with a size-mismatch error naming both sizes.
    pub fn ensure_same_dims<Q>(&self, other: &Raster<Q>) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::SizeMismatch {
                left: format!("{}x{}", self.width, self.height),
                right: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }
}

impl Raster<bool> {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Mirrors index `i` into `0..n` without repeating the edge sample.
/// Out-of-range offsets larger than the extent keep bouncing between the
/// two edges.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Semantic class of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum Class {
    #[default]
    Background = 0,
    Field = 1,
    Boundary = 2,
}

impl Class {
    pub const ALL: [Class; 3] = [Class::Background, Class::Field, Class::Boundary];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Class::ALL.get(i).copied()
    }

    /// Gray level used in class PNGs.
    pub fn gray(self) -> u8 {
        match self {
            Class::Background => 0,
            Class::Field => 255,
            Class::Boundary => 128,
        }
    }

    pub fn from_gray(v: u8) -> Option<Class> {
        match v {
            0 => Some(Class::Background),
            255 => Some(Class::Field),
            128 => Some(Class::Boundary),
            _ => None,
        }
    }
}

impl ClassMask {
    /// Binary mask of the pixels carrying `class`.
    pub fn select(&self, class: Class) -> BinaryRaster {
        self.map(|c| c == class)
    }
}

/// Row-major, channel-minor real-valued tensor of shape
/// `height x width x channels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    /// Zero-sized dimensions are allowed here; they are rejected where a
    /// raster is required.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let len = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::InvalidRaster("tensor size overflows".into()))?;
        if len != data.len() {
            return Err(Error::InvalidRaster(format!(
                "{height}x{width}x{channels} tensor needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor {
            height,
            width,
            channels,
            data: vec![T::zero(); height * width * channels],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> T {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: T) {
        self.data[(row * self.width + col) * self.channels + ch] = value;
    }

    /// Channel values of pixel number `i` in row-major order.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[T] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.channels.max(1))
    }

    pub fn same_shape<U>(&self, other: &Tensor<U>) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self
                .data
                .iter()
                .map(|v| U::from(*v).expect("scalar cast"))
                .collect(),
        }
    }

    /// Checks the logit contract: every value finite.
    pub fn validate_logits(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Checks the probability contract: values in `[0, 1]` and channel
    /// sums within `tol` of one.
    pub fn validate_probabilities(&self, tol: T) -> Result<()> {
        self.validate_logits()?;
        if let Some(i) = self.data.iter().position(|&v| v < T::zero() || v > T::one()) {
            return Err(Error::InvalidProbabilities(format!(
                "value {} at index {i} outside [0, 1]",
                self.data[i]
            )));
        }
        for (i, px) in self.pixels().enumerate() {
            let sum: T = px.iter().copied().sum();
            if (sum - T::one()).abs() > tol {
                return Err(Error::InvalidProbabilities(format!(
                    "channel sum {sum} at pixel {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Edge handling for partial tiles. Only reflection is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Padding {
    #[default]
    Reflect,
}

/// Layout of fixed-size square tiles covering a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub width: usize,
    pub height: usize,
    pub tile_size: usize,
    pub columns: usize,
    pub rows: usize,
    #[serde(default)]
    pub padding: Padding,
}

impl TileGrid {
    pub fn new(width: usize, height: usize, tile_size: usize) -> Result<Self> {
        if tile_size < 2 {
            return Err(Error::Config(format!("tile size must be >= 2, got {tile_size}")));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "cannot tile a {width}x{height} raster"
            )));
        }
        Ok(TileGrid {
            width,
            height,
            tile_size,
            columns: width.div_ceil(tile_size),
            rows: height.div_ceil(tile_size),
            padding: Padding::Reflect,
        })
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.columns
    }

    /// Row-major `(row, col)` pairs.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.columns).map(move |c| (r, c)))
    }

    /// Checks the stored counts against the ceil rule.
    pub fn validate(&self) -> Result<()> {
        let expect = TileGrid::new(self.width, self.height, self.tile_size)?;
        if expect != *self {
            return Err(Error::TileMismatch(format!(
                "grid {}x{} tiles does not match {}x{} raster at tile size {}",
                self.columns, self.rows, self.width, self.height, self.tile_size
            )));
        }
        Ok(())
    }

    /// File name of a tile, `tile_<row>_<col>.<ext>`.
    pub fn tile_name(row: usize, col: usize, ext: &str) -> String {
        format!("tile_{row}_{col}.{ext}")
    }
}

/// Cuts `img` into `size x size` tiles in row-major order; partial edge
/// tiles are completed by reflection.
pub fn tile<P: Copy>(img: &Raster<P>, size: usize) -> Result<(Vec<Raster<P>>, TileGrid)> {
    let grid = TileGrid::new(img.width(), img.height(), size)?;
    let tiles = grid
        .positions()
        .map(|(r, c)| {
            let (x0, y0) = ((c * size) as isize, (r * size) as isize);
            Raster::from_fn(size, size, |x, y| {
                img.get_reflected(x0 + x as isize, y0 + y as isize)
            })
        })
        .collect();
    Ok((tiles, grid))
}

/// Reassembles tiles produced by [`tile`], discarding padding.
pub fn stitch<P: Copy + Default>(tiles: &[Raster<P>], grid: &TileGrid) -> Result<Raster<P>> {
    grid.validate()?;
    check_tile_count(tiles.len(), grid)?;
    for (i, t) in tiles.iter().enumerate() {
        if t.dims() != (grid.tile_size, grid.tile_size) {
            return Err(Error::TileMismatch(format!(
                "tile {i} is {}x{}, expected {s}x{s}",
                t.width(),
                t.height(),
                s = grid.tile_size
            )));
        }
    }
    let s = grid.tile_size;
    let mut out = Raster::filled(grid.width, grid.height, P::default());
    for ((r, c), t) in grid.positions().zip(tiles) {
        for y in 0..s.min(grid.height - r * s) {
            for x in 0..s.min(grid.width - c * s) {
                out.set(c * s + x, r * s + y, t.get(x, y));
            }
        }
    }
    Ok(out)
}

/// Tensor counterpart of [`tile`].
pub fn tile_tensor<T: Scalar>(t: &Tensor<T>, size: usize) -> Result<(Vec<Tensor<T>>, TileGrid)> {
    let grid = TileGrid::new(t.width(), t.height(), size)?;
    let ch = t.channels();
    let tiles = grid
        .positions()
        .map(|(r, c)| {
            let mut out = Tensor::zeros(size, size, ch);
            for y in 0..size {
                let sy = reflect((r * size + y) as isize, t.height());
                for x in 0..size {
                    let sx = reflect((c * size + x) as isize, t.width());
                    for k in 0..ch {
                        out.set(y, x, k, t.get(sy, sx, k));
                    }
                }
            }
            out
        })
        .collect();
    Ok((tiles, grid))
}

/// Tensor counterpart of [`stitch`].
pub fn stitch_tensor<T: Scalar>(tiles: &[Tensor<T>], grid: &TileGrid) -> Result<Tensor<T>> {
    grid.validate()?;
    check_tile_count(tiles.len(), grid)?;
    let ch = tiles[0].channels();
    for (i, t) in tiles.iter().enumerate() {
        if t.height() != grid.tile_size || t.width() != grid.tile_size || t.channels() != ch {
            return Err(Error::TileMismatch(format!(
                "tile {i} is {}, expected {s}x{s}x{ch}",
                t.shape_string(),
                s = grid.tile_size
            )));
        }
    }
    let s = grid.tile_size;
    let mut out = Tensor::zeros(grid.height, grid.width, ch);
    for ((r, c), t) in grid.positions().zip(tiles) {
        for y in 0..s.min(grid.height - r * s) {
            for x in 0..s.min(grid.width - c * s) {
                for k in 0..ch {
                    out.set(r * s + y, c * s + x, k, t.get(y, x, k));
                }
            }
        }
    }
    Ok(out)
}

fn check_tile_count(n: usize, grid: &TileGrid) -> Result<()> {
    if n != grid.tile_count() {
        return Err(Error::TileMismatch(format!(
            "expected {} tiles ({} rows x {} columns), got {n}",
            grid.tile_count(),
            grid.rows,
            grid.columns
        )));
    }
    Ok(())
}

/// Affine pixel-to-world mapping
/// `(x, y) -> (a*x + c*y + x0, b*x + d*y + y0)` plus the ground sample
/// distance in meters per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub x0: f64,
    pub y0: f64,
    pub gsd: f64,
}

impl GeoRef {
    pub fn new(a: f64, b: f64, c: f64, d: f64, x0: f64, y0: f64, gsd: f64) -> Result<Self> {
        let g = GeoRef {
            a,
            b,
            c,
            d,
            x0,
            y0,
            gsd,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn identity() -> Self {
        GeoRef {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
            x0: 0.0,
            y0: 0.0,
            gsd: 1.0,
        }
    }

    /// North-up mapping with square pixels of `gsd` meters: y grows
    /// downward in the image and upward in the world.
    pub fn north_up(gsd: f64, x0: f64, y0: f64) -> Result<Self> {
        GeoRef::new(gsd, 0.0, 0.0, -gsd, x0, y0, gsd)
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.a, self.b, self.c, self.d, self.x0, self.y0, self.gsd];
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("georeference coefficients must be finite".into()));
        }
        if self.a == 0.0 || self.d == 0.0 {
            return Err(Error::Config("georeference pixel sizes must be nonzero".into()));
        }
        if self.gsd <= 0.0 {
            return Err(Error::Config(format!("GSD must be positive, got {}", self.gsd)));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.c * y + self.x0,
            self.b * x + self.d * y + self.y0,
        )
    }
}
