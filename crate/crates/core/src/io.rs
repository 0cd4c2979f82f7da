//! PNG codecs for imagery and masks, and the CBT tensor interchange format.
//!
//! CBT layout: the ASCII magic `CBT1`, then height, width and channels as
//! little-endian `u32`, then `height * width * channels` little-endian
//! IEEE-754 `f32` values in row-major order with the channel index
//! varying fastest.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryRaster, Class, ClassMask, GrayRaster, LabelRaster, Raster, Tensor};

pub const CBT_MAGIC: [u8; 4] = *b"CBT1";
const CBT_HEADER_LEN: usize = 16;

/// Decoded 8-bit image with one to four interleaved channels.
struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<Decoded> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(bytes.as_slice());
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_error(path, e))?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if color != png::ColorType::Indexed && depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: depth as u8,
        });
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| png_error(path, e))?;
    let channels = match frame.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("color type {other:?}"),
            })
        }
    };
    if frame.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            depth: frame.bit_depth as u8,
        });
    }
    let (width, height) = (frame.width as usize, frame.height as usize);
    let row = width * channels;
    let mut data = Vec::with_capacity(row * height);
    for y in 0..height {
        let start = y * frame.line_size;
        data.extend_from_slice(&buf[start..start + row]);
    }
    Ok(Decoded {
        width,
        height,
        channels,
        data,
    })
}

fn png_error(path: &Path, e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::CorruptPng {
                path: path.to_path_buf(),
                detail: "unexpected end of stream".into(),
            }
        }
        png::DecodingError::IoError(io) => Error::io(path, io),
        other => Error::CorruptPng {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

/// ITU-R 601 luma, rounded half up.
#[inline]
pub fn luminance(r: u8, g: u8, b: u8) -> u8 {
    ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
}

/// Loads an 8-bit grayscale, RGB or paletted PNG as intensities. Color is
/// reduced to luminance and alpha is ignored.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayRaster> {
    let d = decode_png(path.as_ref())?;
    let data = match d.channels {
        1 | 2 => d.data.chunks_exact(d.channels).map(|p| p[0]).collect(),
        _ => d
            .data
            .chunks_exact(d.channels)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect(),
    };
    Raster::new(d.width, d.height, data)
}

/// Loads an instance annotation: each distinct color is one field, black
/// is background. Labels are numbered from 1 in order of first appearance
/// in row-major scan.
pub fn load_instances(path: impl AsRef<Path>) -> Result<LabelRaster> {
    let d = decode_png(path.as_ref())?;
    let mut labels: HashMap<[u8; 3], u32> = HashMap::new();
    let data = d
        .data
        .chunks_exact(d.channels)
        .map(|p| {
            let rgb = match d.channels {
                1 | 2 => [p[0]; 3],
                _ => [p[0], p[1], p[2]],
            };
            if rgb == [0, 0, 0] {
                return 0;
            }
            let next = labels.len() as u32 + 1;
            *labels.entry(rgb).or_insert(next)
        })
        .collect();
    Raster::new(d.width, d.height, data)
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let encode_err = |e: png::EncodingError| match e {
        png::EncodingError::IoError(io) => Error::io(path, io),
        other => Error::InvalidRaster(other.to_string()),
    };
    let mut writer = enc.write_header().map_err(encode_err)?;
    writer.write_image_data(data).map_err(encode_err)?;
    writer.finish().map_err(encode_err)
}

pub fn save_gray(img: &GrayRaster, path: impl AsRef<Path>) -> Result<()> {
    write_png(
        path.as_ref(),
        img.width(),
        img.height(),
        png::ColorType::Grayscale,
        img.data(),
    )
}

/// Writes interleaved 8-bit RGB.
pub fn save_rgb(width: usize, height: usize, rgb: &[u8], path: impl AsRef<Path>) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(Error::InvalidRaster(format!(
            "{width}x{height} RGB image needs {} bytes, got {}",
            width * height * 3,
            rgb.len()
        )));
    }
    write_png(path.as_ref(), width, height, png::ColorType::Rgb, rgb)
}

/// Background 0, boundary 128, field 255.
pub fn save_class_png(mask: &ClassMask, path: impl AsRef<Path>) -> Result<()> {
    save_gray(&mask.map(Class::gray), path)
}

/// Inverse of [`save_class_png`]; any level other than 0, 128, 255 is
/// rejected.
pub fn load_class_png(path: impl AsRef<Path>) -> Result<ClassMask> {
    let img = load_gray(path)?;
    class_mask_from_gray(&img)
}

pub fn class_mask_from_gray(img: &GrayRaster) -> Result<ClassMask> {
    let mut data = Vec::with_capacity(img.data().len());
    for (i, &v) in img.data().iter().enumerate() {
        match Class::from_gray(v) {
            Some(c) => data.push(c),
            None => {
                return Err(Error::InvalidClassValue {
                    x: i % img.width(),
                    y: i / img.width(),
                    value: v,
                })
            }
        }
    }
    Raster::new(img.width(), img.height(), data)
}

/// Foreground 255, background 0.
pub fn save_binary_png(b: &BinaryRaster, path: impl AsRef<Path>) -> Result<()> {
    save_gray(&b.map(|v| if v { 255 } else { 0 }), path)
}

/// Any nonzero level is foreground.
pub fn load_binary_png(path: impl AsRef<Path>) -> Result<BinaryRaster> {
    Ok(load_gray(path)?.map(|v| v != 0))
}

pub fn encode_cbt(t: &Tensor<f32>) -> Result<Vec<u8>> {
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| {
            Error::InvalidRaster(format!("tensor {} does not fit CBT dimensions", t.shape_string()))
        })
    };
    let (h, w, c) = (dim(t.height())?, dim(t.width())?, dim(t.channels())?);
    let mut out = Vec::with_capacity(CBT_HEADER_LEN + 4 * t.data().len());
    out.extend_from_slice(&CBT_MAGIC);
    for v in [h, w, c] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_cbt(bytes: &[u8]) -> Result<Tensor<f32>> {
    if bytes.len() < CBT_HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != CBT_MAGIC {
            return Err(Error::BadMagic {
                found: bytes[..4].try_into().expect("4 bytes"),
            });
        }
        return Err(Error::Truncated {
            expected: CBT_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != CBT_MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
    let (h, w, c) = (word(0), word(1), word(2));
    let payload = (h as usize)
        .checked_mul(w as usize)
        .and_then(|n| n.checked_mul(c as usize))
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(CBT_HEADER_LEN))
        .ok_or(Error::DimensionOverflow {
            height: h,
            width: w,
            channels: c,
        })?;
    if bytes.len() < payload {
        return Err(Error::Truncated {
            expected: payload,
            found: bytes.len(),
        });
    }
    if bytes.len() > payload {
        return Err(Error::TrailingData {
            extra: bytes.len() - payload,
        });
    }
    let data = bytes[CBT_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    Tensor::new(h as usize, w as usize, c as usize, data)
}

pub fn write_cbt(t: &Tensor<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_cbt(t)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_cbt(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cbt(&bytes)
}
