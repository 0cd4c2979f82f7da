//! Vector deliverables: georeferencing, ESRI Shapefile (PolyLine),
//! GeoJSON and world-file sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::raster::{BinaryRaster, GeoRef};
use crate::skeleton::{bbox, CoordSpace, Polyline, PolylineSet, Vertex};

const SHP_FILE_CODE: i32 = 9994;
const SHP_VERSION: i32 = 1000;
const SHAPE_POLYLINE: i32 = 3;
const SHP_HEADER_LEN: usize = 100;
const DBF_ID_WIDTH: usize = 10;

/// Maps pixel-space polylines into world coordinates.
pub fn apply_georef(p: &PolylineSet, geo: &GeoRef) -> PolylineSet {
    let map = |v: &Vertex| {
        let (x, y) = geo.apply(v.x, v.y);
        Vertex::new(x, y)
    };
    PolylineSet {
        space: CoordSpace::World,
        lines: p
            .lines
            .iter()
            .filter_map(|l| {
                // an affine map with nonzero pixel sizes can still collapse
                // points when rotation terms cancel; such lines are dropped
                Polyline::new(l.vertices().iter().map(map).collect()).ok()
            })
            .collect(),
        isolated: p.isolated.iter().map(map).collect(),
    }
}

/// `.shp`, `.shx` and `.dbf` paths for a base path; any extension on the
/// base is replaced.
pub fn shapefile_paths(base: impl AsRef<Path>) -> [PathBuf; 3] {
    let base = base.as_ref();
    ["shp", "shx", "dbf"].map(|ext| base.with_extension(ext))
}

fn put_be(buf: &mut Vec<u8>, v: i32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn put_le(buf: &mut Vec<u8>, v: i32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn main_header(file_len_bytes: usize, bounds: [f64; 4]) -> Vec<u8> {
    let mut h = Vec::with_capacity(SHP_HEADER_LEN);
    put_be(&mut h, SHP_FILE_CODE);
    for _ in 0..5 {
        put_be(&mut h, 0);
    }
    put_be(&mut h, (file_len_bytes / 2) as i32);
    put_le(&mut h, SHP_VERSION);
    put_le(&mut h, SHAPE_POLYLINE);
    for v in bounds {
        put_f64(&mut h, v);
    }
    // Z and M ranges
    for _ in 0..4 {
        put_f64(&mut h, 0.0);
    }
    h
}

/// Encodes the three shapefile members in memory: one single-part
/// PolyLine record per polyline, in order.
pub fn encode_shapefile(p: &PolylineSet) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let bounds = if p.lines.is_empty() {
        [0.0; 4]
    } else {
        bbox(p.lines.iter().flat_map(|l| l.vertices()))
    };

    let mut records = Vec::new();
    let mut index = Vec::new();
    for (i, line) in p.lines.iter().enumerate() {
        let n = line.vertices().len();
        let content_len = 44 + 4 + 16 * n;
        index.push(((SHP_HEADER_LEN + records.len()) / 2, content_len / 2));
        put_be(&mut records, i as i32 + 1);
        put_be(&mut records, (content_len / 2) as i32);
        put_le(&mut records, SHAPE_POLYLINE);
        for v in line.bbox() {
            put_f64(&mut records, v);
        }
        put_le(&mut records, 1);
        put_le(&mut records, n as i32);
        put_le(&mut records, 0);
        for v in line.vertices() {
            put_f64(&mut records, v.x);
            put_f64(&mut records, v.y);
        }
    }

    let mut shp = main_header(SHP_HEADER_LEN + records.len(), bounds);
    shp.extend_from_slice(&records);

    let mut shx = main_header(SHP_HEADER_LEN + 8 * index.len(), bounds);
    for (offset, len) in index {
        put_be(&mut shx, offset as i32);
        put_be(&mut shx, len as i32);
    }

    (shp, shx, encode_dbf(p.lines.len()))
}

/// dBASE III table with a single numeric `ID` column numbered from 1.
fn encode_dbf(rows: usize) -> Vec<u8> {
    let header_len = 32 + 32 + 1;
    let record_len = 1 + DBF_ID_WIDTH;
    let mut d = Vec::with_capacity(header_len + rows * record_len + 1);
    d.push(0x03);
    // fixed last-update date (2000-01-01) keeps output reproducible
    d.extend_from_slice(&[100, 1, 1]);
    d.extend_from_slice(&(rows as u32).to_le_bytes());
    d.extend_from_slice(&(header_len as u16).to_le_bytes());
    d.extend_from_slice(&(record_len as u16).to_le_bytes());
    d.extend_from_slice(&[0; 20]);

    let mut name = [0u8; 11];
    name[..2].copy_from_slice(b"ID");
    d.extend_from_slice(&name);
    d.push(b'N');
    d.extend_from_slice(&[0; 4]);
    d.push(DBF_ID_WIDTH as u8);
    d.push(0);
    d.extend_from_slice(&[0; 14]);
    d.push(0x0D);

    for i in 0..rows {
        d.push(b' ');
        d.extend_from_slice(format!("{:>width$}", i + 1, width = DBF_ID_WIDTH).as_bytes());
    }
    d.push(0x1A);
    d
}

pub fn write_shapefile(p: &PolylineSet, base: impl AsRef<Path>) -> Result<[PathBuf; 3]> {
    let paths = shapefile_paths(base);
    let (shp, shx, dbf) = encode_shapefile(p);
    for (path, bytes) in paths.iter().zip([shp, shx, dbf]) {
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(paths)
}

/// Reads the `.shp` member of a PolyLine shapefile. Multi-part records
/// yield one polyline per part.
pub fn read_shapefile(base: impl AsRef<Path>) -> Result<Vec<Polyline>> {
    let [shp_path, ..] = shapefile_paths(base);
    let bytes = fs::read(&shp_path).map_err(|e| Error::io(&shp_path, e))?;
    decode_shp(&bytes).map_err(|detail| Error::Shapefile {
        path: shp_path,
        detail,
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| format!("unexpected end of file at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn be(&mut self) -> Result<i32, String> {
        Ok(i32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn le(&mut self) -> Result<i32, String> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_shp(bytes: &[u8]) -> Result<Vec<Polyline>, String> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let code = c.be()?;
    if code != SHP_FILE_CODE {
        return Err(format!("file code {code}, expected {SHP_FILE_CODE}"));
    }
    c.take(20)?;
    let file_len = c.be()? as i64 * 2;
    if file_len != bytes.len() as i64 {
        return Err(format!(
            "header length {file_len} bytes, file has {}",
            bytes.len()
        ));
    }
    let version = c.le()?;
    if version != SHP_VERSION {
        return Err(format!("version {version}, expected {SHP_VERSION}"));
    }
    let shape_type = c.le()?;
    if shape_type != SHAPE_POLYLINE {
        return Err(format!("shape type {shape_type}, expected {SHAPE_POLYLINE}"));
    }
    c.take(64)?;

    let mut lines = Vec::new();
    let mut expected_number = 1;
    while c.pos < bytes.len() {
        let number = c.be()?;
        if number != expected_number {
            return Err(format!("record number {number}, expected {expected_number}"));
        }
        expected_number += 1;
        let content_len = c.be()? as usize * 2;
        let start = c.pos;
        let kind = c.le()?;
        if kind == 0 {
            // null shape
            c.pos = start + content_len;
            continue;
        }
        if kind != SHAPE_POLYLINE {
            return Err(format!("record {number} has shape type {kind}"));
        }
        for _ in 0..4 {
            c.f64()?;
        }
        let parts = c.le()?;
        let points = c.le()?;
        if parts < 1 || points < 0 {
            return Err(format!("record {number}: {parts} parts, {points} points"));
        }
        let (parts, points) = (parts as usize, points as usize);
        if content_len != 44 + 4 * parts + 16 * points {
            return Err(format!("record {number}: content length {content_len} inconsistent"));
        }
        let mut starts = Vec::with_capacity(parts);
        for _ in 0..parts {
            starts.push(c.le()? as usize);
        }
        let mut vs = Vec::with_capacity(points);
        for _ in 0..points {
            let x = c.f64()?;
            let y = c.f64()?;
            vs.push(Vertex::new(x, y));
        }
        starts.push(points);
        for w in starts.windows(2) {
            if w[0] > w[1] || w[1] > points {
                return Err(format!("record {number}: bad part index {}", w[0]));
            }
            let line = Polyline::new(vs[w[0]..w[1]].to_vec())
                .map_err(|e| format!("record {number}: {e}"))?;
            lines.push(line);
        }
    }
    Ok(lines)
}

/// FeatureCollection of LineString features carrying an `id` property.
pub fn to_geojson(p: &PolylineSet) -> Value {
    let features: Vec<Value> = p
        .lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let coords: Vec<[f64; 2]> = l.vertices().iter().map(|v| [v.x, v.y]).collect();
            json!({
                "type": "Feature",
                "properties": { "id": i + 1 },
                "geometry": { "type": "LineString", "coordinates": coords },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_geojson(p: &PolylineSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&to_geojson(p)).expect("json value serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a six-line world file (A, B, C, D, X0, Y0). The ground sample
/// distance defaults to the length of the pixel's x step.
pub fn read_world_file(path: impl AsRef<Path>, gsd: Option<f64>) -> Result<GeoRef> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::WorldFile {
        path: path.to_path_buf(),
        detail,
    };
    let values = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().map_err(|e| bad(format!("{l:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let [a, b, c, d, x0, y0] = values[..] else {
        return Err(bad(format!("expected 6 values, found {}", values.len())));
    };
    GeoRef::new(a, b, c, d, x0, y0, gsd.unwrap_or_else(|| a.hypot(b)))
        .map_err(|e| bad(e.to_string()))
}

pub fn write_world_file(geo: &GeoRef, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text: String = [geo.a, geo.b, geo.c, geo.d, geo.x0, geo.y0]
        .iter()
        .map(|v| format!("{v}\n"))
        .collect();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// 1-px boundary raster as an 8-bit PNG (foreground 255).
pub fn write_boundary_png(sk: &BinaryRaster, path: impl AsRef<Path>) -> Result<()> {
    crate::io::save_binary_png(sk, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(pts: &[(f64, f64)]) -> Polyline {
        Polyline::new(pts.iter().map(|&(x, y)| Vertex::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn empty_set_header_only() {
        let (shp, shx, dbf) = encode_shapefile(&PolylineSet::default());
        assert_eq!(shp.len(), 100);
        assert_eq!(&shp[..4], &9994i32.to_be_bytes());
        assert_eq!(&shp[24..28], &50i32.to_be_bytes());
        assert_eq!(&shp[28..32], &1000i32.to_le_bytes());
        assert_eq!(&shp[32..36], &3i32.to_le_bytes());
        assert_eq!(shx.len(), 100);
        assert_eq!(dbf.len(), 32 + 32 + 1 + 1);
        assert!(decode_shp(&shp).unwrap().is_empty());
    }

    #[test]
    fn single_segment_record() {
        let set = PolylineSet {
            lines: vec![line(&[(1.0, 2.0), (3.0, -4.0)])],
            ..Default::default()
        };
        let (shp, shx, dbf) = encode_shapefile(&set);
        let rec = &shp[100..];
        assert_eq!(&rec[..4], &1i32.to_be_bytes());
        assert_eq!(&rec[4..8], &((44 + 4 + 32) / 2i32).to_be_bytes());
        assert_eq!(&rec[8..12], &3i32.to_le_bytes());
        assert_eq!(&rec[44..48], &1i32.to_le_bytes());
        assert_eq!(&rec[48..52], &2i32.to_le_bytes());
        assert_eq!(shp.len(), 100 + 8 + 80);
        // shx entry: offset 50 words, length 40 words
        assert_eq!(&shx[100..104], &50i32.to_be_bytes());
        assert_eq!(&shx[104..108], &40i32.to_be_bytes());
        assert_eq!(&dbf[4..8], &1u32.to_le_bytes());
        assert_eq!(&dbf[dbf.len() - 12..], b"          1\x1a");
        // bounding box
        assert_eq!(&shp[36..44], &1.0f64.to_le_bytes());
        assert_eq!(&shp[44..52], &(-4.0f64).to_le_bytes());
        assert_eq!(decode_shp(&shp).unwrap(), set.lines);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(decode_shp(&[0; 10]).is_err());
        let (mut shp, _, _) = encode_shapefile(&PolylineSet {
            lines: vec![line(&[(0.0, 0.0), (1.0, 1.0)])],
            ..Default::default()
        });
        shp.truncate(shp.len() - 8);
        assert!(decode_shp(&shp).is_err());
    }

    #[test]
    fn georef_examples() {
        let set = PolylineSet {
            lines: vec![line(&[(10.5, 4.5), (11.5, 4.5)])],
            ..Default::default()
        };
        let same = apply_georef(&set, &GeoRef::identity());
        assert_eq!(same.lines, set.lines);
        assert_eq!(same.space, CoordSpace::World);

        let g = GeoRef::north_up(0.72, 0.0, 0.0).unwrap();
        let v = apply_georef(&set, &g).lines[0].vertices()[0];
        assert!((v.x - 7.56).abs() < 1e-12 && (v.y + 3.24).abs() < 1e-12);

        let t = GeoRef::new(1.0, 0.0, 0.0, 1.0, 500.0, -20.0, 1.0).unwrap();
        let v = apply_georef(&set, &t).lines[0].vertices()[1];
        assert_eq!((v.x, v.y), (511.5, -15.5));
    }

    #[test]
    fn world_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("img.pgw");
        let g = GeoRef::new(0.56, 0.0, 0.0, -0.56, 401234.5, 3812345.25, 0.56).unwrap();
        write_world_file(&g, &p).unwrap();
        assert_eq!(read_world_file(&p, None).unwrap(), g);

        fs::write(&p, "1\n0\n0\n").unwrap();
        assert!(matches!(read_world_file(&p, None), Err(Error::WorldFile { .. })));
    }

    #[test]
    fn geojson_shape() {
        let set = PolylineSet {
            lines: vec![line(&[(0.0, 0.0), (1.0, 0.5)])],
            ..Default::default()
        };
        let v = to_geojson(&set);
        assert_eq!(v["type"], "FeatureCollection");
        assert_eq!(v["features"][0]["properties"]["id"], 1);
        assert_eq!(v["features"][0]["geometry"]["type"], "LineString");
        assert_eq!(v["features"][0]["geometry"]["coordinates"][1][1], 0.5);
    }
}
