//! Zhang-Suen thinning and skeleton-to-polyline tracing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::BinaryRaster;

/// Neighbor offsets `P2..P9`: clockwise starting north.
const NEIGHBORS: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

/// Foreground flags of `P2..P9`; pixels beyond the edge are background.
#[inline]
fn ring(b: &BinaryRaster, x: usize, y: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (k, (dx, dy)) in NEIGHBORS.iter().enumerate() {
        n[k] = b.get_signed(x as isize + dx, y as isize + dy) == Some(true);
    }
    n
}

/// Whether the pixel is removable in the given subpass.
#[inline]
fn deletable(n: &[bool; 8], first: bool) -> bool {
    let count = n.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&count) {
        return false;
    }
    let transitions = (0..8).filter(|&k| !n[k] && n[(k + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

/// Zhang-Suen thinning: alternate the two subpasses until neither removes
/// a pixel. Each subpass marks against the current raster and deletes
/// afterwards.
pub fn thin(b: &BinaryRaster) -> BinaryRaster {
    let mut cur = b.clone();
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for first in [true, false] {
            marked.clear();
            for y in 0..cur.height() {
                for x in 0..cur.width() {
                    if cur.get(x, y) && deletable(&ring(&cur, x, y), first) {
                        marked.push((x, y));
                    }
                }
            }
            changed |= !marked.is_empty();
            for &(x, y) in &marked {
                cur.set(x, y, false);
            }
        }
        if !changed {
            return cur;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoordSpace {
    #[default]
    Pixel,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
}

impl Vertex {
    pub fn new(x: f64, y: f64) -> Self {
        Vertex { x, y }
    }

    /// Center of pixel `(col, row)`.
    pub fn pixel_center(col: usize, row: usize) -> Self {
        Vertex::new(col as f64 + 0.5, row as f64 + 0.5)
    }
}

/// Ordered vertex chain with at least two vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<Vertex>,
}

impl Polyline {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidRaster(format!(
                "polyline needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRaster(
                "polyline has repeated consecutive vertices".into(),
            ));
        }
        Ok(Polyline { vertices })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.vertices.first() == self.vertices.last()
    }

    pub fn bbox(&self) -> [f64; 4] {
        bbox(self.vertices.iter())
    }
}

pub(crate) fn bbox<'a>(vs: impl Iterator<Item = &'a Vertex>) -> [f64; 4] {
    vs.fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |[x0, y0, x1, y1], v| [x0.min(v.x), y0.min(v.y), x1.max(v.x), y1.max(v.y)],
    )
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolylineSet {
    pub space: CoordSpace,
    pub lines: Vec<Polyline>,
    /// Skeleton pixels with no neighbors; a single point cannot form a
    /// polyline.
    #[serde(default)]
    pub isolated: Vec<Vertex>,
}

impl PolylineSet {
    pub fn vertex_count(&self) -> usize {
        self.lines.iter().map(|l| l.vertices.len()).sum()
    }
}

/// Neighbors of `(x, y)` under mixed adjacency: orthogonal neighbors
/// always, diagonal ones only when no foreground pixel is orthogonally
/// adjacent to both. Connectivity equals 8-connectivity but staircases
/// and junction corners do not form spurious triangles. Returned in
/// clockwise order from north.
fn links(sk: &BinaryRaster, x: usize, y: usize) -> Vec<(usize, usize)> {
    let on = |dx: isize, dy: isize| sk.get_signed(x as isize + dx, y as isize + dy) == Some(true);
    NEIGHBORS
        .iter()
        .filter(|&&(dx, dy)| on(dx, dy) && (dx == 0 || dy == 0 || (!on(dx, 0) && !on(0, dy))))
        .map(|&(dx, dy)| ((x as isize + dx) as usize, (y as isize + dy) as usize))
        .collect()
}

/// Traces a thin skeleton into polylines between nodes (pixels with other
/// than two links). Components that are pure cycles start and end at
/// their first pixel in scan order. Vertices sit at pixel centers.
pub fn trace_polylines(sk: &BinaryRaster) -> Result<PolylineSet> {
    let thinned = thin(sk);
    if thinned != *sk {
        return Err(Error::NotThin(sk.count_ones() - thinned.count_ones()));
    }
    Ok(trace_unchecked(sk))
}

fn trace_unchecked(sk: &BinaryRaster) -> PolylineSet {
    let (w, h) = sk.dims();
    let idx = |(x, y): (usize, usize)| y * w + x;
    let adj: Vec<Vec<(usize, usize)>> = (0..w * h)
        .map(|i| {
            if sk.data()[i] {
                links(sk, i % w, i / w)
            } else {
                Vec::new()
            }
        })
        .collect();
    let mut used: Vec<Vec<bool>> = adj.iter().map(|a| vec![false; a.len()]).collect();
    let mark = |used: &mut Vec<Vec<bool>>, from: (usize, usize), to: (usize, usize)| {
        let (i, j) = (idx(from), idx(to));
        let k = adj[i].iter().position(|&p| p == to).expect("linked");
        used[i][k] = true;
        let k = adj[j].iter().position(|&p| p == from).expect("symmetric link");
        used[j][k] = true;
    };

    let mut set = PolylineSet::default();
    let is_node = |p: (usize, usize)| adj[idx(p)].len() != 2;
    let walk = |used: &mut Vec<Vec<bool>>, start: (usize, usize), first: (usize, usize)| {
        let mut chain = vec![start, first];
        mark(used, start, first);
        let mut cur = first;
        while !is_node(cur) && cur != start {
            let i = idx(cur);
            let Some(k) = (0..adj[i].len()).find(|&k| !used[i][k]) else {
                break;
            };
            let next = adj[i][k];
            mark(used, cur, next);
            chain.push(next);
            cur = next;
        }
        chain
    };

    let mut chains = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = (x, y);
            if !sk.get(x, y) || !is_node(p) {
                continue;
            }
            if adj[idx(p)].is_empty() {
                set.isolated.push(Vertex::pixel_center(x, y));
                continue;
            }
            for k in 0..adj[idx(p)].len() {
                if !used[idx(p)][k] {
                    let first = adj[idx(p)][k];
                    chains.push(walk(&mut used, p, first));
                }
            }
        }
    }
    // what remains are cycles made only of two-link pixels
    for y in 0..h {
        for x in 0..w {
            let i = idx((x, y));
            if let Some(k) = (0..adj[i].len()).find(|&k| !used[i][k]) {
                let first = adj[i][k];
                chains.push(walk(&mut used, (x, y), first));
            }
        }
    }
    set.lines = chains
        .into_iter()
        .map(|c| Polyline {
            vertices: c.into_iter().map(|(x, y)| Vertex::pixel_center(x, y)).collect(),
        })
        .collect();
    set
}
