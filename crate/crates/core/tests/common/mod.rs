//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code path it is used to check.

#![allow(dead_code)]

use parcel_trace::losses::{loss_eval, softmax, LossConfig};
use parcel_trace::{BinaryRaster, Class, ClassMask, LabelRaster, OneHotTarget, Raster, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-pixel scan: erode by checking all in-bounds 8-neighbors, then give
/// every non-field pixel its Chebyshev distance to the nearest field pixel
/// by exhaustive search.
pub fn semantic_mask_oracle(inst: &LabelRaster, buffer: usize) -> ClassMask {
    let (w, h) = (inst.width() as i64, inst.height() as i64);
    let label = |x: i64, y: i64| inst.get(x as usize, y as usize);
    let mut field = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let l = label(x, y);
            if l == 0 {
                continue;
            }
            let mut keep = true;
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && label(nx, ny) != l {
                        keep = false;
                    }
                }
            }
            field[(y * w + x) as usize] = keep;
        }
    }
    let fields: Vec<(i64, i64)> = (0..w * h)
        .filter(|&i| field[i as usize])
        .map(|i| (i % w, i / w))
        .collect();
    Raster::from_fn(w as usize, h as usize, |x, y| {
        let (x, y) = (x as i64, y as i64);
        if field[(y * w + x) as usize] {
            return Class::Field;
        }
        let d = fields
            .iter()
            .map(|&(fx, fy)| (fx - x).abs().max((fy - y).abs()))
            .min();
        match d {
            Some(d) if d as usize <= buffer => Class::Boundary,
            _ => Class::Background,
        }
    })
}

/// Random instance raster: a few labelled rectangles painted over each
/// other, plus salt noise labels.
pub fn random_instances(r: &mut ChaCha8Rng, max_side: usize) -> LabelRaster {
    let w = r.gen_range(1..=max_side);
    let h = r.gen_range(1..=max_side);
    let mut inst = LabelRaster::filled(w, h, 0);
    for _ in 0..r.gen_range(0..6) {
        let l = r.gen_range(1..5u32);
        let (x0, y0) = (r.gen_range(0..w), r.gen_range(0..h));
        let (x1, y1) = (r.gen_range(x0..w), r.gen_range(y0..h));
        for y in y0..=y1 {
            for x in x0..=x1 {
                inst.set(x, y, l);
            }
        }
    }
    for _ in 0..r.gen_range(0..4) {
        let (x, y) = (r.gen_range(0..w), r.gen_range(0..h));
        inst.set(x, y, r.gen_range(0..7));
    }
    inst
}

/// Nearest reference pixel by exhaustive search over the square window
/// that can contain any pixel within `bf/2`, compared in squared distance
/// against `(bf/2)^2`.
pub fn metric_oracle(detected: &BinaryRaster, reference: &BinaryRaster, bf: u32) -> (u64, u64, u64) {
    let (w, h) = (reference.width() as i64, reference.height() as i64);
    let reach = (bf as i64 + 1) / 2;
    let radius_sq = (bf as f64 / 2.0).powi(2);
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for y in 0..h {
        for x in 0..w {
            let mut best = f64::INFINITY;
            for ry in (y - reach).max(0)..=(y + reach).min(h - 1) {
                for rx in (x - reach).max(0)..=(x + reach).min(w - 1) {
                    if reference.get(rx as usize, ry as usize) {
                        best = best.min(((rx - x).pow(2) + (ry - y).pow(2)) as f64);
                    }
                }
            }
            match (detected.get(x as usize, y as usize), best <= radius_sq) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    (tp, fp, fn_)
}

pub fn random_binary(r: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryRaster {
    Raster::from_fn(w, h, |_, _| r.gen_bool(density))
}

/// Blobs: unions of random filled discs and rectangles no thinner than
/// three pixels.
pub fn random_blobs(r: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryRaster {
    let mut b = BinaryRaster::filled(w, h, false);
    for _ in 0..r.gen_range(1..=5) {
        if r.gen_bool(0.5) {
            let rad = r.gen_range(2..=7) as i64;
            let (cx, cy) = (r.gen_range(0..w) as i64, r.gen_range(0..h) as i64);
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    if (x - cx).pow(2) + (y - cy).pow(2) <= rad * rad {
                        b.set(x as usize, y as usize, true);
                    }
                }
            }
        } else {
            let (bw, bh) = (r.gen_range(3..=16), r.gen_range(3..=16));
            let (x0, y0) = (r.gen_range(0..w - 3), r.gen_range(0..h - 3));
            for y in y0..(y0 + bh).min(h) {
                for x in x0..(x0 + bw).min(w) {
                    b.set(x, y, true);
                }
            }
        }
    }
    b
}

/// Straightforward Zhang-Suen over a zero-padded byte grid.
pub fn reference_zhang_suen(b: &BinaryRaster) -> BinaryRaster {
    let (w, h) = (b.width() + 2, b.height() + 2);
    let mut g = vec![vec![0u8; w]; h];
    for y in 0..b.height() {
        for x in 0..b.width() {
            g[y + 1][x + 1] = b.get(x, y) as u8;
        }
    }
    loop {
        let mut changed = false;
        for step in 0..2 {
            let mut kill = Vec::new();
            for r in 1..h - 1 {
                for c in 1..w - 1 {
                    if g[r][c] == 0 {
                        continue;
                    }
                    let p = [
                        g[r - 1][c],
                        g[r - 1][c + 1],
                        g[r][c + 1],
                        g[r + 1][c + 1],
                        g[r + 1][c],
                        g[r + 1][c - 1],
                        g[r][c - 1],
                        g[r - 1][c - 1],
                    ];
                    let bsum: u8 = p.iter().sum();
                    let a = (0..8).filter(|&k| p[k] == 0 && p[(k + 1) % 8] == 1).count();
                    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
                    let cond = if step == 0 {
                        p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0
                    } else {
                        p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0
                    };
                    if (2..=6).contains(&bsum) && a == 1 && cond {
                        kill.push((r, c));
                    }
                }
            }
            changed |= !kill.is_empty();
            for (r, c) in kill {
                g[r][c] = 0;
            }
        }
        if !changed {
            break;
        }
    }
    Raster::from_fn(b.width(), b.height(), |x, y| g[y + 1][x + 1] == 1)
}

pub fn random_logits(r: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor<f64> {
    let data = (0..h * w * 3).map(|_| r.gen_range(-3.0..3.0)).collect();
    Tensor::new(h, w, 3, data).unwrap()
}

pub fn random_target(r: &mut ChaCha8Rng, h: usize, w: usize) -> OneHotTarget {
    OneHotTarget::new(h, w, 3, (0..h * w).map(|_| r.gen_range(0..3u8)).collect()).unwrap()
}

/// Central differences of the loss with respect to every logit.
pub fn numeric_gradient(
    logits: &Tensor<f64>,
    g: &OneHotTarget,
    cfg: &LossConfig<f64>,
    step: f64,
) -> Vec<f64> {
    let f = |t: &Tensor<f64>| loss_eval(&softmax(t).unwrap(), g, cfg).unwrap();
    (0..logits.data().len())
        .map(|i| {
            let mut plus = logits.clone();
            plus.data_mut()[i] += step;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= step;
            (f(&plus) - f(&minus)) / (2.0 * step)
        })
        .collect()
}

pub fn count8(b: &BinaryRaster) -> usize {
    // union-find over 8-neighbors, independent of the flood fill in the crate
    let (w, h) = b.dims();
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for y in 0..h {
        for x in 0..w {
            if !b.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && (nx as usize) < w && (ny as usize) < h && b.get(nx as usize, ny as usize) {
                    let a = find(&mut parent, y * w + x);
                    let c = find(&mut parent, ny as usize * w + nx as usize);
                    parent[a] = c;
                }
            }
        }
    }
    (0..w * h)
        .filter(|&i| b.data()[i] && find(&mut parent, i) == i)
        .count()
}
