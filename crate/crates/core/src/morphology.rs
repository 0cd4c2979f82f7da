//! Binary morphology with square structuring elements. Pixels outside the
//! raster are ignored: they neither contribute to a dilation nor veto an
//! erosion.

use crate::raster::BinaryRaster;

/// Dilation by the `(2r+1) x (2r+1)` square, i.e. every pixel within
/// Chebyshev distance `r` of a set pixel.
pub fn dilate_square(b: &BinaryRaster, r: usize) -> BinaryRaster {
    if r == 0 {
        return b.clone();
    }
    let rows = sweep(b, r, true, Axis::X);
    sweep(&rows, r, true, Axis::Y)
}

/// Erosion by the `(2r+1) x (2r+1)` square.
pub fn erode_square(b: &BinaryRaster, r: usize) -> BinaryRaster {
    if r == 0 {
        return b.clone();
    }
    let rows = sweep(b, r, false, Axis::X);
    sweep(&rows, r, false, Axis::Y)
}

/// Closing (dilation then erosion) by the 3x3 square, computed as if the
/// raster sat in an unbounded empty plane: the image is padded by one empty
/// pixel first, so a dilation that spills past the edge can still erode the
/// edge pixels back. Extensive: the input is always a subset of the output.
pub fn close3(b: &BinaryRaster) -> BinaryRaster {
    let (w, h) = b.dims();
    let padded = BinaryRaster::from_fn(w + 2, h + 2, |x, y| {
        x >= 1 && y >= 1 && x <= w && y <= h && b.get(x - 1, y - 1)
    });
    let closed = erode_square(&dilate_square(&padded, 1), 1);
    BinaryRaster::from_fn(w, h, |x, y| closed.get(x + 1, y + 1))
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// 1-D running window along one axis. `any` selects OR (dilation) versus
/// AND over the in-bounds part of the window (erosion).
fn sweep(b: &BinaryRaster, r: usize, any: bool, axis: Axis) -> BinaryRaster {
    let (w, h) = b.dims();
    let (len, lines) = match axis {
        Axis::X => (w, h),
        Axis::Y => (h, w),
    };
    let at = |line: usize, i: usize| match axis {
        Axis::X => b.get(i, line),
        Axis::Y => b.get(line, i),
    };
    let mut out = b.clone();
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + at(line, i) as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(len);
            let ones = prefix[hi] - prefix[lo];
            let v = if any { ones > 0 } else { ones == hi - lo };
            match axis {
                Axis::X => out.set(i, line, v),
                Axis::Y => out.set(line, i, v),
            }
        }
    }
    out
}

/// Number of 8-connected foreground components.
pub fn count_components8(b: &BinaryRaster) -> usize {
    let (w, h) = b.dims();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..w * h {
        if !b.data()[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(true) = b.get_signed(x + dx, y + dy) {
                        let j = (y + dy) as usize * w + (x + dx) as usize;
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    count
}
