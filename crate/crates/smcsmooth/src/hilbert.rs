//! Hilbert-curve ordering of point clouds in low dimension.
//!
//! Coordinates are min-max scaled per axis onto a `2^16` grid and mapped to
//! a Hilbert index with Skilling's transposition algorithm. Dimensions 1
//! through 8 are supported (`8 * 16 = 128` index bits). Ties are broken by
//! the original position, so duplicated points stay adjacent.

use crate::error::{Result, SmcError};

/// Bits per axis of the scaling grid.
pub const GRID_BITS: u32 = 16;

const MAX_DIM: usize = 8;

/// Gray-code Hilbert index of one grid cell (Skilling, "Programming the
/// Hilbert curve").
fn hilbert_index(coords: &[u32], bits: u32) -> u128 {
    let d = coords.len();
    let mut x = [0u32; MAX_DIM];
    x[..d].copy_from_slice(coords);

    // Inverse undo of the excess work.
    let m = 1u32 << (bits - 1);
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..d {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    // Gray encode.
    for i in 1..d {
        x[i] ^= x[i - 1];
    }
    let mut t = 0u32;
    q = m;
    while q > 1 {
        if x[d - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut().take(d) {
        *xi ^= t;
    }

    // Interleave bits, most significant first: the transposed form holds bit
    // j of axis i at position (bits-1-j)*d + i of the index.
    let mut index: u128 = 0;
    for j in (0..bits).rev() {
        for xi in x.iter().take(d) {
            index = (index << 1) | u128::from((xi >> j) & 1);
        }
    }
    index
}

/// Scale points to the grid and return each point's Hilbert index.
fn hilbert_keys(points: &[&[f64]], dim: usize) -> Result<Vec<u128>> {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points {
        for k in 0..dim {
            let v = p[k];
            if !v.is_finite() {
                return Err(SmcError::NonFinite {
                    context: "hilbert sort coordinates".into(),
                });
            }
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let max_cell = f64::from((1u32 << GRID_BITS) - 1);
    let scale: Vec<f64> = (0..dim)
        .map(|k| {
            let range = hi[k] - lo[k];
            if range > 0.0 { max_cell / range } else { 0.0 }
        })
        .collect();
    let mut grid = vec![0u32; dim];
    Ok(points
        .iter()
        .map(|p| {
            for k in 0..dim {
                grid[k] = ((p[k] - lo[k]) * scale[k]).round() as u32;
            }
            hilbert_index(&grid, GRID_BITS)
        })
        .collect())
}

/// Permutation ordering `points` along the Hilbert curve.
///
/// `points` are slices of equal length `d`, `1 <= d <= 8`. The returned
/// vector holds the original indices in visiting order; equal keys keep
/// their original relative order.
pub fn hilbert_sort(points: &[&[f64]]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let dim = points[0].len();
    if dim == 0 || dim > MAX_DIM {
        return Err(SmcError::UnsupportedDimension(dim));
    }
    for p in points {
        if p.len() != dim {
            return Err(SmcError::DimensionMismatch(format!(
                "point of dimension {} in cloud of dimension {dim}",
                p.len()
            )));
        }
    }
    let keys = hilbert_keys(points, dim)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    Ok(order)
}
