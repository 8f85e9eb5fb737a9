//! Grid-aligned recursive filtering of whole images.

use crate::gauss1d::{filter_line, RecursiveCoeffs};
use crate::image::Image2D;

pub(crate) fn filter_rows(img: &mut Image2D, c: &RecursiveCoeffs) {
    let w = img.width();
    filter_rows_raw(img.data_mut(), w, c);
}

pub(crate) fn filter_rows_raw(data: &mut [f64], width: usize, c: &RecursiveCoeffs) {
    for row in data.chunks_exact_mut(width) {
        filter_line(row, c);
    }
}

pub(crate) fn filter_columns(img: &mut Image2D, c: &RecursiveCoeffs) {
    let (w, h) = img.dims();
    filter_columns_raw(img.data_mut(), w, h, c);
}

/// Runs the recursion down all columns at once, one image row per step,
/// so every memory access is a contiguous row.
pub(crate) fn filter_columns_raw(data: &mut [f64], w: usize, h: usize, c: &RecursiveCoeffs) {
    if h == 0 || w == 0 {
        return;
    }
    let [a1, a2, a3] = c.feedback();
    let b = c.gain;
    let head: Vec<f64> = data[..w].to_vec();
    let tail: Vec<f64> = data[(h - 1) * w..].to_vec();

    for y in 0..h {
        let (before, rest) = data.split_at_mut(y * w);
        let cur = &mut rest[..w];
        let r1 = if y >= 1 {
            &before[(y - 1) * w..y * w]
        } else {
            &head[..]
        };
        let r2 = if y >= 2 {
            &before[(y - 2) * w..(y - 1) * w]
        } else {
            &head[..]
        };
        let r3 = if y >= 3 {
            &before[(y - 3) * w..(y - 2) * w]
        } else {
            &head[..]
        };
        for x in 0..w {
            cur[x] = b * cur[x] + a1 * r1[x] + a2 * r2[x] + a3 * r3[x];
        }
    }

    // anticausal start-up per column
    let mut ext1 = vec![0.0; w];
    let mut ext2 = vec![0.0; w];
    {
        let row = |k: isize| -> &[f64] {
            if k >= 0 {
                &data[k as usize * w..(k as usize + 1) * w]
            } else {
                &head[..]
            }
        };
        let last0 = row(h as isize - 1);
        let last1 = row(h as isize - 2);
        let last2 = row(h as isize - 3);
        let mut first = vec![0.0; w];
        for x in 0..w {
            let [y0, y1, y2] = c.boundary().init([last0[x], last1[x], last2[x]], tail[x]);
            first[x] = y0;
            ext1[x] = y1;
            ext2[x] = y2;
        }
        data[(h - 1) * w..].copy_from_slice(&first);
    }
    for y in (0..h.saturating_sub(1)).rev() {
        let (lo, hi) = data.split_at_mut((y + 1) * w);
        let cur = &mut lo[y * w..];
        let r1 = &hi[..w];
        let r2: &[f64] = if y + 2 < h { &hi[w..2 * w] } else { &ext1 };
        let r3: &[f64] = if y + 3 < h {
            &hi[2 * w..3 * w]
        } else if y + 3 == h {
            &ext1
        } else {
            &ext2
        };
        for x in 0..w {
            cur[x] = b * cur[x] + a1 * r1[x] + a2 * r2[x] + a3 * r3[x];
        }
    }
}
