//! Sheared-lattice machinery shared by the hybrid and line-buffer filters.
//!
//! Lines step one row at a time; line `k` passes row `t` at column
//! `k + mu*t`. In row `t` the lattice points are stored at
//! `j - 1 + frac(mu*t)` for `j = 0..=W`, so one lattice row always brackets
//! the whole grid row. A lattice point outside `[0, W-1]` reads the edge
//! value of the row.
//!
//! The recursive start-ups extend each line with its own end sample, which
//! is not the constant extension of the image: past the top edge a sheared
//! line keeps moving sideways through copies of the first row. The image is
//! therefore padded by edge replication far enough that every line carries
//! its true extension over the support of the line filter, and cropped
//! afterwards.

use super::columns::{filter_columns, filter_rows};
use super::FilterStats;
use crate::gauss1d::RecursiveCoeffs;
use crate::image::Image2D;
use crate::interp::{resample_rows_shifted, InterpScheme};

/// Padding along the lines, in standard deviations of the line filter,
/// plus a few steps for the recursive tails of small σ.
pub(super) const LINE_MARGIN_SIGMAS: f64 = 5.0;
const LINE_MARGIN_STEPS: usize = 2;

/// Edge-replicated margins `(px, py)` for a line filter with slope `mu`.
fn margins(mu: f64, line_c: &RecursiveCoeffs) -> (usize, usize) {
    let py = (LINE_MARGIN_SIGMAS * line_c.sigma).ceil() as usize + LINE_MARGIN_STEPS;
    (((mu.abs() * py as f64).ceil() as usize) + 1, py)
}

/// Pads columns by `px`, filters the rows, then pads rows by `py`. Rows of
/// the vertical margin are copies, so they are filtered only once.
fn pad_and_filter_rows(img: &Image2D, px: usize, py: usize, axis_c: &RecursiveCoeffs) -> Image2D {
    let (w, h) = img.dims();
    let pw = w + 2 * px;
    let mut rows = Image2D::from_fn(pw, h, |x, y| img.get(x.saturating_sub(px).min(w - 1), y))
        .expect("non-empty");
    filter_rows(&mut rows, axis_c);
    let mut data = Vec::with_capacity(pw * (h + 2 * py));
    for y in 0..h + 2 * py {
        data.extend_from_slice(rows.row(y.saturating_sub(py).min(h - 1)));
    }
    Image2D::from_vec(pw, h + 2 * py, data).expect("dims match")
}

fn crop(img: &Image2D, px: usize, py: usize, w: usize, h: usize) -> Image2D {
    Image2D::from_fn(w, h, |x, y| img.get(x + px, y + py)).expect("non-empty")
}

pub(super) struct Lattice {
    width: usize,
    height: usize,
    floor: Vec<i64>,
    frac: Vec<f64>,
    /// Index of the leftmost line and the number of lines.
    kmin: i64,
    lines: usize,
}

impl Lattice {
    pub(super) fn new(width: usize, height: usize, mu: f64) -> Self {
        let mut floor = Vec::with_capacity(height);
        let mut frac = Vec::with_capacity(height);
        for t in 0..height {
            let s = mu * t as f64;
            let f = s.floor();
            floor.push(f as i64);
            frac.push(s - f);
        }
        let w = width as i64;
        let kmin = floor.iter().map(|&v| -1 - v).min().unwrap_or(0);
        let kmax = floor.iter().map(|&v| w - 1 - v).max().unwrap_or(-1);
        Self {
            width,
            height,
            floor,
            frac,
            kmin,
            lines: (kmax - kmin + 1).max(0) as usize,
        }
    }

    /// Line through lattice point `j` of row `t`.
    #[inline]
    fn line_of(&self, t: usize, j: usize) -> usize {
        (j as i64 - 1 - self.floor[t] - self.kmin) as usize
    }

    /// Column offset of a line between rows `t` and `u`.
    #[inline]
    fn shift(&self, t: usize, u: usize) -> i64 {
        self.floor[u] - self.floor[t]
    }

    #[inline]
    pub(super) fn stride(&self) -> usize {
        self.width + 1
    }

    pub(super) fn len(&self) -> usize {
        self.height * self.stride()
    }

    /// Grid rows → lattice rows (one interpolation per lattice point).
    pub(super) fn gather(&self, grid: &[f64], lattice: &mut [f64], interp: InterpScheme) {
        let (w, s) = (self.width, self.stride());
        resample_rows_shifted(grid, w, lattice, s, |t| self.frac[t] - 1.0, interp);
    }

    /// Lattice rows → grid rows (one interpolation per grid pixel).
    pub(super) fn scatter(&self, lattice: &[f64], grid: &mut [f64], interp: InterpScheme) {
        let (w, s) = (self.width, self.stride());
        resample_rows_shifted(lattice, s, grid, w, |t| 1.0 - self.frac[t], interp);
    }

    /// Causal recursion along all lines at once, one lattice row per step,
    /// so the inner loop runs over contiguous memory. Each line's first and
    /// last input are kept for the start-ups. Same arithmetic as the
    /// per-line recursion.
    pub(super) fn forward_sweep(
        &self,
        lat: &mut [f64],
        c: &RecursiveCoeffs,
        heads: &mut Vec<f64>,
        tails: &mut Vec<f64>,
    ) {
        let s = self.stride();
        let wmax = self.width as i64;
        let inside = |j: i64| (0..=wmax).contains(&j);
        let [a1, a2, a3] = c.feedback();
        let b = c.gain;
        heads.clear();
        heads.resize(self.lines, 0.0);
        tails.clear();
        tails.resize(self.lines, 0.0);
        for t in 0..self.height {
            let (before, rest) = lat.split_at_mut(t * s);
            let cur = &mut rest[..s];
            let next = (t + 1 < self.height).then(|| self.shift(t, t + 1));
            for (j, &v) in cur.iter().enumerate() {
                if next.is_none_or(|e| !inside(j as i64 + e)) {
                    tails[self.line_of(t, j)] = v;
                }
            }
            let above = t.min(3);
            let d: [i64; 3] = std::array::from_fn(|m| {
                if m < above {
                    self.shift(t - 1 - m, t)
                } else {
                    0
                }
            });
            let interior = self.full_range(above == 3, d[2], true);
            for j in (0..s).filter(|j| !interior.contains(j)) {
                let x = cur[j];
                let k = self.line_of(t, j);
                let mut p = [0.0; 3];
                let mut m = 0;
                while m < above && inside(j as i64 - d[m]) {
                    p[m] = before[(t - 1 - m) * s + (j as i64 - d[m]) as usize];
                    m += 1;
                }
                if m == 0 {
                    heads[k] = x;
                }
                p[m..].fill(heads[k]);
                cur[j] = b * x + a1 * p[0] + a2 * p[1] + a3 * p[2];
            }
            if !interior.is_empty() {
                let row = |m: usize| {
                    let at = (t - 1 - m) * s + (interior.start as i64 - d[m]) as usize;
                    &before[at..at + interior.len()]
                };
                let (r1, r2, r3) = (row(0), row(1), row(2));
                for (((v, &p1), &p2), &p3) in cur[interior].iter_mut().zip(r1).zip(r2).zip(r3) {
                    *v = b * *v + a1 * p1 + a2 * p2 + a3 * p3;
                }
            }
        }
    }

    /// Anticausal counterpart of [`Lattice::forward_sweep`], bottom row first.
    pub(super) fn backward_sweep(
        &self,
        lat: &mut [f64],
        c: &RecursiveCoeffs,
        heads: &[f64],
        tails: &[f64],
    ) {
        let s = self.stride();
        let h = self.height;
        let wmax = self.width as i64;
        let inside = |j: i64| (0..=wmax).contains(&j);
        let [a1, a2, a3] = c.feedback();
        let b = c.gain;
        // start-up values one and two steps past each line's end
        let mut ext = vec![[0.0f64; 2]; self.lines];
        for t in (0..h).rev() {
            let (upper, lower) = lat.split_at_mut((t + 1) * s);
            let (before, cur) = upper.split_at_mut(t * s);
            let below = (h - 1 - t).min(3);
            let e: [i64; 3] = std::array::from_fn(|m| {
                if m < below {
                    self.shift(t, t + 1 + m)
                } else {
                    0
                }
            });
            let interior = self.full_range(below == 3, e[2], false);
            for j in (0..s).filter(|j| !interior.contains(j)) {
                let k = self.line_of(t, j);
                let mut p = [0.0; 3];
                let mut m = 0;
                while m < below && inside(j as i64 + e[m]) {
                    p[m] = lower[m * s + (j as i64 + e[m]) as usize];
                    m += 1;
                }
                if m == 0 {
                    // causal values before the line's end; the line's first
                    // input stands in where the line is too short
                    let mut last = [cur[j], heads[k], heads[k]];
                    for q in 0..t.min(2) {
                        let jj = j as i64 - self.shift(t - 1 - q, t);
                        if !inside(jj) {
                            break;
                        }
                        last[q + 1] = before[(t - 1 - q) * s + jj as usize];
                    }
                    let [y0, y1, y2] = c.boundary().init(last, tails[k]);
                    cur[j] = y0;
                    ext[k] = [y1, y2];
                    continue;
                }
                let [y1, y2] = ext[k];
                p[m] = y1;
                if m + 1 < 3 {
                    p[m + 1] = y2;
                }
                cur[j] = b * cur[j] + a1 * p[0] + a2 * p[1] + a3 * p[2];
            }
            if !interior.is_empty() {
                let row = |m: usize| {
                    let at = m * s + (interior.start as i64 + e[m]) as usize;
                    &lower[at..at + interior.len()]
                };
                let (r1, r2, r3) = (row(0), row(1), row(2));
                for (((v, &p1), &p2), &p3) in cur[interior].iter_mut().zip(r1).zip(r2).zip(r3) {
                    *v = b * *v + a1 * p1 + a2 * p2 + a3 * p3;
                }
            }
        }
    }

    /// Columns `j` of a row whose three neighbours along the line (offsets
    /// `∓off` for the outermost one) all lie inside the lattice row.
    fn full_range(&self, available: bool, off: i64, causal: bool) -> std::ops::Range<usize> {
        if !available {
            return 0..0;
        }
        let wmax = self.width as i64;
        // causal reads j - off, anticausal j + off
        let off = if causal { off } else { -off };
        let (lo, hi) = (off.max(0), (wmax + off).min(wmax));
        if lo > hi {
            0..0
        } else {
            lo as usize..hi as usize + 1
        }
    }

    /// Calls `f` with the flat lattice indices of every line, top to bottom.
    #[cfg(test)]
    fn for_each_line(&self, mut f: impl FnMut(&[usize])) {
        let w = self.width as i64;
        let fl = &self.floor;
        let ascending = fl.last() >= fl.first();
        let kmin = fl.iter().map(|&v| -1 - v).min().unwrap_or(0);
        let kmax = fl.iter().map(|&v| w - 1 - v).max().unwrap_or(-1);
        let s = self.stride();
        let mut idx = Vec::with_capacity(self.height);
        for k in kmin..=kmax {
            // rows where 0 <= k + 1 + floor[t] <= W
            let (lo, hi) = (-1 - k, w - 1 - k);
            let (t0, t1) = if ascending {
                (
                    fl.partition_point(|&v| v < lo),
                    fl.partition_point(|&v| v <= hi),
                )
            } else {
                (
                    fl.partition_point(|&v| v > hi),
                    fl.partition_point(|&v| v >= lo),
                )
            };
            if t0 >= t1 {
                continue;
            }
            idx.clear();
            idx.extend((t0..t1).map(|t| t * s + (k + 1 + fl[t]) as usize));
            f(&idx);
        }
    }
}

/// Two interpolations per pixel: gather once, run both recursive passes on
/// the lattice, scatter once.
pub(super) fn hybrid_x1(
    mut img: Image2D,
    mu: f64,
    axis_c: &RecursiveCoeffs,
    line_c: &RecursiveCoeffs,
    interp: InterpScheme,
    stats: &mut FilterStats,
) -> Image2D {
    if mu == 0.0 {
        filter_rows(&mut img, axis_c);
        filter_columns(&mut img, line_c);
        return img;
    }
    let (w0, h0) = img.dims();
    let (px, py) = margins(mu, line_c);
    let mut img = pad_and_filter_rows(&img, px, py, axis_c);
    let (w, h) = img.dims();
    let lat = Lattice::new(w, h, mu);
    let mut lattice = vec![0.0; lat.len()];
    lat.gather(img.data(), &mut lattice, interp);
    stats.pass(lat.len());

    let (mut heads, mut tails) = (Vec::new(), Vec::new());
    lat.forward_sweep(&mut lattice, line_c, &mut heads, &mut tails);
    lat.backward_sweep(&mut lattice, line_c, &heads, &tails);

    lat.scatter(&lattice, img.data_mut(), interp);
    stats.pass(w * h);
    crop(&img, px, py, w0, h0)
}

/// Four interpolations per pixel: the causal and the anticausal pass each
/// read from the grid and write back to it through interpolation.
pub(super) fn line_buffer_x1(
    mut img: Image2D,
    mu: f64,
    axis_c: &RecursiveCoeffs,
    line_c: &RecursiveCoeffs,
    interp: InterpScheme,
    stats: &mut FilterStats,
) -> Image2D {
    if mu == 0.0 {
        filter_rows(&mut img, axis_c);
        filter_columns(&mut img, line_c);
        return img;
    }
    let (w0, h0) = img.dims();
    let (px, py) = margins(mu, line_c);
    let mut img = pad_and_filter_rows(&img, px, py, axis_c);
    let (w, h) = img.dims();
    let lat = Lattice::new(w, h, mu);
    let mut lattice = vec![0.0; lat.len()];

    lat.gather(img.data(), &mut lattice, interp);
    stats.pass(lat.len());
    // the original line ends are needed for the anticausal start-up
    let (mut heads, mut tails) = (Vec::new(), Vec::new());
    lat.forward_sweep(&mut lattice, line_c, &mut heads, &mut tails);
    lat.scatter(&lattice, img.data_mut(), interp);
    stats.pass(w * h);

    lat.gather(img.data(), &mut lattice, interp);
    stats.pass(lat.len());
    lat.backward_sweep(&mut lattice, line_c, &heads, &tails);
    lat.scatter(&lattice, img.data_mut(), interp);
    stats.pass(w * h);
    crop(&img, px, py, w0, h0)
}
