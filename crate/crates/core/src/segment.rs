//! Binarization of maximal-response images: Niblack local thresholding,
//! square erosion and removal of small connected components.

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Image2D};
use crate::orientation::{mr_estimate, MRParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NiblackParams {
    pub window: usize,
    pub k: f64,
}

impl NiblackParams {
    pub const DEFAULT_K: f64 = 0.6;

    pub fn new(window: usize, k: f64) -> Result<Self> {
        let p = Self { window, k };
        p.validate()?;
        Ok(p)
    }

    /// Window `4·σ2` rounded to the nearest integer, bumped up to the next
    /// odd value and to at least 3.
    pub fn for_sigma2(sigma2: f64, k: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        let mut window = (4.0 * sigma2).round() as usize;
        if window.is_multiple_of(2) {
            window += 1;
        }
        Self::new(window.max(3), k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "Niblack window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !self.k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Niblack k must be finite, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Summed-area table of `f(v)` over the edge-replicated image padded by `r`
/// on every side; `(w + 2r + 1) × (h + 2r + 1)` entries with a zero first
/// row and column.
fn padded_integral(img: &Image2D, r: usize, f: impl Fn(f64) -> f64) -> (Vec<f64>, usize) {
    let (w, h) = img.dims();
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let stride = pw + 1;
    let mut sat = vec![0.0; stride * (ph + 1)];
    for py in 0..ph {
        let src = img.row(py.saturating_sub(r).min(h - 1));
        let mut run = 0.0;
        for px in 0..pw {
            run += f(src[px.saturating_sub(r).min(w - 1)]);
            sat[(py + 1) * stride + px + 1] = sat[py * stride + px + 1] + run;
        }
    }
    (sat, stride)
}

/// Images whose range is below this fraction of their magnitude are treated
/// as constant (filtered constants carry rounding ripple).
pub const FLAT_RELATIVE_RANGE: f64 = 1e-9;

fn is_flat(lo: f64, hi: f64) -> bool {
    hi - lo <= FLAT_RELATIVE_RANGE * lo.abs().max(hi.abs())
}

/// Foreground where the value exceeds `m + k·s`, with `m` and `s` the mean
/// and standard deviation over the window centered on the pixel (borders
/// replicated).
///
/// Values are centered on the image mean before summing, and deviations
/// within the summation error count as zero, so flat windows never produce
/// foreground by rounding. Flat images yield an empty mask.
pub fn niblack_threshold(img: &Image2D, p: &NiblackParams) -> Result<BinaryMask> {
    p.validate()?;
    let (w, h) = img.dims();
    if p.window > w.min(h) {
        return Err(Error::InvalidParameter(format!(
            "Niblack window {} exceeds the image ({w}x{h})",
            p.window
        )));
    }
    let (lo, hi) = img.min_max();
    if is_flat(lo, hi) {
        return BinaryMask::new(w, h);
    }
    let mean = img.sum() / img.len() as f64;
    let scale = (hi - mean).abs().max((lo - mean).abs());
    let r = p.window / 2;
    let (s1, stride) = padded_integral(img, r, |v| v - mean);
    let (s2, _) = padded_integral(img, r, |v| (v - mean) * (v - mean));
    let n = (p.window * p.window) as f64;
    // summation error bounds of the window mean and variance
    let padded_len = ((w + 2 * r) * (h + 2 * r)) as f64;
    let tol_mean = 4.0 * f64::EPSILON * padded_len * scale / n;
    let tol_var = 4.0 * f64::EPSILON * padded_len * scale * scale / n;
    let win = p.window;
    let box_sum = |t: &[f64], x: usize, y: usize| {
        t[(y + win) * stride + x + win] - t[y * stride + x + win] - t[(y + win) * stride + x]
            + t[y * stride + x]
    };
    BinaryMask::from_fn(w, h, |x, y| {
        let m = box_sum(&s1, x, y) / n;
        let var = box_sum(&s2, x, y) / n - m * m;
        let s = if var > tol_var { var.sqrt() } else { 0.0 };
        img.get(x, y) - mean - m > p.k * s + tol_mean
    })
}

/// Foreground where the min-max normalized value exceeds `t`; flat images
/// yield an empty mask.
pub fn global_threshold(img: &Image2D, t: f64) -> Result<BinaryMask> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "threshold must be finite, got {t}"
        )));
    }
    let (w, h) = img.dims();
    let (lo, hi) = img.min_max();
    if is_flat(lo, hi) {
        return BinaryMask::new(w, h);
    }
    BinaryMask::from_fn(w, h, |x, y| (img.get(x, y) - lo) / (hi - lo) > t)
}

/// Erosion by a `side`×`side` square anchored at its top-left pixel: a pixel
/// survives iff the square starting at it lies entirely in the foreground
/// (outside the image counts as background).
pub fn erode_square(mask: &BinaryMask, side: usize) -> Result<BinaryMask> {
    if side == 0 {
        return Err(Error::InvalidParameter("erosion side must be >= 1".into()));
    }
    let (w, h) = mask.dims();
    // foreground run length to the right, then downwards
    let mut right = vec![0usize; w * h];
    for y in 0..h {
        let mut run = 0;
        for x in (0..w).rev() {
            run = if mask.get(x, y) { run + 1 } else { 0 };
            right[y * w + x] = run;
        }
    }
    let mut bits = vec![false; w * h];
    for x in 0..w {
        let mut run = 0;
        for y in (0..h).rev() {
            run = if right[y * w + x] >= side { run + 1 } else { 0 };
            bits[y * w + x] = run >= side;
        }
    }
    BinaryMask::from_vec(w, h, bits)
}

/// Removes connected components with fewer than `min_size` pixels.
pub fn remove_small_components(
    mask: &BinaryMask,
    min_size: usize,
    connectivity: u8,
) -> Result<BinaryMask> {
    let neighbours: &[(isize, isize)] = match connectivity {
        4 => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        8 => &[
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ],
        c => {
            return Err(Error::InvalidParameter(format!(
                "connectivity must be 4 or 8, got {c}"
            )))
        }
    };
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if !mask.bits()[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        component.clear();
        while let Some(i) = stack.pop() {
            component.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in neighbours {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.bits()[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if component.len() >= min_size {
            for &i in &component {
                out[i] = true;
            }
        }
    }
    BinaryMask::from_vec(w, h, out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub niblack: NiblackParams,
    /// Replaces Niblack by a global threshold on the normalized response.
    pub global_threshold: Option<f64>,
    pub erode_side: usize,
    pub min_size: usize,
    pub connectivity: u8,
}

impl SegmentParams {
    /// Window from `σ2`, `k = 0.6`, 2×2 erosion, components of at least
    /// 100 pixels, 8-connectivity.
    pub fn for_sigma2(sigma2: f64) -> Result<Self> {
        Ok(Self {
            niblack: NiblackParams::for_sigma2(sigma2, NiblackParams::DEFAULT_K)?,
            global_threshold: None,
            erode_side: 2,
            min_size: 100,
            connectivity: 8,
        })
    }
}

/// Maximal response → Niblack (or global threshold) → erosion → small-component removal.
pub fn segment_pipeline(img: &Image2D, mr: &MRParams, p: &SegmentParams) -> Result<BinaryMask> {
    let field = mr_estimate(img, mr)?;
    let fg = match p.global_threshold {
        Some(t) => global_threshold(&field.response, t)?,
        None => niblack_threshold(&field.response, &p.niblack)?,
    };
    let eroded = erode_square(&fg, p.erode_side)?;
    remove_small_components(&eroded, p.min_size, p.connectivity)
}
