//! Per-pixel fiber direction: maximal anisotropic-Gaussian response (MR),
//! structure tensor and Hessian.
//!
//! Angles are in degrees in `[0, 180)`, measured from the `x` (column) axis
//! towards the `y` (row) axis, the same convention as [`AnisoKernelSpec`].

use rayon::prelude::*;

use crate::anisofilter::{filter, separable_recursive, FilterAlgorithm};
use crate::decomp::AnisoKernelSpec;
use crate::error::{Error, Result};
use crate::gauss1d::MIN_SIGMA;
use crate::image::{BinaryMask, Image2D};
use crate::interp::InterpScheme;

/// Threshold below which a tensor or Hessian is treated as zero.
pub const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationField {
    pub angle: Image2D,
    pub response: Image2D,
    pub valid: BinaryMask,
}

impl OrientationField {
    pub fn dims(&self) -> (usize, usize) {
        self.angle.dims()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MRParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub angles: Vec<f64>,
    pub algo: FilterAlgorithm,
    pub fiber_radius: Option<f64>,
    pub fiber_length: Option<f64>,
}

impl MRParams {
    /// Integer-degree grid `0, step, 2·step, …` below 180°.
    pub fn angle_grid(step: f64) -> Result<Vec<f64>> {
        if !(step.is_finite() && step > 0.0 && step < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "angle step must be in (0, 180), got {step}"
            )));
        }
        let n = (180.0 / step - 1e-9).ceil() as usize;
        Ok((0..n).map(|i| i as f64 * step).collect())
    }

    /// 1° grid with the given kernel.
    pub fn new(sigma1: f64, sigma2: f64, algo: FilterAlgorithm) -> Self {
        Self {
            sigma1,
            sigma2,
            angles: (0..180).map(f64::from).collect(),
            algo,
            fiber_radius: None,
            fiber_length: None,
        }
    }

    /// `σ2 = r/2`: a kernel centered in a fiber of radius `r` covers its
    /// thickness with about 95 % of its weight.
    pub fn for_fiber_radius(sigma1: f64, radius: f64, algo: FilterAlgorithm) -> Self {
        Self {
            fiber_radius: Some(radius),
            ..Self::new(sigma1, radius / 2.0, algo)
        }
    }

    pub fn with_angles(mut self, angles: Vec<f64>) -> Self {
        self.angles = angles;
        self
    }

    pub fn with_fiber_length(mut self, length: f64) -> Self {
        self.fiber_length = Some(length);
        self
    }

    pub fn validate(&self) -> Result<()> {
        AnisoKernelSpec::new(self.sigma1, self.sigma2, 0.0)?;
        if self.angles.is_empty() {
            return Err(Error::InvalidParameter("angle set is empty".into()));
        }
        if self.angles.iter().any(|a| !(0.0..180.0).contains(a)) {
            return Err(Error::InvalidParameter(
                "angles must lie in [0, 180)".into(),
            ));
        }
        if self.angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "angles must be strictly increasing".into(),
            ));
        }
        if let Some(r) = self.fiber_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "fiber radius must be positive, got {r}"
                )));
            }
        }
        if let Some(l) = self.fiber_length {
            if self.sigma1.partial_cmp(&(l / 4.0)) != Some(std::cmp::Ordering::Less) {
                return Err(Error::InvalidParameter(format!(
                    "sigma1 = {} must stay below a quarter of the fiber length {l}",
                    self.sigma1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorParams {
    pub sigma: f64,
    pub rho: f64,
}

impl TensorParams {
    pub const DEFAULT_RHO: f64 = 6.0;

    /// `σ = r`, `ρ = 6`.
    pub fn for_fiber_radius(radius: f64) -> Self {
        Self {
            sigma: radius,
            rho: Self::DEFAULT_RHO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma", self.sigma), ("rho", self.rho)] {
            if !(v.is_finite() && v >= MIN_SIGMA) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be >= {MIN_SIGMA}, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Relative gap below which two responses count as tied. Rounding makes
/// mathematically equal responses (e.g. on a constant image) differ in the
/// last bits from angle to angle.
pub const TIE_EPS: f64 = 1e-12;

#[inline]
pub(crate) fn beats(r: f64, best: f64) -> bool {
    best == f64::NEG_INFINITY || r > best + TIE_EPS * best.abs().max(r.abs())
}

/// Running argmax over angles; ties keep the earlier (smaller) angle.
#[derive(Debug, Clone)]
pub(crate) struct ArgMax {
    pub(crate) best: Vec<f64>,
    pub(crate) angle: Vec<f64>,
}

impl ArgMax {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            best: vec![f64::NEG_INFINITY; len],
            angle: vec![0.0; len],
        }
    }

    #[inline]
    pub(crate) fn update(&mut self, response: &[f64], theta: f64) {
        for ((b, a), &r) in self.best.iter_mut().zip(&mut self.angle).zip(response) {
            if beats(r, *b) {
                *b = r;
                *a = theta;
            }
        }
    }
}

/// Maximal-response estimate: the angle whose anisotropic Gaussian response
/// is largest, and that response (the fiber-enhanced image).
///
/// Responses for a batch of angles (one per worker) are computed in
/// parallel and folded into the accumulator in angle order, so the result
/// is identical to the sequential loop for any pool size.
pub fn mr_estimate(img: &Image2D, p: &MRParams) -> Result<OrientationField> {
    p.validate()?;
    let (w, h) = img.dims();
    let batch = rayon::current_num_threads().max(1);
    let mut acc = ArgMax::new(w * h);
    for angles in p.angles.chunks(batch) {
        let responses: Vec<Image2D> = angles
            .par_iter()
            .map(|&theta| {
                filter(
                    img,
                    &AnisoKernelSpec::new(p.sigma1, p.sigma2, theta)?,
                    p.algo,
                )
            })
            .collect::<Result<_>>()?;
        for (r, &theta) in responses.iter().zip(angles) {
            acc.update(r.data(), theta);
        }
    }
    Ok(OrientationField {
        angle: Image2D::from_vec(w, h, acc.angle)?,
        response: Image2D::from_vec(w, h, acc.best)?,
        valid: BinaryMask::full(w, h)?,
    })
}

/// Central difference along rows (`dx`) or columns (`dy`) with the edge
/// sample repeated outside the image.
fn central_diff_x(img: &Image2D) -> Image2D {
    let (w, h) = img.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let src = img.row(y);
        let dst = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            let l = src[x.saturating_sub(1)];
            let r = src[(x + 1).min(w - 1)];
            dst[x] = 0.5 * (r - l);
        }
    }
    Image2D::from_vec(w, h, out).expect("same dimensions")
}

fn central_diff_y(img: &Image2D) -> Image2D {
    let (w, h) = img.dims();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let up = img.row(y.saturating_sub(1));
        let down = img.row((y + 1).min(h - 1));
        let dst = &mut out[y * w..(y + 1) * w];
        for x in 0..w {
            dst[x] = 0.5 * (down[x] - up[x]);
        }
    }
    Image2D::from_vec(w, h, out).expect("same dimensions")
}

fn zip3(a: &Image2D, b: &Image2D, c: &Image2D, f: impl Fn(f64, f64, f64) -> f64) -> Image2D {
    let (w, h) = a.dims();
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .zip(c.data())
        .map(|((&x, &y), &z)| f(x, y, z))
        .collect();
    Image2D::from_vec(w, h, data).expect("same dimensions")
}

/// Eigen-decomposition of `[[a, b], [b, c]]`: `(λ_min, λ_max, angle of the
/// λ_min eigenvector)`. A multiple of the identity reports angle 0°.
pub fn eig2x2_symmetric(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let mean = 0.5 * (a + c);
    let half = 0.5 * (a - c);
    let rad = half.hypot(b);
    let (lmin, lmax) = (mean - rad, mean + rad);
    if rad == 0.0 {
        return (lmin, lmax, 0.0);
    }
    // 0.5·atan2(2b, a−c) is the λ_max direction
    let max_dir = 0.5 * (2.0 * b).atan2(a - c).to_degrees();
    (lmin, lmax, fold180(max_dir + 90.0))
}

/// Folds any angle in degrees into `[0, 180)`.
pub fn fold180(a: f64) -> f64 {
    let t = a.rem_euclid(180.0);
    if t >= 180.0 {
        0.0
    } else {
        t
    }
}

/// Structure tensor `g_ρ ∗ (∇f_σ ∇f_σᵀ)`; the fiber runs along the
/// eigenvector of the smallest eigenvalue.
pub fn structure_tensor_estimate(img: &Image2D, p: &TensorParams) -> Result<OrientationField> {
    p.validate()?;
    let smooth = separable_recursive(img, p.sigma, p.sigma)?;
    let gx = central_diff_x(&smooth);
    let gy = central_diff_y(&smooth);
    let jxx = zip3(&gx, &gx, &gx, |x, _, _| x * x);
    let jxy = zip3(&gx, &gy, &gy, |x, y, _| x * y);
    let jyy = zip3(&gy, &gy, &gy, |y, _, _| y * y);
    let jxx = separable_recursive(&jxx, p.rho, p.rho)?;
    let jxy = separable_recursive(&jxy, p.rho, p.rho)?;
    let jyy = separable_recursive(&jyy, p.rho, p.rho)?;
    let (w, h) = img.dims();
    let mut angle = vec![0.0; w * h];
    let mut response = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        let (a, b, c) = (jxx.data()[i], jxy.data()[i], jyy.data()[i]);
        if a + c <= DEGENERATE_EPS {
            continue;
        }
        let (lmin, _, dir) = eig2x2_symmetric(a, b, c);
        angle[i] = dir;
        response[i] = lmin.abs();
        valid[i] = true;
    }
    Ok(OrientationField {
        angle: Image2D::from_vec(w, h, angle)?,
        response: Image2D::from_vec(w, h, response)?,
        valid: BinaryMask::from_vec(w, h, valid)?,
    })
}

/// Hessian of `f ∗ g_σ`. The fiber runs along the eigenvector whose
/// eigenvalue has the smaller magnitude (the curvature along a ridge is
/// flat, across it strongly negative).
pub fn hessian_estimate(img: &Image2D, sigma: f64) -> Result<OrientationField> {
    if !(sigma.is_finite() && sigma >= MIN_SIGMA) {
        return Err(Error::UnsupportedSigma(sigma));
    }
    let smooth = separable_recursive(img, sigma, sigma)?;
    let gx = central_diff_x(&smooth);
    let gy = central_diff_y(&smooth);
    let hxx = central_diff_x(&gx);
    let hxy = central_diff_y(&gx);
    let hyy = central_diff_y(&gy);
    let (w, h) = img.dims();
    let mut angle = vec![0.0; w * h];
    let mut response = vec![0.0; w * h];
    let mut valid = vec![false; w * h];
    for i in 0..w * h {
        let (lmin, lmax, dir) = eig2x2_symmetric(hxx.data()[i], hxy.data()[i], hyy.data()[i]);
        if lmin.abs() <= DEGENERATE_EPS && lmax.abs() <= DEGENERATE_EPS {
            continue;
        }
        if lmin.abs() <= lmax.abs() {
            angle[i] = dir;
            response[i] = lmin.abs();
        } else {
            angle[i] = fold180(dir + 90.0);
            response[i] = lmax.abs();
        }
        valid[i] = true;
    }
    Ok(OrientationField {
        angle: Image2D::from_vec(w, h, angle)?,
        response: Image2D::from_vec(w, h, response)?,
        valid: BinaryMask::from_vec(w, h, valid)?,
    })
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

fn hsv_to_rgb(hue: f64, sat: f64, val: f64) -> [u8; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = val * sat;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    let q = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Hue `2·angle`, full saturation, value = response rescaled to `[0, 1]`
/// over the valid pixels (1 if the response is constant); invalid pixels
/// are black.
pub fn colorize(field: &OrientationField) -> RgbImage {
    let (w, h) = field.dims();
    let valid = field.valid.bits();
    let (lo, hi) = field
        .response
        .data()
        .iter()
        .zip(valid)
        .filter(|(_, &v)| v)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&r, _)| {
            (lo.min(r), hi.max(r))
        });
    let span = hi - lo;
    let pixels = (0..w * h)
        .map(|i| {
            if !valid[i] {
                return [0, 0, 0];
            }
            let v = if span > 0.0 {
                (field.response.data()[i] - lo) / span
            } else {
                1.0
            };
            hsv_to_rgb(2.0 * field.angle.data()[i], 1.0, v)
        })
        .collect();
    RgbImage {
        width: w,
        height: h,
        pixels,
    }
}

/// Counts of masked, valid angles per bin `[k·bw, (k+1)·bw)`.
pub fn angle_histogram(
    field: &OrientationField,
    mask: &BinaryMask,
    bin_width: f64,
) -> Result<Vec<u64>> {
    let n = 180.0 / bin_width;
    if !(bin_width > 0.0 && n.is_finite() && (n - n.round()).abs() < 1e-9) {
        return Err(Error::InvalidParameter(format!(
            "bin width {bin_width} does not divide 180"
        )));
    }
    if mask.dims() != field.dims() {
        return Err(Error::mismatch(mask.dims(), field.dims()));
    }
    let n = n.round() as usize;
    let mut counts = vec![0u64; n];
    for ((&m, &v), &a) in mask
        .bits()
        .iter()
        .zip(field.valid.bits())
        .zip(field.angle.data())
    {
        if m && v {
            let k = ((fold180(a) / bin_width + 1e-9).floor() as usize).min(n - 1);
            counts[k] += 1;
        }
    }
    Ok(counts)
}

/// Default MR algorithm used across the experiments.
pub const DEFAULT_MR_ALGO: FilterAlgorithm = FilterAlgorithm::hybrid_mod(InterpScheme::Cubic);
