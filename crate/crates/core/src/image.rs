//! Real-valued images, binary masks and the small generators and distances
//! shared by the filters and experiments.
//!
//! Coordinates: pixel centers sit on integer positions, the origin is the
//! top-left pixel, `x` (= x1) is the column index and `y` (= x2) the row index.

use std::f64::consts::PI;

use crate::decomp::AnisoKernelSpec;
use crate::error::{Error, Result};

/// A rectangular grid of `f64` samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![value; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::InvalidSize(format!(
                "{} samples for a {}x{} image",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn row_mut(&mut self, y: usize) -> &mut [f64] {
        &mut self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.width)
    }

    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        self.data.chunks_exact_mut(self.width)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Swaps the roles of rows and columns.
    pub fn transpose(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; w * h];
        const B: usize = 32;
        for y0 in (0..h).step_by(B) {
            for x0 in (0..w).step_by(B) {
                for y in y0..(y0 + B).min(h) {
                    for x in x0..(x0 + B).min(w) {
                        data[x * h + y] = self.data[y * w + x];
                    }
                }
            }
        }
        Self {
            width: h,
            height: w,
            data,
        }
    }

    /// Lossless rotation of the pixel grid by 90°, mapping column `x` of row
    /// `y` to column `h-1-y` of row `x`. A direction at angle `a` in the
    /// input appears at `a + 90°` in the output.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                data[x * h + (h - 1 - y)] = self.data[y * w + x];
            }
        }
        Self {
            width: h,
            height: w,
            data,
        }
    }

    pub(crate) fn ensure_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidSize(format!("{width}x{height}")));
    }
    width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidSize(format!("{width}x{height} overflows")))?;
    Ok(())
}

/// Boolean per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![true; width * height],
        })
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::InvalidSize(format!(
                "{} bits for a {}x{} mask",
                bits.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(self.dims(), other.dims()));
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    /// True iff every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Indices (row-major) of foreground pixels.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// 0.0 / 1.0 image view of the mask.
    pub fn to_image(&self) -> Image2D {
        Image2D {
            width: self.width,
            height: self.height,
            data: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// `N`×`N` zero image with a single 1 at (⌊N/2⌋, ⌊N/2⌋).
pub fn unit_impulse(n: usize) -> Result<Image2D> {
    if n < 3 {
        return Err(Error::InvalidSize(format!(
            "impulse image needs N >= 3, got {n}"
        )));
    }
    let mut img = Image2D::new(n, n)?;
    img.set(n / 2, n / 2, 1.0);
    Ok(img)
}

/// Samples the continuous rotated anisotropic Gaussian at integer offsets
/// from the center pixel (⌊N/2⌋, ⌊N/2⌋). No discrete renormalization.
pub fn sample_true_kernel(n: usize, spec: &AnisoKernelSpec) -> Result<Image2D> {
    spec.validate()?;
    if n < 3 {
        return Err(Error::InvalidSize(format!(
            "kernel image needs N >= 3, got {n}"
        )));
    }
    let c = (n / 2) as f64;
    let (s, co) = spec.theta_rad().sin_cos();
    let (s1, s2) = (spec.sigma1, spec.sigma2);
    let norm = 1.0 / (2.0 * PI * s1 * s2);
    Image2D::from_fn(n, n, |x, y| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        let along = dx * co + dy * s;
        let across = -dx * s + dy * co;
        norm * (-0.5 * (along * along / (s1 * s1) + across * across / (s2 * s2))).exp()
    })
}

/// Euclidean (l²) distance between two equally sized images.
pub fn l2_distance(a: &Image2D, b: &Image2D) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt())
}

/// 3×3 median filter with edge replication at the borders.
pub fn median3x3(img: &Image2D) -> Image2D {
    let (w, h) = img.dims();
    let mut out = vec![0.0; w * h];
    let mut win = [0.0f64; 9];
    for y in 0..h {
        let rows = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            let cols = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let mut k = 0;
            for &yy in &rows {
                let r = img.row(yy);
                for &xx in &cols {
                    win[k] = r[xx];
                    k += 1;
                }
            }
            let (_, m, _) = win.select_nth_unstable_by(4, f64::total_cmp);
            out[y * w + x] = *m;
        }
    }
    Image2D {
        width: w,
        height: h,
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_centers() {
        let i3 = unit_impulse(3).unwrap();
        assert_eq!(i3.get(1, 1), 1.0);
        assert_eq!(i3.sum(), 1.0);
        let i4 = unit_impulse(4).unwrap();
        assert_eq!(i4.get(2, 2), 1.0);
        let i512 = unit_impulse(512).unwrap();
        assert_eq!(i512.sum(), 1.0);
        assert_eq!(i512.get(256, 256), 1.0);
        assert!(matches!(unit_impulse(2), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn true_kernel_center_and_transpose() {
        let spec = AnisoKernelSpec::new(25.0, 2.0, 0.0).unwrap();
        let k0 = sample_true_kernel(512, &spec).unwrap();
        let expected = 1.0 / (2.0 * PI * 25.0 * 2.0);
        assert!((k0.get(256, 256) - expected).abs() < 1e-15);

        let k90 = sample_true_kernel(512, &AnisoKernelSpec::new(25.0, 2.0, 90.0).unwrap()).unwrap();
        let t = k0.transpose();
        let d = l2_distance(&k90, &t).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn true_kernel_mass() {
        let spec = AnisoKernelSpec::new(2.0, 1.0, 45.0).unwrap();
        let k = sample_true_kernel(512, &spec).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-3, "{}", k.sum());
    }

    #[test]
    fn true_kernel_rejects_bad_sigmas() {
        assert!(AnisoKernelSpec::new(1.0, 2.0, 0.0).is_err());
        assert!(AnisoKernelSpec::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn l2_basics() {
        let a = Image2D::new(2, 2).unwrap();
        let b = Image2D::filled(2, 2, 1.0).unwrap();
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_distance(&a, &b).unwrap(), 2.0);
        let c = Image2D::new(3, 2).unwrap();
        assert!(matches!(
            l2_distance(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn median_cases() {
        let c = Image2D::filled(7, 5, 0.3).unwrap();
        assert_eq!(median3x3(&c), c);

        let mut imp = Image2D::new(9, 9).unwrap();
        imp.set(4, 4, 1.0);
        assert!(median3x3(&imp).data().iter().all(|&v| v == 0.0));

        let nine = Image2D::from_vec(3, 3, (1..=9).map(f64::from).collect()).unwrap();
        assert_eq!(median3x3(&nine).get(1, 1), 5.0);
    }

    #[test]
    fn rotate90_moves_pixels() {
        let img = Image2D::from_fn(3, 2, |x, y| (10 * y + x) as f64).unwrap();
        let r = img.rotate90();
        assert_eq!(r.dims(), (2, 3));
        // (x=2, y=0) -> column h-1-0 = 1, row 2
        assert_eq!(r.get(1, 2), 2.0);
        // (x=0, y=1) -> column 0, row 0
        assert_eq!(r.get(0, 0), 10.0);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Image2D::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Image2D::new(0, 4).is_err());
    }
}
