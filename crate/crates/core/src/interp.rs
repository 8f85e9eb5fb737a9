//! Sub-pixel sampling of 1D lines (and separable 2D grids).
//!
//! Three schemes:
//! * `Linear` — two taps.
//! * `Cubic` — the interpolating cubic spline with natural end conditions
//!   (second derivative zero at both ends). The line is first converted to
//!   B-spline coefficients (one tridiagonal solve, O(n)); every sample is
//!   then a 4-tap combination of coefficients.
//! * `CubicConvolution` — Keys' local 4-tap kernel with `a = -1/2`. A ghost
//!   sample `3·s0 - 3·s1 + s2` at each end keeps quadratics exact up to the
//!   boundary.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InterpScheme {
    #[default]
    Linear,
    Cubic,
    CubicConvolution,
}

impl InterpScheme {
    pub const ALL: [InterpScheme; 3] = [
        InterpScheme::Linear,
        InterpScheme::Cubic,
        InterpScheme::CubicConvolution,
    ];

    pub fn taps(self) -> usize {
        match self {
            InterpScheme::Linear => 2,
            InterpScheme::Cubic | InterpScheme::CubicConvolution => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InterpScheme::Linear => "linear",
            InterpScheme::Cubic => "cubic",
            InterpScheme::CubicConvolution => "keys",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(InterpScheme::Linear),
            "cubic" | "spline" => Ok(InterpScheme::Cubic),
            "keys" | "cubic-conv" => Ok(InterpScheme::CubicConvolution),
            other => Err(Error::InvalidParameter(format!(
                "unknown interpolation '{other}'"
            ))),
        }
    }

    fn kernel(self) -> Kernel {
        match self {
            InterpScheme::Linear => Kernel::Linear,
            InterpScheme::Cubic => Kernel::BSpline,
            InterpScheme::CubicConvolution => Kernel::Keys,
        }
    }
}

/// Evaluation kernel applied to prepared data (the samples themselves, or
/// B-spline coefficients for the spline).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kernel {
    Linear,
    Keys,
    BSpline,
}

impl Kernel {
    #[inline]
    fn weights(self, f: f64) -> [f64; 4] {
        match self {
            Kernel::Linear => [0.0, 1.0 - f, f, 0.0],
            Kernel::Keys => keys_weights(f),
            Kernel::BSpline => bspline_weights(f),
        }
    }

    /// Value one step past the start (or end) of `p`.
    #[inline]
    fn ghost(self, p: &[f64], at_start: bool) -> f64 {
        let n = p.len();
        let (a, b, c) = if at_start {
            (0, 1.min(n - 1), 2.min(n - 1))
        } else {
            (n - 1, n.saturating_sub(2), n.saturating_sub(3))
        };
        match (self, n) {
            (_, 1) => p[0],
            (Kernel::Keys, 2) => 2.0 * p[a] - p[b],
            (Kernel::Keys, _) => 3.0 * p[a] - 3.0 * p[b] + p[c],
            // natural end: c[-1] - 2c[0] + c[1] = 0
            (Kernel::BSpline, _) => 2.0 * p[a] - p[b],
            (Kernel::Linear, _) => p[a],
        }
    }

    /// Evaluates at `pos ∈ [0, n-1]` (not checked).
    #[inline]
    fn eval(self, p: &[f64], pos: f64) -> f64 {
        let n = p.len();
        if n == 1 {
            return p[0];
        }
        let i = (pos.floor() as usize).min(n - 2);
        let f = pos - i as f64;
        if self != Kernel::BSpline && f == 0.0 {
            return p[i];
        }
        let w = self.weights(f);
        let left = if i >= 1 {
            p[i - 1]
        } else {
            self.ghost(p, true)
        };
        let right = if i + 2 < n {
            p[i + 2]
        } else {
            self.ghost(p, false)
        };
        w[0] * left + w[1] * p[i] + w[2] * p[i + 1] + w[3] * right
    }
}

/// Keys cubic convolution weights (`a = -1/2`) for taps at offsets
/// -1, 0, 1, 2 from `floor(pos)`.
#[inline]
pub fn keys_weights(f: f64) -> [f64; 4] {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    ]
}

/// Cubic B-spline weights for coefficients at offsets -1, 0, 1, 2.
#[inline]
pub fn bspline_weights(f: f64) -> [f64; 4] {
    let g = 1.0 - f;
    let f3 = f * f * f;
    let g3 = g * g * g;
    [
        g3 / 6.0,
        (3.0 * f3 - 6.0 * f * f + 4.0) / 6.0,
        (3.0 * g3 - 6.0 * g * g + 4.0) / 6.0,
        f3 / 6.0,
    ]
}

/// B-spline coefficients of the natural interpolating cubic spline through
/// `samples`, written to `out`.
///
/// With the natural end condition the end coefficients equal the end
/// samples and the interior solves `c[k-1] + 4c[k] + c[k+1] = 6 s[k]`.
pub fn natural_spline_coeffs(samples: &[f64], out: &mut Vec<f64>) {
    // the elimination factors converge to 2 - √3 to machine precision long
    // before this many steps
    const EXACT: usize = 32;
    let n = samples.len();
    out.clear();
    out.extend_from_slice(samples);
    if n < 3 {
        return;
    }
    let mut factors = [0.0f64; EXACT];
    let mut cp = 0.0;
    for k in 1..n - 1 {
        if k < EXACT {
            cp = 1.0 / (4.0 - cp);
            factors[k] = cp;
        }
        out[k] = (6.0 * samples[k] - out[k - 1]) * cp;
    }
    for k in (1..n - 1).rev() {
        let f = if k < EXACT { factors[k] } else { cp };
        out[k] -= f * out[k + 1];
    }
}

/// Spline coefficients of every `len`-sample row of `rows`, in place.
///
/// Groups of rows run through the elimination in lock-step: the
/// recursions are independent, so interleaving them hides their latency.
/// Each row gets exactly the arithmetic of [`natural_spline_coeffs`].
pub(crate) fn natural_spline_rows(rows: &mut [f64], len: usize) {
    const LANES: usize = 4;
    const EXACT: usize = 32;
    if len < 3 {
        return;
    }
    let mut factors = [0.0f64; EXACT];
    let mut cp = 0.0;
    for f in factors.iter_mut().take(len - 1).skip(1) {
        cp = 1.0 / (4.0 - cp);
        *f = cp;
    }
    let factor = |k: usize| if k < EXACT { factors[k] } else { cp };
    let mut blocks = rows.chunks_exact_mut(len * LANES);
    let mut lanes = vec![[0.0f64; LANES]; len];
    for block in &mut blocks {
        for (k, l) in lanes.iter_mut().enumerate() {
            for (r, v) in l.iter_mut().enumerate() {
                *v = block[r * len + k];
            }
        }
        for k in 1..len - 1 {
            let f = factor(k);
            let prev = lanes[k - 1];
            for (v, p) in lanes[k].iter_mut().zip(prev) {
                *v = (6.0 * *v - p) * f;
            }
        }
        for k in (1..len - 1).rev() {
            let f = factor(k);
            let next = lanes[k + 1];
            for (v, q) in lanes[k].iter_mut().zip(next) {
                *v -= f * q;
            }
        }
        for (k, l) in lanes.iter().enumerate() {
            for (r, &v) in l.iter().enumerate() {
                block[r * len + k] = v;
            }
        }
    }
    let mut buf = Vec::with_capacity(len);
    for row in blocks.into_remainder().chunks_exact_mut(len) {
        natural_spline_coeffs(row, &mut buf);
        row.copy_from_slice(&buf);
    }
}

fn prepare<'a>(line: &'a [f64], scheme: InterpScheme, buf: &'a mut Vec<f64>) -> &'a [f64] {
    if scheme == InterpScheme::Cubic {
        natural_spline_coeffs(line, buf);
        buf
    } else {
        line
    }
}

/// Samples `line` at `pos ∈ [0, len-1]`. The spline scheme prepares the
/// whole line on every call; bulk work goes through the resampling paths.
pub fn sample(line: &[f64], pos: f64, scheme: InterpScheme) -> Result<f64> {
    let max = line.len() as f64 - 1.0;
    if line.is_empty() || !(0.0..=max).contains(&pos) {
        return Err(Error::OutOfRange { pos, max });
    }
    Ok(sample_unchecked(line, pos, scheme))
}

/// Like [`sample`] but positions outside the line are clamped to its ends,
/// which amounts to constant extension of the samples.
pub fn sample_clamped(line: &[f64], pos: f64, scheme: InterpScheme) -> f64 {
    let max = line.len() as f64 - 1.0;
    sample_unchecked(line, pos.clamp(0.0, max), scheme)
}

fn sample_unchecked(line: &[f64], pos: f64, scheme: InterpScheme) -> f64 {
    let mut buf = Vec::new();
    let p = prepare(line, scheme, &mut buf);
    scheme.kernel().eval(p, pos)
}

/// `dst[j] = sample_clamped(src, j + offset)` for every `j`.
///
/// All positions share one fractional part, so the interior runs with a
/// fixed set of weights.
pub(crate) fn resample_shifted(src: &[f64], dst: &mut [f64], offset: f64, scheme: InterpScheme) {
    let mut buf = Vec::new();
    let p = prepare(src, scheme, &mut buf);
    resample_prepared(p, dst, offset, scheme.kernel());
}

/// Row-wise [`resample_shifted`]: row `t` of `src` (rows of `src_len`)
/// into row `t` of `dst` (rows of `dst_len`) with offset `offset(t)`.
pub(crate) fn resample_rows_shifted(
    src: &[f64],
    src_len: usize,
    dst: &mut [f64],
    dst_len: usize,
    offset: impl Fn(usize) -> f64,
    scheme: InterpScheme,
) {
    let kernel = scheme.kernel();
    let mut coeffs = Vec::new();
    let prepared = if scheme == InterpScheme::Cubic {
        coeffs.extend_from_slice(src);
        natural_spline_rows(&mut coeffs, src_len);
        &coeffs[..]
    } else {
        src
    };
    for (t, (p, d)) in prepared
        .chunks_exact(src_len)
        .zip(dst.chunks_exact_mut(dst_len))
        .enumerate()
    {
        resample_prepared(p, d, offset(t), kernel);
    }
}

fn resample_prepared(p: &[f64], dst: &mut [f64], offset: f64, kernel: Kernel) {
    let n = p.len();
    let max = n as isize - 1;
    let base = offset.floor();
    let f = offset - base;
    let base = base as isize;
    let clamped = |j: usize| kernel.eval(p, (j as f64 + offset).clamp(0.0, max as f64));
    if f == 0.0 && kernel != Kernel::BSpline {
        for (j, d) in dst.iter_mut().enumerate() {
            *d = p[(j as isize + base).clamp(0, max) as usize];
        }
        return;
    }
    // interior: taps j+base-1 ..= j+base+2 all inside the prepared data
    let j_lo = (1 - base).max(0);
    let j_hi = (max - 2 - base).min(dst.len() as isize - 1);
    if j_lo > j_hi {
        for (j, d) in dst.iter_mut().enumerate() {
            *d = clamped(j);
        }
        return;
    }
    let (jl, jh) = (j_lo as usize, j_hi as usize);
    for (j, d) in dst[..jl].iter_mut().enumerate() {
        *d = clamped(j);
    }
    let start = (jl as isize + base - 1) as usize;
    match kernel {
        Kernel::Linear => {
            let (w0, w1) = (1.0 - f, f);
            for (d, q) in dst[jl..=jh].iter_mut().zip(p[start + 1..].windows(2)) {
                *d = w0 * q[0] + w1 * q[1];
            }
        }
        _ => {
            let w = kernel.weights(f);
            for (d, q) in dst[jl..=jh].iter_mut().zip(p[start..].windows(4)) {
                *d = w[0] * q[0] + w[1] * q[1] + w[2] * q[2] + w[3] * q[3];
            }
        }
    }
    for (j, d) in dst.iter_mut().enumerate().skip(jh + 1) {
        *d = clamped(j);
    }
}

/// A grid prepared for repeated separable 2D sampling with clamped
/// (edge-extended) positions.
pub(crate) struct Sampler2D {
    data: Vec<f64>,
    width: usize,
    height: usize,
    kernel: Kernel,
}

impl Sampler2D {
    pub(crate) fn new(data: &[f64], width: usize, height: usize, scheme: InterpScheme) -> Self {
        let mut prepared = data.to_vec();
        if scheme == InterpScheme::Cubic {
            let mut buf = Vec::with_capacity(width.max(height));
            for row in prepared.chunks_exact_mut(width) {
                natural_spline_coeffs(row, &mut buf);
                row.copy_from_slice(&buf);
            }
            let mut col = vec![0.0; height];
            for x in 0..width {
                for (y, c) in col.iter_mut().enumerate() {
                    *c = prepared[y * width + x];
                }
                natural_spline_coeffs(&col, &mut buf);
                for (y, &c) in buf.iter().enumerate() {
                    prepared[y * width + x] = c;
                }
            }
        }
        Self {
            data: prepared,
            width,
            height,
            kernel: scheme.kernel(),
        }
    }

    pub(crate) fn sample(&self, x: f64, y: f64) -> f64 {
        let (w, h) = (self.width, self.height);
        let x = x.clamp(0.0, w as f64 - 1.0);
        let y = y.clamp(0.0, h as f64 - 1.0);
        let row = |r: usize| &self.data[r * w..(r + 1) * w];
        if h == 1 {
            return self.kernel.eval(row(0), x);
        }
        let i = (y.floor() as usize).min(h - 2);
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(h - 1);
        let mut col = [0.0; 4];
        for (k, r) in (lo..=hi).enumerate() {
            col[k] = self.kernel.eval(row(r), x);
        }
        // the ghost rules are linear, so ghost rows follow from real ones
        self.kernel.eval(&col[..hi - lo + 1], y - lo as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_positions_reproduce_samples() {
        let line = [3.0, -1.0, 4.0, 1.0, 5.0, 9.0];
        for s in InterpScheme::ALL {
            for (k, &v) in line.iter().enumerate() {
                assert!(
                    (sample(&line, k as f64, s).unwrap() - v).abs() < 1e-12,
                    "{s:?}"
                );
            }
        }
    }

    #[test]
    fn affine_and_quadratic() {
        let aff: Vec<f64> = (0..8).map(|i| 2.0 * i as f64 + 1.0).collect();
        let quad: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        for s in InterpScheme::ALL {
            assert!((sample(&aff, 3.5, s).unwrap() - 8.0).abs() < 1e-12);
        }
        assert!(
            (sample(&quad, 3.5, InterpScheme::CubicConvolution).unwrap() - 12.25).abs() < 1e-12
        );
        assert!((sample(&quad, 3.5, InterpScheme::Linear).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn keys_quadratic_exact_near_boundaries_too() {
        let quad: Vec<f64> = (0..6).map(|i| (i as f64 - 1.3).powi(2)).collect();
        for p in [0.25, 0.5, 4.5, 4.9] {
            let want = (p - 1.3) * (p - 1.3);
            assert!(
                (sample(&quad, p, InterpScheme::CubicConvolution).unwrap() - want).abs() < 1e-12
            );
        }
    }

    /// Natural-spline oracle: solve the full system for the second
    /// derivatives by dense elimination and evaluate the piecewise cubic.
    #[allow(clippy::needless_range_loop)]
    fn natural_spline_oracle(s: &[f64], x: f64) -> f64 {
        let n = s.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut r = vec![0.0; n];
        a[0][0] = 1.0;
        a[n - 1][n - 1] = 1.0;
        for k in 1..n - 1 {
            a[k][k - 1] = 1.0;
            a[k][k] = 4.0;
            a[k][k + 1] = 1.0;
            r[k] = 6.0 * (s[k + 1] - 2.0 * s[k] + s[k - 1]);
        }
        for c in 0..n {
            for rr in c + 1..n {
                let m = a[rr][c] / a[c][c];
                for k in c..n {
                    a[rr][k] -= m * a[c][k];
                }
                r[rr] -= m * r[c];
            }
        }
        let mut m2 = vec![0.0; n];
        for c in (0..n).rev() {
            let mut v = r[c];
            for k in c + 1..n {
                v -= a[c][k] * m2[k];
            }
            m2[c] = v / a[c][c];
        }
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        let u = 1.0 - t;
        u * s[i] + t * s[i + 1] + ((u * u * u - u) * m2[i] + (t * t * t - t) * m2[i + 1]) / 6.0
    }

    #[test]
    fn spline_matches_dense_oracle() {
        for n in [3usize, 4, 23, 70] {
            let s: Vec<f64> = (0..n)
                .map(|i| ((i * 7919) % 31) as f64 * 0.1 - 1.0)
                .collect();
            for k in 0..=(n - 1) * 10 {
                let x = k as f64 * 0.1;
                let got = sample(&s, x, InterpScheme::Cubic).unwrap();
                let want = natural_spline_oracle(&s, x);
                assert!((got - want).abs() < 1e-12, "n={n} x={x}: {got} vs {want}");
            }
        }
        assert_eq!(sample(&[2.0], 0.0, InterpScheme::Cubic).unwrap(), 2.0);
        assert!((sample(&[1.0, 3.0], 0.25, InterpScheme::Cubic).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn spline_rows_match_single_rows() {
        for len in [1usize, 2, 3, 5, 40] {
            let rows = 7;
            let data: Vec<f64> = (0..rows * len)
                .map(|i| ((i * 37) % 13) as f64 - 6.0)
                .collect();
            let mut got = data.clone();
            natural_spline_rows(&mut got, len);
            let mut buf = Vec::new();
            for (r, row) in data.chunks_exact(len).enumerate() {
                natural_spline_coeffs(row, &mut buf);
                assert_eq!(&got[r * len..(r + 1) * len], &buf[..], "len={len} row={r}");
            }
        }
    }

    #[test]
    fn out_of_range() {
        let line = [1.0, 2.0, 3.0];
        assert!(matches!(
            sample(&line, -0.1, InterpScheme::Linear),
            Err(Error::OutOfRange { .. })
        ));
        assert!(sample(&line, 2.0001, InterpScheme::Cubic).is_err());
        assert!(sample(&line, 2.0, InterpScheme::Cubic).is_ok());
        assert!(sample(&line, f64::NAN, InterpScheme::CubicConvolution).is_err());
    }

    #[test]
    fn step_overshoot_bounded() {
        let step: Vec<f64> = (0..12).map(|i| if i < 6 { 0.0 } else { 1.0 }).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=1100 {
            let v = sample(&step, k as f64 / 100.0, InterpScheme::CubicConvolution).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
            let l = sample(&step, k as f64 / 100.0, InterpScheme::Linear).unwrap();
            assert!((0.0..=1.0).contains(&l));
        }
        assert!(hi > 1.0 && lo < 0.0);
        // largest single negative tap weight, attained at f = 1/3 and 2/3
        let lobe = 2.0 / 27.0;
        assert!(hi - 1.0 <= lobe + 1e-12 && -lo <= lobe + 1e-12);
        assert!(hi - 1.0 > 0.07);
    }

    #[test]
    fn spline_rings_on_steps() {
        let step: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let v = sample(&step, 18.5, InterpScheme::Cubic).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn resample_matches_scalar() {
        let src: Vec<f64> = (0..17)
            .map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0)
            .collect();
        for s in InterpScheme::ALL {
            for off in [-3.7, -1.0, -0.25, 0.0, 0.4, 1.5, 2.0, 14.2, 20.0] {
                let mut dst = vec![0.0; 19];
                resample_shifted(&src, &mut dst, off, s);
                for (j, &d) in dst.iter().enumerate() {
                    let want = sample_clamped(&src, j as f64 + off, s);
                    assert!((d - want).abs() < 1e-12, "{s:?} off={off} j={j}");
                }
            }
        }
    }

    #[test]
    fn sampler2d_reproduces_planes_and_samples() {
        let (w, h) = (7, 6);
        let plane: Vec<f64> = (0..w * h)
            .map(|i| 0.5 * (i % w) as f64 - 2.0 * (i / w) as f64 + 1.0)
            .collect();
        let bumpy: Vec<f64> = (0..w * h).map(|i| ((i * 13) % 7) as f64).collect();
        for s in InterpScheme::ALL {
            let sp = Sampler2D::new(&plane, w, h, s);
            for (x, y) in [(0.0, 0.0), (2.3, 4.7), (5.9, 0.1), (3.0, 2.5), (6.0, 5.0)] {
                assert!(
                    (sp.sample(x, y) - (0.5 * x - 2.0 * y + 1.0)).abs() < 1e-12,
                    "{s:?}"
                );
            }
            let sp = Sampler2D::new(&bumpy, w, h, s);
            for (i, &v) in bumpy.iter().enumerate() {
                assert!((sp.sample((i % w) as f64, (i / w) as f64) - v).abs() < 1e-12);
            }
        }
        for s in InterpScheme::ALL {
            // on a grid row the 2D sampler is the 1D sampler of that row
            let sp = Sampler2D::new(&bumpy, w, h, s);
            let row = &bumpy[2 * w..3 * w];
            assert!((sp.sample(3.4, 2.0) - sample(row, 3.4, s).unwrap()).abs() < 1e-12);
        }
    }
}
