//! Direct spatial convolution with the sampled kernel, used as the
//! reference the recursive filters are checked against.

use crate::decomp::AnisoKernelSpec;
use crate::image::Image2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseTap {
    pub dx: i64,
    pub dy: i64,
    pub weight: f64,
}

/// Kernel taps inside the `±⌈4σ1⌉` box, renormalized to unit sum.
///
/// Taps beyond Mahalanobis radius 6 are dropped; their total weight is
/// below 1e-7 and leaving them out keeps elongated kernels sparse.
pub fn dense_kernel_taps(spec: &AnisoKernelSpec) -> Vec<DenseTap> {
    let r = (4.0 * spec.sigma1).ceil() as i64;
    let (s, c) = spec.theta_rad().sin_cos();
    let (v1, v2) = (spec.sigma1 * spec.sigma1, spec.sigma2 * spec.sigma2);
    let mut taps = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (dx as f64, dy as f64);
            let along = x * c + y * s;
            let across = -x * s + y * c;
            let m2 = along * along / v1 + across * across / v2;
            if m2 > 36.0 {
                continue;
            }
            taps.push(DenseTap {
                dx,
                dy,
                weight: (-0.5 * m2).exp(),
            });
        }
    }
    let sum: f64 = taps.iter().map(|t| t.weight).sum();
    for t in &mut taps {
        t.weight /= sum;
    }
    taps
}

/// Convolution with constant extension at the borders.
pub(super) fn filter_dense(img: &Image2D, spec: &AnisoKernelSpec) -> Image2D {
    let taps = dense_kernel_taps(spec);
    convolve_taps(img, &taps)
}

pub(crate) fn convolve_taps(img: &Image2D, taps: &[DenseTap]) -> Image2D {
    let (w, h) = img.dims();
    let r = taps
        .iter()
        .map(|t| t.dx.abs().max(t.dy.abs()))
        .max()
        .unwrap_or(0) as usize;
    let pw = w + 2 * r;
    let ph = h + 2 * r;
    let mut pad = vec![0.0; pw * ph];
    for py in 0..ph {
        let sy = py.saturating_sub(r).min(h - 1);
        let src = img.row(sy);
        let dst = &mut pad[py * pw..(py + 1) * pw];
        for (px, d) in dst.iter_mut().enumerate() {
            *d = src[px.saturating_sub(r).min(w - 1)];
        }
    }
    let mut out = vec![0.0; w * h];
    for tap in taps {
        let ox = (r as i64 + tap.dx) as usize;
        let oy = (r as i64 + tap.dy) as usize;
        for y in 0..h {
            let src = &pad[(y + oy) * pw + ox..(y + oy) * pw + ox + w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += tap.weight * s;
            }
        }
    }
    Image2D::from_vec(w, h, out).expect("same dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_sum_to_one_and_are_symmetric() {
        let spec = AnisoKernelSpec::new(10.0, 1.25, 33.0).unwrap();
        let taps = dense_kernel_taps(&spec);
        let sum: f64 = taps.iter().map(|t| t.weight).sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let lookup = |dx: i64, dy: i64| {
            taps.iter()
                .find(|t| t.dx == dx && t.dy == dy)
                .map(|t| t.weight)
        };
        for t in taps.iter().step_by(17) {
            assert_eq!(lookup(-t.dx, -t.dy), Some(t.weight));
        }
    }

    #[test]
    fn dropped_mass_is_negligible() {
        let spec = AnisoKernelSpec::new(5.0, 2.0, 20.0).unwrap();
        let r = 20i64;
        let (s, c) = spec.theta_rad().sin_cos();
        let mut all = 0.0;
        let mut kept = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (dx as f64, dy as f64);
                let a = x * c + y * s;
                let b = -x * s + y * c;
                let m2 = a * a / 25.0 + b * b / 4.0;
                let g = (-0.5 * m2).exp();
                all += g;
                if m2 <= 36.0 {
                    kept += g;
                }
            }
        }
        assert!((all - kept) / all < 1e-5);
    }
}
