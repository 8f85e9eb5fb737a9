//! Rotate into the kernel's principal frame, filter along the canvas axes
//! with σ1 and σ2, rotate back.

use super::columns::{filter_columns_raw, filter_rows_raw};
use super::FilterStats;
use crate::decomp::AnisoKernelSpec;
use crate::gauss1d::RecursiveCoeffs;
use crate::image::Image2D;
use crate::interp::{InterpScheme, Sampler2D};

pub(super) fn filter_rotated(
    img: &Image2D,
    spec: &AnisoKernelSpec,
    major: &RecursiveCoeffs,
    minor: &RecursiveCoeffs,
    interp: InterpScheme,
    stats: &mut FilterStats,
) -> Image2D {
    let (w, h) = img.dims();
    let (s, c) = spec.theta_rad().sin_cos();
    let cx = (w / 2) as f64;
    let cy = (h / 2) as f64;
    let half_w = w as f64 / 2.0;
    let half_h = h as f64 / 2.0;
    let u_half = (c.abs() * half_w + s.abs() * half_h).ceil() as usize + 2;
    let v_half = (s.abs() * half_w + c.abs() * half_h).ceil() as usize + 2;
    let (cw, ch) = (2 * u_half + 1, 2 * v_half + 1);

    // canvas (i, j) sits at center + u·ν + v·ν⊥ with ν = (c, s), ν⊥ = (-s, c)
    let src = Sampler2D::new(img.data(), w, h, interp);
    let mut canvas = vec![0.0; cw * ch];
    for j in 0..ch {
        let v = j as f64 - v_half as f64;
        for i in 0..cw {
            let u = i as f64 - u_half as f64;
            let x = cx + u * c - v * s;
            let y = cy + u * s + v * c;
            canvas[j * cw + i] = src.sample(x, y);
        }
    }
    stats.pass(cw * ch);

    filter_rows_raw(&mut canvas, cw, major);
    filter_columns_raw(&mut canvas, cw, ch, minor);

    let rotated = Sampler2D::new(&canvas, cw, ch, interp);
    let mut out = img.clone();
    for y in 0..h {
        let dy = y as f64 - cy;
        for x in 0..w {
            let dx = x as f64 - cx;
            let u = dx * c + dy * s + u_half as f64;
            let v = -dx * s + dy * c + v_half as f64;
            out.set(x, y, rotated.sample(u, v));
        }
    }
    stats.pass(w * h);
    out
}
