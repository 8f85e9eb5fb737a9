//! Shear the image so the ν∗ lines become canvas columns, filter on the
//! canvas grid, shear back.

use super::columns::{filter_columns_raw, filter_rows_raw};
use super::FilterStats;
use crate::gauss1d::RecursiveCoeffs;
use crate::image::Image2D;
use crate::interp::{resample_shifted, InterpScheme};

pub(super) fn geometric_x1(
    img: Image2D,
    mu: f64,
    axis_c: &RecursiveCoeffs,
    line_c: &RecursiveCoeffs,
    interp: InterpScheme,
    stats: &mut FilterStats,
) -> Image2D {
    let (w, h) = img.dims();
    let span = mu * (h - 1) as f64;
    // canvas column c holds line k = kmin + c; two spare lines on each side
    // keep the cubic taps of the back-shear inside the canvas
    let kmin = (-span.max(0.0)).floor() as i64 - 2;
    let kmax = (w as f64 - 1.0 - span.min(0.0)).ceil() as i64 + 2;
    let cw = (kmax - kmin + 1) as usize;

    let mut canvas = vec![0.0; cw * h];
    for t in 0..h {
        let off = kmin as f64 + mu * t as f64;
        resample_shifted(img.row(t), &mut canvas[t * cw..(t + 1) * cw], off, interp);
    }
    stats.pass(cw * h);

    filter_rows_raw(&mut canvas, cw, axis_c);
    filter_columns_raw(&mut canvas, cw, h, line_c);

    let mut out = img;
    for t in 0..h {
        let off = -(kmin as f64) - mu * t as f64;
        resample_shifted(&canvas[t * cw..(t + 1) * cw], out.row_mut(t), off, interp);
    }
    stats.pass(w * h);
    out
}
