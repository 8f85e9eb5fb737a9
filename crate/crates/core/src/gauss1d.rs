//! Third-order recursive (IIR) Gaussian filtering of 1D lines.
//!
//! A causal pass `w[n] = B·x[n] + a1·w[n-1] + a2·w[n-2] + a3·w[n-3]` is
//! followed by the mirrored anticausal pass. Both assume the signal is
//! extended by its edge values: the causal history starts at the steady
//! state `x[0]`, and the anticausal pass is initialized with the
//! Triggs–Sdika matrix so that the right edge behaves as if the input
//! continued with `x[N-1]` forever.

use crate::error::{Error, Result};

/// Smallest standard deviation the recursive approximation supports.
pub const MIN_SIGMA: f64 = 0.5;

/// Shortest line accepted by the public line filters (filter order + 1).
pub const MIN_LINE_LEN: usize = 4;

/// Published parameterizations of the third-order recursive Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoeffSet {
    /// Young & van Vliet (1995): piecewise `q(σ)`, `b` cubic in `q`.
    Young1995,
    /// Young, van Vliet & van Ginkel (2002): fixed pole positions scaled by `q(σ)`.
    #[default]
    Young2002,
}

/// Anticausal start-up matrix (Triggs & Sdika).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryHandler {
    pub m: [[f64; 3]; 3],
}

impl BoundaryHandler {
    /// Closed form for the filter `w[n] = x[n]·B + a1 w[n-1] + a2 w[n-2] + a3 w[n-3]`.
    pub fn from_feedback(a: [f64; 3]) -> Self {
        let [a1, a2, a3] = a;
        let scale =
            1.0 / ((1.0 + a1 - a2 + a3) * (1.0 - a1 - a2 - a3) * (1.0 + a2 + (a1 - a3) * a3));
        let m = [
            [
                -a3 * a1 + 1.0 - a3 * a3 - a2,
                (a3 + a1) * (a2 + a3 * a1),
                a3 * (a1 + a3 * a2),
            ],
            [
                a1 + a3 * a2,
                -(a2 - 1.0) * (a2 + a3 * a1),
                -(a3 * a1 + a3 * a3 + a2 - 1.0) * a3,
            ],
            [
                a3 * a1 + a2 + a1 * a1 - a2 * a2,
                a1 * a2 + a3 * a2 * a2 - a1 * a3 * a3 - a3 * a3 * a3 - a3 * a2 + a3,
                a3 * (a1 + a3 * a2),
            ],
        ];
        // the closed form is for unit input weight; the normalized filter
        // scales every deviation by its gain
        let gain = 1.0 - a1 - a2 - a3;
        let m = m.map(|row| row.map(|v| v * scale * gain));
        Self { m }
    }

    /// Anticausal outputs `(y[N-1], y[N], y[N+1])` given the last three causal
    /// outputs `(w[N-1], w[N-2], w[N-3])` and the constant `tail` the input
    /// continues with.
    #[inline]
    pub fn init(&self, last: [f64; 3], tail: f64) -> [f64; 3] {
        let d = [last[0] - tail, last[1] - tail, last[2] - tail];
        let m = &self.m;
        [
            m[0][0] * d[0] + m[0][1] * d[1] + m[0][2] * d[2] + tail,
            m[1][0] * d[0] + m[1][1] * d[1] + m[1][2] * d[2] + tail,
            m[2][0] * d[0] + m[2][1] * d[1] + m[2][2] * d[2] + tail,
        ]
    }
}

/// Coefficients of the recursive Gaussian for one `sigma`.
///
/// `b0..b3` follow the 1995 naming: the feedback weights are `b1/b0`,
/// `b2/b0`, `b3/b0` and `gain = 1 - (b1+b2+b3)/b0`, so the DC gain of each
/// pass is exactly one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursiveCoeffs {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub gain: f64,
    pub sigma: f64,
    feedback: [f64; 3],
    boundary: BoundaryHandler,
}

impl RecursiveCoeffs {
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_set(sigma, CoeffSet::default())
    }

    pub fn with_set(sigma: f64, set: CoeffSet) -> Result<Self> {
        if !sigma.is_finite() || sigma < MIN_SIGMA {
            return Err(Error::UnsupportedSigma(sigma));
        }
        let (b0, b1, b2, b3) = match set {
            CoeffSet::Young1995 => {
                let q = if sigma >= 2.5 {
                    0.98711 * sigma - 0.96330
                } else {
                    3.97156 - 4.14554 * (1.0 - 0.26891 * sigma).sqrt()
                };
                let q2 = q * q;
                let q3 = q2 * q;
                (
                    1.57825 + 2.44413 * q + 1.4281 * q2 + 0.422205 * q3,
                    2.44413 * q + 2.85619 * q2 + 1.26661 * q3,
                    -(1.4281 * q2 + 1.26661 * q3),
                    0.422205 * q3,
                )
            }
            CoeffSet::Young2002 => {
                let (m0, m1, m2) = (1.16680, 1.10783, 1.40586);
                let q = if sigma < 3.556 {
                    -0.2568 + 0.5784 * sigma + 0.0561 * sigma * sigma
                } else {
                    2.5091 + 0.9804 * (sigma - 3.556)
                };
                let q2 = q * q;
                let scale = (m0 + q) * (m1 * m1 + m2 * m2 + 2.0 * m1 * q + q2);
                (
                    scale,
                    q * (2.0 * m0 * m1 + m1 * m1 + m2 * m2 + (2.0 * m0 + 4.0 * m1) * q + 3.0 * q2),
                    -q2 * (m0 + 2.0 * m1 + 3.0 * q),
                    q2 * q,
                )
            }
        };
        let feedback = [b1 / b0, b2 / b0, b3 / b0];
        let gain = 1.0 - (feedback[0] + feedback[1] + feedback[2]);
        Ok(Self {
            b0,
            b1,
            b2,
            b3,
            gain,
            sigma,
            feedback,
            boundary: BoundaryHandler::from_feedback(feedback),
        })
    }

    /// Normalized feedback weights `(a1, a2, a3)`.
    #[inline]
    pub fn feedback(&self) -> [f64; 3] {
        self.feedback
    }

    #[inline]
    pub fn boundary(&self) -> &BoundaryHandler {
        &self.boundary
    }
}

/// Alias matching the operation name used across the crate.
pub fn coeffs_for_sigma(sigma: f64) -> Result<RecursiveCoeffs> {
    RecursiveCoeffs::new(sigma)
}

fn check_len(n: usize) -> Result<()> {
    if n < MIN_LINE_LEN {
        return Err(Error::LineTooShort(n));
    }
    Ok(())
}

/// Causal pass, history initialized to the steady state of `line[0]`.
pub fn forward_pass(line: &mut [f64], c: &RecursiveCoeffs) -> Result<()> {
    check_len(line.len())?;
    forward_raw(line, c);
    Ok(())
}

/// Anticausal pass over the output of [`forward_pass`]. `tail` is the value
/// the *original* input continues with beyond its last sample (its last
/// sample under constant extension).
///
/// On a line whose first three and last three samples are constant this is
/// exactly the mirror image of [`forward_pass`] on the reversed line.
pub fn backward_pass(line: &mut [f64], c: &RecursiveCoeffs, tail: f64) -> Result<()> {
    check_len(line.len())?;
    backward_raw(line, c, tail, line[0]);
    Ok(())
}

/// Forward then backward pass in place.
pub fn gauss1d_inplace(line: &mut [f64], c: &RecursiveCoeffs) -> Result<()> {
    check_len(line.len())?;
    filter_line(line, c);
    Ok(())
}

/// Full recursive Gaussian for lines of any length ≥ 1.
///
/// Samples before the start are the steady state of `line[0]`, which keeps
/// the result identical to filtering the infinitely edge-extended signal
/// even when the line is shorter than the filter order.
#[inline]
pub(crate) fn filter_line(line: &mut [f64], c: &RecursiveCoeffs) {
    if line.is_empty() {
        return;
    }
    let head = line[0];
    let tail = line[line.len() - 1];
    forward_raw(line, c);
    backward_raw(line, c, tail, head);
}

#[inline]
pub(crate) fn forward_raw(line: &mut [f64], c: &RecursiveCoeffs) {
    let [a1, a2, a3] = c.feedback;
    let b = c.gain;
    let x0 = line[0];
    let (mut w1, mut w2, mut w3) = (x0, x0, x0);
    for v in line.iter_mut() {
        let w = b * *v + a1 * w1 + a2 * w2 + a3 * w3;
        *v = w;
        w3 = w2;
        w2 = w1;
        w1 = w;
    }
}

/// `head` is the causal steady state before index 0 (the original first
/// sample); it stands in for `w[-1]`, `w[-2]` on lines shorter than three.
#[inline]
pub(crate) fn backward_raw(line: &mut [f64], c: &RecursiveCoeffs, tail: f64, head: f64) {
    let n = line.len();
    let at = |i: isize| if i >= 0 { line[i as usize] } else { head };
    let last = [at(n as isize - 1), at(n as isize - 2), at(n as isize - 3)];
    let [y0, y1, y2] = c.boundary.init(last, tail);
    let [a1, a2, a3] = c.feedback;
    let b = c.gain;
    line[n - 1] = y0;
    let (mut p1, mut p2, mut p3) = (y0, y1, y2);
    for v in line[..n - 1].iter_mut().rev() {
        let y = b * *v + a1 * p1 + a2 * p2 + a3 * p3;
        *v = y;
        p3 = p2;
        p2 = p1;
        p1 = y;
    }
}
