//! Two-dimensional anisotropic Gaussian filters.
//!
//! All decomposition-based algorithms filter along the grid axis of the
//! plan first and along the sheared ν∗ lines second. They differ only in
//! how lattice samples move between the grid and the line filters:
//!
//! | algorithm    | interpolation passes | extra memory                 |
//! |--------------|----------------------|------------------------------|
//! | `Hybrid`     | 2 (gather, scatter)  | one lattice image            |
//! | `LineBuffer` | 4 (per read / write) | one lattice image            |
//! | `Geometric`  | 2 (shear, unshear)   | sheared canvas, `W + |μ|H`   |
//! | `NaiveRotation` | 2 (2D resampling) | rotated bounding box         |
//!
//! Boundaries are constant extensions of the image everywhere; the
//! oracle clamps its taps, the lattice algorithms pad by edge replication.

mod columns;
mod dense;
mod geometric;
mod lattice;
mod naive;

use crate::decomp::{self, AnisoKernelSpec, Axis, DecompPlan};
use crate::error::{Error, Result};
use crate::gauss1d::{CoeffSet, RecursiveCoeffs};
use crate::image::{unit_impulse, Image2D};
use crate::interp::InterpScheme;

pub use dense::{dense_kernel_taps, DenseTap};

/// Smallest image edge accepted by [`filter`].
pub const MIN_IMAGE_EDGE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlgorithmKind {
    NaiveRotation,
    Geometric,
    LineBuffer,
    Hybrid,
    DenseOracle,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::NaiveRotation => "naive",
            AlgorithmKind::Geometric => "geometric",
            AlgorithmKind::LineBuffer => "linebuffer",
            AlgorithmKind::Hybrid => "hybrid",
            AlgorithmKind::DenseOracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "naive" | "naive-rotation" | "rotation" => AlgorithmKind::NaiveRotation,
            "geometric" => AlgorithmKind::Geometric,
            "linebuffer" | "line-buffer" => AlgorithmKind::LineBuffer,
            "hybrid" => AlgorithmKind::Hybrid,
            "oracle" | "dense" => AlgorithmKind::DenseOracle,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown algorithm {other:?}"
                )))
            }
        })
    }
}

/// Algorithm choice plus its interpolation scheme and the major-axis
/// modification flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FilterAlgorithm {
    pub kind: AlgorithmKind,
    pub interp: InterpScheme,
    pub modification: bool,
}

impl FilterAlgorithm {
    pub const fn new(kind: AlgorithmKind, interp: InterpScheme, modification: bool) -> Self {
        Self {
            kind,
            interp,
            modification,
        }
    }

    pub const fn hybrid(interp: InterpScheme) -> Self {
        Self::new(AlgorithmKind::Hybrid, interp, false)
    }

    pub const fn hybrid_mod(interp: InterpScheme) -> Self {
        Self::new(AlgorithmKind::Hybrid, interp, true)
    }

    pub const fn line_buffer(interp: InterpScheme) -> Self {
        Self::new(AlgorithmKind::LineBuffer, interp, false)
    }

    pub const fn oracle() -> Self {
        Self::new(AlgorithmKind::DenseOracle, InterpScheme::Linear, false)
    }

    /// Short label such as `hybrid-mod-cubic`.
    pub fn label(&self) -> String {
        match self.kind {
            AlgorithmKind::DenseOracle => "oracle".to_string(),
            AlgorithmKind::NaiveRotation => format!("naive-{}", self.interp.name()),
            k => {
                if self.modification {
                    format!("{}-mod-{}", k.name(), self.interp.name())
                } else {
                    format!("{}-{}", k.name(), self.interp.name())
                }
            }
        }
    }

    /// Inverse of [`FilterAlgorithm::label`].
    pub fn parse_label(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let kind = AlgorithmKind::parse(parts[0])?;
        let mut interp = InterpScheme::Linear;
        let mut modification = false;
        for p in &parts[1..] {
            match *p {
                "mod" => modification = true,
                other => {
                    interp = InterpScheme::parse(other).map_err(|_| {
                        Error::InvalidParameter(format!("bad algorithm label part {other:?}"))
                    })?
                }
            }
        }
        Ok(Self::new(kind, interp, modification))
    }
}

/// Knobs that are not part of the algorithm identity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterOptions {
    pub coeff_set: CoeffSet,
    /// Use the literal closed-form grid-axis σ
    /// instead of the covariance-consistent one. Comparison runs only.
    pub decomp_as_printed: bool,
}

/// Interpolation bookkeeping of one filter call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterStats {
    /// Number of whole-image resampling passes.
    pub interp_passes: u32,
    /// Number of interpolated samples produced over all passes.
    pub interp_samples: u64,
}

impl FilterStats {
    fn pass(&mut self, samples: usize) {
        self.interp_passes += 1;
        self.interp_samples += samples as u64;
    }
}

/// Anisotropic Gaussian filtering of `img` with the selected algorithm.
pub fn filter(img: &Image2D, spec: &AnisoKernelSpec, algo: FilterAlgorithm) -> Result<Image2D> {
    filter_with(img, spec, algo, &FilterOptions::default()).map(|(out, _)| out)
}

/// [`filter`] with explicit options, also returning interpolation counters.
pub fn filter_with(
    img: &Image2D,
    spec: &AnisoKernelSpec,
    algo: FilterAlgorithm,
    opts: &FilterOptions,
) -> Result<(Image2D, FilterStats)> {
    spec.validate()?;
    let (w, h) = img.dims();
    if w < MIN_IMAGE_EDGE || h < MIN_IMAGE_EDGE {
        return Err(Error::InvalidSize(format!(
            "filters need at least {MIN_IMAGE_EDGE}x{MIN_IMAGE_EDGE}, got {w}x{h}"
        )));
    }
    let mut stats = FilterStats::default();
    let out = match algo.kind {
        AlgorithmKind::DenseOracle => dense::filter_dense(img, spec),
        AlgorithmKind::NaiveRotation => {
            let c1 = RecursiveCoeffs::with_set(spec.sigma1, opts.coeff_set)?;
            let c2 = RecursiveCoeffs::with_set(spec.sigma2, opts.coeff_set)?;
            naive::filter_rotated(img, spec, &c1, &c2, algo.interp, &mut stats)
        }
        kind => {
            let plan = make_plan(spec, algo.modification, opts.decomp_as_printed);
            let axis_c = RecursiveCoeffs::with_set(plan.sigma_axis, opts.coeff_set)?;
            let line_c = RecursiveCoeffs::with_set(plan.sigma_step(), opts.coeff_set)?;
            let run = |src: Image2D, stats: &mut FilterStats| match kind {
                AlgorithmKind::Hybrid => {
                    lattice::hybrid_x1(src, plan.mu, &axis_c, &line_c, algo.interp, stats)
                }
                AlgorithmKind::LineBuffer => {
                    lattice::line_buffer_x1(src, plan.mu, &axis_c, &line_c, algo.interp, stats)
                }
                AlgorithmKind::Geometric => {
                    geometric::geometric_x1(src, plan.mu, &axis_c, &line_c, algo.interp, stats)
                }
                _ => unreachable!(),
            };
            match plan.axis {
                Axis::X1 => run(img.clone(), &mut stats),
                Axis::X2 => run(img.transpose(), &mut stats).transpose(),
            }
        }
    };
    Ok((out, stats))
}

fn make_plan(spec: &AnisoKernelSpec, modification: bool, as_printed: bool) -> DecompPlan {
    if !as_printed {
        return decomp::plan_auto(spec, modification);
    }
    if modification && decomp::uses_x2(spec.theta_mod180()) {
        DecompPlan {
            axis: Axis::X2,
            ..decomp::plan_x1_as_printed(&spec.transposed())
        }
    } else {
        decomp::plan_x1_as_printed(spec)
    }
}

/// Unit-impulse response of the filter on an `n`×`n` image.
pub fn reconstruct_kernel(
    spec: &AnisoKernelSpec,
    algo: FilterAlgorithm,
    n: usize,
) -> Result<Image2D> {
    reconstruct_kernel_with(spec, algo, n, &FilterOptions::default())
}

pub fn reconstruct_kernel_with(
    spec: &AnisoKernelSpec,
    algo: FilterAlgorithm,
    n: usize,
    opts: &FilterOptions,
) -> Result<Image2D> {
    spec.validate()?;
    if (n as f64) < 8.0 * spec.sigma1 {
        return Err(Error::InvalidSize(format!(
            "kernel reconstruction needs N >= 8*sigma1 = {}, got {n}",
            8.0 * spec.sigma1
        )));
    }
    let imp = unit_impulse(n)?;
    filter_with(&imp, spec, algo, opts).map(|(k, _)| k)
}

/// Theoretical (multiplications, additions) per pixel, as tabulated for the
/// line-buffer and hybrid algorithms. Documentation only; never measured.
pub fn op_counts(algo: FilterAlgorithm) -> Result<(u32, u32)> {
    match (algo.kind, algo.interp) {
        (AlgorithmKind::LineBuffer, InterpScheme::Linear) => Ok((21, 16)),
        (AlgorithmKind::Hybrid, InterpScheme::Linear) => Ok((17, 14)),
        (AlgorithmKind::Hybrid, InterpScheme::Cubic) => Ok((27, 20)),
        _ => Err(Error::NotTabulated(algo.label())),
    }
}

/// Separable recursive filtering along rows (`sigma_x`) then columns (`sigma_y`).
pub fn separable_recursive(img: &Image2D, sigma_x: f64, sigma_y: f64) -> Result<Image2D> {
    let cx = RecursiveCoeffs::new(sigma_x)?;
    let cy = RecursiveCoeffs::new(sigma_y)?;
    let mut out = img.clone();
    columns::filter_rows(&mut out, &cx);
    columns::filter_columns(&mut out, &cy);
    Ok(out)
}
