//! Synthetic fiber bundles, noise/contrast blending, the angular-error
//! protocol, and the kernel-accuracy and throughput experiments.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::anisofilter::{filter, reconstruct_kernel, FilterAlgorithm};
use crate::decomp::AnisoKernelSpec;
use crate::error::{Error, Result};
use crate::image::{l2_distance, median3x3, sample_true_kernel, BinaryMask, Image2D};
use crate::interp::InterpScheme;
use crate::orientation::{
    hessian_estimate, mr_estimate, structure_tensor_estimate, MRParams, OrientationField,
    TensorParams, DEFAULT_MR_ALGO, TIE_EPS,
};

pub const DEFAULT_SIZE: usize = 512;
pub const MASK_THRESHOLD: f64 = 0.75;
pub const MASK_RADIUS: f64 = 206.0;
pub const MR_SIGMA1: f64 = 20.0;
pub const DEFAULT_CONTRASTS: [f64; 9] = [0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.75, 1.0];

/// Noise substreams of one seed.
const STREAM_UNIFORM: u64 = 0;
const STREAM_GAUSSIAN: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberImageSpec {
    pub size: usize,
    pub theta: f64,
    pub w: f64,
    pub frequency_scaled: bool,
}

impl FiberImageSpec {
    pub fn new(size: usize, theta: f64, w: f64) -> Self {
        Self {
            size,
            theta,
            w,
            frequency_scaled: true,
        }
    }

    /// Fiber radius `πw/2`: half the distance between two dark troughs.
    pub fn radius(&self) -> f64 {
        fiber_radius(self.w)
    }
}

pub fn fiber_radius(w: f64) -> f64 {
    PI * w / 2.0
}

/// Parallel sinusoidal fibers running at `theta` (same angle convention as
/// the filters): value `sin(d/w)/2 + 1/2` where `d = x·sinθ - y·cosθ` is the
/// signed distance across the fibers. Without frequency scaling the period
/// no longer depends on `w`; only the amplitude shrinks to `1/(2w)`.
pub fn make_fiber_image(spec: &FiberImageSpec) -> Result<Image2D> {
    if spec.size < 8 {
        return Err(Error::InvalidSize(format!(
            "fiber image needs N >= 8, got {}",
            spec.size
        )));
    }
    if !(spec.w > 0.0 && spec.w.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "width must be positive, got {}",
            spec.w
        )));
    }
    let (s, c) = spec.theta.to_radians().sin_cos();
    let w = spec.w;
    let scaled = spec.frequency_scaled;
    Image2D::from_fn(spec.size, spec.size, |x, y| {
        let d = x as f64 * s - y as f64 * c;
        let v = if scaled {
            (d / w).sin() / 2.0 + 0.5
        } else {
            d.sin() / (2.0 * w) + 0.5
        };
        v.clamp(0.0, 1.0)
    })
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// I.i.d. uniform `[0, 1)` pixels, reproducible from `seed`.
pub fn make_noise(n: usize, seed: u64) -> Result<Image2D> {
    let mut rng = noise_rng(seed, STREAM_UNIFORM);
    Image2D::from_fn(n, n, |_, _| rng.gen::<f64>())
}

/// Normal noise with mean 0.5 and std 0.15, clipped to `[0, 1]`.
pub fn gaussian_noise(n: usize, seed: u64) -> Result<Image2D> {
    let mut rng = noise_rng(seed, STREAM_GAUSSIAN);
    let dist = Normal::<f64>::new(0.5, 0.15).expect("valid normal");
    Image2D::from_fn(n, n, |_, _| dist.sample(&mut rng).clamp(0.0, 1.0))
}

/// `(1 - c)·b + c·f`.
pub fn blend(b: &Image2D, f: &Image2D, c: f64) -> Result<Image2D> {
    b.ensure_same_dims(f)?;
    check_contrast(c)?;
    let data = b
        .data()
        .iter()
        .zip(f.data())
        .map(|(&p, &q)| (1.0 - c) * p + c * q)
        .collect();
    Image2D::from_vec(b.width(), b.height(), data)
}

fn check_contrast(c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::InvalidParameter(format!(
            "contrast must be in [0, 1], got {c}"
        )));
    }
    Ok(())
}

/// Center of the evaluation disk: the geometric center `(N-1)/2`, so the
/// disk is symmetric under the square's rotations and reflections.
fn disk_center(n: usize) -> f64 {
    (n as f64 - 1.0) / 2.0
}

fn in_disk(x: usize, y: usize, center: f64, radius: f64) -> bool {
    let (dx, dy) = (x as f64 - center, y as f64 - center);
    dx * dx + dy * dy <= radius * radius
}

/// Fiber-core pixels (`value > threshold`) inside the centered disk.
pub fn fiber_mask(f: &Image2D, threshold: f64, radius: f64) -> Result<BinaryMask> {
    let (w, h) = f.dims();
    if w != h {
        return Err(Error::InvalidSize(format!(
            "fiber mask needs a square image, got {w}x{h}"
        )));
    }
    let center = disk_center(w);
    BinaryMask::from_fn(w, h, |x, y| {
        f.get(x, y) > threshold && in_disk(x, y, center, radius)
    })
}

/// Distance between two axial directions in degrees, in `[0, 90]`.
#[inline]
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Mean angular error over pixels that are both masked and valid.
pub fn mae(est: &OrientationField, truth: f64, mask: &BinaryMask) -> Result<f64> {
    if est.dims() != mask.dims() {
        return Err(Error::mismatch(est.dims(), mask.dims()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (&m, &v)) in mask.bits().iter().zip(est.valid.bits()).enumerate() {
        if m && v {
            sum += angular_distance(est.angle.data()[i], truth);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    MaxResponse(FilterAlgorithm),
    StructureTensor,
    Hessian,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MaxResponse(_) => "mr",
            Method::StructureTensor => "tensor",
            Method::Hessian => "hessian",
        }
    }

    /// `mr:<algorithm label>`, `tensor` or `hessian`.
    pub fn label(&self) -> String {
        match self {
            Method::MaxResponse(a) => format!("mr:{}", a.label()),
            m => m.name().to_string(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tensor" => Ok(Method::StructureTensor),
            "hessian" => Ok(Method::Hessian),
            "mr" => Ok(Method::MaxResponse(DEFAULT_MR_ALGO)),
            _ => match s.strip_prefix("mr:") {
                Some(a) => Ok(Method::MaxResponse(FilterAlgorithm::parse_label(a)?)),
                None => Err(Error::InvalidParameter(format!("unknown method {s:?}"))),
            },
        }
    }

    fn algorithm(&self) -> Option<FilterAlgorithm> {
        match self {
            Method::MaxResponse(a) => Some(*a),
            _ => None,
        }
    }
}

/// The MR variants compared on the synthetic data, plus the two
/// derivative-based estimators.
pub fn default_methods() -> Vec<Method> {
    let mut m: Vec<Method> = accuracy_algorithms()
        .into_iter()
        .map(Method::MaxResponse)
        .collect();
    m.push(Method::StructureTensor);
    m.push(Method::Hessian);
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastConfig {
    pub size: usize,
    pub seeds: Vec<u64>,
    pub contrasts: Vec<f64>,
    pub widths: Vec<f64>,
    /// Step of the true fiber directions `0, step, …`.
    pub theta_step: f64,
    /// Step of the MR angle set; `None` uses the fiber-direction grid.
    pub mr_angle_step: Option<f64>,
    pub methods: Vec<Method>,
    pub median: bool,
    pub frequency_scaled: bool,
    pub sigma1: f64,
    pub mask_threshold: f64,
    pub mask_radius: f64,
}

impl ContrastConfig {
    /// 10 seeds, 5° steps.
    pub fn desk() -> Self {
        Self {
            size: DEFAULT_SIZE,
            seeds: (0..10).collect(),
            contrasts: DEFAULT_CONTRASTS.to_vec(),
            widths: vec![1.0, 2.0],
            theta_step: 5.0,
            mr_angle_step: None,
            methods: default_methods(),
            median: false,
            frequency_scaled: true,
            sigma1: MR_SIGMA1,
            mask_threshold: MASK_THRESHOLD,
            mask_radius: MASK_RADIUS,
        }
    }

    /// 50 seeds, 1° steps.
    pub fn full() -> Self {
        Self {
            seeds: (0..50).collect(),
            theta_step: 1.0,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty()
            || self.contrasts.is_empty()
            || self.widths.is_empty()
            || self.methods.is_empty()
        {
            return Err(Error::InvalidParameter(
                "seeds, contrasts, widths and methods must be non-empty".into(),
            ));
        }
        for &c in &self.contrasts {
            check_contrast(c)?;
        }
        for &w in &self.widths {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "width must be positive, got {w}"
                )));
            }
        }
        MRParams::angle_grid(self.theta_step)?;
        if let Some(s) = self.mr_angle_step {
            MRParams::angle_grid(s)?;
        }
        if self.size < 8 {
            return Err(Error::InvalidSize(format!(
                "synthetic images need N >= 8, got {}",
                self.size
            )));
        }
        Ok(())
    }

    fn mr_params(&self, w: f64, algo: FilterAlgorithm) -> Result<MRParams> {
        let angles = MRParams::angle_grid(self.mr_angle_step.unwrap_or(self.theta_step))?;
        let p = MRParams::new(self.sigma1, 0.75 * w, algo).with_angles(angles);
        p.validate()?;
        Ok(p)
    }
}

/// Worst MAE over fiber directions for one (method, w, c, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub method: Method,
    pub w: f64,
    pub c: f64,
    pub seed: u64,
    pub max_mae: f64,
    pub worst_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaeAggregate {
    pub method: Method,
    pub w: f64,
    pub c: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub median: bool,
    pub rows: Vec<MaeRow>,
    pub aggregates: Vec<MaeAggregate>,
}

impl ExperimentReport {
    fn from_rows(rows: Vec<MaeRow>, median: bool) -> Self {
        let mut aggregates: Vec<MaeAggregate> = Vec::new();
        for r in &rows {
            if aggregates
                .iter()
                .any(|a| a.method == r.method && a.w == r.w && a.c == r.c)
            {
                continue;
            }
            let v: Vec<f64> = rows
                .iter()
                .filter(|q| q.method == r.method && q.w == r.w && q.c == r.c)
                .map(|q| q.max_mae)
                .collect();
            let (mean, std) = mean_std(&v);
            aggregates.push(MaeAggregate {
                method: r.method,
                w: r.w,
                c: r.c,
                mean,
                std,
                n: v.len(),
            });
        }
        Self {
            median,
            rows,
            aggregates,
        }
    }

    pub fn aggregate(&self, method: Method, w: f64, c: f64) -> Option<&MaeAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.method == method && a.w == w && a.c == c)
    }

    /// Mean/std per (method, w, c).
    pub fn write_summary_csv(&self, out: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "method",
            "algorithm",
            "interp",
            "modification",
            "median",
            "w",
            "c",
            "mean_max_mae",
            "std_max_mae",
            "n",
        ])?;
        for a in &self.aggregates {
            let mut rec = method_fields(&a.method);
            rec.push(self.median.to_string());
            rec.extend([
                a.w.to_string(),
                a.c.to_string(),
                fmt(a.mean),
                fmt(a.std),
                a.n.to_string(),
            ]);
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// One row per (method, w, c, seed).
    pub fn write_rows_csv(&self, out: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "method",
            "algorithm",
            "interp",
            "modification",
            "median",
            "w",
            "c",
            "seed",
            "max_mae",
            "worst_theta",
        ])?;
        for r in &self.rows {
            let mut rec = method_fields(&r.method);
            rec.push(self.median.to_string());
            rec.extend([
                r.w.to_string(),
                r.c.to_string(),
                r.seed.to_string(),
                fmt(r.max_mae),
                r.worst_theta.to_string(),
            ]);
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn method_fields(m: &Method) -> Vec<String> {
    match m.algorithm() {
        Some(a) => vec![
            m.name().into(),
            a.kind.name().into(),
            a.interp.name().into(),
            a.modification.to_string(),
        ],
        None => vec![m.name().into(), String::new(), String::new(), String::new()],
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per (seed, contrast): worst MAE and the direction where it occurred.
#[derive(Debug, Clone, Copy)]
struct Worst {
    mae: f64,
    theta: f64,
}

impl Worst {
    const NONE: Worst = Worst {
        mae: f64::NEG_INFINITY,
        theta: 0.0,
    };

    fn update(&mut self, mae: f64, theta: f64) {
        if mae > self.mae {
            *self = Worst { mae, theta };
        }
    }
}

/// For every seed and contrast: the maximum over fiber directions of the
/// MAE, then mean and std over seeds.
pub fn run_contrast_experiment(cfg: &ContrastConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let thetas = MRParams::angle_grid(cfg.theta_step)?;
    let noise: Vec<Image2D> = cfg
        .seeds
        .par_iter()
        .map(|&s| make_noise(cfg.size, s))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &w in &cfg.widths {
        let masks: Vec<Vec<usize>> = thetas
            .iter()
            .map(|&t| {
                Ok(fiber_mask(
                    &fiber_image(cfg, t, w)?,
                    cfg.mask_threshold,
                    cfg.mask_radius,
                )?
                .indices())
            })
            .collect::<Result<_>>()?;
        if masks.iter().any(|m| m.is_empty()) {
            return Err(Error::EmptyMask);
        }
        for method in &cfg.methods {
            let worst = match method {
                Method::MaxResponse(algo) if !cfg.median => {
                    mr_by_linearity(cfg, w, *algo, &thetas, &masks, &noise)?
                }
                _ => direct_cells(cfg, w, method, &thetas, &masks, &noise)?,
            };
            for (si, &seed) in cfg.seeds.iter().enumerate() {
                for (ci, &c) in cfg.contrasts.iter().enumerate() {
                    let wst = worst[si * cfg.contrasts.len() + ci];
                    rows.push(MaeRow {
                        method: *method,
                        w,
                        c,
                        seed,
                        max_mae: wst.mae,
                        worst_theta: wst.theta,
                    });
                }
            }
        }
    }
    Ok(ExperimentReport::from_rows(rows, cfg.median))
}

fn fiber_image(cfg: &ContrastConfig, theta: f64, w: f64) -> Result<Image2D> {
    make_fiber_image(&FiberImageSpec {
        size: cfg.size,
        theta,
        w,
        frequency_scaled: cfg.frequency_scaled,
    })
}

fn mean_error(angles: &[f64], truth: f64) -> f64 {
    angles
        .iter()
        .map(|&a| angular_distance(a, truth))
        .sum::<f64>()
        / angles.len() as f64
}

/// Above this many bytes of cached noise responses the seeds are processed
/// in chunks (and the fiber responses recomputed per chunk).
const RESPONSE_CACHE_BYTES: usize = 768 << 20;

/// MR on `(1-c)·B + c·F` without filtering every blend: the filter is
/// linear, so the response is `(1-c)·(g∗B) + c·(g∗F)`. Noise responses are
/// cached inside the evaluation disk; fiber responses are streamed per
/// direction and angle.
fn mr_by_linearity(
    cfg: &ContrastConfig,
    w: f64,
    algo: FilterAlgorithm,
    thetas: &[f64],
    masks: &[Vec<usize>],
    noise: &[Image2D],
) -> Result<Vec<Worst>> {
    let p = cfg.mr_params(w, algo)?;
    let n = cfg.size;
    let center = disk_center(n);
    let mut disk_pos = vec![u32::MAX; n * n];
    let mut disk = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if in_disk(x, y, center, cfg.mask_radius) {
                disk_pos[y * n + x] = disk.len() as u32;
                disk.push(y * n + x);
            }
        }
    }
    let kernel = |phi: f64| AnisoKernelSpec::new(p.sigma1, p.sigma2, phi);
    let na = p.angles.len();
    let nc = cfg.contrasts.len();
    let per_seed = (na * disk.len() * 8).max(1);
    let chunk = (RESPONSE_CACHE_BYTES / per_seed).clamp(1, noise.len());

    let mut worst = vec![Worst::NONE; noise.len() * nc];
    for (ci, seeds) in noise.chunks(chunk).enumerate() {
        // noise responses at disk pixels, per seed, pixel-major: the
        // responses of disk pixel `d` to all angles are `[d*na, (d+1)*na)`
        // noise has zero weight when every contrast is 1
        let noise_free = cfg.contrasts.iter().all(|&c| c == 1.0);
        let gb: Vec<Vec<f64>> = seeds
            .par_iter()
            .map(|b| {
                let mut g = vec![0.0; disk.len() * na];
                if noise_free {
                    return Ok(g);
                }
                for (a, &phi) in p.angles.iter().enumerate() {
                    let r = filter(b, &kernel(phi)?, algo)?;
                    for (d, &i) in disk.iter().enumerate() {
                        g[d * na + a] = r.data()[i];
                    }
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let per_theta: Vec<Vec<f64>> = thetas
            .par_iter()
            .zip(masks)
            .map(|(&theta, mask)| {
                let f = fiber_image(cfg, theta, w)?;
                let pos: Vec<usize> = mask.iter().map(|&i| disk_pos[i] as usize).collect();
                let m = mask.len();
                let contrasts = contrast_lanes(&cfg.contrasts);
                // responses laid out pixel-major so each pixel's angle scan
                // is contiguous
                let mut gf = vec![0.0; m * na];
                for (a, &phi) in p.angles.iter().enumerate() {
                    let r = filter(&f, &kernel(phi)?, algo)?;
                    for (k, &i) in mask.iter().enumerate() {
                        gf[k * na + a] = r.data()[i];
                    }
                }
                let mut sums = vec![0.0; seeds.len() * nc];
                for (s, b) in gb.iter().enumerate() {
                    for (&d, g) in pos.iter().zip(gf.chunks_exact(na)) {
                        let q = &b[d * na..(d + 1) * na];
                        for (ci, &(c, cc)) in contrasts.iter().enumerate().step_by(LANES) {
                            let lanes = (contrasts.len() - ci).min(LANES);
                            let arg = argmax_lanes(&c, &cc, q, g);
                            for l in 0..lanes {
                                sums[s * nc + ci + l] += angular_distance(p.angles[arg[l]], theta);
                            }
                        }
                    }
                }
                Ok(sums.into_iter().map(|v| v / m as f64).collect())
            })
            .collect::<Result<_>>()?;
        for (maes, &theta) in per_theta.iter().zip(thetas) {
            for (j, &m) in maes.iter().enumerate() {
                worst[ci * chunk * nc + j].update(m, theta);
            }
        }
    }
    Ok(worst)
}

const LANES: usize = 4;

/// `(c, 1 - c)` per contrast, grouped in lanes; entry `i` holds the lanes
/// starting at contrast `i` (padded with `c = 1`).
fn contrast_lanes(contrasts: &[f64]) -> Vec<([f64; LANES], [f64; LANES])> {
    (0..contrasts.len())
        .map(|i| {
            let c: [f64; LANES] =
                std::array::from_fn(|l| contrasts.get(i + l).copied().unwrap_or(1.0));
            (c, c.map(|v| 1.0 - v))
        })
        .collect()
}

/// Argmax over angles of `(1-c)·q + c·g` for several contrasts at once,
/// with the tie rule of the MR estimator (earlier angle wins near-ties).
#[inline]
fn argmax_lanes(c: &[f64; LANES], cc: &[f64; LANES], q: &[f64], g: &[f64]) -> [usize; LANES] {
    let mut best: [f64; LANES] = std::array::from_fn(|l| cc[l] * q[0] + c[l] * g[0]);
    let mut arg = [0usize; LANES];
    for a in 1..q.len() {
        for l in 0..LANES {
            let r = cc[l] * q[a] + c[l] * g[a];
            let win = r > best[l] + TIE_EPS * best[l].abs().max(r.abs());
            best[l] = if win { r } else { best[l] };
            arg[l] = if win { a } else { arg[l] };
        }
    }
    arg
}

/// Every (direction, seed, contrast) cell estimated from the blended image.
fn direct_cells(
    cfg: &ContrastConfig,
    w: f64,
    method: &Method,
    thetas: &[f64],
    masks: &[Vec<usize>],
    noise: &[Image2D],
) -> Result<Vec<Worst>> {
    let r = fiber_radius(w);
    let mr = method
        .algorithm()
        .map(|a| cfg.mr_params(w, a))
        .transpose()?;
    let estimate = |img: &Image2D| -> Result<OrientationField> {
        match method {
            Method::MaxResponse(_) => mr_estimate(img, mr.as_ref().expect("mr params")),
            Method::StructureTensor => {
                structure_tensor_estimate(img, &TensorParams::for_fiber_radius(r))
            }
            Method::Hessian => hessian_estimate(img, r),
        }
    };
    let nc = cfg.contrasts.len();
    let per_theta: Vec<Vec<f64>> = thetas
        .par_iter()
        .zip(masks)
        .map(|(&theta, mask)| {
            let f = fiber_image(cfg, theta, w)?;
            let cell = |img: Image2D| -> Result<f64> {
                let img = if cfg.median { median3x3(&img) } else { img };
                let field = estimate(&img)?;
                let angles: Vec<f64> = mask
                    .iter()
                    .filter(|&&i| field.valid.bits()[i])
                    .map(|&i| field.angle.data()[i])
                    .collect();
                if angles.is_empty() {
                    return Err(Error::EmptyMask);
                }
                Ok(mean_error(&angles, theta))
            };
            // at full contrast the blend is the fiber image for every seed
            let clean = if cfg.contrasts.contains(&1.0) {
                Some(cell(f.clone())?)
            } else {
                None
            };
            let mut out = Vec::with_capacity(noise.len() * nc);
            for b in noise {
                for &c in &cfg.contrasts {
                    out.push(match clean {
                        Some(m) if c == 1.0 => m,
                        _ => cell(blend(b, &f, c)?)?,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut worst = vec![Worst::NONE; noise.len() * nc];
    for (maes, &theta) in per_theta.iter().zip(thetas) {
        for (wst, &m) in worst.iter_mut().zip(maes) {
            wst.update(m, theta);
        }
    }
    Ok(worst)
}

/// The 13 kernel shapes of the accuracy table.
pub const ACCURACY_SPECS: [(f64, f64); 13] = [
    (2.0, 1.0),
    (5.0, 2.0),
    (7.0, 2.0),
    (7.0, 4.0),
    (10.0, 0.5),
    (10.0, 1.25),
    (10.0, 2.0),
    (20.0, 0.5),
    (20.0, 1.25),
    (20.0, 2.0),
    (25.0, 0.5),
    (25.0, 1.25),
    (25.0, 2.0),
];

/// Reference (mean, max) l² errors in units of 1e-3, rows as
/// [`ACCURACY_SPECS`], columns as [`accuracy_algorithms`].
pub const ACCURACY_REFERENCE: [[(f64, f64); 5]; 13] = [
    [
        (38.9, 60.8),
        (29.7, 39.9),
        (23.6, 28.2),
        (28.0, 30.0),
        (25.4, 28.2),
    ],
    [(7.2, 10.6), (6.2, 7.8), (5.8, 6.3), (5.9, 6.5), (5.7, 6.3)],
    [(5.7, 8.0), (4.9, 6.0), (4.6, 5.1), (4.6, 5.2), (4.5, 5.1)],
    [(2.8, 2.9), (2.7, 2.8), (2.6, 3.1), (2.7, 2.7), (2.6, 3.2)],
    [
        (35.7, 75.7),
        (23.1, 60.8),
        (14.3, 30.4),
        (16.9, 29.0),
        (12.0, 18.3),
    ],
    [(9.5, 17.5), (7.2, 11.4), (5.9, 8.3), (5.6, 8.3), (5.4, 8.3)],
    [(4.5, 7.0), (3.9, 4.9), (3.6, 4.1), (3.6, 4.1), (3.5, 4.1)],
    [
        (24.6, 44.0),
        (15.8, 37.3),
        (9.8, 19.4),
        (10.9, 22.6),
        (7.7, 12.8),
    ],
    [(6.1, 10.4), (4.6, 7.6), (3.9, 5.8), (3.4, 5.8), (3.3, 5.8)],
    [(2.9, 4.2), (2.4, 3.2), (2.3, 2.8), (2.2, 2.8), (2.1, 2.8)],
    [
        (21.8, 37.9),
        (13.9, 31.4),
        (8.7, 16.7),
        (9.6, 15.7),
        (6.6, 11.5),
    ],
    [(5.5, 9.3), (4.1, 6.6), (3.4, 5.2), (2.9, 5.2), (2.8, 5.1)],
    [(2.5, 3.7), (2.1, 2.8), (2.0, 2.4), (1.8, 2.4), (1.8, 2.4)],
];

/// Line buffer (linear), hybrid (linear, cubic), hybrid with major-axis
/// modification (linear, cubic).
pub fn accuracy_algorithms() -> [FilterAlgorithm; 5] {
    [
        FilterAlgorithm::line_buffer(InterpScheme::Linear),
        FilterAlgorithm::hybrid(InterpScheme::Linear),
        FilterAlgorithm::hybrid(InterpScheme::Cubic),
        FilterAlgorithm::hybrid_mod(InterpScheme::Linear),
        FilterAlgorithm::hybrid_mod(InterpScheme::Cubic),
    ]
}

/// l² distance between the impulse response on an `n`×`n` grid and the
/// sampled continuous kernel.
pub fn kernel_error(spec: &AnisoKernelSpec, algo: FilterAlgorithm, n: usize) -> Result<f64> {
    let got = reconstruct_kernel(spec, algo, n)?;
    let want = sample_true_kernel(n, spec)?;
    l2_distance(&got, &want)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelAccuracyRow {
    pub sigma1: f64,
    pub sigma2: f64,
    pub algo: FilterAlgorithm,
    pub mean: f64,
    pub max: f64,
    pub argmax_theta: f64,
    /// `(theta, error)` for every evaluated angle.
    pub curve: Vec<(f64, f64)>,
}

/// Mean and max over `thetas` of the kernel error for every shape and
/// algorithm.
pub fn kernel_accuracy_experiment(
    specs: &[(f64, f64)],
    algos: &[FilterAlgorithm],
    thetas: &[f64],
    n: usize,
) -> Result<Vec<KernelAccuracyRow>> {
    if thetas.is_empty() {
        return Err(Error::InvalidParameter("no angles to evaluate".into()));
    }
    let mut rows = Vec::new();
    for &(s1, s2) in specs {
        AnisoKernelSpec::new(s1, s2, 0.0)?;
        for &algo in algos {
            let errs: Vec<f64> = thetas
                .par_iter()
                .map(|&t| kernel_error(&AnisoKernelSpec::new(s1, s2, t)?, algo, n))
                .collect::<Result<_>>()?;
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            let (mut max, mut argmax) = (f64::NEG_INFINITY, thetas[0]);
            for (&e, &t) in errs.iter().zip(thetas) {
                if e > max {
                    (max, argmax) = (e, t);
                }
            }
            rows.push(KernelAccuracyRow {
                sigma1: s1,
                sigma2: s2,
                algo,
                mean,
                max,
                argmax_theta: argmax,
                curve: thetas.iter().copied().zip(errs).collect(),
            });
        }
    }
    Ok(rows)
}

/// Table layout: one line per shape, `mean` and `max` (×1e-3) per algorithm.
pub fn write_kernel_table_csv(rows: &[KernelAccuracyRow], out: impl Write) -> Result<()> {
    let mut algos: Vec<FilterAlgorithm> = Vec::new();
    let mut specs: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algo) {
            algos.push(r.algo);
        }
        if !specs.contains(&(r.sigma1, r.sigma2)) {
            specs.push((r.sigma1, r.sigma2));
        }
    }
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["sigma1".to_string(), "sigma2".to_string()];
    for a in &algos {
        header.push(format!("{}_mean_e3", a.label()));
        header.push(format!("{}_max_e3", a.label()));
    }
    wr.write_record(&header)?;
    for &(s1, s2) in &specs {
        let mut rec = vec![s1.to_string(), s2.to_string()];
        for a in &algos {
            match rows
                .iter()
                .find(|r| r.sigma1 == s1 && r.sigma2 == s2 && r.algo == *a)
            {
                Some(r) => rec.extend([
                    format!("{:.3}", r.mean * 1e3),
                    format!("{:.3}", r.max * 1e3),
                ]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Per-angle error curves (×1e-3), one column per (shape, algorithm).
pub fn write_kernel_curves_csv(rows: &[KernelAccuracyRow], out: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["theta".to_string()];
    header.extend(
        rows.iter()
            .map(|r| format!("{}_{}_{}", r.sigma1, r.sigma2, r.algo.label())),
    );
    wr.write_record(&header)?;
    let len = rows.iter().map(|r| r.curve.len()).min().unwrap_or(0);
    for i in 0..len {
        let mut rec = vec![rows[0].curve[i].0.to_string()];
        rec.extend(rows.iter().map(|r| format!("{:.4}", r.curve[i].1 * 1e3)));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub trim: f64,
    pub algos: Vec<FilterAlgorithm>,
    pub theta: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl Default for ThroughputConfig {
    fn default() -> Self {
        Self {
            sizes: (100..=4990).step_by(30).collect(),
            reps: 50,
            trim: 0.10,
            algos: vec![
                FilterAlgorithm::line_buffer(InterpScheme::Linear),
                FilterAlgorithm::hybrid(InterpScheme::Linear),
                FilterAlgorithm::hybrid(InterpScheme::Cubic),
            ],
            theta: 30.0,
            sigma1: 10.0,
            sigma2: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub size: usize,
    pub algo: FilterAlgorithm,
    pub trimmed_mean_ms: f64,
    pub mpix_per_s: f64,
    /// Sum of the last output; identical across runs of the same config.
    pub checksum: f64,
}

/// Mean after dropping `floor(trim·n)` samples at each end.
pub fn trimmed_mean(samples: &[f64], trim: f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let k = (trim * v.len() as f64).floor() as usize;
    let kept = &v[k..v.len() - k];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Times `reps` filterings of a seeded noise image per size and algorithm.
/// Runs on the calling thread only.
pub fn throughput_benchmark(cfg: &ThroughputConfig) -> Result<Vec<ThroughputRow>> {
    if cfg.reps < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 repetitions, got {}",
            cfg.reps
        )));
    }
    if !(0.0..0.5).contains(&cfg.trim) {
        return Err(Error::InvalidParameter(format!(
            "trim fraction must be in [0, 0.5), got {}",
            cfg.trim
        )));
    }
    let spec = AnisoKernelSpec::new(cfg.sigma1, cfg.sigma2, cfg.theta)?;
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        let img = gaussian_noise(n, cfg.seed)?;
        for &algo in &cfg.algos {
            let mut times = Vec::with_capacity(cfg.reps);
            let mut checksum = 0.0;
            for _ in 0..cfg.reps {
                let t = Instant::now();
                let out = filter(&img, &spec, algo)?;
                times.push(t.elapsed().as_secs_f64());
                checksum = out.sum();
            }
            let secs = trimmed_mean(&times, cfg.trim);
            rows.push(ThroughputRow {
                size: n,
                algo,
                trimmed_mean_ms: secs * 1e3,
                mpix_per_s: (n * n) as f64 / secs / 1e6,
                checksum,
            });
        }
    }
    Ok(rows)
}

pub fn write_throughput_csv(rows: &[ThroughputRow], out: impl Write) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record([
        "size",
        "algorithm",
        "trimmed_mean_ms",
        "mpix_per_s",
        "checksum",
    ])?;
    for r in rows {
        wr.write_record([
            r.size.to_string(),
            r.algo.label(),
            format!("{:.4}", r.trimmed_mean_ms),
            format!("{:.3}", r.mpix_per_s),
            format!("{:.9e}", r.checksum),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fiber_image_basics() {
        for theta in [0.0, 33.0, 90.0, 151.0] {
            let f = make_fiber_image(&FiberImageSpec::new(16, theta, 1.0)).unwrap();
            assert!((f.get(0, 0) - 0.5).abs() < 1e-15);
        }
        let f = make_fiber_image(&FiberImageSpec::new(32, 0.0, 1.0)).unwrap();
        for y in 0..32 {
            assert!(f.row(y).iter().all(|&v| v == f.get(0, y)));
        }
        assert!(make_fiber_image(&FiberImageSpec::new(7, 0.0, 1.0)).is_err());
        assert!(make_fiber_image(&FiberImageSpec::new(16, 0.0, 0.0)).is_err());
    }

    #[test]
    fn fiber_value_is_constant_along_theta() {
        let theta = 30.0f64;
        let f = make_fiber_image(&FiberImageSpec::new(64, theta, 2.0)).unwrap();
        let (s, c) = theta.to_radians().sin_cos();
        // analytic profile along the direction (c, s) from (10, 10)
        let d0 = 10.0 * s - 10.0 * c;
        for t in [0.0, 5.0, 20.0] {
            let (x, y) = (10.0 + t * c, 10.0 + t * s);
            let d = x * s - y * c;
            assert!((d - d0).abs() < 1e-12);
        }
        assert!((f.get(10, 10) - ((d0 / 2.0).sin() / 2.0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn scaled_period_and_verbatim_amplitude() {
        // θ = 90°: value depends on x only, period 2πw
        let f = make_fiber_image(&FiberImageSpec::new(64, 90.0, 2.0)).unwrap();
        let crest = |x: f64| (x / 2.0).sin() / 2.0 + 0.5;
        for x in 0..64 {
            assert!((f.get(x, 5) - crest(x as f64)).abs() < 1e-12);
        }
        let spec = FiberImageSpec {
            frequency_scaled: false,
            ..FiberImageSpec::new(64, 90.0, 2.0)
        };
        let g = make_fiber_image(&spec).unwrap();
        let (lo, hi) = g.min_max();
        assert!(lo >= 0.25 - 1e-12 && hi <= 0.75 + 1e-12);
    }

    #[test]
    fn noise_is_reproducible_uniform() {
        let a = make_noise(512, 7).unwrap();
        assert_eq!(a, make_noise(512, 7).unwrap());
        assert_ne!(a, make_noise(512, 8).unwrap());
        let n = a.len() as f64;
        let mean = a.sum() / n;
        let var = a
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        assert!((0.495..=0.505).contains(&mean), "{mean}");
        assert!((0.0825..=0.0842).contains(&var), "{var}");
        let g = gaussian_noise(256, 7).unwrap();
        let (lo, hi) = g.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
        assert!((g.sum() / g.len() as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn blend_ends_and_errors() {
        let b = make_noise(16, 1).unwrap();
        let f = make_fiber_image(&FiberImageSpec::new(16, 20.0, 1.0)).unwrap();
        assert_eq!(blend(&b, &f, 0.0).unwrap(), b);
        assert_eq!(blend(&b, &f, 1.0).unwrap(), f);
        let q = blend(&b, &f, 0.25).unwrap();
        assert!((q.get(3, 4) - (0.75 * b.get(3, 4) + 0.25 * f.get(3, 4))).abs() < 1e-15);
        assert!(blend(&b, &f, 1.5).is_err());
        assert!(blend(&b, &make_noise(8, 1).unwrap(), 0.5).is_err());
    }

    #[test]
    fn mask_counts_lattice_points() {
        let half = Image2D::filled(512, 512, 0.5).unwrap();
        assert!(fiber_mask(&half, 0.75, 206.0).unwrap().is_empty());
        let one = Image2D::filled(512, 512, 1.0).unwrap();
        let m = fiber_mask(&one, 0.75, 206.0).unwrap();
        // independent count: for each row offset, the column offsets inside
        let mut want = 0usize;
        for j in 0..512i64 {
            let dy = j as f64 - 255.5;
            let rem = 206.0f64 * 206.0 - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let half_width = rem.sqrt();
            want += (0..512)
                .filter(|&i| (i as f64 - 255.5).abs() <= half_width)
                .count();
        }
        assert_eq!(m.count(), want);
        let strict = Image2D::filled(8, 8, 0.75).unwrap();
        assert!(fiber_mask(&strict, 0.75, 100.0).unwrap().is_empty());
        assert!(fiber_mask(&Image2D::new(8, 9).unwrap(), 0.75, 3.0).is_err());
    }

    #[test]
    fn horizontal_fibers_give_row_bands() {
        let f = make_fiber_image(&FiberImageSpec::new(512, 0.0, 2.0)).unwrap();
        let m = fiber_mask(&f, 0.75, 206.0).unwrap();
        for y in 0..512 {
            let row: Vec<bool> = (0..512).map(|x| m.get(x, y)).collect();
            let inside: Vec<bool> = (0..512).map(|x| in_disk(x, y, 255.5, 206.0)).collect();
            let band = f.get(0, y) > 0.75;
            for x in 0..512 {
                assert_eq!(row[x], band && inside[x]);
            }
        }
    }

    fn const_field(angle: f64, n: usize) -> OrientationField {
        OrientationField {
            angle: Image2D::filled(n, n, angle).unwrap(),
            response: Image2D::new(n, n).unwrap(),
            valid: BinaryMask::full(n, n).unwrap(),
        }
    }

    #[test]
    fn mae_examples() {
        let mask = BinaryMask::full(4, 4).unwrap();
        assert_eq!(mae(&const_field(10.0, 4), 10.0, &mask).unwrap(), 0.0);
        assert!((mae(&const_field(170.0, 4), 10.0, &mask).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(mae(&const_field(90.0, 4), 0.0, &mask).unwrap(), 90.0);
        assert!(matches!(
            mae(&const_field(0.0, 4), 0.0, &BinaryMask::new(4, 4).unwrap()),
            Err(Error::EmptyMask)
        ));
        let mut f = const_field(0.0, 4);
        f.valid = BinaryMask::new(4, 4).unwrap();
        assert!(mae(&f, 0.0, &mask).is_err());
    }

    #[test]
    fn method_labels_round_trip() {
        for m in default_methods() {
            assert_eq!(Method::parse(&m.label()).unwrap(), m);
        }
        assert!(Method::parse("nope").is_err());
    }

    #[test]
    fn trimmed_mean_drops_tails() {
        let v: Vec<f64> = (1..=10).map(f64::from).chain([1000.0]).collect();
        // 11 samples, trim 10 % -> one dropped per side
        assert!((trimmed_mean(&v, 0.1) - 6.0).abs() < 1e-12);
        assert_eq!(trimmed_mean(&[3.0, 1.0, 2.0], 0.0), 2.0);
    }

    fn small_config(methods: Vec<Method>) -> ContrastConfig {
        ContrastConfig {
            size: 96,
            seeds: vec![1, 2],
            contrasts: vec![0.0, 0.5, 1.0],
            widths: vec![2.0],
            theta_step: 30.0,
            mr_angle_step: None,
            methods,
            median: false,
            frequency_scaled: true,
            sigma1: 6.0,
            mask_threshold: MASK_THRESHOLD,
            mask_radius: 30.0,
        }
    }

    #[test]
    fn linearity_shortcut_matches_direct_estimation() {
        let algo = FilterAlgorithm::hybrid(InterpScheme::Linear);
        let cfg = small_config(vec![Method::MaxResponse(algo)]);
        let fast = run_contrast_experiment(&cfg).unwrap();
        // direct: same protocol through mr_estimate on every blend
        let thetas = MRParams::angle_grid(cfg.theta_step).unwrap();
        let p = cfg.mr_params(2.0, algo).unwrap();
        for row in &fast.rows {
            let b = make_noise(cfg.size, row.seed).unwrap();
            let mut worst = f64::NEG_INFINITY;
            for &t in &thetas {
                let f = fiber_image(&cfg, t, 2.0).unwrap();
                let mask = fiber_mask(&f, cfg.mask_threshold, cfg.mask_radius).unwrap();
                let est = mr_estimate(&blend(&b, &f, row.c).unwrap(), &p).unwrap();
                worst = worst.max(mae(&est, t, &mask).unwrap());
            }
            assert!((worst - row.max_mae).abs() < 1e-9, "{row:?} direct {worst}");
        }
    }

    #[test]
    fn experiment_is_deterministic_and_bounded() {
        let cfg = small_config(vec![Method::StructureTensor, Method::Hessian]);
        let a = run_contrast_experiment(&cfg).unwrap();
        let b = run_contrast_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2 * 2 * 3);
        assert_eq!(a.aggregates.len(), 2 * 3);
        assert!(a.rows.iter().all(|r| (0.0..=90.0).contains(&r.max_mae)));
        let mut csv = Vec::new();
        a.write_summary_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
    }

    #[test]
    fn kernel_experiment_shapes() {
        let algos = [FilterAlgorithm::hybrid(InterpScheme::Linear)];
        let rows =
            kernel_accuracy_experiment(&[(5.0, 2.0)], &algos, &[0.0, 45.0, 90.0], 64).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.curve.len(), 3);
        assert!(r.max >= r.mean && r.mean > 0.0);
        let mut out = Vec::new();
        write_kernel_table_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("sigma1,sigma2,hybrid-linear_mean_e3,hybrid-linear_max_e3"));
    }

    #[test]
    fn throughput_is_deterministic_in_output() {
        let cfg = ThroughputConfig {
            sizes: vec![32],
            reps: 10,
            ..ThroughputConfig::default()
        };
        let a = throughput_benchmark(&cfg).unwrap();
        let b = throughput_benchmark(&cfg).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.checksum, y.checksum);
            assert!(x.mpix_per_s > 0.0);
        }
        assert!(throughput_benchmark(&ThroughputConfig { reps: 5, ..cfg }).is_err());
    }
}
