//! Property suites shared by the `properties` test target and the
//! acceptance run: decomposition, interpolation, error metric, estimator
//! invariances and segmentation morphology.

use anisoflow::anisofilter::filter;
use anisoflow::decomp::{
    covariance_of, plan_auto, plan_x1, plan_x2, AnisoKernelSpec, Axis, DecompPlan,
};
use anisoflow::image::{BinaryMask, Image2D};
use anisoflow::interp::{sample, InterpScheme};
use anisoflow::orientation::{
    eig2x2_symmetric, mr_estimate, MRParams, OrientationField, DEFAULT_MR_ALGO,
};
use anisoflow::segment::{erode_square, niblack_threshold, remove_small_components, NiblackParams};
use anisoflow::synthbench::{angular_distance, mae};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: [Suite; 12] = [
    (
        "decomposition covariance",
        decomposition_reconstructs_covariance,
    ),
    (
        "interpolation: samples reproduced",
        every_scheme_reproduces_samples,
    ),
    ("interpolation: affine exact", affine_lines_are_exact),
    (
        "interpolation: cubic convolution quadratic exact",
        cubic_convolution_is_exact_on_quadratics,
    ),
    (
        "interpolation: linear bounded",
        linear_stays_within_neighbours,
    ),
    ("angular distance metric", angular_distance_is_a_metric),
    ("MAE axioms", mae_axioms),
    (
        "eigen orthogonality",
        eigenvectors_are_orthogonal_eigenpairs,
    ),
    ("MR argmax affine invariance", mr_argmax_is_affine_invariant),
    (
        "Niblack affine invariance",
        niblack_mask_is_affine_invariant,
    ),
    (
        "erosion anti-extensive, decreasing",
        erosion_is_anti_extensive_and_decreasing,
    ),
    (
        "component removal anti-extensive, idempotent",
        component_removal_is_anti_extensive_and_idempotent,
    ),
];

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new(config)
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

fn spec_strategy() -> impl Strategy<Value = AnisoKernelSpec> {
    (0.5f64..50.0, 0.02f64..0.98, 0.0f64..180.0)
        .prop_map(|(s1, ratio, t)| AnisoKernelSpec::new(s1, s1 * ratio, t).unwrap())
}

/// `σa² e eᵀ + σl² u uᵀ` from the plan's own parameters, with `e` the grid
/// axis and `u` the line direction at angle φ from it.
fn composed_covariance(p: &DecompPlan) -> [f64; 3] {
    let (s, c) = p.phi.to_radians().sin_cos();
    let (e, u) = match p.axis {
        Axis::X1 => ([1.0, 0.0], [c, s]),
        Axis::X2 => ([0.0, 1.0], [s, c]),
    };
    let (a2, l2) = (p.sigma_axis * p.sigma_axis, p.sigma_line * p.sigma_line);
    [
        a2 * e[0] * e[0] + l2 * u[0] * u[0],
        a2 * e[0] * e[1] + l2 * u[0] * u[1],
        a2 * e[1] * e[1] + l2 * u[1] * u[1],
    ]
}

pub fn decomposition_reconstructs_covariance() -> Result<(), String> {
    check(10_000, spec_strategy(), |spec| {
        let want = covariance_of(&spec);
        let scale = spec.sigma1 * spec.sigma1;
        for p in [plan_x1(&spec), plan_x2(&spec), plan_auto(&spec, true)] {
            let got = composed_covariance(&p);
            for (g, w) in got.iter().zip([want.c11, want.c12, want.c22]) {
                prop_assert!((g - w).abs() <= 1e-9 * scale, "{spec:?} {p:?}: {g} vs {w}");
            }
            prop_assert!(p.sigma_axis > 0.0 && p.sigma_line > 0.0);
            prop_assert!(p.phi > 0.0 && p.phi < 180.0);
            let cot = p.phi.to_radians().cos() / p.phi.to_radians().sin();
            prop_assert!((p.mu - cot).abs() <= 1e-9 * (1.0 + cot.abs()));
        }
        Ok(())
    })
}

pub fn every_scheme_reproduces_samples() -> Result<(), String> {
    check(512, prop::collection::vec(-10.0f64..10.0, 4..40), |v| {
        for scheme in InterpScheme::ALL {
            for (k, &x) in v.iter().enumerate() {
                prop_assert!(
                    (sample(&v, k as f64, scheme).unwrap() - x).abs() <= 1e-11,
                    "{scheme:?}"
                );
            }
        }
        Ok(())
    })
}

pub fn affine_lines_are_exact() -> Result<(), String> {
    check(
        512,
        (-5.0f64..5.0, -5.0f64..5.0, 4usize..40, 0.0f64..1.0),
        |(a, b, n, t)| {
            let v: Vec<f64> = (0..n).map(|k| a + b * k as f64).collect();
            let pos = t * (n - 1) as f64;
            for scheme in InterpScheme::ALL {
                let got = sample(&v, pos, scheme).unwrap();
                prop_assert!(
                    (got - (a + b * pos)).abs() <= 1e-10 * (1.0 + a.abs() + b.abs() * n as f64),
                    "{scheme:?}"
                );
            }
            Ok(())
        },
    )
}

pub fn cubic_convolution_is_exact_on_quadratics() -> Result<(), String> {
    let s = (
        -3.0f64..3.0,
        -3.0f64..3.0,
        -1.0f64..1.0,
        4usize..30,
        0.0f64..1.0,
    );
    check(512, s, |(a, b, c, n, t)| {
        let q = |x: f64| a + b * x + c * x * x;
        let v: Vec<f64> = (0..n).map(|k| q(k as f64)).collect();
        let pos = t * (n - 1) as f64;
        let got = sample(&v, pos, InterpScheme::CubicConvolution).unwrap();
        prop_assert!((got - q(pos)).abs() <= 1e-9 * (1.0 + (n * n) as f64));
        Ok(())
    })
}

pub fn linear_stays_within_neighbours() -> Result<(), String> {
    check(
        512,
        (prop::collection::vec(-10.0f64..10.0, 2..30), 0.0f64..1.0),
        |(v, t)| {
            let pos = t * (v.len() - 1) as f64;
            let k = (pos.floor() as usize).min(v.len() - 2);
            let got = sample(&v, pos, InterpScheme::Linear).unwrap();
            prop_assert!(got >= v[k].min(v[k + 1]) - 1e-12 && got <= v[k].max(v[k + 1]) + 1e-12);
            Ok(())
        },
    )
}

pub fn angular_distance_is_a_metric() -> Result<(), String> {
    check(
        2000,
        (-720.0f64..720.0, -720.0f64..720.0, -720.0f64..720.0),
        |(a, b, c)| {
            let d = angular_distance;
            prop_assert!(d(a, a) < 1e-9);
            prop_assert!((d(a, b) - d(b, a)).abs() < 1e-9);
            prop_assert!((0.0..=90.0).contains(&d(a, b)));
            prop_assert!(d(a, a + 180.0) < 1e-9);
            prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-9);
            Ok(())
        },
    )
}

pub fn mae_axioms() -> Result<(), String> {
    let s = (
        0.0f64..180.0,
        -200.0f64..200.0,
        prop::collection::vec(any::<bool>(), 64),
    );
    check(2000, s, |(truth, offset, bits)| {
        let mask = BinaryMask::from_vec(8, 8, bits).unwrap();
        if mask.is_empty() {
            prop_assert!(mae(&field(8, truth), truth, &mask).is_err());
            return Ok(());
        }
        prop_assert!(mae(&field(8, truth), truth, &mask).unwrap() < 1e-9);
        prop_assert!(mae(&field(8, truth + 180.0), truth, &mask).unwrap() < 1e-9);
        let e = mae(&field(8, truth + offset), truth, &mask).unwrap();
        prop_assert!((e - angular_distance(truth + offset, truth)).abs() < 1e-9);
        prop_assert!((0.0..=90.0).contains(&e));
        Ok(())
    })
}

fn field(n: usize, angle: f64) -> OrientationField {
    OrientationField {
        angle: Image2D::filled(n, n, angle).unwrap(),
        response: Image2D::filled(n, n, 1.0).unwrap(),
        valid: BinaryMask::full(n, n).unwrap(),
    }
}

pub fn eigenvectors_are_orthogonal_eigenpairs() -> Result<(), String> {
    check(
        2000,
        (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0),
        |(a, b, c)| {
            let (lmin, lmax, dir) = eig2x2_symmetric(a, b, c);
            let scale = 1.0 + a.abs() + b.abs() + c.abs();
            prop_assert!(lmin <= lmax);
            prop_assert!((lmin + lmax - (a + c)).abs() <= 1e-12 * scale);
            prop_assert!((lmin * lmax - (a * c - b * b)).abs() <= 1e-10 * scale * scale);
            prop_assert!((0.0..180.0).contains(&dir));
            let (s, co) = dir.to_radians().sin_cos();
            // v = (cos, sin) for λ_min, w = (−sin, cos) for λ_max
            let av = [a * co + b * s, b * co + c * s];
            prop_assert!(
                (av[0] - lmin * co).abs() <= 1e-9 * scale
                    && (av[1] - lmin * s).abs() <= 1e-9 * scale
            );
            let aw = [-a * s + b * co, -b * s + c * co];
            prop_assert!(
                (aw[0] + lmax * s).abs() <= 1e-9 * scale
                    && (aw[1] - lmax * co).abs() <= 1e-9 * scale
            );
            Ok(())
        },
    )
}

fn random_image(w: usize, h: usize, v: &[f64]) -> Image2D {
    Image2D::from_fn(w, h, |x, y| v[(y * w + x) % v.len()]).unwrap()
}

/// Where the angles differ, the two candidate responses are tied to
/// rounding precision in the original image.
pub fn mr_argmax_is_affine_invariant() -> Result<(), String> {
    let s = (
        prop::collection::vec(0.0f64..1.0, 32 * 32),
        0.05f64..20.0,
        -5.0f64..5.0,
    );
    check(48, s, |(v, a, b)| {
        let img = random_image(32, 32, &v);
        let p = MRParams::new(6.0, 1.5, DEFAULT_MR_ALGO)
            .with_angles(MRParams::angle_grid(15.0).unwrap());
        let base = mr_estimate(&img, &p).unwrap();
        let moved = mr_estimate(&img.map(|x| a * x + b), &p).unwrap();
        let mut responses = Vec::new();
        for (i, (&t0, &t1)) in base.angle.data().iter().zip(moved.angle.data()).enumerate() {
            if t0 == t1 {
                continue;
            }
            if responses.is_empty() {
                responses = p
                    .angles
                    .iter()
                    .map(|&t| {
                        filter(
                            &img,
                            &AnisoKernelSpec::new(6.0, 1.5, t).unwrap(),
                            DEFAULT_MR_ALGO,
                        )
                        .unwrap()
                    })
                    .collect();
            }
            let r = |t: f64| responses[p.angles.iter().position(|&x| x == t).unwrap()].data()[i];
            prop_assert!(
                (r(t0) - r(t1)).abs() <= 1e-9 * r(t0).abs().max(1.0),
                "pixel {i}: {t0} vs {t1}"
            );
        }
        Ok(())
    })
}

pub fn niblack_mask_is_affine_invariant() -> Result<(), String> {
    let s = (
        prop::collection::vec(0.0f64..1.0, 20 * 16),
        -1.0f64..1.0,
        0.01f64..100.0,
        -100.0f64..100.0,
    );
    check(48, s, |(v, k, a, b)| {
        let img = random_image(20, 16, &v);
        let p = NiblackParams::new(5, k).unwrap();
        prop_assert_eq!(
            niblack_threshold(&img, &p).unwrap(),
            niblack_threshold(&img.map(|x| a * x + b), &p).unwrap()
        );
        Ok(())
    })
}

fn mask_strategy() -> impl Strategy<Value = BinaryMask> {
    (
        4usize..24,
        4usize..24,
        prop::collection::vec(prop::bool::weighted(0.6), 24 * 24),
    )
        .prop_map(|(w, h, bits)| BinaryMask::from_vec(w, h, bits[..w * h].to_vec()).unwrap())
}

pub fn erosion_is_anti_extensive_and_decreasing() -> Result<(), String> {
    check(256, mask_strategy(), |m| {
        let mut prev = m.clone();
        for side in 1..5 {
            let e = erode_square(&m, side).unwrap();
            prop_assert!(e.is_subset_of(&prev));
            prev = e;
        }
        prop_assert_eq!(erode_square(&m, 1).unwrap(), m);
        Ok(())
    })
}

pub fn component_removal_is_anti_extensive_and_idempotent() -> Result<(), String> {
    check(
        256,
        (mask_strategy(), 1usize..30, any::<bool>()),
        |(m, min_size, eight)| {
            let conn = if eight { 8 } else { 4 };
            let once = remove_small_components(&m, min_size, conn).unwrap();
            prop_assert!(once.is_subset_of(&m));
            prop_assert_eq!(
                remove_small_components(&once, min_size, conn).unwrap(),
                once
            );
            Ok(())
        },
    )
}
