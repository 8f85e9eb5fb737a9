use anisoflow::image::{BinaryMask, Image2D};
use anisoflow::orientation::{MRParams, DEFAULT_MR_ALGO};
use anisoflow::segment::{
    erode_square, niblack_threshold, remove_small_components, segment_pipeline, NiblackParams,
    SegmentParams,
};
use anisoflow::synthbench::{
    fiber_mask, make_fiber_image, make_noise, FiberImageSpec, MASK_RADIUS, MASK_THRESHOLD,
};

fn coarse_mr(sigma2: f64) -> MRParams {
    MRParams::new(20.0, sigma2, DEFAULT_MR_ALGO).with_angles(MRParams::angle_grid(5.0).unwrap())
}

// With the default recipe the Niblack window (7 px) is narrower than the
// fiber period (~12.6 px), so only the crest passes k = 0.6 and the 2×2
// erosion trims one more pixel per band. The segmentation therefore covers
// about a third of the core but stays inside the fibers.
#[test]
fn noiseless_fibers_are_segmented_inside_the_fibers() {
    for theta in [0.0, 30.0, 95.0] {
        let spec = FiberImageSpec::new(512, theta, 2.0);
        let f = make_fiber_image(&spec).unwrap();
        let core = fiber_mask(&f, MASK_THRESHOLD, MASK_RADIUS).unwrap();
        let bright = fiber_mask(&f, 0.5, MASK_RADIUS).unwrap();
        let disk = fiber_mask(&Image2D::filled(512, 512, 1.0).unwrap(), 0.5, MASK_RADIUS).unwrap();
        let sigma2 = spec.radius() / 2.0;
        let mut p = SegmentParams::for_sigma2(sigma2).unwrap();
        for global in [None, Some(0.6)] {
            p.global_threshold = global;
            let seg = segment_pipeline(&f, &coarse_mr(sigma2), &p)
                .unwrap()
                .and(&disk)
                .unwrap();
            let coverage = seg.and(&core).unwrap().count() as f64 / core.count() as f64;
            let precision = seg.and(&bright).unwrap().count() as f64 / seg.count() as f64;
            eprintln!("theta {theta} {global:?}: coverage {coverage:.3} precision {precision:.3}");
            assert!(
                coverage >= 0.3,
                "theta {theta} {global:?}: coverage {coverage:.3}"
            );
            assert!(
                precision >= 0.95,
                "theta {theta} {global:?}: precision {precision:.3}"
            );
        }
    }
}

#[test]
fn constant_image_segments_to_nothing() {
    let img = Image2D::filled(96, 96, 0.42).unwrap();
    let seg = segment_pipeline(
        &img,
        &coarse_mr(1.5),
        &SegmentParams::for_sigma2(1.5).unwrap(),
    )
    .unwrap();
    assert!(seg.is_empty());
}

// Regression fixture: foreground fraction on pure noise measured at 0.0-0.05
// over these seeds; the bound is the calibrated ceiling.
#[test]
fn pure_noise_leaves_little_foreground() {
    for seed in [1, 2, 3] {
        let noise = make_noise(256, seed).unwrap();
        let seg = segment_pipeline(
            &noise,
            &coarse_mr(1.5),
            &SegmentParams::for_sigma2(1.5).unwrap(),
        )
        .unwrap();
        let frac = seg.count() as f64 / (256.0 * 256.0);
        eprintln!("seed {seed}: noise foreground fraction {frac:.4}");
        assert!(frac <= 0.05, "seed {seed}: {frac}");
    }
}

#[test]
fn pipeline_is_deterministic() {
    let noise = make_noise(128, 9).unwrap();
    let p = SegmentParams::for_sigma2(1.5).unwrap();
    let a = segment_pipeline(&noise, &coarse_mr(1.5), &p).unwrap();
    let b = segment_pipeline(&noise, &coarse_mr(1.5), &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn window_too_large_is_rejected() {
    let img = Image2D::filled(10, 40, 1.0).unwrap();
    assert!(niblack_threshold(&img, &NiblackParams::new(11, 0.6).unwrap()).is_err());
    assert!(niblack_threshold(&img, &NiblackParams::new(9, 0.6).unwrap()).is_ok());
}

#[test]
fn thin_diagonal_fiber_survives_cleanup() {
    let mask = BinaryMask::from_fn(200, 200, |x, y| x.abs_diff(y) <= 1).unwrap();
    let eroded = erode_square(&mask, 2).unwrap();
    assert!(!eroded.is_empty());
    assert_eq!(remove_small_components(&eroded, 100, 8).unwrap(), eroded);
}
