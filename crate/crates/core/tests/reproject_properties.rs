use proptest::prelude::*;
use scenestat::features::FeatureConfig;
use scenestat::reproject::{
    estimate_homography, reprojected_mse, warp_bilinear, Correspondence, Homography, RansacConfig,
};
use scenestat::synth::ValueNoise;

fn transfer_error(h: &Homography<f64>, c: &Correspondence<f64>) -> f64 {
    let (x, y) = h.apply(c.a).unwrap();
    ((x - c.b.0).powi(2) + (y - c.b.1).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_correspondences_recover_the_homography(
        a in 0.8f64..1.2, b in -0.2f64..0.2, c in -40.0f64..40.0,
        d in -0.2f64..0.2, e in 0.8f64..1.2, f in -40.0f64..40.0,
        g in -5e-4f64..5e-4, h in -5e-4f64..5e-4,
        seed in any::<u64>(),
    ) {
        let truth = Homography::new([[a, b, c], [d, e, f], [g, h, 1.0]]).unwrap();
        let mut pairs = Vec::new();
        for i in 0..4 {
            for j in 0..3 {
                let p = (20.0 + 90.0 * i as f64, 20.0 + 95.0 * j as f64);
                pairs.push(Correspondence::new(p, truth.apply(p).unwrap()));
            }
        }
        let cfg = RansacConfig { seed, ..RansacConfig::default() };
        let est = estimate_homography(&pairs, &cfg).unwrap();
        prop_assert_eq!(est.inlier_count(), pairs.len());
        let worst = pairs.iter().map(|p| transfer_error(&est.homography, p)).fold(0.0, f64::max);
        prop_assert!(worst < 1e-6, "max transfer error {}", worst);
        let again = estimate_homography(&pairs, &cfg).unwrap();
        prop_assert_eq!(again, est);
    }
}

#[test]
fn self_reprojection_is_zero() {
    for seed in 0..5 {
        let f = ValueNoise::new(seed).render(160, 120, (0.0, 0.0));
        let mse =
            reprojected_mse(&f, &f, &FeatureConfig::default(), &RansacConfig::default()).unwrap();
        assert_eq!(mse, 0.0, "seed {seed}");
    }
}

#[test]
fn reprojection_error_is_non_negative() {
    for seed in 0..6 {
        let noise = ValueNoise::new(seed);
        let a = noise.render(160, 120, (0.0, 0.0));
        let b = noise.render(160, 120, (1.5, -0.5)).map(|v| v * 0.9 + 0.02);
        if let Some(mse) =
            reprojected_mse(&a, &b, &FeatureConfig::default(), &RansacConfig::default())
        {
            assert!(mse >= 0.0);
        }
    }
}

#[test]
fn warp_and_inverse_warp_round_trip() {
    let noise = ValueNoise::new(11);
    let (w, h) = (160, 120);
    let f = noise.render(w, h, (0.0, 0.0));
    let (s, c) = (0.05f64.sin(), 0.05f64.cos());
    let fwd = Homography::new([[c, -s, 6.3], [s, c, -4.7], [1e-4, -5e-5, 1.0]]).unwrap();
    let inv = fwd.inverse().unwrap();

    let once = warp_bilinear(&f, &fwd, w, h).unwrap();
    let back = warp_bilinear(&once.frame, &inv, w, h).unwrap();

    // Largest error of a single resampling, both for the forward warp and
    // for sampling the exact warped image back.
    let mut single = 0.0f64;
    let exact_once: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let (sx, sy) = inv.apply((x, y)).unwrap();
            noise.sample(sx, sy)
        })
        .collect();
    for ((&v, &ok), &exact) in once.frame.pixels().iter().zip(&once.valid).zip(&exact_once) {
        if ok {
            single = single.max((v - exact).abs());
        }
    }
    let exact_frame = scenestat::pixbuf::GrayFrame::from_fn(w, h, |x, y| exact_once[y * w + x]);
    let exact_back = warp_bilinear(&exact_frame, &inv, w, h).unwrap();
    for i in 0..w * h {
        if exact_back.valid[i] {
            single = single.max((exact_back.frame.pixels()[i] - f.pixels()[i]).abs());
        }
    }

    let mut checked = 0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (fx, fy) = fwd.apply((x as f64, y as f64)).unwrap();
            let inside = fx >= 0.0 && fy >= 0.0 && fx <= (w - 1) as f64 && fy <= (h - 1) as f64;
            let (fx0, fy0) = (fx.floor() as usize, fy.floor() as usize);
            let corners_valid = inside
                && [
                    (fx0, fy0),
                    (fx0 + 1, fy0),
                    (fx0, fy0 + 1),
                    (fx0 + 1, fy0 + 1),
                ]
                .iter()
                .all(|&(u, v)| u < w && v < h && once.valid[v * w + u]);
            if back.valid[i] && corners_valid {
                let err = (back.frame.pixels()[i] - f.pixels()[i]).abs();
                assert!(
                    err <= 2.0 * single + 1e-12,
                    "({x}, {y}): {err} > 2 * {single}"
                );
                checked += 1;
            }
        }
    }
    assert!(checked > w * h / 2, "only {checked} doubly-valid pixels");
}
