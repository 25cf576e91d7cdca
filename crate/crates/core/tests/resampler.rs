mod common;

use common::direct_resize;
use dvp_core::resample::{resize_f32, resize_plane, upscale_frame, AxisWeights};
use dvp_core::{FilterKind, PlanarFrame, Plane, Precision};
use proptest::prelude::*;

const FILTERS: [FilterKind; 3] = [FilterKind::Bilinear, FilterKind::BICUBIC, FilterKind::LANCZOS3];

fn max_abs_diff(a: &[u8], b: &[u8]) -> i32 {
    a.iter().zip(b).map(|(&x, &y)| (x as i32 - y as i32).abs()).max().unwrap_or(0)
}

#[test]
fn ramp_upscale_matches_direct_convolution() {
    let data: Vec<u8> = (0..16).map(|i| (i % 4 * 20 + i / 4 * 40) as u8).collect();
    let p = Plane::new(4, 4, data).unwrap();
    let out = resize_plane(&p, 8, 8, FilterKind::Bilinear, Precision::Float32).unwrap();
    assert!(max_abs_diff(&out.data, &direct_resize(&p, 8, 8, FilterKind::Bilinear)) <= 1);
}

#[test]
fn single_white_pixel_upscale_is_exact() {
    let mut y = Plane::filled(6, 6, 0);
    y.data[2 * 6 + 3] = 255;
    let frame = PlanarFrame::from_planes(y.clone(), Plane::filled(3, 3, 0), Plane::filled(3, 3, 0), Default::default()).unwrap();
    let up = upscale_frame(&frame, 12, 12, FilterKind::Bilinear).unwrap();
    assert_eq!(up.y.data, direct_resize(&y, 12, 12, FilterKind::Bilinear));
}

#[test]
fn integer_factor_round_trip_of_constant_image() {
    for f in FILTERS {
        let frame = PlanarFrame::filled(24, 18, 140, 90);
        let up = upscale_frame(&frame, 72, 54, f).unwrap();
        let down = dvp_core::resample::downscale_frame(&up, "3".parse().unwrap(), f, f).unwrap();
        assert_eq!(down, frame);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_path_matches_direct_convolution(
        w in 1usize..14, h in 1usize..14, tw in 1usize..20, th in 1usize..20,
        seed in any::<u64>(), fi in 0usize..3,
    ) {
        let data: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 56) as u8).collect();
        let p = Plane::new(w, h, data).unwrap();
        let f = FILTERS[fi];
        let out = resize_plane(&p, tw, th, f, Precision::Float32).unwrap();
        prop_assert!(max_abs_diff(&out.data, &direct_resize(&p, tw, th, f)) <= 1);
    }

    #[test]
    fn separable_passes_compose_bit_exactly(
        w in 1usize..16, h in 1usize..16, tw in 1usize..24, th in 1usize..24, fi in 0usize..3,
        data in proptest::collection::vec(0f32..255.0, 256),
    ) {
        let src = &data[..w * h];
        let f = FILTERS[fi];
        let both = resize_f32(src, w, h, tw, th, f).unwrap();
        let rows = resize_f32(src, w, h, tw, h, f).unwrap();
        let cols = resize_f32(&rows, tw, h, tw, th, f).unwrap();
        prop_assert_eq!(both, cols);
    }

    #[test]
    fn weights_sum_to_one(i in 1usize..200, o in 1usize..200, fi in 0usize..3) {
        let ax = AxisWeights::new(i, o, FILTERS[fi]);
        for j in 0..o {
            let s: f64 = ax.taps(j).map(|(_, w)| w as f64).sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic(w in 1usize..20, h in 1usize..20, seed in any::<u8>()) {
        let p = Plane::new(w, h, (0..w * h).map(|i| (i as u8).wrapping_mul(seed)).collect()).unwrap();
        for f in FILTERS {
            let a = resize_plane(&p, 7, 5, f, Precision::Float32).unwrap();
            let b = resize_plane(&p, 7, 5, f, Precision::Float32).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
