mod common;

use common::{brute_hull, brute_monotone};
use dvp_core::mode::{lower_convex_hull, prune, prune_monotone, RdPoint};
use dvp_core::ScaleFactor;
use proptest::prelude::*;

fn to_points(raw: &[(u32, u32, u32)]) -> Vec<RdPoint<usize>> {
    raw.iter()
        .enumerate()
        .map(|(i, &(r, d, s))| RdPoint {
            rate: r as f64,
            distortion: d as f64,
            handle: i,
            scale: ScaleFactor::new(s, 1).unwrap(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn pruning_matches_brute_force(raw in proptest::collection::vec((1u32..40, 0u32..40, 1u32..7), 1..=7)) {
        let pts = to_points(&raw);
        let mono = prune_monotone(pts.clone()).unwrap();
        let flat: Vec<(f64, f64, u32)> = raw.iter().map(|&(r, d, s)| (r as f64, d as f64, s)).collect();
        let expect = brute_monotone(&flat);
        prop_assert_eq!(mono.iter().map(|p| p.handle).collect::<Vec<_>>(), expect);

        // strictly decreasing distortion, first point is a lowest-rate point
        prop_assert!(mono.windows(2).all(|w| w[1].rate > w[0].rate && w[1].distortion < w[0].distortion));
        let min_rate = raw.iter().map(|p| p.0).min().unwrap() as f64;
        prop_assert_eq!(mono[0].rate, min_rate);

        let rd: Vec<(f64, f64)> = mono.iter().map(|p| (p.rate, p.distortion)).collect();
        let hull = lower_convex_hull(mono.clone());
        let expect_hull: Vec<usize> = brute_hull(&rd).into_iter().map(|k| mono[k].handle).collect();
        prop_assert_eq!(hull.iter().map(|p| p.handle).collect::<Vec<_>>(), expect_hull);
        prop_assert_eq!(hull.first().map(|p| p.handle), mono.first().map(|p| p.handle));
        prop_assert_eq!(hull.last().map(|p| p.handle), mono.last().map(|p| p.handle));

        let (_, log) = prune(pts).unwrap();
        prop_assert!(log.all_points.len() >= log.after_monotone.len());
        prop_assert!(log.after_monotone.len() >= log.after_hull.len());
        prop_assert!(!log.after_hull.is_empty());
        let mean = log.after_hull.iter().map(|p| p.rate).sum::<f64>() / log.after_hull.len() as f64;
        prop_assert_eq!(log.cbr_rate, mean);
    }
}
