//! Collision, section lookup and heading quantization checked against
//! brute-force oracles that share no code with the implementations.

mod common;

use proptest::prelude::*;
use trafficmon::geometry::{OrientedRect, Vec2};
use trafficmon::grounding::{Section, SectionMap};
use trafficmon::scene::heading_label;

use common::checks;

#[test]
fn sat_agrees_with_sampling_and_exact_oracles() {
    checks::sat_agreement(10_000, 11);
}

#[test]
fn circle_tests_agree_with_exact_oracle() {
    checks::circle_agreement(10_000, 12);
}

proptest! {
    #[test]
    fn sat_is_symmetric_and_translation_invariant(
        ax in 0.0..1.0f64, ay in 0.0..1.0f64, bx in 0.0..1.0f64, by in 0.0..1.0f64,
        ahx in 0.05..0.4f64, ahy in 0.02..0.3f64, bhx in 0.05..0.4f64, bhy in 0.02..0.3f64,
        aa in 0.0..6.3f64, ba in 0.0..6.3f64, dx in -50.0..50.0f64, dy in -50.0..50.0f64,
    ) {
        let a = OrientedRect::new(Vec2::new(ax, ay), Vec2::new(ahx, ahy), aa);
        let b = OrientedRect::new(Vec2::new(bx, by), Vec2::new(bhx, bhy), ba);
        prop_assert_eq!(a.overlaps(&b), b.overlaps(&a));
        prop_assume!(a.separation(&b).abs() > 1e-9);
        let shift = Vec2::new(dx, dy);
        let a2 = OrientedRect::new(a.center + shift, a.half_extents, a.angle);
        let b2 = OrientedRect::new(b.center + shift, b.half_extents, b.angle);
        prop_assert_eq!(a.overlaps(&b), a2.overlaps(&b2));
    }

    #[test]
    fn rect_always_overlaps_itself_rotated_about_its_center(
        hx in 0.01..1.0f64, hy in 0.01..1.0f64, a in 0.0..6.3f64, turn in 0.0..6.3f64,
    ) {
        let r = OrientedRect::new(Vec2::new(3.0, -2.0), Vec2::new(hx, hy), a);
        let s = OrientedRect::new(r.center, r.half_extents, a + turn);
        prop_assert!(r.overlaps(&s));
    }
}

#[test]
fn section_of_agrees_with_raster_oracle_on_corpus_maps() {
    checks::corpus_section_agreement(&trafficmon::corpus::cameras());
}

fn star(center: Vec2, spikes: usize, outer: f64, inner: f64, phase: f64) -> Vec<Vec2> {
    (0..spikes * 2)
        .map(|i| {
            let r = if i % 2 == 0 { outer } else { inner };
            let a = phase + std::f64::consts::PI * i as f64 / spikes as f64;
            center + Vec2::from_angle(a) * r
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn section_of_agrees_with_raster_oracle_on_concave_overlapping_maps(
        cx in 20.0..108.0f64, cy in 20.0..108.0f64, spikes in 3usize..9,
        outer in 20.0..60.0f64, inner in 5.0..20.0f64, phase in 0.0..6.3f64,
        bx in 0.0..64.0f64, by in 0.0..64.0f64, seed in any::<u64>(),
    ) {
        let map = SectionMap {
            camera_id: "synthetic".into(),
            sections: vec![
                Section { alias: "Section A".into(), polygon: star(Vec2::new(cx, cy), spikes, outer, inner, phase) },
                Section {
                    alias: "Section B".into(),
                    polygon: vec![
                        Vec2::new(bx, by), Vec2::new(bx + 60.0, by),
                        Vec2::new(bx + 60.0, by + 50.0), Vec2::new(bx, by + 50.0),
                    ],
                },
            ],
        };
        checks::section_raster_agreement(&map, 128, 128, 300, seed);
    }
}

#[test]
fn heading_label_matches_exhaustive_sweep() {
    checks::heading_sweep();
}

proptest! {
    #[test]
    fn heading_label_is_periodic(h in -20.0..20.0f64, turns in -3i32..3) {
        let shifted = h + std::f64::consts::TAU * turns as f64;
        let degrees = h.to_degrees().rem_euclid(45.0);
        prop_assume!((degrees - 22.5).abs() > 1e-6);
        prop_assert_eq!(heading_label(h, 1.0), heading_label(shifted, 1.0));
    }
}
