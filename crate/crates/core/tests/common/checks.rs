//! Oracle comparisons shared by the property tests and the acceptance run.
//! Each one panics on the first disagreement and returns a short summary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trafficmon::camera::Camera;
use trafficmon::eval::{parse_strict, Mention, ParseMode};
use trafficmon::geometry::{Circle, OrientedRect, Vec2};
use trafficmon::grounding::{
    caption_frame, describe_frame, find_alias_matches, section_of, substitute_aliases, SceneItem, SectionMap,
};
use trafficmon::raster::Image;
use trafficmon::scene::{heading_label, DirectionLabel};

use super::{frames, oracle};

pub fn random_rect(rng: &mut impl Rng) -> OrientedRect {
    OrientedRect::new(
        Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
        Vec2::new(rng.random_range(0.05..0.4), rng.random_range(0.02..0.3)),
        rng.random_range(0.0..std::f64::consts::TAU),
    )
}

/// SAT against a 100×100 lattice (10⁴ samples) and the exact oracle.
pub fn sat_agreement(pairs: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut overlapping, mut skipped) = (0, 0);
    let tol = oracle::BOUNDARY_TOLERANCE;
    for _ in 0..pairs {
        let (a, b) = (random_rect(&mut rng), random_rect(&mut rng));
        let verdict = a.overlaps(&b);
        if oracle::lattice_hit(&a, &b, 100) {
            assert!(verdict, "lattice found a shared point but SAT says apart: {a:?} {b:?}");
        }
        // pairs whose verdict flips when both shapes move by the tolerance
        let grown = oracle::rects_overlap(&oracle::offset(&a, tol), &oracle::offset(&b, tol));
        let shrunk = oracle::rects_overlap(&oracle::offset(&a, -tol), &oracle::offset(&b, -tol));
        if grown != shrunk {
            skipped += 1;
            continue;
        }
        assert_eq!(verdict, shrunk, "{a:?} {b:?}");
        overlapping += usize::from(verdict);
    }
    assert!(skipped * 1000 < pairs, "too many boundary cases: {skipped}");
    assert!(
        (pairs / 5..pairs * 4 / 5).contains(&overlapping),
        "unbalanced sample: {overlapping}"
    );
    format!("{pairs} pairs, {overlapping} overlapping, {skipped} within tolerance")
}

/// Circle-rectangle and circle-circle tests against exact distances.
pub fn circle_agreement(pairs: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = oracle::BOUNDARY_TOLERANCE;
    let (mut decided, mut hits) = (0, 0);
    for _ in 0..pairs {
        let rect = random_rect(&mut rng);
        let c = Circle {
            center: Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
            radius: rng.random_range(0.02..0.3),
        };
        let grow = |d: f64| Circle {
            center: c.center,
            radius: c.radius + d,
        };
        let grown = oracle::circle_meets_rect(&grow(tol), &oracle::offset(&rect, tol));
        let shrunk = oracle::circle_meets_rect(&grow(-tol), &oracle::offset(&rect, -tol));
        if grown == shrunk {
            assert_eq!(c.overlaps_rect(&rect), shrunk, "{c:?} {rect:?}");
            decided += 1;
            hits += usize::from(shrunk);
        }

        let d = Circle {
            center: Vec2::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
            radius: rng.random_range(0.02..0.3),
        };
        let dist = ((c.center.x - d.center.x).powi(2) + (c.center.y - d.center.y).powi(2)).sqrt();
        if (dist - c.radius - d.radius).abs() > tol {
            assert_eq!(c.overlaps_circle(&d), dist < c.radius + d.radius);
        }
    }
    assert!(decided * 1000 > pairs * 999, "{decided}");
    assert!((pairs / 5..pairs * 4 / 5).contains(&hits), "unbalanced sample: {hits}");
    format!("{decided} circle/rect pairs decided, {hits} touching")
}

fn label_raster(map: &SectionMap, width: u32, height: u32) -> Image {
    let mut img = Image::new(width, height, [0, 0, 0]);
    for (i, s) in map.sections.iter().enumerate().rev() {
        img.fill_polygon(&s.polygon, [i as u8 + 1, 0, 0]);
    }
    img
}

/// `section_of` against a label raster at integer pixels more than 0.5 px
/// from every outline.
pub fn section_raster_agreement(map: &SectionMap, width: u32, height: u32, samples: usize, seed: u64) -> usize {
    let img = label_raster(map, width, height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < samples {
        let (x, y) = (rng.random_range(0..width), rng.random_range(0..height));
        let p = Vec2::new(x as f64, y as f64);
        if map
            .sections
            .iter()
            .any(|s| oracle::distance_to_polyline(&s.polygon, p) <= 0.5)
        {
            continue;
        }
        let expected = match img.get(x, y)[0] {
            0 => None,
            i => Some(map.sections[i as usize - 1].alias.as_str()),
        };
        assert_eq!(section_of(map, p), expected, "{} at ({x}, {y})", map.camera_id);
        checked += 1;
    }
    checked
}

/// 10⁴ points split over the corpus cameras.
pub fn corpus_section_agreement(cameras: &[Camera]) -> String {
    let per = 10_000 / cameras.len();
    let total: usize = cameras
        .iter()
        .enumerate()
        .map(|(i, c)| section_raster_agreement(&c.sections, c.width(), c.height(), per, i as u64))
        .sum();
    format!("{total} points on {} maps", cameras.len())
}

/// Integer oracle: tenths of a degree, bins centred on multiples of 450.
pub fn expected_label(tenths: i64) -> DirectionLabel {
    let t = tenths.rem_euclid(3600);
    DirectionLabel::MOVING[(((t + 225) / 450) % 8) as usize]
}

pub fn heading_sweep() -> String {
    let mut n = 0;
    for k in -3600i64..7200 {
        let heading = (k as f64 * 0.1).to_radians();
        assert_eq!(
            heading_label(heading, 1.0),
            expected_label(k),
            "{:.1} degrees",
            k as f64 * 0.1
        );
        n += 1;
    }
    for k in (0..3600).step_by(37) {
        assert_eq!(
            heading_label((k as f64 * 0.1).to_radians(), 0.0),
            DirectionLabel::Stationary
        );
    }
    format!("{n} headings at 0.1 degree steps")
}

/// Every corpus caption: no alias survives grounding, grounding is
/// idempotent, each alias place is replaced once and strict parsing
/// recovers every vehicle.
pub fn corpus_captions_ground_cleanly(cameras: &[Camera]) -> String {
    let all = frames::corpus_frames(cameras);
    for (i, frame) in &all {
        let camera = &cameras[*i];
        let desc = describe_frame(frame);
        let caption = desc.render();
        let grounded = substitute_aliases(&caption, &camera.aliases);
        let aliases: Vec<&str> = camera.aliases.entries.keys().map(String::as_str).collect();

        assert!(
            find_alias_matches(&grounded, aliases.iter().copied()).is_empty(),
            "{grounded}"
        );
        assert_eq!(substitute_aliases(&grounded, &camera.aliases), grounded);
        assert_eq!(
            find_alias_matches(&caption, aliases.iter().copied()).len(),
            frames::alias_places(&desc)
        );
        assert_eq!(grounded, frames::to_real_names(&desc, camera).render());

        let parsed = parse_strict(&caption, &camera.sections).expect("captions parse strictly");
        assert_eq!(parsed.mentions.len(), frame.vehicles().count());
    }
    format!("{} captions", all.len())
}

/// Strict parsing returns exactly the vehicles, pedestrians and collision
/// flag a random frame's caption was rendered from.
pub fn strict_parse_inverts_captions(cameras: &[Camera], n: u64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n {
        let camera = &cameras[k as usize % cameras.len()];
        let frame = frames::random_frame(&mut rng, camera, k);
        let caption = caption_frame(&frame);
        let parsed =
            parse_strict(&caption, &camera.sections).unwrap_or_else(|| panic!("strict parse failed: {caption}"));
        assert_eq!(parsed.mode, ParseMode::Strict);

        let mut vehicles = Vec::new();
        let mut pedestrians = Vec::new();
        for item in describe_frame(&frame).items {
            match item {
                SceneItem::Vehicle { place, direction, .. } => vehicles.push(Mention {
                    place: Some(place),
                    direction: Some(direction),
                }),
                SceneItem::Pedestrian { place } => pedestrians.push(Some(place)),
            }
        }
        assert_eq!(parsed.mentions, vehicles, "{caption}");
        assert_eq!(parsed.pedestrians, pedestrians, "{caption}");
        assert_eq!(parsed.collision_claim, Some(frame.collision_present), "{caption}");
    }
    format!("{n} random frames")
}
