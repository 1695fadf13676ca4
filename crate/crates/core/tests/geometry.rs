mod common;

use common::{geometry, sampled_point_segment, sampled_segment_segment};
use fretsync::geometry::{point_to_segment_distance, segment_closest_points, segment_to_segment_distance};
use fretsync::{FretboardGeometry, GuitarSpec, Segment, NUM_STRINGS};
use nalgebra::Point3;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point3<f64>> {
    (-0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn segment() -> impl Strategy<Value = Segment> {
    (point(), point()).prop_map(|(a, b)| Segment::new(a, b))
}

proptest! {
    #[test]
    fn segment_distance_is_symmetric_and_bounded(a in segment(), b in segment()) {
        let d = segment_to_segment_distance(&a, &b);
        prop_assert!((d - segment_to_segment_distance(&b, &a)).abs() < 1e-12);
        prop_assert!(d >= 0.0);
        for p in [a.a, a.b] {
            prop_assert!(d <= point_to_segment_distance(&p, &b).0 + 1e-12);
        }
    }

    #[test]
    fn closest_points_realise_the_distance(a in segment(), b in segment()) {
        let pair = segment_closest_points(&a, &b);
        prop_assert!(((pair.on_first - pair.on_second).norm() - pair.distance).abs() < 1e-12);
        prop_assert!(point_to_segment_distance(&pair.on_first, &a).0 < 1e-12);
        prop_assert!(point_to_segment_distance(&pair.on_second, &b).0 < 1e-12);
    }

    #[test]
    fn point_distance_matches_sampling(p in point(), s in segment()) {
        let got = point_to_segment_distance(&p, &s).0;
        prop_assert!((got - sampled_point_segment(&p, &s)).abs() < 1e-6);
    }
}

#[test]
fn crossing_strings_and_a_parallel_pair_match_sampling() {
    let g = geometry();
    let s1 = *g.string_line(0);
    let across = Segment::new(Point3::new(0.1, -0.05, 0.01), Point3::new(0.1, 0.05, 0.01));
    let parallel = Segment::new(s1.a + nalgebra::Vector3::new(0.05, 0.0, 0.003), s1.b + nalgebra::Vector3::new(-0.05, 0.0, 0.003));
    for other in [across, parallel] {
        let got = segment_to_segment_distance(&s1, &other);
        assert!((got - sampled_segment_segment(&s1, &other)).abs() < 1e-6);
    }
    assert!((segment_to_segment_distance(&s1, &parallel) - 0.003).abs() < 1e-9);
}

#[test]
fn press_points_sit_on_their_string_inside_their_fret() {
    let g = geometry();
    for s in 0..NUM_STRINGS {
        for k in 1..=g.num_frets() {
            let p = g.press_point(s, k);
            assert!(point_to_segment_distance(&p, g.string_line(s)).0 < 1e-12);
            assert!(p.x > g.fret_wire(k - 1) && p.x < g.fret_wire(k));
            assert_eq!(g.fret_at(p.x), Some(k));
        }
    }
}

#[test]
fn strings_fan_out_from_nut_to_bridge() {
    let g = geometry();
    let spec = g.spec().clone();
    let spread = |x: f64| g.string_y(NUM_STRINGS - 1, x) - g.string_y(0, x);
    assert!((spread(0.0) - 5.0 * spec.string_spacing_nut).abs() < 1e-12);
    assert!((spread(g.scale_length()) - 5.0 * spec.string_spacing_bridge).abs() < 1e-12);
    for s in 1..NUM_STRINGS {
        assert!(g.string_y(s, 0.3) > g.string_y(s - 1, 0.3));
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let bad = [
        GuitarSpec { scale_length: 0.0, ..GuitarSpec::default() },
        GuitarSpec { num_frets: 25, ..GuitarSpec::default() },
        GuitarSpec { num_strings: 7, ..GuitarSpec::default() },
        GuitarSpec { string_action_height: -0.001, ..GuitarSpec::default() },
    ];
    for spec in bad {
        assert!(FretboardGeometry::new(spec).is_err());
    }
}
