mod common;

use common::{geometry, sampled_point_segment};
use fretsync::hand::available_parts;
use fretsync::oracle::{assign_fingers, finger_tips, left_rest_coordinates, solve_placement, OracleConfig};
use fretsync::reward::{left_string_reward, no_pick_reward, right_pick_reward, PickBranch, PickContext};
use fretsync::session::PickBook;
use fretsync::{HandSkeleton, StringTarget, TabNote};
use nalgebra::Point3;
use num_rational::Ratio;
use serde_json::Value;

#[test]
fn fixture_rows_carry_their_derivation() {
    let fixture: Value = serde_json::from_str(include_str!("fixtures/reward_points.json")).unwrap();
    let families = fixture.as_object().unwrap();
    assert_eq!(families.len(), 7);
    for (name, rows) in families {
        let rows = rows.as_array().unwrap();
        assert!(rows.len() >= 20, "{name}");
        for row in rows {
            assert!(row["expected"].is_f64(), "{name}");
            assert!(!row["derivation"].as_str().unwrap().is_empty(), "{name}");
        }
    }
}

#[test]
fn press_reward_uses_the_nearest_available_part() {
    let g = geometry();
    let cfg = OracleConfig::default();
    let sk = HandSkeleton::left();
    let rest = sk.pose(left_rest_coordinates(&g, &cfg)).unwrap();
    let note = TabNote::new(
        [StringTarget::Mute, StringTarget::Fret(3), StringTarget::Mute, StringTarget::Fret(2), StringTarget::Mute, StringTarget::Mute],
        Ratio::new(1, 4),
    );
    let a = assign_fingers(&note, 0, &g, &finger_tips(&rest)).unwrap();
    let placed = solve_placement(&note, &a, &g, Some(&rest), &cfg).unwrap();
    let mask = available_parts(&placed.pose, &[2, 3], &g).unwrap();
    for (s, k) in [(1usize, 3u8), (3, 2)] {
        let p = g.press_point(s, k as usize);
        let d = mask
            .parts_for(k)
            .map(|part| sampled_point_segment(&p, &placed.pose.parts[part].axis()))
            .fold(f64::INFINITY, f64::min);
        let want = 0.8 * (-1000.0 * d * d).exp() + 0.2 * (-30.0 * d * d).exp();
        let got = left_string_reward(s, StringTarget::Fret(k), &placed.pose, &g, &mask).unwrap();
        assert!((got - want).abs() < 1e-9, "string {s}: {got} vs {want}");
    }
}

#[test]
fn pressing_gate_forces_the_no_pick_branch() {
    let g = geometry();
    let note = TabNote::new([StringTarget::Open; 6], Ratio::new(1, 4));
    let book = PickBook::default();
    let tip = Point3::new(g.pick_region_x(), 0.0, 0.01);
    for picked in [false, true] {
        let ctx = PickContext { note: &note, book: &book, picked_this_frame: picked, tip, cooperative_gate: Some(false) };
        let r = right_pick_reward(&ctx, &g);
        assert_eq!(r.branch, PickBranch::Cross);
        assert!(r.value >= 0.2 && r.value <= 0.6);
    }
}

#[test]
fn finished_note_scores_clearance_and_correctness() {
    let g = geometry();
    let note = TabNote::new(
        [StringTarget::Open, StringTarget::Open, StringTarget::Mute, StringTarget::Mute, StringTarget::Mute, StringTarget::Mute],
        Ratio::new(1, 4),
    );
    let book = PickBook { picks: [1, 1, 0, 0, 0, 0], ..PickBook::default() };
    let far = Point3::new(g.pick_region_x(), 0.0, 0.05);
    let ctx = PickContext { note: &note, book: &book, picked_this_frame: false, tip: far, cooperative_gate: None };
    let r = right_pick_reward(&ctx, &g);
    assert_eq!(r.branch, PickBranch::Minus);
    assert!((r.value - 1.5).abs() < 1e-12, "{}", r.value);
    assert!((no_pick_reward(0.0, 0.2) - 0.2).abs() < 1e-15);
}
