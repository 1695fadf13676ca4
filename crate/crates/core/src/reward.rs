//! Reward terms for fret pressing, string picking and two-hand cooperation.
//!
//! All evaluators are pure: identical inputs give bit-identical outputs.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{point_to_segment_distance, segment_to_segment_distance, FretboardGeometry};
use crate::hand::{available_parts, AvailabilityMask, HandPose, PALM};
use crate::session::{detect_presses, expected_press_predicate, PickBook};
use crate::tab::{StringTarget, TabNote};
use crate::{Error, Result, NUM_STRINGS};

/// Distance at which an open string counts as clear of every finger.
pub const OPEN_CLEARANCE: f64 = 0.007;
/// Desired pick-tip clearance from every string once a note is done.
pub const PICK_CLEARANCE: f64 = 0.003;

/// Fret-pressing term from the distance between the press point and the
/// closest available finger part.
pub fn press_reward(d: f64) -> f64 {
    0.8 * (-1000.0 * d * d).exp() + 0.2 * (-30.0 * d * d).exp()
}

/// Open-string term from the closest finger-part distance to the string.
pub fn open_reward(d: f64) -> f64 {
    ((d / OPEN_CLEARANCE).powi(2)).min(1.0)
}

/// Loose mute-string term built on the open-string term.
pub fn mute_reward(open: f64) -> f64 {
    0.9 + 0.1 * open
}

/// Per-string objective of the fretting hand.
pub fn left_objective(string_reward: f64, correct: f64, energy: f64) -> f64 {
    0.8 * string_reward + 0.2 * correct - 0.05 * energy
}

/// Energy term from the wrist speed and fingertip speeds relative to the wrist.
pub fn energy_reward(wrist_speed: f64, fingertip_speeds: &[f64]) -> f64 {
    let s = wrist_speed + 0.1 * fingertip_speeds.iter().sum::<f64>();
    (-(s * s)).exp()
}

/// Pick-tip distance reward for a wrongly tackled or extreme target string.
pub fn pick_distance_reward(d: f64) -> f64 {
    0.175 * (-10000.0 * d * d).exp() + 0.025 * (-2000.0 * d * d).exp()
}

/// Overall picking score once no target is left.
pub fn overall_pick_reward(min_distance: f64, correct: &[f64; NUM_STRINGS]) -> f64 {
    0.4 * (min_distance / PICK_CLEARANCE).min(1.0)
        + 0.1 * correct.iter().sum::<f64>()
        + 0.5 * correct.iter().product::<f64>()
}

/// Reward while targets remain but nothing is picked this frame.
pub fn no_pick_reward(top: f64, bottom: f64) -> f64 {
    0.2 + 2.0 * top.min(bottom)
}

/// Stability of the pick: speed and acceleration penalties. Not clamped.
pub fn pick_energy_reward(velocity: &Vector3<f64>, acceleration: &Vector3<f64>) -> f64 {
    (-20.0 * velocity.norm_squared()).exp() - 14.0 * (0.05 * acceleration.norm()).powi(4)
}

pub fn right_total(pick: f64, contact: f64, hand_energy: f64, pick_energy: f64) -> f64 {
    pick + 0.05 * contact + 0.05 * (hand_energy + pick_energy)
}

/// Reward of string `i` (0-based) for its target, given the current pose.
pub fn left_string_reward(
    i: usize,
    target: StringTarget,
    pose: &HandPose,
    geometry: &FretboardGeometry,
    availability: &AvailabilityMask,
) -> Result<f64> {
    match target {
        StringTarget::Fret(k) => {
            if k < 1 || k as usize > geometry.num_frets() {
                return Err(Error::Config(format!("target fret {k} outside the fretboard")));
            }
            let p = geometry.press_point(i, k as usize);
            let d = availability
                .parts_for(k)
                .map(|part| point_to_segment_distance(&p, &pose.parts[part].axis()).0)
                .fold(f64::INFINITY, f64::min);
            Ok(press_reward(d))
        }
        StringTarget::Open => Ok(open_reward(string_clearance(i, pose, geometry))),
        StringTarget::Mute => Ok(mute_reward(open_reward(string_clearance(i, pose, geometry)))),
    }
}

/// Shortest distance between string `i` and any of the 12 finger parts.
pub fn string_clearance(i: usize, pose: &HandPose, geometry: &FretboardGeometry) -> f64 {
    let s = geometry.string_line(i);
    pose.parts
        .iter()
        .map(|p| segment_to_segment_distance(&p.axis(), s))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftRewardBreakdown {
    pub strings: [f64; NUM_STRINGS],
    pub correct: f64,
    pub energy: f64,
    pub objectives: [f64; NUM_STRINGS],
}

/// Wrist speed and fingertip speeds (relative to the wrist) between the last two poses.
pub fn hand_speeds(history: &[&HandPose], dt: f64) -> (f64, [f64; 5]) {
    let n = history.len();
    if n < 2 {
        return (0.0, [0.0; 5]);
    }
    let (prev, curr) = (history[n - 2], history[n - 1]);
    let wrist = (curr.wrist_position() - prev.wrist_position()).norm() / dt;
    let inv_prev = prev.links[PALM].inverse();
    let inv_curr = curr.links[PALM].inverse();
    let tips = std::array::from_fn(|f| {
        let a = inv_prev * prev.tips[f];
        let b = inv_curr * curr.tips[f];
        (b - a).norm() / dt
    });
    (wrist, tips)
}

pub fn hand_energy(history: &[&HandPose], dt: f64) -> f64 {
    let (w, tips) = hand_speeds(history, dt);
    energy_reward(w, &tips)
}

/// All fretting-hand terms for the latest pose in `history` (oldest first).
pub fn left_frame_rewards(
    note: &TabNote,
    history: &[&HandPose],
    geometry: &FretboardGeometry,
    dt: f64,
) -> Result<LeftRewardBreakdown> {
    let pose = *history
        .last()
        .ok_or_else(|| Error::Shape("empty pose history".into()))?;
    let mask = available_parts(pose, &note.pressed_frets(), geometry)?;
    let mut strings = [0.0; NUM_STRINGS];
    for (i, r) in strings.iter_mut().enumerate() {
        *r = left_string_reward(i, note.strings[i], pose, geometry, &mask)?;
    }
    let presses = detect_presses(&pose.parts, geometry);
    let correct = if expected_press_predicate(&presses, note) { 1.0 } else { 0.0 };
    let energy = hand_energy(history, dt);
    let objectives = strings.map(|r| left_objective(r, correct, energy));
    Ok(LeftRewardBreakdown {
        strings,
        correct,
        energy,
        objectives,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PickBranch {
    /// A pick happened this frame.
    #[serde(rename = "+")]
    Plus,
    /// No target left in the note.
    #[serde(rename = "-")]
    Minus,
    /// Targets remain, nothing picked.
    #[serde(rename = "x")]
    Cross,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickReward {
    pub value: f64,
    pub branch: PickBranch,
}

/// Inputs of the picking reward for one frame.
#[derive(Debug, Clone, Copy)]
pub struct PickContext<'a> {
    pub note: &'a TabNote,
    /// Pick book after this frame's events were applied.
    pub book: &'a PickBook,
    pub picked_this_frame: bool,
    pub tip: Point3<f64>,
    /// `Some(p)` in two-hand mode, where `p` is whether every string is at its
    /// expected pressing state.
    pub cooperative_gate: Option<bool>,
}

fn tip_distances(tip: &Point3<f64>, geometry: &FretboardGeometry) -> [f64; NUM_STRINGS] {
    std::array::from_fn(|i| point_to_segment_distance(tip, geometry.string_line(i)).0)
}

pub fn right_pick_reward(ctx: &PickContext<'_>, geometry: &FretboardGeometry) -> PickReward {
    let d = tip_distances(&ctx.tip, geometry);
    let targets = ctx.note.pick_targets();
    let cross = || {
        let remaining = ctx.book.remaining(&targets);
        let pool: Vec<usize> = if remaining.is_empty() {
            (0..NUM_STRINGS).filter(|&i| targets[i]).collect()
        } else {
            remaining
        };
        let value = match (pool.first(), pool.last()) {
            (Some(&top), Some(&bottom)) => {
                no_pick_reward(pick_distance_reward(d[top]), pick_distance_reward(d[bottom]))
            }
            _ => no_pick_reward(0.0, 0.0),
        };
        PickReward {
            value,
            branch: PickBranch::Cross,
        }
    };
    if ctx.cooperative_gate == Some(false) {
        return cross();
    }
    if ctx.picked_this_frame {
        let wrong = (0..NUM_STRINGS)
            .filter(|&i| ctx.book.wrongly_tackled[i])
            .map(|i| pick_distance_reward(d[i]))
            .fold(f64::INFINITY, f64::min);
        let value = if wrong.is_finite() { wrong } else { 1.0 };
        return PickReward {
            value,
            branch: PickBranch::Plus,
        };
    }
    if ctx.book.remaining(&targets).is_empty() {
        let correct: [f64; NUM_STRINGS] = std::array::from_fn(|i| {
            let ok = if targets[i] {
                ctx.book.picks[i] == 1 && !ctx.book.wrongly_tackled[i]
            } else {
                ctx.book.picks[i] == 0
            };
            if ok {
                1.0
            } else {
                0.0
            }
        });
        let min_d = d.iter().copied().fold(f64::INFINITY, f64::min);
        return PickReward {
            value: overall_pick_reward(min_d, &correct),
            branch: PickBranch::Minus,
        };
    }
    cross()
}

/// Pick velocity and acceleration from the latest tip positions (oldest first).
/// Acceleration is the second difference when three positions exist, else zero.
pub fn pick_kinematics(tips: &[Point3<f64>], dt: f64) -> (Vector3<f64>, Vector3<f64>) {
    let n = tips.len();
    let v = if n >= 2 {
        (tips[n - 1] - tips[n - 2]) / dt
    } else {
        Vector3::zeros()
    };
    let a = if n >= 3 {
        (tips[n - 1].coords - 2.0 * tips[n - 2].coords + tips[n - 3].coords) / (dt * dt)
    } else {
        Vector3::zeros()
    };
    (v, a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RightRewardBreakdown {
    pub pick: PickReward,
    pub contact: f64,
    pub hand_energy: f64,
    pub pick_energy: f64,
    pub total: f64,
}

pub fn right_frame_reward(
    pick: PickReward,
    contact: bool,
    hand_history: &[&HandPose],
    tip_history: &[Point3<f64>],
    dt: f64,
) -> RightRewardBreakdown {
    let contact = if contact { 1.0 } else { 0.0 };
    let hand_energy = hand_energy(hand_history, dt);
    let (v, a) = pick_kinematics(tip_history, dt);
    let pick_energy = pick_energy_reward(&v, &a);
    RightRewardBreakdown {
        pick,
        contact,
        hand_energy,
        pick_energy,
        total: right_total(pick.value, contact, hand_energy, pick_energy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GuitarSpec;
    use crate::hand::{finger_joint_base, HandSkeleton};
    use crate::session::PickDirection;
    use approx::assert_relative_eq;
    use num_rational::Ratio;
    use proptest::prelude::*;
    use StringTarget::{Fret, Mute, Open};

    #[test]
    fn closed_form_points() {
        assert_eq!(press_reward(0.0), 1.0);
        assert_relative_eq!(press_reward(0.01), 0.8 * (-0.1f64).exp() + 0.2 * (-0.003f64).exp());
        assert_relative_eq!(press_reward(0.01), 0.923_271, epsilon = 1e-6);
        assert_relative_eq!(press_reward(0.45), 0.2 * (-6.075f64).exp(), epsilon = 1e-15);
        assert!((press_reward(0.45) - 4.6e-4).abs() < 1e-5);
        assert_relative_eq!(open_reward(0.0035), 0.25);
        assert_eq!(open_reward(0.007), 1.0);
        assert_eq!(mute_reward(0.0), 0.9);
        assert_relative_eq!(energy_reward(1.0, &[0.0; 5]), (-1.0f64).exp());
        assert_relative_eq!(pick_distance_reward(0.0), 0.2);
        assert_relative_eq!(pick_distance_reward(0.01), 0.084_85, epsilon = 1e-5);
        assert_relative_eq!(no_pick_reward(pick_distance_reward(0.01), 1.0), 0.3697, epsilon = 1e-4);
        assert_relative_eq!(overall_pick_reward(0.003, &[1.0; 6]), 1.5);
        let v = Vector3::new(0.5, 0.0, 0.0);
        assert_relative_eq!(pick_energy_reward(&v, &Vector3::zeros()), (-5.0f64).exp());
        let a = Vector3::new(0.0, 20.0, 0.0);
        assert_relative_eq!(pick_energy_reward(&Vector3::zeros(), &a), 1.0 - 14.0);
        assert_relative_eq!(left_objective(1.0, 1.0, 1.0), 0.95);
    }

    proptest! {
        #[test]
        fn distance_rewards_strictly_decrease(d in 1e-4f64..0.3, step in 1e-4f64..0.05) {
            prop_assert!(press_reward(d + step) < press_reward(d));
            prop_assert!(pick_distance_reward(d + step) < pick_distance_reward(d));
        }

        #[test]
        fn open_reward_bounds(d in 0.0f64..0.1) {
            let r = open_reward(d);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r == 1.0, d >= OPEN_CLEARANCE);
        }
    }

    fn hovering_pose() -> (HandSkeleton, HandPose) {
        let sk = HandSkeleton::left();
        let mut q = sk.neutral();
        q[2] = 0.3;
        (sk.clone(), sk.pose(q).unwrap())
    }

    #[test]
    fn all_mute_far_hand_saturates() {
        let g = FretboardGeometry::new(GuitarSpec::default()).unwrap();
        let (_, pose) = hovering_pose();
        let note = TabNote::new([Mute; 6], Ratio::new(1, 4));
        let r = left_frame_rewards(&note, &[&pose, &pose], &g, 1.0 / 60.0).unwrap();
        assert_eq!(r.strings, [1.0; 6]);
        assert_eq!(r.correct, 1.0);
        assert_eq!(r.energy, 1.0);
        assert_relative_eq!(r.objectives[0], 0.95);
    }

    #[test]
    fn target_fret_out_of_range() {
        let spec = GuitarSpec {
            num_frets: 12,
            ..GuitarSpec::default()
        };
        let g = FretboardGeometry::new(spec).unwrap();
        let (_, pose) = hovering_pose();
        let mask = available_parts(&pose, &[20], &g).unwrap();
        assert!(left_string_reward(0, Fret(20), &pose, &g, &mask).is_err());
    }

    #[test]
    fn wrist_speed_energy() {
        let (sk, pose) = hovering_pose();
        let dt = 1.0 / 60.0;
        let mut q = pose.joints;
        q[0] += dt; // 1 m/s
        let moved = sk.pose(q).unwrap();
        assert_relative_eq!(hand_energy(&[&pose, &moved], dt), (-1.0f64).exp(), epsilon = 1e-9);
        // curling a finger while the wrist rests costs through the 0.1 factor
        let mut q = pose.joints;
        q[finger_joint_base(1)] += 0.1;
        let curled = sk.pose(q).unwrap();
        let (w, tips) = hand_speeds(&[&pose, &curled], dt);
        assert_eq!(w, 0.0);
        assert!(tips[1] > 0.0 && tips[2] == 0.0);
    }

    fn book(picks: [u32; 6], wrong: [bool; 6]) -> PickBook {
        PickBook {
            picks,
            wrongly_tackled: wrong,
            direction: Some(PickDirection::DownToUp),
        }
    }

    #[test]
    fn pick_branches() {
        let g = FretboardGeometry::new(GuitarSpec::default()).unwrap();
        let note = TabNote::new([Mute, Mute, Open, Fret(2), Mute, Mute], Ratio::new(1, 4));
        let x = g.pick_region_x();
        let above = |i: usize, dz: f64| Point3::new(x, g.string_y(i, x), g.action_height() + dz);

        // clean pick
        let b = book([0, 0, 0, 1, 0, 0], [false; 6]);
        let ctx = PickContext { note: &note, book: &b, picked_this_frame: true, tip: above(3, 0.01), cooperative_gate: None };
        let r = right_pick_reward(&ctx, &g);
        assert_eq!((r.value, r.branch), (1.0, PickBranch::Plus));

        // wrong string with the tip on it
        let b = book([0, 1, 0, 0, 0, 0], [false, true, false, false, false, false]);
        let ctx = PickContext { note: &note, book: &b, picked_this_frame: true, tip: above(1, 0.0), cooperative_gate: None };
        assert_relative_eq!(right_pick_reward(&ctx, &g).value, 0.2);

        // done, clean, tip clear
        let b = book([0, 0, 1, 1, 0, 0], [false; 6]);
        let ctx = PickContext { note: &note, book: &b, picked_this_frame: false, tip: above(0, 0.02), cooperative_gate: None };
        let r = right_pick_reward(&ctx, &g);
        assert_eq!(r.branch, PickBranch::Minus);
        assert_relative_eq!(r.value, 1.5);

        // waiting: nearest extreme target 0.01 m away, the other far
        let b = PickBook::default();
        let ctx = PickContext { note: &note, book: &b, picked_this_frame: false, tip: above(3, 0.01), cooperative_gate: None };
        let r = right_pick_reward(&ctx, &g);
        assert_eq!(r.branch, PickBranch::Cross);
        let d_top = point_to_segment_distance(&above(3, 0.01), g.string_line(2)).0;
        assert_relative_eq!(r.value, no_pick_reward(pick_distance_reward(d_top), pick_distance_reward(0.01)));

        // gate closes the pick branch
        let b = book([0, 0, 0, 1, 0, 0], [false; 6]);
        let ctx = PickContext { note: &note, book: &b, picked_this_frame: true, tip: above(3, 0.01), cooperative_gate: Some(false) };
        assert_eq!(right_pick_reward(&ctx, &g).branch, PickBranch::Cross);
    }

    #[test]
    fn pick_at_rest_with_contact() {
        let (_, pose) = hovering_pose();
        let tip = Point3::new(0.5, 0.0, 0.01);
        let pick = PickReward { value: 1.0, branch: PickBranch::Plus };
        let r = right_frame_reward(pick, true, &[&pose, &pose], &[tip, tip, tip], 1.0 / 60.0);
        assert_eq!(r.pick_energy, 1.0);
        assert_eq!(r.contact, 1.0);
        assert_relative_eq!(r.total, 1.0 + 0.05 + 0.05 * 2.0);
    }
}
