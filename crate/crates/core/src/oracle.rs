//! Heuristic kinematic player.
//!
//! The fretting hand hangs over the fingerboard with the palm facing down and
//! the knuckle line beyond string 1; each assigned finger is placed with a
//! planar three-link solve that keeps the distal bone close to vertical, then
//! polished by cyclic coordinate descent. The picking hand holds the pick and
//! only translates: it hovers above the strings, drops below string height at
//! the edge of the target span, sweeps across it and rises again.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::env::HandRates;
use crate::geometry::FretboardGeometry;
use crate::hand::{finger_joint_base, finger_may_press, part_id, HandPose, HandSkeleton, PickModel, INDEX, NUM_DOF, PINKY};
use crate::metrics::{aggregate, evaluate, ScoreReport};
use crate::reward::{left_frame_rewards, right_frame_reward, right_pick_reward, LeftRewardBreakdown, PickContext, RightRewardBreakdown};
use crate::session::{detect_presses, expected_press_predicate, LogEvent, NoteLedger, PickDirection, StringSession};
use crate::tab::{StringTarget, TabNote, TabScore};
use crate::{Error, Result, CONTROL_HZ, NUM_STRINGS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Joint and wrist rate limits of both hands.
    pub rates: HandRates,
    /// Height of the knuckle line above the strings for fretted notes (m).
    pub knuckle_height: f64,
    /// Height of the barring finger's axis above the strings (m).
    pub barre_gap: f64,
    /// Pick tip height above the strings between sweeps (m).
    pub hover: f64,
    /// Pick tip depth below the strings during a sweep (m).
    pub sweep_depth: f64,
    /// Lateral run-out past an outer target string (m).
    pub sweep_margin: f64,
    pub max_sweeps: usize,
    /// Largest accepted distance between an assigned tip and its press point (m).
    pub residual_tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            rates: HandRates {
                translation: 1.0,
                joint: 20.0,
            },
            knuckle_height: 0.065,
            barre_gap: 0.0035,
            hover: 0.008,
            sweep_depth: 0.0015,
            sweep_margin: 0.005,
            max_sweeps: 200,
            residual_tolerance: 0.004,
        }
    }
}

/// One pressed target and the finger part that presses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FingerTarget {
    /// 0-based string index.
    pub string: usize,
    pub fret: u8,
    /// 1 = index .. 4 = pinky.
    pub finger: usize,
    pub part: usize,
}

/// Strings pressed together by one finger lying flat at one fret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarreGroup {
    pub finger: usize,
    pub fret: u8,
    pub strings: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingeringAssignment {
    pub note_index: usize,
    pub targets: Vec<FingerTarget>,
    pub barre: Option<BarreGroup>,
    /// Summed in-plane fingertip travel from the previous placement (m).
    pub cost: f64,
}

impl FingeringAssignment {
    fn finger_targets(&self) -> impl Iterator<Item = &FingerTarget> {
        let barre = self.barre.as_ref();
        self.targets
            .iter()
            .filter(move |t| barre.is_none_or(|b| !(b.finger == t.finger && b.fret == t.fret)))
    }
}

/// Pressed targets of `note` in string order.
fn fretted(note: &TabNote) -> Vec<(usize, u8)> {
    note.strings
        .iter()
        .enumerate()
        .filter_map(|(s, t)| t.fret().map(|k| (s, k)))
        .collect()
}

fn distinct_frets(targets: &[(usize, u8)]) -> Vec<u8> {
    let mut frets: Vec<u8> = targets.iter().map(|t| t.1).collect();
    frets.sort_unstable();
    frets.dedup();
    frets
}

/// Strings covered by an index barre at the lowest fret, when the barre rule
/// applies: at least three targets on that fret over adjacent strings, and no
/// open target underneath the finger.
fn barre_strings(note: &TabNote, targets: &[(usize, u8)]) -> Option<(u8, Vec<usize>)> {
    let low = *distinct_frets(targets).first()?;
    let on_low: Vec<usize> = targets.iter().filter(|t| t.1 == low).map(|t| t.0).collect();
    if on_low.len() < 3 {
        return None;
    }
    let longest_adjacent = on_low
        .windows(2)
        .fold((1, 1), |(best, run), w| {
            let run = if w[1] == w[0] + 1 { run + 1 } else { 1 };
            (best.max(run), run)
        })
        .0;
    if longest_adjacent < 3 {
        return None;
    }
    // The finger reaches from string 1 to the last barred string.
    let last = *on_low.last().expect("nonempty");
    if (0..=last).any(|s| note.strings[s] == StringTarget::Open) {
        return None;
    }
    Some((low, on_low))
}

/// Every mask-consistent assignment of `note`, cheapest first.
///
/// `previous_tips` are the in-plane positions of the index..pinky tips before
/// the note. Returns an infeasibility error naming the note when no
/// assignment exists.
pub fn candidate_assignments(
    note: &TabNote,
    note_index: usize,
    geometry: &FretboardGeometry,
    previous_tips: &[Point3<f64>; 4],
) -> Result<Vec<FingeringAssignment>> {
    let targets = fretted(note);
    let frets = distinct_frets(&targets);
    let m = frets.len();
    if m > 4 {
        return Err(Error::Infeasible {
            note: note_index,
            msg: format!("{m} distinct frets, at most 4 can be pressed"),
        });
    }
    let press = |s: usize, k: u8| geometry.press_point(s, k as usize);
    let travel = |finger: usize, p: Point3<f64>| {
        let prev = previous_tips[finger - 1];
        ((p.x - prev.x).powi(2) + (p.y - prev.y).powi(2)).sqrt()
    };

    let barre = barre_strings(note, &targets);
    let (fixed, free): (Vec<FingerTarget>, Vec<(usize, u8)>) = match &barre {
        Some((fret, strings)) => {
            let fixed = strings
                .iter()
                .map(|&s| FingerTarget {
                    string: s,
                    fret: *fret,
                    finger: INDEX,
                    part: barre_part(geometry, s, *fret, *strings.last().expect("nonempty")),
                })
                .collect();
            (fixed, targets.iter().copied().filter(|t| t.1 != *fret).collect())
        }
        None => (Vec::new(), targets.clone()),
    };
    let first_free_finger = if barre.is_some() { 2 } else { 1 };
    let fingers: Vec<usize> = (first_free_finger..=PINKY).collect();

    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(free.len());
    let mut used = [false; 5];
    enumerate(&free, &fingers, &mut used, &mut chosen, &mut |pick: &[usize]| {
        let mut assigned: Vec<FingerTarget> = fixed.clone();
        for (&(s, k), &f) in free.iter().zip(pick) {
            assigned.push(FingerTarget {
                string: s,
                fret: k,
                finger: f,
                part: part_id(f, 2),
            });
        }
        if !mask_consistent(&assigned, &frets) {
            return;
        }
        let mut cost: f64 = free.iter().zip(pick).map(|(&(s, k), &f)| travel(f, press(s, k))).sum();
        if let Some((fret, strings)) = &barre {
            let mid = strings[strings.len() / 2];
            cost += travel(INDEX, press(mid, *fret));
        }
        assigned.sort_by_key(|t| t.string);
        out.push(FingeringAssignment {
            note_index,
            targets: assigned,
            barre: barre.as_ref().map(|(fret, strings)| BarreGroup {
                finger: INDEX,
                fret: *fret,
                strings: strings.clone(),
            }),
            cost,
        });
    });
    if out.is_empty() {
        return Err(Error::Infeasible {
            note: note_index,
            msg: format!(
                "no finger assignment satisfies the availability rules for {} targets on {m} frets",
                targets.len()
            ),
        });
    }
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    Ok(out)
}

fn enumerate(
    targets: &[(usize, u8)],
    fingers: &[usize],
    used: &mut [bool; 5],
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if chosen.len() == targets.len() {
        visit(chosen);
        return;
    }
    for &f in fingers {
        if used[f] {
            continue;
        }
        used[f] = true;
        chosen.push(f);
        enumerate(targets, fingers, used, chosen, visit);
        chosen.pop();
        used[f] = false;
    }
}

fn mask_consistent(assigned: &[FingerTarget], frets: &[u8]) -> bool {
    let m = frets.len();
    let order = |k: u8| frets.iter().position(|&f| f == k).expect("fret of a target") + 1;
    assigned.iter().all(|t| finger_may_press(t.finger, order(t.fret), m))
        && assigned.iter().all(|a| {
            assigned
                .iter()
                .all(|b| a.finger != b.finger || a.fret == b.fret)
                && assigned
                    .iter()
                    .all(|b| !(a.finger < b.finger && a.fret > b.fret))
        })
}

/// Cheapest mask-consistent assignment of `note`.
pub fn assign_fingers(
    note: &TabNote,
    note_index: usize,
    geometry: &FretboardGeometry,
    previous_tips: &[Point3<f64>; 4],
) -> Result<FingeringAssignment> {
    Ok(candidate_assignments(note, note_index, geometry, previous_tips)?.remove(0))
}

/// Checks an assignment against the fretting rules directly from the note:
/// every fretted target is covered exactly once, at most four frets, each
/// finger on one fret, fingers ordered like their frets, fret order `o` of
/// `m` pressed only by fingers `o ..= 4 - (m - o)`, non-tip parts only in a
/// barre of the order-1 finger, and open strings never under a barre.
pub fn validate_assignment(note: &TabNote, a: &FingeringAssignment) -> Result<()> {
    let fail = |msg: String| Err(Error::Infeasible { note: a.note_index, msg });
    let mut covered = [0u32; NUM_STRINGS];
    for t in &a.targets {
        if t.string >= NUM_STRINGS {
            return fail(format!("string index {} out of range", t.string));
        }
        if note.strings[t.string] != StringTarget::Fret(t.fret) {
            return fail(format!("string {} is not a target at fret {}", t.string + 1, t.fret));
        }
        covered[t.string] += 1;
    }
    for (s, target) in note.strings.iter().enumerate() {
        let want = u32::from(matches!(target, StringTarget::Fret(_)));
        if covered[s] != want {
            return fail(format!("string {} covered {} times", s + 1, covered[s]));
        }
    }
    let mut frets: Vec<u8> = a.targets.iter().map(|t| t.fret).collect();
    frets.sort_unstable();
    frets.dedup();
    let m = frets.len();
    if m > 4 {
        return fail(format!("{m} frets pressed"));
    }
    for t in &a.targets {
        if !(1..=4).contains(&t.finger) {
            return fail(format!("finger {} does not press", t.finger));
        }
        let o = frets.iter().filter(|&&k| k <= t.fret).count();
        if t.finger < o || t.finger > 4 - (m - o) {
            return fail(format!("finger {} may not press fret order {o} of {m}", t.finger));
        }
        let part_finger = t.part / 3 + 1;
        if part_finger != t.finger {
            return fail(format!("part {} does not belong to finger {}", t.part, t.finger));
        }
        let is_tip = t.part % 3 == 2;
        let barred = a
            .barre
            .as_ref()
            .is_some_and(|b| b.finger == t.finger && b.fret == t.fret && b.strings.contains(&t.string));
        if !is_tip && !(barred && o == 1) {
            return fail(format!("non-tip part {} outside a lowest-fret barre", t.part));
        }
    }
    for x in &a.targets {
        for y in &a.targets {
            if x.finger == y.finger && x.fret != y.fret {
                return fail(format!("finger {} on frets {} and {}", x.finger, x.fret, y.fret));
            }
            if x.finger < y.finger && x.fret > y.fret {
                return fail(format!("fingers {} and {} cross", x.finger, y.finger));
            }
            let shared = x.finger == y.finger && x.string != y.string;
            if shared && a.barre.as_ref().is_none_or(|b| b.finger != x.finger) {
                return fail(format!("finger {} presses two strings without a barre", x.finger));
            }
        }
    }
    if let Some(b) = &a.barre {
        let last = b.strings.iter().copied().max().unwrap_or(0);
        if (0..=last).any(|s| note.strings[s] == StringTarget::Open) {
            return fail("open string under the barre".into());
        }
    }
    Ok(())
}

/// Finger part lying over string `s` in a barre at `fret`.
fn barre_part(geometry: &FretboardGeometry, s: usize, fret: u8, last: usize) -> usize {
    let sk = HandSkeleton::left();
    let [l1, l2, _] = sk.fingers[INDEX].lengths;
    let x = geometry.fret_mid(fret as usize);
    let along = geometry.string_y(s, x) - barre_knuckle_y(geometry, x, last, &sk);
    if along <= l1 {
        part_id(INDEX, 0)
    } else if along <= l1 + l2 {
        part_id(INDEX, 1)
    } else {
        part_id(INDEX, 2)
    }
}

/// The barring knuckle sits a little beyond string 1, pulled back further
/// when the finger would otherwise reach past the last barred string.
fn barre_knuckle_y(geometry: &FretboardGeometry, x: f64, last: usize, sk: &HandSkeleton) -> f64 {
    let reach: f64 = sk.fingers[INDEX].lengths.iter().sum();
    let past_last = geometry.string_y(last, x) + 0.0015 - reach;
    let beyond_first = geometry.string_y(0, x) - 0.03;
    if last == NUM_STRINGS - 1 {
        beyond_first
    } else {
        beyond_first.min(past_last)
    }
}

/// Palm facing the fingerboard, fingers pointing from string 1 toward string 6
/// and the index toward the nut.
const PALM_ROLL: f64 = PI;
const PALM_YAW: f64 = FRAC_PI_2;

fn mcp_world(sk: &HandSkeleton, wrist: &Point3<f64>, f: usize) -> Point3<f64> {
    let [ox, oy, oz] = sk.fingers[f].mcp_offset;
    Point3::new(wrist.x + oy, wrist.y + ox, wrist.z - oz)
}

/// Planar solve of finger `f` onto `target` from its knuckle, preferring a
/// distal bone perpendicular to the fingerboard. Writes the finger's four
/// coordinates and returns the distal tilt from vertical, or `None` when out
/// of reach or limits.
fn planar_finger(
    sk: &HandSkeleton,
    q: &mut [f64; NUM_DOF],
    wrist: &Point3<f64>,
    f: usize,
    target: &Point3<f64>,
) -> Option<f64> {
    let m = mcp_world(sk, wrist, f);
    let (dx, dy) = (target.x - m.x, target.y - m.y);
    let abd = dx.atan2(dy);
    let u = dx.hypot(dy);
    let v = m.z - target.z;
    let [l1, l2, l3] = sk.fingers[f].lengths;
    let b = finger_joint_base(f);
    let within = |j: usize, x: f64| x >= sk.limits[j][0] && x <= sk.limits[j][1];
    if !within(b + 1, abd) {
        return None;
    }
    let mut best: Option<([f64; 3], f64)> = None;
    for i in 0..=200 {
        let phi = 0.2 + (PI - 0.4) * i as f64 / 200.0;
        let (du, dv) = (u - l3 * phi.cos(), v - l3 * phi.sin());
        let d2 = du * du + dv * dv;
        let c2 = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        if !(-1.0..=1.0).contains(&c2) {
            continue;
        }
        let t2 = c2.acos();
        let t1 = dv.atan2(du) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
        let t3 = phi - t1 - t2;
        if !(within(b, t1) && within(b + 2, t2) && within(b + 3, t3)) {
            continue;
        }
        let tilt = (phi - FRAC_PI_2).abs();
        if best.is_none_or(|(_, t)| tilt < t) {
            best = Some(([t1, t2, t3], tilt));
        }
    }
    let ([t1, t2, t3], tilt) = best?;
    q[b] = t1;
    q[b + 1] = abd;
    q[b + 2] = t2;
    q[b + 3] = t3;
    Some(tilt)
}

fn hand_coordinates(wrist: &Point3<f64>) -> [f64; NUM_DOF] {
    let mut q = [0.0; NUM_DOF];
    q[0] = wrist.x;
    q[1] = wrist.y;
    q[2] = wrist.z;
    q[3] = PALM_ROLL;
    q[5] = PALM_YAW;
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub pose: HandPose,
    /// Coordinate-descent sweeps spent polishing the fingertips.
    pub sweeps: usize,
    /// Tip-to-press-point distance per finger-placed target, as `(string, m)`.
    pub residuals: Vec<(usize, f64)>,
    /// The pose presses every fretted target at its fret and leaves open strings untouched.
    pub presses_ok: bool,
}

/// Places the fretting hand for `assignment`.
///
/// The wrist's axial position is the least-squares fit of the assigned
/// knuckles to their target frets; its lateral position is searched for the
/// most upright distal bones whose pose passes the press check. Without
/// targets the fingers lift and the wrist holds its previous position.
pub fn solve_placement(
    note: &TabNote,
    assignment: &FingeringAssignment,
    geometry: &FretboardGeometry,
    previous: Option<&HandPose>,
    config: &OracleConfig,
) -> Result<Placement> {
    if geometry.spec().mirrored {
        return Err(Error::Config("the oracle plays the unmirrored fretboard only".into()));
    }
    let sk = HandSkeleton::left();
    let h = geometry.action_height();
    let check = |pose: &HandPose| expected_press_predicate(&detect_presses(&pose.parts, geometry), note);

    if let Some(barre) = &assignment.barre {
        return barre_placement(note, assignment, barre, geometry, config, &sk);
    }
    let placed: Vec<&FingerTarget> = assignment.finger_targets().collect();
    if placed.is_empty() {
        let wrist = previous.map_or_else(|| rest_wrist(geometry, config), |p| {
            let w = p.wrist_position();
            Point3::new(w.x, w.y, h + config.knuckle_height)
        });
        let pose = sk.pose(hand_coordinates(&wrist))?;
        let presses_ok = check(&pose);
        return Ok(Placement {
            pose,
            sweeps: 0,
            residuals: Vec::new(),
            presses_ok,
        });
    }

    let targets: Vec<(usize, Point3<f64>)> = placed
        .iter()
        .map(|t| (t.finger, geometry.press_point(t.string, t.fret as usize)))
        .collect();
    let wrist_x = targets
        .iter()
        .map(|(f, p)| p.x - sk.fingers[*f].mcp_offset[1])
        .sum::<f64>()
        / targets.len() as f64;
    let y1 = geometry.string_y(0, wrist_x);
    let reach_x = sk.fingers[INDEX].mcp_offset[0];

    let mut best: Option<(f64, [f64; NUM_DOF], bool)> = None;
    for i in 0..=40 {
        let knuckle_y = y1 + 0.02 - 0.08 * i as f64 / 40.0;
        let wrist = Point3::new(wrist_x, knuckle_y - reach_x, h + config.knuckle_height);
        let mut q = hand_coordinates(&wrist);
        let mut tilt = 0.0;
        let mut ok = true;
        for (f, p) in &targets {
            match planar_finger(&sk, &mut q, &wrist, *f, p) {
                Some(t) => tilt += t,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || sk.check_limits(&q).is_err() {
            continue;
        }
        let pressed = check(&sk.pose_unchecked(q));
        let better = match &best {
            None => true,
            Some((t, _, p)) => (pressed && !p) || (pressed == *p && tilt < *t),
        };
        if better {
            best = Some((tilt, q, pressed));
        }
    }
    let Some((_, mut q, _)) = best else {
        return Err(Error::Placement {
            note: assignment.note_index,
            residual: f64::INFINITY,
        });
    };

    let mut sweeps = 0;
    let mut residuals = Vec::with_capacity(placed.len());
    for (t, (f, p)) in placed.iter().zip(&targets) {
        let (used, r) = sk.ccd_finger(&mut q, *f, p, config.max_sweeps, 1e-9);
        sweeps += used;
        residuals.push((t.string, r));
    }
    let worst = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    if worst > config.residual_tolerance {
        return Err(Error::Placement {
            note: assignment.note_index,
            residual: worst,
        });
    }
    let pose = sk.pose(q)?;
    let presses_ok = check(&pose);
    Ok(Placement {
        pose,
        sweeps,
        residuals,
        presses_ok,
    })
}

fn barre_placement(
    note: &TabNote,
    assignment: &FingeringAssignment,
    barre: &BarreGroup,
    geometry: &FretboardGeometry,
    config: &OracleConfig,
    sk: &HandSkeleton,
) -> Result<Placement> {
    let h = geometry.action_height();
    let x = geometry.fret_mid(barre.fret as usize);
    let last = *barre.strings.last().expect("nonempty barre");
    let knuckle_y = barre_knuckle_y(geometry, x, last, sk);
    let index = sk.fingers[INDEX].mcp_offset;
    let wrist = Point3::new(x - index[1], knuckle_y - index[0], h + config.barre_gap + index[2]);
    let mut q = hand_coordinates(&wrist);
    for f in INDEX + 1..=PINKY {
        q[finger_joint_base(f)] = sk.limits[finger_joint_base(f)][0];
    }
    let mut sweeps = 0;
    let mut residuals = Vec::new();
    for t in assignment.finger_targets() {
        let p = geometry.press_point(t.string, t.fret as usize);
        if planar_finger(sk, &mut q, &wrist, t.finger, &p).is_none() {
            return Err(Error::Placement {
                note: assignment.note_index,
                residual: f64::INFINITY,
            });
        }
        let (used, r) = sk.ccd_finger(&mut q, t.finger, &p, config.max_sweeps, 1e-9);
        sweeps += used;
        residuals.push((t.string, r));
    }
    let worst = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    if worst > config.residual_tolerance {
        return Err(Error::Placement {
            note: assignment.note_index,
            residual: worst,
        });
    }
    let pose = sk.pose(q)?;
    let presses_ok = expected_press_predicate(&detect_presses(&pose.parts, geometry), note);
    Ok(Placement {
        pose,
        sweeps,
        residuals,
        presses_ok,
    })
}

/// Fretting wrist over the first position with the fingers lifted.
fn rest_wrist(geometry: &FretboardGeometry, config: &OracleConfig) -> Point3<f64> {
    let sk = HandSkeleton::left();
    let [ox, oy, _] = sk.fingers[INDEX].mcp_offset;
    let x = geometry.fret_mid(1) - oy;
    Point3::new(x, geometry.string_y(0, x) - 0.02 - ox, geometry.action_height() + config.knuckle_height)
}

/// Start coordinates of the fretting hand.
pub fn left_rest_coordinates(geometry: &FretboardGeometry, config: &OracleConfig) -> [f64; NUM_DOF] {
    hand_coordinates(&rest_wrist(geometry, config))
}

/// Start coordinates of the picking hand: pick gripped, tip hovering above
/// string 1 in the picking region.
pub fn right_rest_coordinates(geometry: &FretboardGeometry, config: &OracleConfig) -> [f64; NUM_DOF] {
    let x = geometry.pick_region_x();
    let tip = Point3::new(
        x,
        geometry.string_y(0, x) - config.sweep_margin,
        geometry.action_height() + config.hover,
    );
    RightHand::new().coordinates_for_tip(&tip)
}

/// In-plane fingertip positions of index..pinky.
pub fn finger_tips(pose: &HandPose) -> [Point3<f64>; 4] {
    std::array::from_fn(|i| {
        let t = pose.tips[i + 1];
        Point3::new(t.x, t.y, 0.0)
    })
}

/// Picking hand in its gripping posture; only the wrist translates.
#[derive(Debug, Clone)]
struct RightHand {
    skeleton: HandSkeleton,
    grip: [f64; NUM_DOF],
    model: PickModel,
    tip_at_origin: Vector3<f64>,
}

impl RightHand {
    fn new() -> Self {
        let skeleton = HandSkeleton::right();
        let grip = skeleton.grip_coordinates();
        let model = PickModel::for_skeleton(&skeleton);
        let tip_at_origin = model.tip_position(&skeleton.pose_unchecked(grip)).coords;
        RightHand {
            skeleton,
            grip,
            model,
            tip_at_origin,
        }
    }

    fn coordinates_for_tip(&self, tip: &Point3<f64>) -> [f64; NUM_DOF] {
        let mut q = self.grip;
        let w = tip.coords - self.tip_at_origin;
        q[0] = w.x;
        q[1] = w.y;
        q[2] = w.z;
        q
    }
}

/// Scripted crossing of one note's target strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickSweep {
    pub direction: PickDirection,
    /// Per-frame tip positions: hover at the entry edge, drop, sweep, rise.
    pub track: Vec<Point3<f64>>,
    /// Non-target strings inside the swept span, which will be picked too.
    pub expected_false_picks: Vec<usize>,
}

/// Sweeps the pick across the contiguous span holding every target string.
///
/// The tip enters and leaves midway between strings (or `sweep_margin` past
/// an outer string) and travels `sweep_depth` below the strings, so only the
/// strings of the span are crossed; a span with non-targets inside still
/// crosses them and reports them.
pub fn script_pick_sweep(
    targets: &[bool; NUM_STRINGS],
    direction: PickDirection,
    duration_frames: usize,
    geometry: &FretboardGeometry,
    config: &OracleConfig,
) -> Result<PickSweep> {
    let first = targets.iter().position(|&t| t);
    let last = targets.iter().rposition(|&t| t);
    let (Some(a), Some(b)) = (first, last) else {
        return Err(Error::Config("a pick sweep needs at least one target string".into()));
    };
    if duration_frames < 4 {
        return Err(Error::Config("a pick sweep needs at least 4 frames".into()));
    }
    let x = geometry.pick_region_x();
    let y = |s: usize| geometry.string_y(s, x);
    let low_edge = if a == 0 { y(0) - config.sweep_margin } else { 0.5 * (y(a - 1) + y(a)) };
    let high_edge = if b == NUM_STRINGS - 1 {
        y(NUM_STRINGS - 1) + config.sweep_margin
    } else {
        0.5 * (y(b) + y(b + 1))
    };
    let sign = if geometry.spec().mirrored { -1.0 } else { 1.0 };
    let (low_edge, high_edge) = if sign > 0.0 { (low_edge, high_edge) } else { (high_edge, low_edge) };
    let (from, to) = match direction {
        PickDirection::TopToDown => (low_edge, high_edge),
        PickDirection::DownToUp => (high_edge, low_edge),
    };
    let h = geometry.action_height();
    let (z_hover, z_low) = (h + config.hover, h - config.sweep_depth);
    let n = duration_frames;
    let mut track = Vec::with_capacity(n);
    track.push(Point3::new(x, from, z_hover));
    let cross = n - 3;
    for i in 0..=cross {
        let t = i as f64 / cross as f64;
        track.push(Point3::new(x, from + (to - from) * t, z_low));
    }
    track.push(Point3::new(x, to, z_hover));
    let expected_false_picks = (a..=b).filter(|&s| !targets[s]).collect();
    Ok(PickSweep {
        direction,
        track,
        expected_false_picks,
    })
}

/// One frame of a scripted hand trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFrame {
    pub frame: u64,
    pub time: f64,
    pub joints: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pick_tip: Option<[f64; 3]>,
}

pub fn trajectory_jsonl(frames: &[TrajectoryFrame]) -> Result<String> {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_trajectory_jsonl(input: &str) -> Result<Vec<TrajectoryFrame>> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// How one note went for the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotePlan {
    pub note_index: usize,
    pub assignment: Option<FingeringAssignment>,
    pub sweeps: usize,
    /// The placement pose passes the press check.
    pub presses_ok: bool,
    /// Frame offset within the note at which the fretting hand arrived.
    pub left_settled: Option<u32>,
    /// Frame offset at which the pick sweep finished.
    pub sweep_done: Option<u32>,
    pub expected_false_picks: Vec<usize>,
}

impl NotePlan {
    /// The hand could not arrive, or the pick could not finish, within the note.
    pub fn rate_limited(&self, has_pick: bool) -> bool {
        self.left_settled.is_none() || (has_pick && self.sweep_done.is_none())
    }
}

#[derive(Debug, Clone)]
pub struct Playthrough {
    pub left: Vec<TrajectoryFrame>,
    pub right: Vec<TrajectoryFrame>,
    pub ledgers: Vec<NoteLedger>,
    pub report: ScoreReport,
    pub plans: Vec<NotePlan>,
}

impl Playthrough {
    /// Notes whose hand motion was cut short by the rate limits.
    pub fn rate_limit_misses(&self, score: &TabScore) -> Vec<usize> {
        self.plans
            .iter()
            .filter(|p| {
                let has_pick = score.notes[p.note_index].pick_targets().iter().any(|&t| t);
                p.rate_limited(has_pick)
            })
            .map(|p| p.note_index)
            .collect()
    }
}

fn step_toward(q: &mut [f64; NUM_DOF], target: &[f64; NUM_DOF], rates: HandRates) -> bool {
    let dt = 1.0 / CONTROL_HZ;
    let mut arrived = true;
    for j in 0..NUM_DOF {
        let max = if j < 3 { rates.translation } else { rates.joint } * dt;
        let d = target[j] - q[j];
        if d.abs() <= max {
            q[j] = target[j];
        } else {
            q[j] += max * d.signum();
            arrived = false;
        }
    }
    arrived
}

/// Plans every note's fingering and placement, trying assignments cheapest
/// first and keeping the first whose pose passes the press check.
fn plan_placements(
    score: &TabScore,
    geometry: &FretboardGeometry,
    config: &OracleConfig,
) -> Result<Vec<(Option<FingeringAssignment>, Placement)>> {
    let sk = HandSkeleton::left();
    let mut prev = sk.pose(left_rest_coordinates(geometry, config))?;
    let mut out = Vec::with_capacity(score.notes.len());
    for (n, note) in score.notes.iter().enumerate() {
        let candidates = candidate_assignments(note, n, geometry, &finger_tips(&prev))?;
        let mut chosen: Option<(FingeringAssignment, Placement)> = None;
        let mut last_err = None;
        for a in candidates {
            match solve_placement(note, &a, geometry, Some(&prev), config) {
                Ok(p) if p.presses_ok => {
                    chosen = Some((a, p));
                    break;
                }
                Ok(p) => {
                    if chosen.is_none() {
                        chosen = Some((a, p));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        let (a, p) = match (chosen, last_err) {
            (Some(c), _) => c,
            (None, Some(e)) => return Err(e),
            (None, None) => unreachable!("candidate list is never empty"),
        };
        prev = p.pose.clone();
        let a = (!a.targets.is_empty()).then_some(a);
        out.push((a, p));
    }
    Ok(out)
}

/// Plays `score` end to end: the fretting hand moves to each note's placement
/// at its rate limits, and the pick sweep starts only once the hand has
/// arrived. Pick directions alternate from note to note.
pub fn play(score: &TabScore, geometry: Arc<FretboardGeometry>, config: &OracleConfig) -> Result<Playthrough> {
    score.validate()?;
    let placements = plan_placements(score, &geometry, config)?;
    let left_sk = HandSkeleton::left();
    let right = RightHand::new();
    let starts = score.note_starts();
    let dt = 1.0 / CONTROL_HZ;
    let h = geometry.action_height();
    let max_step = config.rates.translation * dt;

    let mut q_left = left_rest_coordinates(&geometry, config);
    let rest_right = right_rest_coordinates(&geometry, config);
    let mut tip = Point3::from(right.tip_at_origin + Vector3::new(rest_right[0], rest_right[1], rest_right[2]));
    let mut session = StringSession::new(Arc::clone(&geometry), Arc::new(score.clone()));
    session.prime_tip(tip);

    let mut plans: Vec<NotePlan> = Vec::with_capacity(score.notes.len());
    let mut left_traj = Vec::new();
    let mut right_traj = Vec::new();
    let mut waypoints: Vec<Point3<f64>> = Vec::new();
    let mut pending: Option<PickSweep> = None;
    let mut direction = PickDirection::TopToDown;
    let mut sweep_end = 0usize;

    for frame in 0..score.total_frames() {
        let (n, offset) = score.locate(frame).expect("frame inside the score");
        let (assignment, placement) = &placements[n];
        let note = &score.notes[n];
        if offset == 0 {
            let targets = note.pick_targets();
            let mut plan = NotePlan {
                note_index: n,
                assignment: assignment.clone(),
                sweeps: placement.sweeps,
                presses_ok: placement.presses_ok,
                left_settled: None,
                sweep_done: None,
                expected_false_picks: Vec::new(),
            };
            waypoints.clear();
            if tip.z < h + config.hover {
                waypoints.push(Point3::new(tip.x, tip.y, h + config.hover));
            }
            pending = None;
            if targets.iter().any(|&t| t) {
                let span = sweep_span(&targets, &geometry, config);
                let frames = (span / max_step).ceil() as usize + 4;
                let sweep = script_pick_sweep(&targets, direction, frames, &geometry, config)?;
                plan.expected_false_picks = sweep.expected_false_picks.clone();
                waypoints.push(sweep.track[0]);
                pending = Some(sweep);
                direction = direction.flipped();
            }
            plans.push(plan);
        }
        let plan = plans.last_mut().expect("plan opened at note start");

        let arrived = step_toward(&mut q_left, &placement.pose.joints, config.rates);
        if arrived && plan.left_settled.is_none() {
            plan.left_settled = Some(offset as u32);
        }
        if arrived && waypoints.is_empty() {
            if let Some(sweep) = pending.take() {
                waypoints.extend(sweep.track.iter().skip(1));
                sweep_end = waypoints.len();
            }
        }
        if let Some(&wp) = waypoints.first() {
            let d = wp - tip;
            if d.norm() <= max_step + 1e-12 {
                tip = wp;
                waypoints.remove(0);
                if pending.is_none() && sweep_end > 0 && waypoints.is_empty() {
                    plan.sweep_done = Some(offset as u32);
                    sweep_end = 0;
                }
            } else {
                tip += d * (max_step / d.norm());
            }
        }

        let left_pose = left_sk.pose(q_left)?;
        let q_right = right.coordinates_for_tip(&tip);
        let right_pose = right.skeleton.pose(q_right)?;
        let pick_tip = right.model.tip_position(&right_pose);
        session.step(Some(&left_pose.parts), Some(pick_tip));
        let time = frame as f64 * dt;
        left_traj.push(TrajectoryFrame {
            frame,
            time,
            joints: q_left.to_vec(),
            pick_tip: None,
        });
        right_traj.push(TrajectoryFrame {
            frame,
            time,
            joints: q_right.to_vec(),
            pick_tip: Some([pick_tip.x, pick_tip.y, pick_tip.z]),
        });
    }
    debug_assert_eq!(starts.len(), score.notes.len() + 1);
    let ledgers = session.into_ledgers();
    let results = evaluate(&ledgers, &ledgers, score)?;
    let report = aggregate(&results)?;
    Ok(Playthrough {
        left: left_traj,
        right: right_traj,
        ledgers,
        report,
        plans,
    })
}

fn sweep_span(targets: &[bool; NUM_STRINGS], geometry: &FretboardGeometry, config: &OracleConfig) -> f64 {
    let x = geometry.pick_region_x();
    let a = targets.iter().position(|&t| t).unwrap_or(0);
    let b = targets.iter().rposition(|&t| t).unwrap_or(0);
    (geometry.string_y(b, x) - geometry.string_y(a, x)).abs()
        + geometry.spec().string_spacing_bridge.max(2.0 * config.sweep_margin)
}

/// Fretting and picking reward terms of one replayed frame, scored as in the
/// two-hand environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub frame: u64,
    pub note_index: usize,
    pub left: LeftRewardBreakdown,
    pub right: RightRewardBreakdown,
}

/// Replays recorded trajectories through a fresh string session. The left
/// trajectory drives finger contacts; the right one's joints drive the pick.
pub fn replay(
    score: &TabScore,
    geometry: Arc<FretboardGeometry>,
    left: &[TrajectoryFrame],
    right: &[TrajectoryFrame],
) -> Result<Vec<NoteLedger>> {
    Ok(replay_inner(score, geometry, left, right, false)?.ledgers)
}

/// Everything a replay observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub ledgers: Vec<NoteLedger>,
    pub rewards: Vec<RewardRow>,
    pub log: Vec<LogEvent>,
}

/// [`replay`] plus the per-frame reward breakdown and the event log.
pub fn replay_with_rewards(
    score: &TabScore,
    geometry: Arc<FretboardGeometry>,
    left: &[TrajectoryFrame],
    right: &[TrajectoryFrame],
) -> Result<Replay> {
    replay_inner(score, geometry, left, right, true)
}

fn replay_inner(
    score: &TabScore,
    geometry: Arc<FretboardGeometry>,
    left: &[TrajectoryFrame],
    right: &[TrajectoryFrame],
    rewards: bool,
) -> Result<Replay> {
    let total = score.total_frames() as usize;
    if left.len() != total || right.len() != total {
        return Err(Error::Shape(format!(
            "score has {total} frames, trajectories have {} left and {} right",
            left.len(),
            right.len()
        )));
    }
    let left_sk = HandSkeleton::left();
    let right_hand = RightHand::new();
    let coords = |f: &TrajectoryFrame| -> Result<[f64; NUM_DOF]> {
        f.joints.as_slice().try_into().map_err(|_| {
            Error::Shape(format!(
                "frame {} has {} joint coordinates, expected {NUM_DOF}",
                f.frame,
                f.joints.len()
            ))
        })
    };
    let dt = 1.0 / CONTROL_HZ;
    let mut session = StringSession::new(Arc::clone(&geometry), Arc::new(score.clone()));
    let mut rows = Vec::new();
    let (mut left_hist, mut right_hist): (Vec<HandPose>, Vec<HandPose>) = (Vec::new(), Vec::new());
    let mut tips: Vec<Point3<f64>> = Vec::new();
    for (l, r) in left.iter().zip(right) {
        let lp = left_sk.pose(coords(l)?)?;
        let rp = right_hand.skeleton.pose(coords(r)?)?;
        let tip = right_hand.model.tip_position(&rp);
        if tips.is_empty() {
            session.prime_tip(tip);
        }
        let Some(outcome) = session.step(Some(&lp.parts), Some(tip)) else {
            break;
        };
        if !rewards {
            tips.push(tip);
            continue;
        }
        keep_last(&mut tips, tip, 3);
        keep_last(&mut left_hist, lp, 2);
        keep_last(&mut right_hist, rp, 2);
        let note = &score.notes[outcome.note_index];
        let lrefs: Vec<&HandPose> = left_hist.iter().collect();
        let rrefs: Vec<&HandPose> = right_hist.iter().collect();
        let ctx = PickContext {
            note,
            book: &outcome.book,
            picked_this_frame: !outcome.picks.is_empty(),
            tip,
            cooperative_gate: Some(expected_press_predicate(&outcome.presses, note)),
        };
        let pick = right_pick_reward(&ctx, &geometry);
        let contact = right_hand.model.contact(&right_hist[right_hist.len() - 1]);
        rows.push(RewardRow {
            frame: outcome.frame,
            note_index: outcome.note_index,
            left: left_frame_rewards(note, &lrefs, &geometry, dt)?,
            right: right_frame_reward(pick, contact, &rrefs, &tips, dt),
        });
    }
    let log = if rewards { session.log().to_vec() } else { Vec::new() };
    Ok(Replay {
        ledgers: session.into_ledgers(),
        rewards: rows,
        log,
    })
}

fn keep_last<T>(v: &mut Vec<T>, x: T, n: usize) {
    if v.len() >= n {
        v.remove(0);
    }
    v.push(x);
}
