//! Articulated hand: 16 links, 27 joint coordinates.
//!
//! Link order: palm, then thumb, index, middle, ring, pinky with three links
//! each (proximal, middle, distal). Coordinate order:
//!
//! | range   | joints                                        |
//! |---------|-----------------------------------------------|
//! | 0..3    | wrist translation x, y, z (guitar frame, m)   |
//! | 3..6    | wrist roll, pitch, yaw (rad)                  |
//! | 6..11   | thumb MCP flex, abd, twist; thumb PIP; DIP    |
//! | 11..27  | per finger: MCP flex, MCP abd, PIP, DIP       |
//!
//! Palm frame: `x` points from the wrist toward the knuckles, `y` from the
//! index side toward the pinky side, `z` out of the palm. Positive flexion
//! curls a finger toward `+z`.

use nalgebra::{Isometry3, Point3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{CylinderSegment, FretboardGeometry};
use crate::{Error, Result};

pub const NUM_LINKS: usize = 16;
pub const NUM_DOF: usize = 27;

/// Coordinate index, world origin, world axis and sign of one finger joint.
type JointFrame = (usize, Point3<f64>, Unit<Vector3<f64>>, f64);
pub const NUM_PARTS: usize = 12;
/// Values per link in the pose observation.
pub const LINK_FEATURES: usize = 13;
pub const OBS_FRAME_LEN: usize = NUM_LINKS * LINK_FEATURES;

pub const PALM: usize = 0;
pub const THUMB: usize = 0;
pub const INDEX: usize = 1;
pub const PINKY: usize = 4;

/// Angle below which a non-tip finger part counts as lying on the fretboard.
pub const LIE_FLAT_DEGREES: f64 = 5.0;

pub const JOINT_NAMES: [&str; NUM_DOF] = [
    "wrist_tx",
    "wrist_ty",
    "wrist_tz",
    "wrist_roll",
    "wrist_pitch",
    "wrist_yaw",
    "thumb_mcp_flex",
    "thumb_mcp_abd",
    "thumb_mcp_twist",
    "thumb_pip",
    "thumb_dip",
    "index_mcp_flex",
    "index_mcp_abd",
    "index_pip",
    "index_dip",
    "middle_mcp_flex",
    "middle_mcp_abd",
    "middle_pip",
    "middle_dip",
    "ring_mcp_flex",
    "ring_mcp_abd",
    "ring_pip",
    "ring_dip",
    "pinky_mcp_flex",
    "pinky_mcp_abd",
    "pinky_pip",
    "pinky_dip",
];

/// Link index of segment `s` (0 proximal, 1 middle, 2 distal) of finger `f` (0 thumb .. 4 pinky).
pub const fn link_of(f: usize, s: usize) -> usize {
    1 + 3 * f + s
}

/// First joint coordinate of finger `f`.
pub const fn finger_joint_base(f: usize) -> usize {
    if f == THUMB {
        6
    } else {
        11 + 4 * (f - 1)
    }
}

/// Finger-part id of segment `s` on non-thumb finger `j` (1 index .. 4 pinky).
pub const fn part_id(j: usize, s: usize) -> usize {
    3 * (j - 1) + s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerSpec {
    /// MCP position in the palm frame (m).
    pub mcp_offset: [f64; 3],
    /// Fixed roll/pitch/yaw of the finger base relative to the palm.
    pub base_rotation: [f64; 3],
    /// Proximal, middle, distal bone lengths (m).
    pub lengths: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandSkeleton {
    pub version: u32,
    pub handedness: Handedness,
    pub fingers: [FingerSpec; 5],
    pub finger_radius: f64,
    /// `[lo, hi]` per joint coordinate.
    pub limits: Vec<[f64; 2]>,
}

impl Default for HandSkeleton {
    fn default() -> Self {
        Self::left()
    }
}

impl HandSkeleton {
    /// Adult left hand with anthropometric defaults.
    pub fn left() -> Self {
        use std::f64::consts::PI;
        let finger = |offset: [f64; 3], lengths: [f64; 3]| FingerSpec {
            mcp_offset: offset,
            base_rotation: [0.0; 3],
            lengths,
        };
        let fingers = [
            FingerSpec {
                mcp_offset: [0.030, -0.032, 0.012],
                base_rotation: [-0.9, 0.0, -0.7],
                lengths: [0.042, 0.032, 0.027],
            },
            finger([0.090, -0.027, 0.0], [0.046, 0.027, 0.020]),
            finger([0.092, -0.009, 0.0], [0.050, 0.031, 0.021]),
            finger([0.088, 0.009, 0.0], [0.047, 0.030, 0.021]),
            finger([0.080, 0.026, 0.0], [0.038, 0.022, 0.019]),
        ];
        let mut limits = vec![[-1.0, 1.0]; 3];
        limits.extend([[-PI, PI]; 3]);
        // thumb
        limits.extend([[-0.6, 1.6], [-0.8, 0.8], [-0.8, 0.8], [-0.2, 1.6], [-0.3, 1.6]]);
        for _ in 0..4 {
            limits.extend([[-0.6, 1.6], [-0.6, 0.6], [0.0, 1.9], [0.0, 1.6]]);
        }
        Self {
            version: 1,
            handedness: Handedness::Left,
            fingers,
            finger_radius: 0.006,
            limits,
        }
    }

    /// Mirror image of [`HandSkeleton::left`].
    pub fn right() -> Self {
        let mut s = Self::left();
        s.handedness = Handedness::Right;
        for f in &mut s.fingers {
            f.mcp_offset[1] = -f.mcp_offset[1];
            f.base_rotation[0] = -f.base_rotation[0];
            f.base_rotation[2] = -f.base_rotation[2];
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.limits.len() != NUM_DOF {
            return Err(Error::Config(format!(
                "skeleton needs {NUM_DOF} joint limits, got {}",
                self.limits.len()
            )));
        }
        if !(self.finger_radius > 0.0) {
            return Err(Error::Config("finger_radius must be > 0".into()));
        }
        for (i, [lo, hi]) in self.limits.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::Config(format!("joint {} has lo > hi", JOINT_NAMES[i])));
            }
        }
        for f in &self.fingers {
            if f.lengths.iter().any(|&l| !(l > 0.0)) {
                return Err(Error::Config("bone lengths must be > 0".into()));
            }
        }
        Ok(())
    }

    fn mirror_sign(&self) -> f64 {
        match self.handedness {
            Handedness::Left => 1.0,
            Handedness::Right => -1.0,
        }
    }

    pub fn check_limits(&self, q: &[f64; NUM_DOF]) -> Result<()> {
        const TOL: f64 = 1e-12;
        for (i, (&v, &[lo, hi])) in q.iter().zip(&self.limits).enumerate() {
            if !(v >= lo - TOL && v <= hi + TOL) {
                return Err(Error::JointLimit {
                    joint: JOINT_NAMES[i],
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut [f64; NUM_DOF]) {
        for (v, &[lo, hi]) in q.iter_mut().zip(&self.limits) {
            *v = v.clamp(lo, hi);
        }
    }

    /// All-zero coordinates clamped into the limits.
    pub fn neutral(&self) -> [f64; NUM_DOF] {
        let mut q = [0.0; NUM_DOF];
        self.clamp(&mut q);
        q
    }

    /// Link transforms in the guitar frame.
    pub fn forward_kinematics(&self, q: &[f64; NUM_DOF]) -> Result<[Isometry3<f64>; NUM_LINKS]> {
        self.check_limits(q)?;
        Ok(self.fk_unchecked(q))
    }

    pub(crate) fn palm_transform(q: &[f64; NUM_DOF]) -> Isometry3<f64> {
        let rot = Rotation3::from_euler_angles(q[3], q[4], q[5]);
        Isometry3::from_parts(
            Translation3::new(q[0], q[1], q[2]),
            UnitQuaternion::from_rotation_matrix(&rot),
        )
    }

    fn finger_base(&self, palm: &Isometry3<f64>, f: usize) -> Isometry3<f64> {
        let spec = &self.fingers[f];
        let [ox, oy, oz] = spec.mcp_offset;
        let [r, p, y] = spec.base_rotation;
        palm * Isometry3::from_parts(
            Translation3::new(ox, oy, oz),
            UnitQuaternion::from_euler_angles(r, p, y),
        )
    }

    /// Joint frames of finger `f`: `(coordinate index, world origin, world axis, sign)`,
    /// ordered proximal to distal, plus the link frames and the tip position.
    fn finger_chain_from(
        &self,
        palm: &Isometry3<f64>,
        q: &[f64; NUM_DOF],
        f: usize,
    ) -> (Vec<JointFrame>, [Isometry3<f64>; 3], Point3<f64>) {
        let s = self.mirror_sign();
        let base = self.finger_base(palm, f);
        let j0 = finger_joint_base(f);
        let [l1, l2, l3] = self.fingers[f].lengths;
        let flex_axis = -Vector3::y_axis();
        let mut joints = Vec::with_capacity(5);

        let (flex, abd) = (q[j0], q[j0 + 1]);
        let origin = base * Point3::origin();
        joints.push((j0 + 1, origin, base * Vector3::z_axis(), s));
        let after_abd = base * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), s * abd);
        joints.push((j0, origin, after_abd * flex_axis, 1.0));
        let after_flex = after_abd * UnitQuaternion::from_axis_angle(&flex_axis, flex);
        let (proximal, next) = if f == THUMB {
            let twist = q[j0 + 2];
            joints.push((j0 + 2, origin, after_flex * Vector3::x_axis(), s));
            (
                after_flex * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), s * twist),
                j0 + 3,
            )
        } else {
            (after_flex, j0 + 2)
        };
        let pip_origin = proximal * Point3::new(l1, 0.0, 0.0);
        joints.push((next, pip_origin, proximal * flex_axis, 1.0));
        let middle = proximal
            * Isometry3::from_parts(
                Translation3::new(l1, 0.0, 0.0),
                UnitQuaternion::from_axis_angle(&flex_axis, q[next]),
            );
        let dip_origin = middle * Point3::new(l2, 0.0, 0.0);
        joints.push((next + 1, dip_origin, middle * flex_axis, 1.0));
        let distal = middle
            * Isometry3::from_parts(
                Translation3::new(l2, 0.0, 0.0),
                UnitQuaternion::from_axis_angle(&flex_axis, q[next + 1]),
            );
        let tip = distal * Point3::new(l3, 0.0, 0.0);
        (joints, [proximal, middle, distal], tip)
    }

    pub(crate) fn fk_unchecked(&self, q: &[f64; NUM_DOF]) -> [Isometry3<f64>; NUM_LINKS] {
        let palm = Self::palm_transform(q);
        let mut links = [palm; NUM_LINKS];
        for f in 0..5 {
            let (_, frames, _) = self.finger_chain_from(&palm, q, f);
            for (s, frame) in frames.into_iter().enumerate() {
                links[link_of(f, s)] = frame;
            }
        }
        links
    }

    /// Validated pose with derived link transforms, fingertips and finger parts.
    pub fn pose(&self, q: [f64; NUM_DOF]) -> Result<HandPose> {
        self.check_limits(&q)?;
        Ok(self.pose_unchecked(q))
    }

    pub(crate) fn pose_unchecked(&self, q: [f64; NUM_DOF]) -> HandPose {
        let links = self.fk_unchecked(&q);
        let tips: [Point3<f64>; 5] = std::array::from_fn(|f| {
            let l3 = self.fingers[f].lengths[2];
            links[link_of(f, 2)] * Point3::new(l3, 0.0, 0.0)
        });
        let parts = std::array::from_fn(|p| {
            let j = p / 3 + 1;
            let s = p % 3;
            let a = links[link_of(j, s)] * Point3::origin();
            let b = if s == 2 {
                tips[j]
            } else {
                links[link_of(j, s + 1)] * Point3::origin()
            };
            CylinderSegment::new(a, b, self.finger_radius)
        });
        HandPose {
            joints: q,
            links,
            tips,
            parts,
        }
    }

    /// Cyclic coordinate descent moving the tip of finger `f` toward `target`.
    ///
    /// Only the finger's own joints move. Returns `(sweeps used, final residual)`.
    pub fn ccd_finger(
        &self,
        q: &mut [f64; NUM_DOF],
        f: usize,
        target: &Point3<f64>,
        max_sweeps: usize,
        tolerance: f64,
    ) -> (usize, f64) {
        let palm = Self::palm_transform(q);
        let mut residual = (self.finger_chain_from(&palm, q, f).2 - target).norm();
        let mut sweeps = 0;
        while sweeps < max_sweeps && residual > tolerance {
            sweeps += 1;
            let n_joints = self.finger_chain_from(&palm, q, f).0.len();
            for idx in (0..n_joints).rev() {
                let (joints, _, tip) = self.finger_chain_from(&palm, q, f);
                let (coord, origin, axis, sign) = joints[idx];
                let u = tip - origin;
                let v = target - origin;
                let u = u - axis.into_inner() * u.dot(&axis);
                let v = v - axis.into_inner() * v.dot(&axis);
                if u.norm() < 1e-12 || v.norm() < 1e-12 {
                    continue;
                }
                let delta = axis.dot(&u.cross(&v)).atan2(u.dot(&v));
                let [lo, hi] = self.limits[coord];
                q[coord] = (q[coord] + sign * delta).clamp(lo, hi);
            }
            residual = (self.finger_chain_from(&palm, q, f).2 - target).norm();
        }
        (sweeps, residual)
    }

    /// Coordinates with the thumb tip brought onto a curled index tip, as when
    /// holding a pick. Wrist coordinates are zero.
    pub fn grip_coordinates(&self) -> [f64; NUM_DOF] {
        let mut q = self.neutral();
        let ib = finger_joint_base(INDEX);
        q[ib] = 0.7;
        q[ib + 2] = 0.9;
        q[ib + 3] = 0.5;
        for f in 2..=PINKY {
            let b = finger_joint_base(f);
            q[b] = 1.2;
            q[b + 2] = 1.4;
            q[b + 3] = 0.8;
        }
        let target = self.pose_unchecked(q).tips[INDEX];
        self.ccd_finger(&mut q, THUMB, &target, 200, 1e-6);
        q
    }
}

/// Joint coordinates with their derived kinematics (guitar frame).
#[derive(Debug, Clone, PartialEq)]
pub struct HandPose {
    pub joints: [f64; NUM_DOF],
    pub links: [Isometry3<f64>; NUM_LINKS],
    /// Fingertip positions, thumb first.
    pub tips: [Point3<f64>; 5],
    pub parts: [CylinderSegment; NUM_PARTS],
}

impl HandPose {
    pub fn wrist_position(&self) -> Point3<f64> {
        self.links[PALM] * Point3::origin()
    }
}

/// The 12 non-thumb finger parts: MCP-PIP, PIP-DIP, DIP-tip for index to pinky.
pub fn finger_part_segments(pose: &HandPose) -> [CylinderSegment; NUM_PARTS] {
    pose.parts
}

/// Fret-order rule: finger `j` (1 index .. 4 pinky) may press the fret of
/// ascending order `o` (1-based) among `m` target frets.
pub fn finger_may_press(j: usize, o: usize, m: usize) -> bool {
    (1..=4).contains(&j) && o >= 1 && o <= m && o <= j && (m - o) <= (4 - j)
}

/// Per finger part and fret order: may this part be used to press?
#[derive(Debug, Clone, PartialEq)]
pub struct AvailabilityMask {
    /// Distinct target frets in ascending order.
    pub frets: Vec<u8>,
    /// `mask[part][order - 1]`.
    pub mask: [[bool; 4]; NUM_PARTS],
}

impl AvailabilityMask {
    /// Ascending order (1-based) of `fret` among the targets.
    pub fn order_of(&self, fret: u8) -> Option<usize> {
        self.frets.iter().position(|&f| f == fret).map(|p| p + 1)
    }

    pub fn is_available(&self, part: usize, fret: u8) -> bool {
        self.order_of(fret)
            .map(|o| self.mask[part][o - 1])
            .unwrap_or(false)
    }

    pub fn parts_for(&self, fret: u8) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_PARTS).filter(move |&p| self.is_available(p, fret))
    }
}

/// Angle in degrees between a segment axis and the fretboard plane.
pub fn surface_angle_degrees(part: &CylinderSegment, geometry: &FretboardGeometry) -> f64 {
    let d = part.endpoint_b - part.endpoint_a;
    let n = d.norm();
    if n == 0.0 {
        return 90.0;
    }
    (d.dot(&geometry.surface_normal()).abs() / n)
        .min(1.0)
        .asin()
        .to_degrees()
}

pub fn available_parts(
    pose: &HandPose,
    target_frets: &[u8],
    geometry: &FretboardGeometry,
) -> Result<AvailabilityMask> {
    let mut frets = target_frets.to_vec();
    frets.sort_unstable();
    frets.dedup();
    let m = frets.len();
    if m > 4 {
        return Err(Error::Infeasible {
            note: 0,
            msg: format!("{m} distinct frets; at most 4 can be pressed"),
        });
    }
    let mut mask = [[false; 4]; NUM_PARTS];
    for (p, row) in mask.iter_mut().enumerate() {
        let j = p / 3 + 1;
        let is_tip = p % 3 == 2;
        let flat = is_tip || surface_angle_degrees(&pose.parts[p], geometry) < LIE_FLAT_DEGREES;
        for (o, slot) in row.iter_mut().enumerate().take(m) {
            *slot = flat && finger_may_press(j, o + 1, m);
        }
    }
    Ok(AvailabilityMask { frets, mask })
}

/// Two stacked frames (`[0]` older, `[1]` newer) of per-link
/// position (3), orientation quaternion `w, x, y, z` (4), linear velocity (3)
/// and angular velocity (3), relative to the guitar frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseObservation {
    pub frames: [[[f64; LINK_FEATURES]; NUM_LINKS]; 2],
}

impl PoseObservation {
    pub fn frame_vec(&self, i: usize) -> Vec<f64> {
        self.frames[i].iter().flatten().copied().collect()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.frames.iter().flatten().flatten().copied().collect()
    }
}

fn link_state(
    curr: &Isometry3<f64>,
    prev: Option<&Isometry3<f64>>,
    dt: f64,
) -> [f64; LINK_FEATURES] {
    let p = curr.translation.vector;
    let mut q = curr.rotation;
    if q.w < 0.0 {
        q = UnitQuaternion::new_unchecked(-q.into_inner());
    }
    let (v, w) = match prev {
        Some(prev) => {
            let v = (p - prev.translation.vector) / dt;
            let w = (curr.rotation * prev.rotation.inverse()).scaled_axis() / dt;
            (v, w)
        }
        None => (Vector3::zeros(), Vector3::zeros()),
    };
    [
        p.x, p.y, p.z, q.w, q.i, q.j, q.k, v.x, v.y, v.z, w.x, w.y, w.z,
    ]
}

/// Builds the observation from the latest poses, oldest first (`history.len() >= 2`).
///
/// Velocities are backward finite differences over `dt`; the older stacked
/// frame gets zero velocity when no third pose is supplied. `guitar` is the
/// guitar's placement in the frame the poses are expressed in.
pub fn pose_observation(
    history: &[&HandPose],
    dt: f64,
    guitar: &Isometry3<f64>,
) -> Result<PoseObservation> {
    if history.len() < 2 {
        return Err(Error::Shape("pose history needs at least two frames".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Config("dt must be > 0".into()));
    }
    let inv = guitar.inverse();
    let n = history.len();
    let rel = |pose: &HandPose, l: usize| inv * pose.links[l];
    let mut frames = [[[0.0; LINK_FEATURES]; NUM_LINKS]; 2];
    for (slot, frame) in frames.iter_mut().enumerate() {
        let idx = n - 2 + slot;
        for (l, out) in frame.iter_mut().enumerate() {
            let curr = rel(history[idx], l);
            let prev = (idx > 0).then(|| rel(history[idx - 1], l));
            *out = link_state(&curr, prev.as_ref(), dt);
        }
    }
    Ok(PoseObservation { frames })
}

/// Rigid pick attached to the index distal link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickModel {
    pub mount_link: usize,
    /// Mount origin in the mount link's frame.
    pub mount_offset: [f64; 3],
    /// Pick tip in the mount frame.
    pub tip_offset: [f64; 3],
    /// Thumb and index tips within this distance of the mount hold the pick.
    pub contact_tolerance: f64,
}

impl PickModel {
    pub fn for_skeleton(skeleton: &HandSkeleton) -> Self {
        Self {
            mount_link: link_of(INDEX, 2),
            mount_offset: [skeleton.fingers[INDEX].lengths[2], 0.0, 0.0],
            tip_offset: [0.0, 0.0, 0.02],
            contact_tolerance: 0.008,
        }
    }

    pub fn mount_frame(&self, pose: &HandPose) -> Isometry3<f64> {
        let [x, y, z] = self.mount_offset;
        pose.links[self.mount_link] * Translation3::new(x, y, z)
    }

    pub fn tip_position(&self, pose: &HandPose) -> Point3<f64> {
        let [x, y, z] = self.tip_offset;
        self.mount_frame(pose) * Point3::new(x, y, z)
    }

    /// Thumb and index tips both within tolerance of the mount.
    pub fn contact(&self, pose: &HandPose) -> bool {
        let m = self.mount_frame(pose) * Point3::origin();
        (pose.tips[THUMB] - m).norm() <= self.contact_tolerance
            && (pose.tips[INDEX] - m).norm() <= self.contact_tolerance
    }
}
