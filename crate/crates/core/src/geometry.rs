//! Fretboard layout and distance queries.
//!
//! Guitar frame: `x` runs along the strings from the nut (`x = 0`) toward the
//! bridge (`x = scale_length`), `y` runs across the strings (string 1 on the
//! negative side in the canonical left-handed layout), `z` is the fretboard
//! normal with the fretboard surface at `z = 0`.

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, NUM_STRINGS};

/// Rigid transform in JSON-friendly form. Rotation is a unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl RigidTransform {
    pub fn to_isometry(&self) -> Isometry3<f64> {
        let [w, x, y, z] = self.rotation;
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        let [tx, ty, tz] = self.translation;
        Isometry3::from_parts(Translation3::new(tx, ty, tz), q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuitarSpec {
    pub scale_length: f64,
    pub num_strings: usize,
    pub num_frets: usize,
    pub string_spacing_nut: f64,
    pub string_spacing_bridge: f64,
    pub string_action_height: f64,
    /// Placement of the guitar frame in the world.
    pub body_frame: RigidTransform,
    /// Mirror the lateral axis to obtain the right-handed setup.
    pub mirrored: bool,
}

impl Default for GuitarSpec {
    fn default() -> Self {
        Self {
            scale_length: 0.6223,
            num_strings: NUM_STRINGS,
            num_frets: 24,
            string_spacing_nut: 0.0072,
            string_spacing_bridge: 0.0105,
            string_action_height: 0.002,
            body_frame: RigidTransform::default(),
            mirrored: false,
        }
    }
}

impl GuitarSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.to_string()));
        if !(self.scale_length > 0.0) || !self.scale_length.is_finite() {
            return bad("scale_length must be > 0");
        }
        if self.num_strings != NUM_STRINGS {
            return bad("num_strings must be 6");
        }
        if self.num_frets < 1 {
            return bad("num_frets must be >= 1");
        }
        if self.num_frets > 24 {
            return bad("num_frets must be <= 24");
        }
        if !(self.string_spacing_nut > 0.0) || !(self.string_spacing_bridge > 0.0) {
            return bad("string spacings must be > 0");
        }
        if !(self.string_action_height > 0.0) {
            return bad("string_action_height must be > 0");
        }
        let [w, x, y, z] = self.body_frame.rotation;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > 1e-6 {
            return bad("body_frame rotation must be a unit quaternion");
        }
        Ok(())
    }
}

/// Straight segment between two points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
}

impl Segment {
    pub fn new(a: Point3<f64>, b: Point3<f64>) -> Self {
        Self { a, b }
    }

    pub fn direction(&self) -> Vector3<f64> {
        self.b - self.a
    }

    pub fn length(&self) -> f64 {
        self.direction().norm()
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.a + self.direction() * t
    }
}

/// Finger part: a cylinder around an axis segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSegment {
    pub endpoint_a: Point3<f64>,
    pub endpoint_b: Point3<f64>,
    pub radius: f64,
}

impl CylinderSegment {
    pub fn new(endpoint_a: Point3<f64>, endpoint_b: Point3<f64>, radius: f64) -> Self {
        Self {
            endpoint_a,
            endpoint_b,
            radius,
        }
    }

    pub fn axis(&self) -> Segment {
        Segment::new(self.endpoint_a, self.endpoint_b)
    }
}

/// Distance from `p` to the segment axis, and the closest point on the axis.
pub fn point_to_segment_distance(p: &Point3<f64>, seg: &Segment) -> (f64, Point3<f64>) {
    let t = closest_param(p, seg);
    let closest = seg.at(t);
    ((p - closest).norm(), closest)
}

/// Parameter in `[0, 1]` of the point on `seg` closest to `p`.
pub fn closest_param(p: &Point3<f64>, seg: &Segment) -> f64 {
    let d = seg.direction();
    let len2 = d.norm_squared();
    if len2 <= 0.0 {
        return 0.0;
    }
    ((p - seg.a).dot(&d) / len2).clamp(0.0, 1.0)
}

/// Closest pair between two segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPair {
    pub distance: f64,
    /// Parameter on the first segment.
    pub s: f64,
    /// Parameter on the second segment.
    pub t: f64,
    pub on_first: Point3<f64>,
    pub on_second: Point3<f64>,
}

/// Closest points between two segments (Ericson, Real-Time Collision Detection 5.1.9).
pub fn segment_closest_points(first: &Segment, second: &Segment) -> SegmentPair {
    const EPS: f64 = 1e-18;
    let d1 = first.direction();
    let d2 = second.direction();
    let r = first.a - second.a;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let on_first = first.at(s);
    let on_second = second.at(t);
    SegmentPair {
        distance: (on_first - on_second).norm(),
        s,
        t,
        on_first,
        on_second,
    }
}

pub fn segment_to_segment_distance(first: &Segment, second: &Segment) -> f64 {
    segment_closest_points(first, second).distance
}

/// Immutable fretboard layout derived from a [`GuitarSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FretboardGeometry {
    spec: GuitarSpec,
    /// `fret_wire_distance[0]` is the nut; `[k]` is wire `k`.
    fret_wire_distance: Vec<f64>,
    fret_mid_distance: Vec<f64>,
    string_lines: [Segment; NUM_STRINGS],
    /// `press_points[i][k - 1]` is the press point of string `i` (0-based) at fret `k`.
    press_points: [Vec<Point3<f64>>; NUM_STRINGS],
}

impl FretboardGeometry {
    pub fn new(spec: GuitarSpec) -> Result<Self> {
        spec.validate()?;
        let l = spec.scale_length;
        let fret_wire_distance: Vec<f64> = (0..=spec.num_frets)
            .map(|k| l * (1.0 - 2f64.powf(-(k as f64) / 12.0)))
            .collect();
        if fret_wire_distance.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec(
                "fret wires must increase toward the bridge".into(),
            ));
        }
        let mut fret_mid_distance = vec![0.0];
        fret_mid_distance.extend(
            fret_wire_distance
                .windows(2)
                .map(|w| 0.5 * (w[0] + w[1])),
        );

        let sign = if spec.mirrored { -1.0 } else { 1.0 };
        let h = spec.string_action_height;
        let string_lines: [Segment; NUM_STRINGS] = std::array::from_fn(|i| {
            let offset = i as f64 - (NUM_STRINGS as f64 - 1.0) / 2.0;
            let nut = Point3::new(0.0, sign * offset * spec.string_spacing_nut, h);
            let bridge = Point3::new(l, sign * offset * spec.string_spacing_bridge, h);
            Segment::new(nut, bridge)
        });
        let press_points = std::array::from_fn(|i| {
            (1..=spec.num_frets)
                .map(|k| string_lines[i].at(fret_mid_distance[k] / l))
                .collect()
        });
        Ok(Self {
            spec,
            fret_wire_distance,
            fret_mid_distance,
            string_lines,
            press_points,
        })
    }

    pub fn spec(&self) -> &GuitarSpec {
        &self.spec
    }

    pub fn num_frets(&self) -> usize {
        self.spec.num_frets
    }

    pub fn scale_length(&self) -> f64 {
        self.spec.scale_length
    }

    pub fn action_height(&self) -> f64 {
        self.spec.string_action_height
    }

    /// Distance from the nut to wire `k` (`k = 0` is the nut).
    pub fn fret_wire(&self, k: usize) -> f64 {
        self.fret_wire_distance[k]
    }

    pub fn fret_wires(&self) -> &[f64] {
        &self.fret_wire_distance
    }

    /// Axial middle of fret region `k >= 1`.
    pub fn fret_mid(&self, k: usize) -> f64 {
        self.fret_mid_distance[k]
    }

    pub fn fret_width(&self, k: usize) -> f64 {
        self.fret_wire_distance[k] - self.fret_wire_distance[k - 1]
    }

    /// Fretboard length from nut to the last wire.
    pub fn fretboard_length(&self) -> f64 {
        self.fret_wire_distance[self.spec.num_frets]
    }

    /// String `i` (0-based) as a segment from nut to bridge.
    pub fn string_line(&self, i: usize) -> &Segment {
        &self.string_lines[i]
    }

    pub fn string_lines(&self) -> &[Segment; NUM_STRINGS] {
        &self.string_lines
    }

    /// Press point of string `i` (0-based) at fret `k >= 1`.
    pub fn press_point(&self, i: usize, k: usize) -> Point3<f64> {
        self.press_points[i][k - 1]
    }

    /// Fret region containing the axial position `x`, if it lies on the fretboard.
    pub fn fret_at(&self, x: f64) -> Option<usize> {
        let wires = &self.fret_wire_distance;
        if !(x >= wires[0]) || x >= wires[self.spec.num_frets] {
            return None;
        }
        // first wire strictly beyond x
        let k = wires.partition_point(|&w| w <= x);
        Some(k)
    }

    /// Lateral position of string `i` at axial position `x`.
    pub fn string_y(&self, i: usize, x: f64) -> f64 {
        self.string_lines[i].at(x / self.spec.scale_length).y
    }

    /// Unit in-plane normal of string `i`, oriented from the string-1 side toward string 6.
    pub fn lateral_normal(&self, i: usize) -> Vector3<f64> {
        let d = self.string_lines[i].direction();
        let n = Vector3::new(-d.y, d.x, 0.0).normalize();
        let toward = self.string_lines[NUM_STRINGS - 1].a - self.string_lines[0].a;
        if n.dot(&toward) >= 0.0 {
            n
        } else {
            -n
        }
    }

    /// Signed lateral coordinate of `p` relative to string `i` within the body plane.
    pub fn lateral_coordinate(&self, i: usize, p: &Point3<f64>) -> f64 {
        (p - self.string_lines[i].a).dot(&self.lateral_normal(i))
    }

    /// Fretboard surface normal.
    pub fn surface_normal(&self) -> Vector3<f64> {
        Vector3::z()
    }

    /// Axial position of the picking region, midway between the last wire and the bridge.
    pub fn pick_region_x(&self) -> f64 {
        0.5 * (self.fretboard_length() + self.spec.scale_length)
    }
}
