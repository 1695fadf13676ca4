//! Kinematic guitar-playing environment and evaluation engine.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: fretboard layout, press points and distance queries.
//! * [`hand`]: 27-DoF articulated hand, forward kinematics, finger parts,
//!   pick attachment and finger availability.
//! * [`tab`]: tablature scores, goal-state encodings, augmentation.
//! * [`session`]: virtual-string press/pick detection and the per-note ledger.
//! * [`reward`]: left-hand, right-hand and cooperative reward terms.
//! * [`metrics`]: note-level precision/recall/F1.
//! * [`nn`]: policy, critic and synchronizer networks on a small reverse-mode tape.
//! * [`learner`]: multi-objective GAE and clipped-surrogate optimisation.
//! * [`env`]: kinematic training environments, including the toy fret task.
//! * [`oracle`]: heuristic fingering, placement and pick scripting.

// Negated comparisons reject NaN on purpose; per-string index loops mirror
// the six-string layout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod env;
pub mod error;
pub mod geometry;
pub mod hand;
pub mod learner;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod reward;
pub mod session;
pub mod suite;
pub mod tab;
pub mod toy;

pub use error::{Error, Result};
pub use geometry::{CylinderSegment, FretboardGeometry, GuitarSpec, Segment};
pub use hand::{HandPose, HandSkeleton, PickModel, PoseObservation};
pub use metrics::{NoteResult, ScoreReport, Verdict};
pub use session::{NoteLedger, PickDirection, PickEvent, StringSession};
pub use tab::{LeftGoalState, RightGoalState, StringTarget, TabNote, TabScore};

/// Number of strings on the modelled guitar.
pub const NUM_STRINGS: usize = 6;
/// Control rate of every stepping harness, in frames per second.
pub const CONTROL_HZ: f64 = 60.0;
/// Finger parts closer than this to a string press (or touch) it.
pub const PRESS_THRESHOLD: f64 = 0.006;
