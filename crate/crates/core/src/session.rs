//! Virtual strings: press and pick detection with a per-note event ledger.

use std::sync::Arc;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{segment_closest_points, CylinderSegment, FretboardGeometry};
use crate::hand::NUM_PARTS;
use crate::tab::{StringTarget, TabNote, TabScore};
use crate::{NUM_STRINGS, PRESS_THRESHOLD};

/// Contact state of one string in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressState {
    /// Fret region under the closest contact, if any.
    pub fret: Option<u8>,
    /// Closest finger part.
    pub part: Option<usize>,
    /// Distance from the closest finger-part axis to the string.
    pub distance: f64,
    pub touched: bool,
}

impl PressState {
    pub const UNTOUCHED: PressState = PressState {
        fret: None,
        part: None,
        distance: f64::INFINITY,
        touched: false,
    };
}

/// Presses of every string by the 12 finger parts. The thumb never presses.
pub fn detect_presses(
    parts: &[CylinderSegment; NUM_PARTS],
    geometry: &FretboardGeometry,
) -> [PressState; NUM_STRINGS] {
    std::array::from_fn(|i| {
        let string = geometry.string_line(i);
        let mut best = PressState::UNTOUCHED;
        let mut best_x = 0.0;
        for (p, part) in parts.iter().enumerate() {
            let pair = segment_closest_points(&part.axis(), string);
            if pair.distance < best.distance {
                best.distance = pair.distance;
                best.part = Some(p);
                best_x = pair.on_second.x;
            }
        }
        if best.distance < PRESS_THRESHOLD {
            best.touched = true;
            best.fret = geometry.fret_at(best_x).map(|k| k as u8);
        } else {
            best.part = None;
        }
        best
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PickDirection {
    /// From the string-1 side toward string 6.
    TopToDown,
    DownToUp,
}

impl PickDirection {
    pub fn flipped(self) -> Self {
        match self {
            PickDirection::TopToDown => PickDirection::DownToUp,
            PickDirection::DownToUp => PickDirection::TopToDown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickEvent {
    pub frame: u64,
    /// 0-based string index.
    pub string: usize,
    pub direction: PickDirection,
    /// Interpolation parameter of the crossing within the frame step.
    pub crossing: f64,
}

/// Strings crossed below their height by the tip moving from `prev` to `curr`,
/// ordered by crossing parameter.
pub fn detect_picks(
    prev: &Point3<f64>,
    curr: &Point3<f64>,
    geometry: &FretboardGeometry,
    frame: u64,
) -> Vec<PickEvent> {
    let mut events = Vec::new();
    for i in 0..NUM_STRINGS {
        let s0 = geometry.lateral_coordinate(i, prev);
        let s1 = geometry.lateral_coordinate(i, curr);
        let side0 = s0 >= 0.0;
        let side1 = s1 >= 0.0;
        if side0 == side1 {
            continue;
        }
        let t = s0 / (s0 - s1);
        let at = prev + (curr - prev) * t;
        if !(at.x >= 0.0 && at.x <= geometry.scale_length()) {
            continue;
        }
        if at.z < geometry.string_line(i).at(at.x / geometry.scale_length()).z {
            events.push(PickEvent {
                frame,
                string: i,
                direction: if side1 {
                    PickDirection::TopToDown
                } else {
                    PickDirection::DownToUp
                },
                crossing: t,
            });
        }
    }
    events.sort_by(|a, b| {
        a.crossing.total_cmp(&b.crossing).then_with(|| match a.direction {
            PickDirection::TopToDown => a.string.cmp(&b.string),
            PickDirection::DownToUp => b.string.cmp(&a.string),
        })
    });
    events
}

/// Pick bookkeeping for the current note.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickBook {
    pub picks: [u32; NUM_STRINGS],
    pub wrongly_tackled: [bool; NUM_STRINGS],
    /// Direction of the first pick in the note.
    pub direction: Option<PickDirection>,
}

impl PickBook {
    pub fn picked(&self) -> [bool; NUM_STRINGS] {
        self.picks.map(|c| c > 0)
    }

    /// Target strings not yet picked.
    pub fn remaining(&self, targets: &[bool; NUM_STRINGS]) -> Vec<usize> {
        (0..NUM_STRINGS)
            .filter(|&i| targets[i] && self.picks[i] == 0)
            .collect()
    }
}

/// Applies this frame's pick events. A string is wrongly tackled when it is
/// not a target but picked, when a target is picked a second time, or when a
/// target is skipped while a string past it (in the note's direction) is
/// picked. Flags are sticky for the rest of the note. Returns newly set flags.
pub fn update_note_ledger(
    book: &mut PickBook,
    events: &[PickEvent],
    targets: &[bool; NUM_STRINGS],
) -> [bool; NUM_STRINGS] {
    let before = book.wrongly_tackled;
    for e in events {
        book.direction.get_or_insert(e.direction);
        book.picks[e.string] += 1;
        if !targets[e.string] || book.picks[e.string] > 1 {
            book.wrongly_tackled[e.string] = true;
        }
    }
    if let Some(dir) = book.direction {
        for s in 0..NUM_STRINGS {
            if !targets[s] || book.picks[s] > 0 {
                continue;
            }
            let skipped = match dir {
                PickDirection::TopToDown => (s + 1..NUM_STRINGS).any(|b| book.picks[b] > 0),
                PickDirection::DownToUp => (0..s).any(|a| book.picks[a] > 0),
            };
            if skipped {
                book.wrongly_tackled[s] = true;
            }
        }
    }
    std::array::from_fn(|i| book.wrongly_tackled[i] && !before[i])
}

/// Every fretted target pressed at its fret and every open target untouched.
/// Mute strings are unconstrained.
pub fn expected_press_predicate(presses: &[PressState; NUM_STRINGS], note: &TabNote) -> bool {
    note.strings.iter().zip(presses).all(|(t, p)| match t {
        StringTarget::Fret(k) => p.fret == Some(*k),
        StringTarget::Open => !p.touched,
        StringTarget::Mute => true,
    })
}

/// One frame of string contact state as stored in a note ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub pressed: [Option<u8>; NUM_STRINGS],
    pub touched: [bool; NUM_STRINGS],
}

impl FrameRecord {
    pub fn from_presses(p: &[PressState; NUM_STRINGS]) -> Self {
        Self {
            pressed: p.map(|s| s.fret),
            touched: p.map(|s| s.touched),
        }
    }

    pub const EMPTY: FrameRecord = FrameRecord {
        pressed: [None; NUM_STRINGS],
        touched: [false; NUM_STRINGS],
    };
}

/// Everything that happened to the strings during one note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteLedger {
    pub note_index: usize,
    pub start_frame: u64,
    pub duration_frames: u32,
    pub frames: Vec<FrameRecord>,
    pub picks: Vec<PickEvent>,
    pub book: PickBook,
    /// Longest contiguous run of frames pressed at the target fret, per string.
    pub longest_target_run: [u32; NUM_STRINGS],
    current_run: [u32; NUM_STRINGS],
}

impl NoteLedger {
    pub fn new(note_index: usize, start_frame: u64, duration_frames: u32) -> Self {
        Self {
            note_index,
            start_frame,
            duration_frames,
            frames: Vec::with_capacity(duration_frames as usize),
            picks: Vec::new(),
            book: PickBook::default(),
            longest_target_run: [0; NUM_STRINGS],
            current_run: [0; NUM_STRINGS],
        }
    }

    pub fn is_complete(&self) -> bool {
        self.frames.len() == self.duration_frames as usize
    }

    /// Appends one frame of press state and this frame's pick events.
    pub fn record(&mut self, note: &TabNote, frame: FrameRecord, events: &[PickEvent]) -> [bool; NUM_STRINGS] {
        for s in 0..NUM_STRINGS {
            let at_target = matches!(note.strings[s], StringTarget::Fret(k) if frame.pressed[s] == Some(k));
            if at_target {
                self.current_run[s] += 1;
                self.longest_target_run[s] = self.longest_target_run[s].max(self.current_run[s]);
            } else {
                self.current_run[s] = 0;
            }
        }
        self.frames.push(frame);
        self.picks.extend_from_slice(events);
        update_note_ledger(&mut self.book, events, &note.pick_targets())
    }
}

/// Exported event row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEvent {
    pub frame: u64,
    /// 1-based string number.
    pub string: usize,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub direction: Option<PickDirection>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fret: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Pick,
    Press,
    Release,
    WronglyTackled,
}

/// What a single [`StringSession::step`] observed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub frame: u64,
    pub note_index: usize,
    /// Frame index within the note.
    pub offset: u64,
    pub presses: [PressState; NUM_STRINGS],
    pub picks: Vec<PickEvent>,
    pub newly_wrong: [bool; NUM_STRINGS],
    /// Ledger of the current note after this frame.
    pub book: PickBook,
}

/// Frame-by-frame string state for one playthrough of a score.
#[derive(Debug, Clone)]
pub struct StringSession {
    geometry: Arc<FretboardGeometry>,
    score: Arc<TabScore>,
    starts: Vec<u64>,
    frame: u64,
    prev_tip: Option<Point3<f64>>,
    last_presses: [PressState; NUM_STRINGS],
    ledgers: Vec<NoteLedger>,
    log: Vec<LogEvent>,
}

impl StringSession {
    pub fn new(geometry: Arc<FretboardGeometry>, score: Arc<TabScore>) -> Self {
        let starts = score.note_starts();
        Self {
            geometry,
            score,
            starts,
            frame: 0,
            prev_tip: None,
            last_presses: [PressState::UNTOUCHED; NUM_STRINGS],
            ledgers: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn geometry(&self) -> &Arc<FretboardGeometry> {
        &self.geometry
    }

    pub fn score(&self) -> &Arc<TabScore> {
        &self.score
    }

    /// Next frame to be processed.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn is_finished(&self) -> bool {
        self.frame >= *self.starts.last().unwrap_or(&0)
    }

    /// Current note index and its pick book, if the score is not finished.
    pub fn current(&self) -> Option<(usize, PickBook)> {
        let (idx, offset) = self.score.locate(self.frame)?;
        let book = if offset == 0 {
            PickBook::default()
        } else {
            self.ledgers.last().map(|l| l.book).unwrap_or_default()
        };
        Some((idx, book))
    }

    pub fn last_presses(&self) -> &[PressState; NUM_STRINGS] {
        &self.last_presses
    }

    pub fn ledgers(&self) -> &[NoteLedger] {
        &self.ledgers
    }

    pub fn into_ledgers(self) -> Vec<NoteLedger> {
        self.ledgers
    }

    pub fn log(&self) -> &[LogEvent] {
        &self.log
    }

    /// Sets the pick tip position before the first frame so that a crossing
    /// on frame 0 can be detected.
    pub fn prime_tip(&mut self, tip: Point3<f64>) {
        self.prev_tip = Some(tip);
    }

    /// Processes one control frame. `parts` are the fretting hand's finger
    /// parts (absent when no fretting hand is simulated), `tip` the pick tip.
    pub fn step(
        &mut self,
        parts: Option<&[CylinderSegment; NUM_PARTS]>,
        tip: Option<Point3<f64>>,
    ) -> Option<FrameOutcome> {
        let (note_index, offset) = self.score.locate(self.frame)?;
        let frame = self.frame;
        if offset == 0 {
            let dur = (self.starts[note_index + 1] - self.starts[note_index]) as u32;
            self.ledgers.push(NoteLedger::new(note_index, frame, dur));
        }
        let presses = match parts {
            Some(parts) => detect_presses(parts, &self.geometry),
            None => [PressState::UNTOUCHED; NUM_STRINGS],
        };
        let picks = match (self.prev_tip, tip) {
            (Some(prev), Some(curr)) => detect_picks(&prev, &curr, &self.geometry, frame),
            _ => Vec::new(),
        };
        let note = &self.score.notes[note_index];
        let ledger = self.ledgers.last_mut().expect("ledger opened at note start");
        let newly_wrong = ledger.record(note, FrameRecord::from_presses(&presses), &picks);
        let book = ledger.book;

        for s in 0..NUM_STRINGS {
            let before = self.last_presses[s].fret;
            let now = presses[s].fret;
            if before != now {
                if before.is_some() {
                    self.log.push(LogEvent {
                        frame,
                        string: s + 1,
                        kind: EventKind::Release,
                        direction: None,
                        fret: before,
                    });
                }
                if now.is_some() {
                    self.log.push(LogEvent {
                        frame,
                        string: s + 1,
                        kind: EventKind::Press,
                        direction: None,
                        fret: now,
                    });
                }
            }
        }
        for e in &picks {
            self.log.push(LogEvent {
                frame,
                string: e.string + 1,
                kind: EventKind::Pick,
                direction: Some(e.direction),
                fret: None,
            });
        }
        for (s, &w) in newly_wrong.iter().enumerate() {
            if w {
                self.log.push(LogEvent {
                    frame,
                    string: s + 1,
                    kind: EventKind::WronglyTackled,
                    direction: None,
                    fret: None,
                });
            }
        }

        self.last_presses = presses;
        self.prev_tip = tip;
        self.frame += 1;
        Some(FrameOutcome {
            frame,
            note_index,
            offset,
            presses,
            picks,
            newly_wrong,
            book,
        })
    }

    /// Event log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GuitarSpec;
    use crate::tab::StringTarget::{Fret, Mute, Open};
    use nalgebra::Vector3;
    use num_rational::Ratio;

    fn geometry() -> FretboardGeometry {
        FretboardGeometry::new(GuitarSpec::default()).unwrap()
    }

    /// Twelve parts parked far above the fretboard.
    fn parked() -> [CylinderSegment; NUM_PARTS] {
        std::array::from_fn(|p| {
            let x = 0.05 + 0.01 * p as f64;
            CylinderSegment::new(Point3::new(x, -0.2, 0.3), Point3::new(x, -0.2, 0.32), 0.006)
        })
    }

    /// Short vertical part whose lower end sits at `p`.
    fn tip_at(p: Point3<f64>) -> CylinderSegment {
        CylinderSegment::new(p, p + Vector3::new(0.0, -0.005, 0.02), 0.006)
    }

    #[test]
    fn fingertip_on_press_point_presses_that_fret() {
        let g = geometry();
        let mut parts = parked();
        parts[2] = tip_at(g.press_point(2, 7));
        let p = detect_presses(&parts, &g);
        assert_eq!(p[2].fret, Some(7));
        assert_eq!(p[2].part, Some(2));
        assert!(p.iter().enumerate().all(|(i, s)| i == 2 || !s.touched));
    }

    #[test]
    fn threshold_is_strict() {
        let g = geometry();
        let mut parts = parked();
        let p = g.press_point(0, 5) + Vector3::new(0.0, 0.0, 0.007);
        parts[0] = CylinderSegment::new(p, p + Vector3::new(0.0, 0.0, 0.02), 0.006);
        assert!(detect_presses(&parts, &g).iter().all(|s| !s.touched));
    }

    #[test]
    fn closest_part_wins() {
        let g = geometry();
        let mut parts = parked();
        parts[0] = tip_at(g.press_point(3, 5) + Vector3::new(0.0, 0.0, 0.003));
        parts[5] = tip_at(g.press_point(3, 6));
        let p = detect_presses(&parts, &g);
        assert_eq!(p[3].fret, Some(6));
        assert_eq!(p[3].part, Some(5));
    }

    fn tip(y: f64, z: f64) -> Point3<f64> {
        Point3::new(0.55, y, z)
    }

    #[test]
    fn pick_from_above_side_below_string() {
        let g = geometry();
        let y = g.string_y(2, 0.55);
        let ev = detect_picks(&tip(y - 0.003, 0.001), &tip(y + 0.003, 0.001), &g, 9);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].string, 2);
        assert_eq!(ev[0].direction, PickDirection::TopToDown);
        assert_eq!(ev[0].frame, 9);
        // over the string: nothing
        assert!(detect_picks(&tip(y - 0.003, 0.004), &tip(y + 0.003, 0.004), &g, 0).is_empty());
        // exactly at string height: not below
        assert!(detect_picks(&tip(y - 0.003, 0.002), &tip(y + 0.003, 0.002), &g, 0).is_empty());
    }

    #[test]
    fn full_sweep_orders_strings() {
        let g = geometry();
        let y0 = g.string_y(0, 0.55) - 0.005;
        let y5 = g.string_y(5, 0.55) + 0.005;
        let down = detect_picks(&tip(y0, 0.001), &tip(y5, 0.001), &g, 0);
        assert_eq!(down.iter().map(|e| e.string).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4, 5]);
        let up = detect_picks(&tip(y5, 0.001), &tip(y0, 0.001), &g, 0);
        assert_eq!(up.iter().map(|e| e.string).collect::<Vec<_>>(), vec![5, 4, 3, 2, 1, 0]);
        assert!(up.iter().all(|e| e.direction == PickDirection::DownToUp));
    }

    fn ev(string: usize, direction: PickDirection) -> PickEvent {
        PickEvent {
            frame: 0,
            string,
            direction,
            crossing: 0.5,
        }
    }

    #[test]
    fn ledger_rules() {
        use PickDirection::*;
        // rule (1)
        let mut book = PickBook::default();
        let targets = [true, false, false, false, false, false];
        let new = update_note_ledger(&mut book, &[ev(0, TopToDown), ev(1, TopToDown)], &targets);
        assert_eq!(new, [false, true, false, false, false, false]);

        // rule (2): skip target 2 (index 1) going down, pick string 4 (index 3)
        let mut book = PickBook::default();
        let targets = [true, true, true, true, false, false];
        update_note_ledger(&mut book, &[ev(0, TopToDown)], &targets);
        update_note_ledger(&mut book, &[ev(2, TopToDown), ev(3, TopToDown)], &targets);
        assert_eq!(book.wrongly_tackled, [false, true, false, false, false, false]);

        // rule (3): going up, skip string 5 (index 4)
        let mut book = PickBook::default();
        let targets = [false, false, false, true, true, true];
        update_note_ledger(&mut book, &[ev(5, DownToUp), ev(3, DownToUp)], &targets);
        assert_eq!(book.wrongly_tackled, [false, false, false, false, true, false]);

        // clean, and a second pick of a target
        let mut book = PickBook::default();
        let targets = [false, false, true, false, false, false];
        update_note_ledger(&mut book, &[ev(2, DownToUp)], &targets);
        assert_eq!(book.wrongly_tackled, [false; 6]);
        update_note_ledger(&mut book, &[ev(2, TopToDown)], &targets);
        assert!(book.wrongly_tackled[2]);
        // sticky
        update_note_ledger(&mut book, &[], &targets);
        assert!(book.wrongly_tackled[2]);
    }

    #[test]
    fn predicate_cases() {
        let g = geometry();
        let note = TabNote::new([Fret(3), Open, Mute, Mute, Mute, Mute], Ratio::new(1, 4));
        let mut parts = parked();
        parts[0] = tip_at(g.press_point(0, 3));
        let p = detect_presses(&parts, &g);
        assert!(expected_press_predicate(&p, &note));

        // touch the open string at 0.005 m
        let q = g.press_point(1, 8) + Vector3::new(0.0, 0.0, 0.005);
        parts[4] = CylinderSegment::new(q, q + Vector3::new(0.0, 0.0, 0.02), 0.006);
        let p = detect_presses(&parts, &g);
        assert!(p[1].touched);
        assert!(!expected_press_predicate(&p, &note));

        // touching a mute string is fine
        let mut parts = parked();
        parts[0] = tip_at(g.press_point(0, 3));
        parts[4] = tip_at(g.press_point(4, 2));
        assert!(expected_press_predicate(&detect_presses(&parts, &g), &note));
    }

    #[test]
    fn session_resets_at_note_boundary() {
        let g = Arc::new(geometry());
        let note = TabNote::new([Fret(3), Mute, Mute, Mute, Mute, Mute], Ratio::new(1, 16));
        let score = Arc::new(TabScore::new(100.0, vec![note.clone(), note]).unwrap());
        let mut s = StringSession::new(g.clone(), score);
        let mut parts = parked();
        parts[0] = tip_at(g.press_point(0, 3));
        let mut count = 0;
        while let Some(out) = s.step(Some(&parts), None) {
            count += 1;
            assert_eq!(out.presses[0].fret, Some(3));
        }
        assert_eq!(count, 18);
        assert_eq!(s.ledgers().len(), 2);
        assert!(s.ledgers().iter().all(|l| l.is_complete() && l.longest_target_run[0] == 9));
        let log = s.log_jsonl();
        assert_eq!(log.lines().count(), 1);
        assert!(log.contains("\"press\""));
    }
}
