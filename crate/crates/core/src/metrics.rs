//! Note-level precision, recall and F1 for the fretting hand, the picking
//! hand and the two hands together.
//!
//! A positive sample is a string that should be pressed (left) or picked
//! (right, joint). Counts are micro-averaged over every string of every note.

use serde::{Deserialize, Serialize};

use crate::session::{FrameRecord, NoteLedger};
use crate::tab::{StringTarget, TabNote, TabScore};
use crate::{Error, Result, NUM_STRINGS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "tp")]
    TruePositive,
    #[serde(rename = "fp")]
    FalsePositive,
    #[serde(rename = "fn")]
    FalseNegative,
    #[serde(rename = "tn")]
    TrueNegative,
}

impl Verdict {
    fn from_flags(positive: bool, hit: bool) -> Self {
        match (positive, hit) {
            (true, true) => Verdict::TruePositive,
            (true, false) => Verdict::FalseNegative,
            (false, true) => Verdict::FalsePositive,
            (false, false) => Verdict::TrueNegative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Left,
    Right,
    Joint,
}

/// Minimum contiguous frames for a press to count: ceil(2/3 of the note).
pub fn required_run(duration_frames: u32) -> u32 {
    (2 * duration_frames).div_ceil(3)
}

/// Whether string state `rec` satisfies `target` on string `s`.
/// Open strings must be untouched; mute strings are unconstrained.
pub fn frame_matches(rec: &FrameRecord, s: usize, target: StringTarget) -> bool {
    match target {
        StringTarget::Fret(k) => rec.pressed[s] == Some(k),
        StringTarget::Open => !rec.touched[s],
        StringTarget::Mute => true,
    }
}

fn longest_run(frames: &[FrameRecord], pred: impl Fn(&FrameRecord) -> bool) -> u32 {
    let (mut best, mut cur) = (0, 0);
    for f in frames {
        if pred(f) {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

fn check_complete(ledger: &NoteLedger) -> Result<()> {
    if ledger.is_complete() {
        Ok(())
    } else {
        Err(Error::Evaluation(format!(
            "note {} ledger has {} of {} frames",
            ledger.note_index,
            ledger.frames.len(),
            ledger.duration_frames
        )))
    }
}

pub fn left_note_verdicts(ledger: &NoteLedger, note: &TabNote) -> Result<[Verdict; NUM_STRINGS]> {
    check_complete(ledger)?;
    let need = required_run(ledger.duration_frames);
    Ok(std::array::from_fn(|s| match note.strings[s] {
        StringTarget::Fret(k) => {
            let run = longest_run(&ledger.frames, |f| f.pressed[s] == Some(k));
            Verdict::from_flags(true, run >= need)
        }
        _ => {
            let run = longest_run(&ledger.frames, |f| f.pressed[s].is_some());
            Verdict::from_flags(false, need > 0 && run >= need)
        }
    }))
}

pub fn right_note_verdicts(ledger: &NoteLedger, note: &TabNote) -> Result<[Verdict; NUM_STRINGS]> {
    check_complete(ledger)?;
    let targets = note.pick_targets();
    let book = &ledger.book;
    Ok(std::array::from_fn(|s| {
        if targets[s] {
            Verdict::from_flags(true, book.picks[s] == 1 && !book.wrongly_tackled[s])
        } else {
            Verdict::from_flags(false, book.picks[s] > 0)
        }
    }))
}

/// Joint verdicts. `left` carries the press states, `right` the pick events;
/// both may be the same ledger when one session tracked both hands.
pub fn joint_note_verdicts(
    left: &NoteLedger,
    right: &NoteLedger,
    note: &TabNote,
) -> Result<[Verdict; NUM_STRINGS]> {
    check_complete(left)?;
    check_complete(right)?;
    if left.start_frame != right.start_frame || left.duration_frames != right.duration_frames {
        return Err(Error::Evaluation(format!(
            "note {}: left and right ledgers cover different frames",
            left.note_index
        )));
    }
    let picked = right_note_verdicts(right, note)?;
    let need = required_run(left.duration_frames);
    Ok(std::array::from_fn(|s| {
        let target = note.strings[s];
        if !target.is_pick_target() {
            return picked[s];
        }
        if picked[s] != Verdict::TruePositive {
            return Verdict::FalseNegative;
        }
        let Some(ev) = right.picks.iter().find(|e| e.string == s) else {
            return Verdict::FalseNegative;
        };
        let at = (ev.frame - right.start_frame) as usize;
        let window = &left.frames[at.min(left.frames.len())..];
        let kept = window
            .iter()
            .take_while(|f| frame_matches(f, s, target))
            .count() as u32;
        let threshold = need.min(window.len() as u32);
        Verdict::from_flags(true, kept >= 1 && kept >= threshold)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteResult {
    pub note_index: usize,
    /// At least two pressed targets.
    pub chord: bool,
    pub left: [Verdict; NUM_STRINGS],
    pub right: [Verdict; NUM_STRINGS],
    pub joint: [Verdict; NUM_STRINGS],
}

impl NoteResult {
    pub fn verdicts(&self, mode: Mode) -> &[Verdict; NUM_STRINGS] {
        match mode {
            Mode::Left => &self.left,
            Mode::Right => &self.right,
            Mode::Joint => &self.joint,
        }
    }
}

pub fn evaluate_note(left: &NoteLedger, right: &NoteLedger, note: &TabNote) -> Result<NoteResult> {
    Ok(NoteResult {
        note_index: left.note_index,
        chord: note.pressed_count() >= 2,
        left: left_note_verdicts(left, note)?,
        right: right_note_verdicts(right, note)?,
        joint: joint_note_verdicts(left, right, note)?,
    })
}

/// Evaluates every note of `score`; ledgers are indexed by note.
pub fn evaluate(left: &[NoteLedger], right: &[NoteLedger], score: &TabScore) -> Result<Vec<NoteResult>> {
    if left.len() != score.notes.len() || right.len() != score.notes.len() {
        return Err(Error::Evaluation(format!(
            "expected {} ledgers, got {} left and {} right",
            score.notes.len(),
            left.len(),
            right.len()
        )));
    }
    score
        .notes
        .iter()
        .zip(left.iter().zip(right))
        .map(|(n, (l, r))| evaluate_note(l, r, n))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Counts {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::TruePositive => self.tp += 1,
            Verdict::FalsePositive => self.fp += 1,
            Verdict::FalseNegative => self.fn_ += 1,
            Verdict::TrueNegative => self.tn += 1,
        }
    }

    pub fn from_verdicts<'a>(vs: impl IntoIterator<Item = &'a Verdict>) -> Self {
        let mut c = Counts::default();
        vs.into_iter().for_each(|&v| c.add(v));
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }

    pub fn scores(&self) -> Scores {
        Scores {
            counts: *self,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeScores {
    pub left: Scores,
    pub right: Scores,
    pub joint: Scores,
}

impl ModeScores {
    fn from_results<'a>(results: impl Iterator<Item = &'a NoteResult> + Clone) -> Self {
        let by = |m: Mode| Counts::from_verdicts(results.clone().flat_map(|r| r.verdicts(m).iter())).scores();
        ModeScores {
            left: by(Mode::Left),
            right: by(Mode::Right),
            joint: by(Mode::Joint),
        }
    }

    pub fn get(&self, mode: Mode) -> &Scores {
        match mode {
            Mode::Left => &self.left,
            Mode::Right => &self.right,
            Mode::Joint => &self.joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteScore {
    pub note_index: usize,
    pub chord: bool,
    pub left_f1: f64,
    pub right_f1: f64,
    pub joint_f1: f64,
}

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub version: u32,
    pub notes: usize,
    pub track: ModeScores,
    /// Notes with at least two pressed targets.
    pub chords: ModeScores,
    /// Notes with at most one pressed target.
    pub single: ModeScores,
    pub per_note: Vec<NoteScore>,
}

pub fn aggregate(results: &[NoteResult]) -> Result<ScoreReport> {
    if results.is_empty() {
        return Err(Error::Evaluation("no notes to aggregate".into()));
    }
    let per_note = results
        .iter()
        .map(|r| NoteScore {
            note_index: r.note_index,
            chord: r.chord,
            left_f1: Counts::from_verdicts(&r.left).f1(),
            right_f1: Counts::from_verdicts(&r.right).f1(),
            joint_f1: Counts::from_verdicts(&r.joint).f1(),
        })
        .collect();
    Ok(ScoreReport {
        version: REPORT_VERSION,
        notes: results.len(),
        track: ModeScores::from_results(results.iter()),
        chords: ModeScores::from_results(results.iter().filter(|r| r.chord)),
        single: ModeScores::from_results(results.iter().filter(|r| !r.chord)),
        per_note,
    })
}

impl ScoreReport {
    pub fn per_note_csv(&self) -> String {
        let mut out = String::from("note,chord,left_f1,right_f1,joint_f1\n");
        for n in &self.per_note {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                n.note_index, n.chord, n.left_f1, n.right_f1, n.joint_f1
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{PickDirection, PickEvent};
    use num_rational::Ratio;
    use StringTarget::{Fret, Mute, Open};

    fn note(strings: [StringTarget; 6]) -> TabNote {
        TabNote::new(strings, Ratio::new(1, 4))
    }

    fn ledger_with(n: &TabNote, frames: Vec<FrameRecord>, picks: &[(u64, usize)]) -> NoteLedger {
        let mut l = NoteLedger::new(0, 100, frames.len() as u32);
        for (i, f) in frames.into_iter().enumerate() {
            let frame = 100 + i as u64;
            let ev: Vec<PickEvent> = picks
                .iter()
                .filter(|p| p.0 == frame)
                .map(|&(frame, string)| PickEvent {
                    frame,
                    string,
                    direction: PickDirection::DownToUp,
                    crossing: 0.0,
                })
                .collect();
            l.record(n, f, &ev);
        }
        l
    }

    fn pressed_on(s: usize, fret: u8, on: impl Fn(usize) -> bool, len: usize) -> Vec<FrameRecord> {
        (0..len)
            .map(|i| {
                let mut f = FrameRecord::EMPTY;
                if on(i) {
                    f.pressed[s] = Some(fret);
                    f.touched[s] = true;
                }
                f
            })
            .collect()
    }

    #[test]
    fn run_threshold() {
        assert_eq!(required_run(30), 20);
        assert_eq!(required_run(31), 21);
        assert_eq!(required_run(1), 1);
        let n = note([Mute, Fret(3), Mute, Mute, Mute, Mute]);
        let full = ledger_with(&n, pressed_on(1, 3, |_| true, 30), &[]);
        assert_eq!(left_note_verdicts(&full, &n).unwrap()[1], Verdict::TruePositive);
        let short = ledger_with(&n, pressed_on(1, 3, |i| i < 19, 30), &[]);
        assert_eq!(left_note_verdicts(&short, &n).unwrap()[1], Verdict::FalseNegative);
        let split = ledger_with(&n, pressed_on(1, 3, |i| i != 15, 31), &[]);
        assert_eq!(left_note_verdicts(&split, &n).unwrap()[1], Verdict::FalseNegative);
        let wrong_fret = ledger_with(&n, pressed_on(1, 4, |_| true, 30), &[]);
        assert_eq!(left_note_verdicts(&wrong_fret, &n).unwrap()[1], Verdict::FalseNegative);
    }

    #[test]
    fn pressing_a_non_target_is_false_positive() {
        let n = note([Open, Fret(3), Mute, Mute, Mute, Mute]);
        let l = ledger_with(&n, pressed_on(0, 2, |_| true, 30), &[]);
        let v = left_note_verdicts(&l, &n).unwrap();
        assert_eq!(v[0], Verdict::FalsePositive);
        assert_eq!(v[2], Verdict::TrueNegative);
    }

    #[test]
    fn incomplete_ledger_is_an_error() {
        let n = note([Open; 6]);
        let mut l = NoteLedger::new(0, 0, 10);
        l.record(&n, FrameRecord::EMPTY, &[]);
        assert!(matches!(left_note_verdicts(&l, &n), Err(Error::Evaluation(_))));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn right_verdicts() {
        let n = note([Mute, Fret(3), Open, Mute, Mute, Mute]);
        let l = ledger_with(&n, vec![FrameRecord::EMPTY; 10], &[(102, 1), (102, 2)]);
        let v = right_note_verdicts(&l, &n).unwrap();
        assert_eq!(v[1], Verdict::TruePositive);
        assert_eq!(v[2], Verdict::TruePositive);
        assert_eq!(v[0], Verdict::TrueNegative);
        let double = ledger_with(&n, vec![FrameRecord::EMPTY; 10], &[(101, 1), (101, 2), (105, 1)]);
        assert_ne!(right_note_verdicts(&double, &n).unwrap()[1], Verdict::TruePositive);
        let stray = ledger_with(&n, vec![FrameRecord::EMPTY; 10], &[(101, 3)]);
        assert_eq!(right_note_verdicts(&stray, &n).unwrap()[3], Verdict::FalsePositive);
    }

    #[test]
    fn joint_conditions() {
        let n = note([Mute, Fret(3), Mute, Mute, Mute, Mute]);
        let good = ledger_with(&n, pressed_on(1, 3, |_| true, 30), &[(105, 1)]);
        assert_eq!(joint_note_verdicts(&good, &good, &n).unwrap()[1], Verdict::TruePositive);
        // pressed only after the pick
        let late = ledger_with(&n, pressed_on(1, 3, |i| i > 5, 30), &[(105, 1)]);
        assert_eq!(joint_note_verdicts(&late, &late, &n).unwrap()[1], Verdict::FalseNegative);
        // released right after the pick
        let release = ledger_with(&n, pressed_on(1, 3, |i| i <= 6, 30), &[(105, 1)]);
        assert_eq!(joint_note_verdicts(&release, &release, &n).unwrap()[1], Verdict::FalseNegative);
        // late pick: must hold the remaining frames
        let tail = ledger_with(&n, pressed_on(1, 3, |_| true, 30), &[(125, 1)]);
        assert_eq!(joint_note_verdicts(&tail, &tail, &n).unwrap()[1], Verdict::TruePositive);
    }

    #[test]
    fn aggregate_counts() {
        let tp = Verdict::TruePositive;
        let fp = Verdict::FalsePositive;
        let fn_ = Verdict::FalseNegative;
        let tn = Verdict::TrueNegative;
        let r = NoteResult {
            note_index: 0,
            chord: true,
            left: [tp, tp, tp, fp, fn_, tn],
            right: [tp, tn, tn, tn, tn, tn],
            joint: [tn; 6],
        };
        let rep = aggregate(&[r]).unwrap();
        assert_eq!(rep.track.left.precision, 0.75);
        assert_eq!(rep.track.left.recall, 0.75);
        assert_eq!(rep.track.left.f1, 0.75);
        assert_eq!(rep.track.right.f1, 1.0);
        assert_eq!(rep.track.joint.f1, 0.0);
        assert_eq!(rep.single.left.counts, Counts::default());
        assert!((f1(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!(rep.per_note_csv().starts_with("note,chord"));
    }
}
