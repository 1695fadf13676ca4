//! Tablature scores and goal-state encodings.
//!
//! Human convention on input (`0` open, `x` mute, `k` fret) is mapped to the
//! internal codes used by the goal states: open `-1`, mute `0`, fret `k`.

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, CONTROL_HZ, NUM_STRINGS};

pub const MAX_FRET: u8 = 24;
/// Number of notes visible in a goal state.
pub const HORIZON: usize = 5;
pub const GOAL_ROW: usize = NUM_STRINGS + 1;
pub const GOAL_LEN: usize = HORIZON * GOAL_ROW;
/// Critic goal: right goal plus six wrongly-tackled flags.
pub const CRITIC_GOAL_LEN: usize = GOAL_LEN + NUM_STRINGS;
pub const FORMAT_NAME: &str = "fretsync-tab";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StringTarget {
    Fret(u8),
    Open,
    Mute,
}

impl StringTarget {
    /// Internal code: fret `k`, open `-1`, mute `0`.
    pub fn code(self) -> i32 {
        match self {
            StringTarget::Fret(k) => k as i32,
            StringTarget::Open => -1,
            StringTarget::Mute => 0,
        }
    }

    /// String should be picked during the note.
    pub fn is_pick_target(self) -> bool {
        !matches!(self, StringTarget::Mute)
    }

    pub fn fret(self) -> Option<u8> {
        match self {
            StringTarget::Fret(k) => Some(k),
            _ => None,
        }
    }
}

/// Affine map of a raw code in `[-1, 24]` onto `[-1, 1]`.
pub fn normalize_code(code: i32) -> f64 {
    2.0 * (code as f64 + 1.0) / 25.0 - 1.0
}

/// Timer scaling used for network inputs: seconds at 60 Hz, clamped to `[0, 4]`.
pub fn normalize_timer(frames: f64) -> f64 {
    (frames / CONTROL_HZ).clamp(0.0, 4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabNote {
    /// String 1 first.
    pub strings: [StringTarget; NUM_STRINGS],
    /// Note value as a fraction of a whole note.
    pub value: Ratio<u32>,
}

impl TabNote {
    pub fn new(strings: [StringTarget; NUM_STRINGS], value: Ratio<u32>) -> Self {
        Self { strings, value }
    }

    /// Duration in quarter-note beats.
    pub fn duration_beats(&self) -> f64 {
        4.0 * *self.value.numer() as f64 / *self.value.denom() as f64
    }

    /// Distinct pressed frets in ascending order.
    pub fn pressed_frets(&self) -> Vec<u8> {
        let mut f: Vec<u8> = self.strings.iter().filter_map(|s| s.fret()).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn pressed_count(&self) -> usize {
        self.strings.iter().filter(|s| s.fret().is_some()).count()
    }

    pub fn pick_targets(&self) -> [bool; NUM_STRINGS] {
        self.strings.map(|s| s.is_pick_target())
    }

    pub fn codes(&self) -> [i32; NUM_STRINGS] {
        self.strings.map(|s| s.code())
    }

    pub fn has_open(&self) -> bool {
        self.strings.contains(&StringTarget::Open)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabScore {
    pub title: String,
    pub source: String,
    pub tempo_bpm: f64,
    pub notes: Vec<TabNote>,
}

impl TabScore {
    pub fn new(tempo_bpm: f64, notes: Vec<TabNote>) -> Result<Self> {
        let score = Self {
            title: String::new(),
            source: String::new(),
            tempo_bpm,
            notes,
        };
        score.validate()?;
        Ok(score)
    }

    pub fn validate(&self) -> Result<()> {
        if self.notes.is_empty() {
            return Err(Error::EmptyScore);
        }
        if !(self.tempo_bpm > 0.0) || !self.tempo_bpm.is_finite() {
            return Err(Error::Config(format!("tempo must be > 0, got {}", self.tempo_bpm)));
        }
        for (i, note) in self.notes.iter().enumerate() {
            check_note(i, note)?;
        }
        let starts = self.note_starts();
        for (i, w) in starts.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Infeasible {
                    note: i,
                    msg: "note lasts less than one control frame".into(),
                });
            }
        }
        Ok(())
    }

    /// Frame at which each note starts, plus the end frame. Rounding is
    /// cumulative so note lengths never drift from the tempo.
    pub fn note_starts(&self) -> Vec<u64> {
        let frames_per_beat = CONTROL_HZ * 60.0 / self.tempo_bpm;
        let mut beats = 0.0;
        let mut starts = Vec::with_capacity(self.notes.len() + 1);
        starts.push(0);
        for n in &self.notes {
            beats += n.duration_beats();
            starts.push((beats * frames_per_beat).round() as u64);
        }
        starts
    }

    pub fn duration_frames(&self) -> Vec<u32> {
        self.note_starts()
            .windows(2)
            .map(|w| (w[1] - w[0]) as u32)
            .collect()
    }

    pub fn total_frames(&self) -> u64 {
        *self.note_starts().last().unwrap_or(&0)
    }

    /// Note index and offset within the note for `frame`.
    pub fn locate(&self, frame: u64) -> Option<(usize, u64)> {
        let starts = self.note_starts();
        if frame >= *starts.last()? {
            return None;
        }
        let idx = starts.partition_point(|&s| s <= frame) - 1;
        Some((idx, frame - starts[idx]))
    }

    /// Shortest note value in the score.
    pub fn shortest_value(&self) -> Ratio<u32> {
        self.notes
            .iter()
            .map(|n| n.value)
            .min()
            .unwrap_or(Ratio::new(1, 1))
    }
}

fn check_note(i: usize, note: &TabNote) -> Result<()> {
    if *note.value.numer() == 0 {
        return Err(Error::Infeasible {
            note: i,
            msg: "zero duration".into(),
        });
    }
    for s in &note.strings {
        if let StringTarget::Fret(k) = s {
            if *k < 1 || *k > MAX_FRET {
                return Err(Error::Infeasible {
                    note: i,
                    msg: format!("fret {k} outside 1..={MAX_FRET}"),
                });
            }
        }
    }
    let frets = note.pressed_frets();
    if frets.len() > 4 {
        return Err(Error::Infeasible {
            note: i,
            msg: format!("chord presses {} distinct frets; at most 4 are playable", frets.len()),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON document

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum HumanFret {
    Num(i64),
    Text(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NoteDoc {
    frets: Vec<HumanFret>,
    duration: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScoreDoc {
    format: String,
    version: u32,
    #[serde(default)]
    title: String,
    #[serde(default)]
    source: String,
    tempo_bpm: f64,
    notes: Vec<NoteDoc>,
}

fn parse_value(text: &str) -> Option<Ratio<u32>> {
    let text = text.trim();
    let r = match text.split_once('/') {
        Some((n, d)) => {
            let n: u32 = n.trim().parse().ok()?;
            let d: u32 = d.trim().parse().ok()?;
            if d == 0 {
                return None;
            }
            Ratio::new(n, d)
        }
        None => Ratio::from_integer(text.parse().ok()?),
    };
    (*r.numer() > 0).then_some(r)
}

fn format_value(v: Ratio<u32>) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

fn human_to_target(h: &HumanFret) -> std::result::Result<StringTarget, String> {
    match h {
        HumanFret::Num(0) => Ok(StringTarget::Open),
        HumanFret::Num(k) if (1..=MAX_FRET as i64).contains(k) => Ok(StringTarget::Fret(*k as u8)),
        HumanFret::Num(k) => Err(format!("fret {k} outside 0..={MAX_FRET}")),
        HumanFret::Text(t) if t.eq_ignore_ascii_case("x") => Ok(StringTarget::Mute),
        HumanFret::Text(t) => Err(format!("unrecognised string entry `{t}`")),
    }
}

fn target_to_human(t: StringTarget) -> HumanFret {
    match t {
        StringTarget::Fret(k) => HumanFret::Num(k as i64),
        StringTarget::Open => HumanFret::Num(0),
        StringTarget::Mute => HumanFret::Text("x".into()),
    }
}

/// Parses either the JSON document or the line-based text format.
pub fn parse_tab(input: &str) -> Result<TabScore> {
    if input.trim_start().starts_with('{') {
        parse_tab_json(input)
    } else {
        parse_tab_text(input)
    }
}

pub fn parse_tab_json(input: &str) -> Result<TabScore> {
    let doc: ScoreDoc = serde_json::from_str(input).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if doc.format != FORMAT_NAME {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unknown format `{}`", doc.format),
        });
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported version {}", doc.version),
        });
    }
    let mut notes = Vec::with_capacity(doc.notes.len());
    for (i, n) in doc.notes.iter().enumerate() {
        if n.frets.len() != NUM_STRINGS {
            return Err(Error::Infeasible {
                note: i,
                msg: format!("expected {NUM_STRINGS} string entries, got {}", n.frets.len()),
            });
        }
        let mut strings = [StringTarget::Mute; NUM_STRINGS];
        for (s, h) in strings.iter_mut().zip(&n.frets) {
            *s = human_to_target(h).map_err(|msg| Error::Infeasible { note: i, msg })?;
        }
        let value = parse_value(&n.duration).ok_or_else(|| Error::Infeasible {
            note: i,
            msg: format!("bad duration `{}`", n.duration),
        })?;
        notes.push(TabNote::new(strings, value));
    }
    let score = TabScore {
        title: doc.title,
        source: doc.source,
        tempo_bpm: doc.tempo_bpm,
        notes,
    };
    score.validate()?;
    Ok(score)
}

/// Line format: `tempo <bpm>`, `title <text>`, `source <text>`, and one note
/// per line as six entries (string 1 first) followed by the note value,
/// e.g. `3 x 0 x x x 1/4`. `#` starts a comment.
pub fn parse_tab_text(input: &str) -> Result<TabScore> {
    let mut tempo = None;
    let mut title = String::new();
    let mut source = String::new();
    let mut notes = Vec::new();
    for (ln, raw) in input.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        if let Some(rest) = line.strip_prefix("tempo") {
            let bpm: f64 = rest
                .trim()
                .parse()
                .map_err(|_| err(format!("bad tempo `{}`", rest.trim())))?;
            tempo = Some(bpm);
            continue;
        }
        if let Some(rest) = line.strip_prefix("title") {
            title = rest.trim().to_string();
            continue;
        }
        if let Some(rest) = line.strip_prefix("source") {
            source = rest.trim().to_string();
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != NUM_STRINGS + 1 {
            return Err(err(format!(
                "expected {} fields (six strings and a note value), got {}",
                NUM_STRINGS + 1,
                fields.len()
            )));
        }
        let mut strings = [StringTarget::Mute; NUM_STRINGS];
        for (s, f) in strings.iter_mut().zip(&fields) {
            let h = match f.parse::<i64>() {
                Ok(k) => HumanFret::Num(k),
                Err(_) => HumanFret::Text(f.to_string()),
            };
            *s = human_to_target(&h).map_err(err)?;
        }
        let value = parse_value(fields[NUM_STRINGS])
            .ok_or_else(|| err(format!("bad note value `{}`", fields[NUM_STRINGS])))?;
        notes.push(TabNote::new(strings, value));
    }
    let tempo = tempo.ok_or(Error::Parse {
        line: 0,
        msg: "missing `tempo` line".into(),
    })?;
    let score = TabScore {
        title,
        source,
        tempo_bpm: tempo,
        notes,
    };
    score.validate()?;
    Ok(score)
}

pub fn to_json(score: &TabScore) -> String {
    let doc = ScoreDoc {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        title: score.title.clone(),
        source: score.source.clone(),
        tempo_bpm: score.tempo_bpm,
        notes: score
            .notes
            .iter()
            .map(|n| NoteDoc {
                frets: n.strings.iter().map(|&s| target_to_human(s)).collect(),
                duration: format_value(n.value),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("tab document serializes")
}

// ---------------------------------------------------------------------------
// goal states

/// Left goal: five rows of six normalized fret codes and a timer in frames.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftGoalState {
    pub rows: [[f64; GOAL_ROW]; HORIZON],
}

/// Right goal: five rows of six pick-pending flags and a timer in frames, plus
/// the wrongly-tackled flags of the current note for the critic.
#[derive(Debug, Clone, PartialEq)]
pub struct RightGoalState {
    pub rows: [[f64; GOAL_ROW]; HORIZON],
    pub wrongly_tackled: [f64; NUM_STRINGS],
}

fn network_rows(rows: &[[f64; GOAL_ROW]; HORIZON]) -> Vec<f64> {
    rows.iter()
        .flat_map(|r| {
            r[..NUM_STRINGS]
                .iter()
                .copied()
                .chain(std::iter::once(normalize_timer(r[NUM_STRINGS])))
        })
        .collect()
}

impl LeftGoalState {
    /// Flattened network input with the timer scaled.
    pub fn to_input(&self) -> Vec<f64> {
        network_rows(&self.rows)
    }
}

impl RightGoalState {
    pub fn to_input(&self) -> Vec<f64> {
        network_rows(&self.rows)
    }

    /// Extended critic input (`5 x 7 + 6`).
    pub fn to_critic_input(&self) -> Vec<f64> {
        let mut v = self.to_input();
        v.extend_from_slice(&self.wrongly_tackled);
        v
    }
}

/// Goal states at `frame`, given which strings were already picked and which
/// are flagged wrongly tackled in the current note. Frames past the end yield
/// zero rows.
pub fn goal_states(
    score: &TabScore,
    frame: u64,
    picked: &[bool; NUM_STRINGS],
    wrongly_tackled: &[bool; NUM_STRINGS],
) -> (LeftGoalState, RightGoalState) {
    let mut left = [[0.0; GOAL_ROW]; HORIZON];
    let mut right = [[0.0; GOAL_ROW]; HORIZON];
    let starts = score.note_starts();
    if let Some((idx, offset)) = score.locate(frame) {
        for row in 0..HORIZON {
            let n = idx + row;
            let Some(note) = score.notes.get(n) else { break };
            let full = (starts[n + 1] - starts[n]) as f64;
            let timer = if row == 0 { full - offset as f64 } else { full };
            for (s, target) in note.strings.iter().enumerate() {
                left[row][s] = normalize_code(target.code());
                let pending = target.is_pick_target() && !(row == 0 && picked[s]);
                right[row][s] = if pending { 1.0 } else { 0.0 };
            }
            left[row][NUM_STRINGS] = timer;
            right[row][NUM_STRINGS] = timer;
        }
    }
    (
        LeftGoalState { rows: left },
        RightGoalState {
            rows: right,
            wrongly_tackled: wrongly_tackled.map(|w| if w { 1.0 } else { 0.0 }),
        },
    )
}

// ---------------------------------------------------------------------------
// augmentation

/// How open strings interact with fretboard shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpenStringPolicy {
    /// Any open string in the score pins the whole score in place.
    #[default]
    WholeScore,
    /// Notes containing open strings stay in place; others shift.
    PerNote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub shift_range: i32,
    pub tempo_jitter: f64,
    #[serde(default)]
    pub open_policy: OpenStringPolicy,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift_range: 5,
            tempo_jitter: 20.0,
            open_policy: OpenStringPolicy::WholeScore,
        }
    }
}

fn shift_note(i: usize, note: &TabNote, offset: i32) -> Result<TabNote> {
    let mut out = note.clone();
    for s in out.strings.iter_mut() {
        if let StringTarget::Fret(k) = *s {
            let shifted = k as i32 + offset;
            if shifted < 1 || shifted > MAX_FRET as i32 {
                return Err(Error::ShiftOutOfRange {
                    note: i,
                    offset,
                    fret: k,
                });
            }
            *s = StringTarget::Fret(shifted as u8);
        }
    }
    Ok(out)
}

/// Moves every pressed fret by `offset`, leaving open and mute entries alone.
pub fn shift_score(score: &TabScore, offset: i32, policy: OpenStringPolicy) -> Result<TabScore> {
    let pinned_all = policy == OpenStringPolicy::WholeScore && score.notes.iter().any(|n| n.has_open());
    let mut out = score.clone();
    if pinned_all || offset == 0 {
        return Ok(out);
    }
    for (i, note) in out.notes.iter_mut().enumerate() {
        if policy == OpenStringPolicy::PerNote && note.has_open() {
            continue;
        }
        *note = shift_note(i, note, offset)?;
    }
    Ok(out)
}

/// Random fretboard shift (uniform over offsets in `[-shift_range, shift_range]`
/// that keep every fret on the neck) plus a uniform tempo jitter.
pub fn augment(score: &TabScore, config: &AugmentConfig, rng: &mut impl Rng) -> Result<TabScore> {
    let candidates: Vec<i32> = (-config.shift_range.abs()..=config.shift_range.abs())
        .filter(|&o| shift_score(score, o, config.open_policy).is_ok())
        .collect();
    let offset = if candidates.is_empty() {
        0
    } else {
        candidates[rng.random_range(0..candidates.len())]
    };
    let mut out = shift_score(score, offset, config.open_policy)?;
    if config.tempo_jitter > 0.0 {
        let j = rng.random_range(-config.tempo_jitter..=config.tempo_jitter);
        out.tempo_bpm = (score.tempo_bpm + j).max(1.0);
    }
    out.validate()?;
    Ok(out)
}

/// Largest tempo not above `bpm` at which a note of value `shortest` lasts a
/// whole number of control frames.
pub fn quantize_tempo(bpm: f64, shortest: Ratio<u32>) -> f64 {
    let beats = 4.0 * *shortest.numer() as f64 / *shortest.denom() as f64;
    let budget = CONTROL_HZ * 60.0 * beats;
    let frames = budget / bpm;
    let n = if (frames - frames.round()).abs() < 1e-9 {
        frames.round()
    } else {
        frames.ceil()
    };
    if n < 1.0 {
        return budget;
    }
    if (budget / n - bpm).abs() < 1e-9 * bpm {
        bpm
    } else {
        budget / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use StringTarget::{Fret, Mute, Open};

    fn single(strings: [StringTarget; 6], value: (u32, u32)) -> TabNote {
        TabNote::new(strings, Ratio::new(value.0, value.1))
    }

    #[test]
    fn quarter_at_120_is_30_frames() {
        let s = TabScore::new(120.0, vec![single([Fret(3), Mute, Mute, Mute, Mute, Mute], (1, 4))]).unwrap();
        assert_eq!(s.duration_frames(), vec![30]);
    }

    #[test]
    fn text_format_and_codes() {
        let s = parse_tab("tempo 120\n# a comment\nx x x x x x 1/4\n3 x 0 x x x 1/8\n").unwrap();
        assert_eq!(s.notes[0].codes(), [0; 6]);
        assert_eq!(s.notes[1].codes(), [3, 0, -1, 0, 0, 0]);
        assert_eq!(s.duration_frames(), vec![30, 15]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_tab("tempo 90\n1 2 3 x x x 1/4\n1 2 x x 1/4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match parse_tab("tempo 90\n1 2 q x x x 1/4\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_and_infeasible() {
        assert!(matches!(parse_tab("tempo 90\n"), Err(Error::EmptyScore)));
        match parse_tab("tempo 90\nx x x x x x 1/4\n1 2 3 4 5 x 1/4\n") {
            Err(Error::Infeasible { note, .. }) => assert_eq!(note, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let s = parse_tab("title demo\ntempo 96\n3 x 0 x x x 1/4\n1 1 2 3 3 1 1/2\nx x x x x x 3/8\n").unwrap();
        let back = parse_tab(&to_json(&s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn goal_state_rows() {
        let s = TabScore::new(
            120.0,
            vec![
                single([Fret(3), Open, Mute, Mute, Mute, Mute], (1, 4)),
                single([Fret(24), Mute, Mute, Mute, Mute, Mute], (1, 2)),
            ],
        )
        .unwrap();
        let none = [false; 6];
        let (l, r) = goal_states(&s, 0, &none, &none);
        assert_eq!(l.rows[0][6], 30.0);
        assert_eq!(l.rows[1][6], 60.0);
        assert_eq!(l.rows[0][1], -1.0);
        assert_eq!(l.rows[1][0], 1.0);
        assert_eq!(l.rows[2], [0.0; 7]);
        assert_eq!(r.rows[0][..6], [1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

        let (l, r) = goal_states(&s, 10, &[true, false, false, false, false, false], &none);
        assert_eq!(l.rows[0][6], 20.0);
        assert_eq!(r.rows[0][0], 0.0);
        assert_eq!(r.rows[0][1], 1.0);
        // picks only affect the current note
        assert_eq!(r.rows[1][0], 1.0);

        let (l, _) = goal_states(&s, 1000, &none, &none);
        assert_eq!(l.rows, [[0.0; 7]; 5]);
    }

    #[test]
    fn shift_preserves_pattern_and_rejects_overflow() {
        let s = TabScore::new(100.0, vec![single([Fret(3), Fret(5), Mute, Mute, Mute, Mute], (1, 4))]).unwrap();
        let t = shift_score(&s, 2, OpenStringPolicy::WholeScore).unwrap();
        assert_eq!(t.notes[0].strings[..2], [Fret(5), Fret(7)]);

        let s = TabScore::new(100.0, vec![single([Fret(24), Mute, Mute, Mute, Mute, Mute], (1, 4))]).unwrap();
        assert!(matches!(
            shift_score(&s, 2, OpenStringPolicy::WholeScore),
            Err(Error::ShiftOutOfRange { note: 0, fret: 24, .. })
        ));
    }

    #[test]
    fn open_strings_pin_the_score() {
        let s = TabScore::new(
            100.0,
            vec![
                single([Fret(3), Open, Mute, Mute, Mute, Mute], (1, 4)),
                single([Fret(5), Mute, Mute, Mute, Mute, Mute], (1, 4)),
            ],
        )
        .unwrap();
        assert_eq!(shift_score(&s, 3, OpenStringPolicy::WholeScore).unwrap(), s);
        let t = shift_score(&s, 3, OpenStringPolicy::PerNote).unwrap();
        assert_eq!(t.notes[0], s.notes[0]);
        assert_eq!(t.notes[1].strings[0], Fret(8));
    }

    #[test]
    fn augment_tempo_within_jitter() {
        let s = TabScore::new(100.0, vec![single([Fret(3), Fret(5), Mute, Mute, Mute, Mute], (1, 4))]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let a = augment(&s, &AugmentConfig::default(), &mut rng).unwrap();
            assert!((80.0..=120.0).contains(&a.tempo_bpm));
            let f = a.notes[0].strings;
            assert_eq!(f[1].code() - f[0].code(), 2);
        }
    }

    fn frames_integral(bpm: f64, v: Ratio<u32>) -> bool {
        let f = 3600.0 * 4.0 * *v.numer() as f64 / *v.denom() as f64 / bpm;
        (f - f.round()).abs() < 1e-9
    }

    #[test]
    fn tempo_quantization() {
        let sixteenth = Ratio::new(1, 16);
        assert_eq!(quantize_tempo(105.0, sixteenth), 100.0);
        assert_eq!(quantize_tempo(100.0, sixteenth), 100.0);
        assert_eq!(quantize_tempo(101.0, sixteenth), 100.0);
        // brute-force search of the largest admissible tempo <= 120 on a fine grid
        let q = quantize_tempo(120.0, sixteenth);
        assert!(q <= 120.0 && frames_integral(q, sixteenth));
        let best = (1..=120_000)
            .map(|i| i as f64 / 1000.0)
            .filter(|&b| frames_integral(b, sixteenth))
            .fold(0.0, f64::max);
        assert!((q - best).abs() < 1e-9, "{q} vs {best}");
        assert_eq!(quantize_tempo(96.0, Ratio::new(1, 1)), 96.0);
    }
}
