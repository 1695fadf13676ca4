//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the crate's own algorithm for the quantity it checks.

#![allow(dead_code)]

use std::sync::Arc;

use fretsync::metrics::required_run;
use fretsync::session::FrameRecord;
use fretsync::{FretboardGeometry, GuitarSpec, NoteLedger, Segment, StringTarget, TabNote, Verdict};
use fretsync::session::detect_picks;
use fretsync::{PickDirection, PickEvent, NUM_STRINGS};
use nalgebra::Point3;
use num_rational::Ratio;
use serde::Deserialize;

pub fn geometry() -> Arc<FretboardGeometry> {
    Arc::new(FretboardGeometry::new(GuitarSpec::default()).expect("default spec is valid"))
}

/// Dense sampling along the segment, then repeated zooming around the best
/// sample. The distance along a segment is convex, so the zoom cannot lose
/// the minimum.
pub fn sampled_point_segment(p: &Point3<f64>, seg: &Segment) -> f64 {
    let dist = |t: f64| (p - (seg.a + (seg.b - seg.a) * t)).norm();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let n = 10_000;
        let mut arg = lo;
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let d = dist(t);
            if d < best {
                best = d;
                arg = t;
            }
        }
        let w = (hi - lo) / n as f64;
        lo = (arg - 2.0 * w).max(0.0);
        hi = (arg + 2.0 * w).min(1.0);
    }
    best
}

/// 100 x 100 grid over both segment parameters with zoom refinement.
pub fn sampled_segment_segment(a: &Segment, b: &Segment) -> f64 {
    let pa = |s: f64| a.a + (a.b - a.a) * s;
    let pb = |t: f64| b.a + (b.b - b.a) * t;
    let (mut s0, mut s1, mut t0, mut t1) = (0.0f64, 1.0f64, 0.0f64, 1.0f64);
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let n = 100;
        let (mut bs, mut bt) = (s0, t0);
        for i in 0..=n {
            let s = s0 + (s1 - s0) * i as f64 / n as f64;
            let x = pa(s);
            for j in 0..=n {
                let t = t0 + (t1 - t0) * j as f64 / n as f64;
                let d = (x - pb(t)).norm();
                if d < best {
                    best = d;
                    bs = s;
                    bt = t;
                }
            }
        }
        let (ws, wt) = ((s1 - s0) / n as f64, (t1 - t0) / n as f64);
        s0 = (bs - 3.0 * ws).max(0.0);
        s1 = (bs + 3.0 * ws).min(1.0);
        t0 = (bt - 3.0 * wt).max(0.0);
        t1 = (bt + 3.0 * wt).min(1.0);
    }
    best
}

/// GAE as the explicit discounted sum of TD errors, truncated at episode ends.
pub fn brute_gae(rewards: &[f64], values: &[f64], last: f64, dones: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let v_next = |t: usize| if t + 1 < n { values[t + 1] } else { last };
    let delta = |t: usize| {
        let live = if dones[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * live * v_next(t) - values[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut l = t;
            loop {
                sum += (gamma * lambda).powi((l - t) as i32) * delta(l);
                if dones[l] || l + 1 == n {
                    break;
                }
                l += 1;
            }
            sum
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Tally {
    pub fn add(&mut self, v: Verdict) {
        match v {
            Verdict::TruePositive => self.tp += 1,
            Verdict::FalsePositive => self.fp += 1,
            Verdict::FalseNegative => self.fn_ += 1,
            Verdict::TrueNegative => {}
        }
    }

    pub fn prf(&self) -> (f64, f64, f64) {
        let p = if self.tp + self.fp == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fp) as f64 };
        let r = if self.tp + self.fn_ == 0 { 0.0 } else { self.tp as f64 / (self.tp + self.fn_) as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }
}

fn verdict(positive: bool, hit: bool) -> Verdict {
    match (positive, hit) {
        (true, true) => Verdict::TruePositive,
        (true, false) => Verdict::FalseNegative,
        (false, true) => Verdict::FalsePositive,
        (false, false) => Verdict::TrueNegative,
    }
}

/// Does any window of `need` consecutive frames satisfy `pred`?
fn some_window(frames: &[FrameRecord], need: usize, pred: impl Fn(&FrameRecord) -> bool) -> bool {
    need > 0 && frames.len() >= need && (0..=frames.len() - need).any(|i| frames[i..i + need].iter().all(&pred))
}

fn state_ok(f: &FrameRecord, s: usize, t: StringTarget) -> bool {
    match t {
        StringTarget::Fret(k) => f.pressed[s] == Some(k),
        StringTarget::Open => !f.touched[s],
        StringTarget::Mute => true,
    }
}

/// Verdicts of one note for the left, right and joint modes, enumerated
/// from the rule definitions over windows of frames and raw pick events.
pub fn enumerate_verdicts(ledger: &NoteLedger, note: &TabNote) -> [[Verdict; 6]; 3] {
    let need = required_run(ledger.duration_frames) as usize;
    let frames = &ledger.frames;
    let picks_on = |s: usize| ledger.picks.iter().filter(|e| e.string == s).count();
    let wrong = |s: usize| -> bool {
        // Replays the tackling rules from the raw event list.
        let targets: Vec<bool> = note.strings.iter().map(|t| *t != StringTarget::Mute).collect();
        let mut count = [0usize; 6];
        let mut flagged = [false; 6];
        let mut dir = None;
        let mut by_frame: Vec<Vec<&PickEvent>> = Vec::new();
        let mut last = None;
        for e in &ledger.picks {
            if last != Some(e.frame) {
                by_frame.push(Vec::new());
                last = Some(e.frame);
            }
            by_frame.last_mut().unwrap().push(e);
        }
        for group in by_frame {
            for e in group {
                if dir.is_none() {
                    dir = Some(e.direction);
                }
                count[e.string] += 1;
                if !targets[e.string] || count[e.string] > 1 {
                    flagged[e.string] = true;
                }
            }
            if let Some(d) = dir {
                for x in 0..6 {
                    if targets[x] && count[x] == 0 {
                        let beyond: Vec<usize> = match d {
                            PickDirection::TopToDown => (x + 1..6).collect(),
                            PickDirection::DownToUp => (0..x).collect(),
                        };
                        if beyond.iter().any(|&b| count[b] > 0) {
                            flagged[x] = true;
                        }
                    }
                }
            }
        }
        flagged[s]
    };
    let mut left = [Verdict::TrueNegative; 6];
    let mut right = [Verdict::TrueNegative; 6];
    let mut joint = [Verdict::TrueNegative; 6];
    for s in 0..6 {
        let t = note.strings[s];
        left[s] = match t {
            StringTarget::Fret(k) => verdict(true, some_window(frames, need, |f| f.pressed[s] == Some(k))),
            _ => verdict(false, some_window(frames, need, |f| f.pressed[s].is_some())),
        };
        let target = t != StringTarget::Mute;
        let good_pick = picks_on(s) == 1 && !wrong(s);
        right[s] = if target { verdict(true, good_pick) } else { verdict(false, picks_on(s) > 0) };
        joint[s] = if !target {
            right[s]
        } else if !good_pick {
            Verdict::FalseNegative
        } else {
            let e = ledger.picks.iter().find(|e| e.string == s).unwrap();
            let at = (e.frame - ledger.start_frame) as usize;
            let rest = &frames[at.min(frames.len())..];
            let want = need.min(rest.len()).max(1);
            let held = rest.len() >= want && rest[..want].iter().all(|f| state_ok(f, s, t));
            verdict(true, held)
        };
    }
    [left, right, joint]
}

#[derive(Deserialize)]
struct PickFixture {
    detection: Vec<DetectionCase>,
    ledger: Vec<LedgerCase>,
}

#[derive(Deserialize)]
struct DetectionCase {
    name: String,
    from: (usize, String),
    to: (usize, String),
    picks: Vec<(usize, String)>,
}

#[derive(Deserialize)]
struct LedgerCase {
    name: String,
    targets: String,
    frames: Vec<Vec<(usize, String)>>,
    picks: [u32; NUM_STRINGS],
    wrong: Vec<usize>,
}

pub fn direction(s: &str) -> PickDirection {
    match s {
        "down" => PickDirection::TopToDown,
        "up" => PickDirection::DownToUp,
        other => panic!("direction {other}"),
    }
}

pub fn pick_rule_fixtures() -> Result<usize, String> {
    let fixture: PickFixture = serde_json::from_str(include_str!("../fixtures/pick_rules.json")).map_err(|e| e.to_string())?;
    let g = geometry();
    let x = g.pick_region_x();
    let h = g.action_height();
    let ys: Vec<f64> = (0..NUM_STRINGS).map(|s| g.string_y(s, x)).collect();
    let point = |(lane, height): &(usize, String)| {
        let y = match *lane {
            0 => ys[0] - 0.005,
            6 => ys[5] + 0.005,
            l => 0.5 * (ys[l - 1] + ys[l]),
        };
        let z = if height == "below" { h - 0.001 } else { h + 0.003 };
        Point3::new(x, y, z)
    };
    for c in &fixture.detection {
        let got: Vec<(usize, PickDirection)> = detect_picks(&point(&c.from), &point(&c.to), &g, 0).iter().map(|e| (e.string + 1, e.direction)).collect();
        let want: Vec<(usize, PickDirection)> = c.picks.iter().map(|(s, d)| (*s, direction(d))).collect();
        check(got == want, || format!("detection '{}': {got:?}", c.name))?;
    }
    for c in &fixture.ledger {
        let strings: Vec<StringTarget> = c.targets.chars().map(|ch| if ch == 'T' { StringTarget::Open } else { StringTarget::Mute }).collect();
        let note = TabNote::new(strings.try_into().unwrap(), Ratio::new(1, 4));
        let mut ledger = NoteLedger::new(0, 0, c.frames.len().max(1) as u32);
        for (f, events) in c.frames.iter().enumerate() {
            let events: Vec<PickEvent> = events
                .iter()
                .map(|(s, d)| PickEvent { frame: f as u64, string: s - 1, direction: direction(d), crossing: 0.5 })
                .collect();
            ledger.record(&note, FrameRecord::EMPTY, &events);
        }
        let wrong: Vec<usize> = (0..NUM_STRINGS).filter(|&s| ledger.book.wrongly_tackled[s]).map(|s| s + 1).collect();
        check(ledger.book.picks == c.picks, || format!("ledger '{}': picks {:?}", c.name, ledger.book.picks))?;
        check(wrong == c.wrong, || format!("ledger '{}': wrongly tackled {wrong:?}", c.name))?;
    }
    Ok(fixture.detection.len() + fixture.ledger.len())
}


fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
