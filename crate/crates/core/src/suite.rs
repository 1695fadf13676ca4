//! The curated easy tab suite: single-note melodies and chords spanning at
//! most two frets, all at or below 120 BPM.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tab::{StringTarget, TabNote, TabScore};
use crate::{Result, NUM_STRINGS};

pub const EASY_SUITE_SIZE: usize = 50;
const EASY_SEED: u64 = 0x5eed_0050;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTab {
    pub name: String,
    pub score: TabScore,
}

/// Open-position shapes, string 1 first; `None` mutes the string.
const CHORDS: [(&str, [Option<u8>; NUM_STRINGS]); 14] = [
    ("Em", [Some(0), Some(0), Some(0), Some(2), Some(2), Some(0)]),
    ("E", [Some(0), Some(0), Some(1), Some(2), Some(2), Some(0)]),
    ("Am", [Some(0), Some(1), Some(2), Some(2), Some(0), None]),
    ("A", [Some(0), Some(2), Some(2), Some(2), Some(0), None]),
    ("Asus2", [Some(0), Some(0), Some(2), Some(2), Some(0), None]),
    ("D", [Some(2), Some(3), Some(2), Some(0), None, None]),
    ("Dsus2", [Some(0), Some(3), Some(2), Some(0), None, None]),
    ("Em7", [Some(0), Some(3), Some(0), Some(2), Some(2), Some(0)]),
    ("Cmaj7", [Some(0), Some(0), Some(0), Some(2), Some(3), None]),
    ("A7", [Some(0), Some(2), Some(0), Some(2), Some(0), None]),
    ("E7", [Some(0), Some(0), Some(1), Some(0), Some(2), Some(0)]),
    ("Am7", [Some(0), Some(1), Some(0), Some(2), Some(0), None]),
    ("G5", [None, None, None, Some(5), Some(5), Some(3)]),
    ("E5", [None, None, None, Some(2), Some(2), Some(0)]),
];

fn target(fret: Option<u8>) -> StringTarget {
    match fret {
        None => StringTarget::Mute,
        Some(0) => StringTarget::Open,
        Some(k) => StringTarget::Fret(k),
    }
}

fn melody(rng: &mut ChaCha8Rng, len: usize) -> Vec<TabNote> {
    // A four-fret window starting at the nut or at a higher position.
    let base: u8 = [0, 0, 2, 4][rng.random_range(0..4)];
    let value = if rng.random_bool(0.5) { Ratio::new(1, 4) } else { Ratio::new(1, 8) };
    (0..len)
        .map(|_| {
            let s = rng.random_range(0..NUM_STRINGS);
            let fret = match rng.random_range(0..5u8) {
                0 if base == 0 => None,
                0 => Some(base + 1),
                d => Some(base + d),
            };
            let mut strings = [StringTarget::Mute; NUM_STRINGS];
            strings[s] = match fret {
                None => StringTarget::Open,
                Some(k) => StringTarget::Fret(k),
            };
            TabNote::new(strings, value)
        })
        .collect()
}

fn progression(rng: &mut ChaCha8Rng, len: usize) -> Vec<TabNote> {
    (0..len)
        .map(|_| {
            let (_, shape) = CHORDS[rng.random_range(0..CHORDS.len())];
            let value = if rng.random_bool(0.5) { Ratio::new(1, 4) } else { Ratio::new(1, 2) };
            TabNote::new(shape.map(target), value)
        })
        .collect()
}

/// The 50 suite tabs, generated from a fixed seed: 30 eight-note melodies
/// inside one hand position and 20 six-chord progressions, at 60 to 120 BPM.
pub fn easy_suite() -> Result<Vec<SuiteTab>> {
    let mut rng = ChaCha8Rng::seed_from_u64(EASY_SEED);
    let tempos = [60.0, 72.0, 90.0, 100.0, 120.0];
    let mut out = Vec::with_capacity(EASY_SUITE_SIZE);
    for i in 0..EASY_SUITE_SIZE {
        let bpm = tempos[rng.random_range(0..tempos.len())];
        let (name, notes) = if i < 30 {
            (format!("melody-{i:02}"), melody(&mut rng, 8))
        } else {
            (format!("chords-{i:02}"), progression(&mut rng, 6))
        };
        let mut score = TabScore::new(bpm, notes)?;
        score.title = name.clone();
        score.source = "easy suite".into();
        out.push(SuiteTab { name, score });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_deterministic_and_easy() {
        let a = easy_suite().unwrap();
        assert_eq!(a, easy_suite().unwrap());
        assert_eq!(a.len(), EASY_SUITE_SIZE);
        for tab in &a {
            assert!(tab.score.tempo_bpm <= 120.0);
            for n in &tab.score.notes {
                assert!(n.pressed_frets().len() <= 2, "{}", tab.name);
            }
        }
    }
}
