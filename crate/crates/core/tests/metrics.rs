mod common;

use common::enumerate_verdicts;
use fretsync::metrics::{evaluate, evaluate_note, required_run};
use fretsync::session::FrameRecord;
use fretsync::{NoteLedger, PickDirection, PickEvent, StringTarget, TabNote, TabScore, Verdict};
use num_rational::Ratio;

fn note(target: StringTarget) -> TabNote {
    let mut strings = [StringTarget::Mute; 6];
    strings[2] = target;
    TabNote::new(strings, Ratio::new(1, 4))
}

/// A ledger with string 3 pressed at `fret` for the first `held` frames and
/// one downstroke over string 3 at `pick_at`.
fn ledger(duration: u32, held: u32, fret: u8, pick_at: u32, n: &TabNote) -> NoteLedger {
    let mut l = NoteLedger::new(0, 100, duration);
    for f in 0..duration {
        let mut rec = FrameRecord::EMPTY;
        if f < held {
            rec.pressed[2] = Some(fret);
            rec.touched[2] = true;
        }
        let events = if f == pick_at {
            vec![PickEvent { frame: 100 + f as u64, string: 2, direction: PickDirection::TopToDown, crossing: 0.5 }]
        } else {
            vec![]
        };
        l.record(n, rec, &events);
    }
    l
}

#[test]
fn press_must_last_two_thirds_of_the_note() {
    let n = note(StringTarget::Fret(5));
    for d in 1..=30u32 {
        let need = required_run(d);
        assert_eq!(need, (2 * d).div_ceil(3));
        for held in [need - 1, need] {
            let l = ledger(d, held, 5, 0, &n);
            let r = evaluate_note(&l, &l, &n).unwrap();
            let want = if held >= need && held > 0 { Verdict::TruePositive } else { Verdict::FalseNegative };
            assert_eq!(r.left[2], want, "duration {d}, held {held}");
            assert_eq!(r.joint[2], want, "duration {d}, held {held}");
            assert_eq!([r.left, r.right, r.joint], enumerate_verdicts(&l, &n));
        }
    }
}

#[test]
fn wrong_fret_is_a_miss_and_an_extra_press() {
    let n = note(StringTarget::Fret(5));
    let l = ledger(12, 12, 6, 0, &n);
    let r = evaluate_note(&l, &l, &n).unwrap();
    assert_eq!(r.left[2], Verdict::FalseNegative);
    assert_eq!(r.right[2], Verdict::TruePositive);
    assert_eq!(r.joint[2], Verdict::FalseNegative);

    let open = note(StringTarget::Open);
    let l = ledger(12, 12, 6, 0, &open);
    let r = evaluate_note(&l, &l, &open).unwrap();
    assert_eq!(r.left[2], Verdict::FalsePositive);
    assert_eq!(r.joint[2], Verdict::FalseNegative);
}

#[test]
fn late_pick_needs_the_press_to_hold_afterwards() {
    let n = note(StringTarget::Fret(3));
    // Held for the whole note, picked in the last frame: the remaining window is short.
    let l = ledger(12, 12, 3, 11, &n);
    assert_eq!(evaluate_note(&l, &l, &n).unwrap().joint[2], Verdict::TruePositive);
    // Released before the pick.
    let l = ledger(12, 9, 3, 10, &n);
    let r = evaluate_note(&l, &l, &n).unwrap();
    assert_eq!(r.left[2], Verdict::TruePositive);
    assert_eq!(r.joint[2], Verdict::FalseNegative);
}

#[test]
fn incomplete_ledgers_are_rejected() {
    let n = note(StringTarget::Open);
    let mut l = NoteLedger::new(0, 0, 4);
    l.record(&n, FrameRecord::EMPTY, &[]);
    assert!(evaluate_note(&l, &l, &n).is_err());
    let score = TabScore::new(120.0, vec![n]).unwrap();
    assert!(evaluate(&[], &[], &score).is_err());
}
