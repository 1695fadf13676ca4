mod common;

use common::geometry;
use fretsync::metrics::{aggregate, evaluate};
use fretsync::oracle::{parse_trajectory_jsonl, play, trajectory_jsonl, OracleConfig};
use fretsync::suite::easy_suite;
use fretsync::{Error, StringTarget, TabNote, TabScore};
use num_rational::Ratio;

#[test]
fn oracle_plays_suite_chords_cleanly() {
    let g = geometry();
    let suite = easy_suite().unwrap();
    for tab in suite.iter().skip(30).step_by(5) {
        let run = play(&tab.score, g.clone(), &OracleConfig::default()).unwrap();
        assert!(run.rate_limit_misses(&tab.score).is_empty(), "{}", tab.name);
        assert!(run.plans.iter().all(|p| p.presses_ok), "{}", tab.name);
        let report = aggregate(&evaluate(&run.ledgers, &run.ledgers, &tab.score).unwrap()).unwrap();
        assert_eq!(report.track.joint.f1, 1.0, "{}", tab.name);
        assert_eq!(report, run.report);
    }
}

#[test]
fn trajectories_round_trip_through_json_lines() {
    let g = geometry();
    let tab = &easy_suite().unwrap()[2];
    let run = play(&tab.score, g, &OracleConfig::default()).unwrap();
    assert_eq!(run.left.len() as u64, tab.score.total_frames());
    let text = trajectory_jsonl(&run.right).unwrap();
    assert_eq!(parse_trajectory_jsonl(&text).unwrap(), run.right);
    assert!(matches!(parse_trajectory_jsonl("{\"frame\": 0}\n"), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn five_frets_in_one_note_are_infeasible() {
    let ok = TabNote::new([StringTarget::Open; 6], Ratio::new(1, 4));
    let bad = TabNote::new(
        [1, 2, 3, 4, 5, 0].map(|k| if k == 0 { StringTarget::Mute } else { StringTarget::Fret(k) }),
        Ratio::new(1, 4),
    );
    match TabScore::new(90.0, vec![ok, bad]) {
        Err(Error::Infeasible { note, .. }) => assert_eq!(note, 1),
        other => panic!("expected an infeasible note, got {other:?}"),
    }
}

#[test]
fn detailed_replay_reports_every_frame() {
    let g = geometry();
    let tab = &easy_suite().unwrap()[4];
    let run = play(&tab.score, g.clone(), &OracleConfig::default()).unwrap();
    let r = fretsync::oracle::replay_with_rewards(&tab.score, g, &run.left, &run.right).unwrap();
    assert_eq!(r.ledgers, run.ledgers);
    assert_eq!(r.rewards.len() as u64, tab.score.total_frames());
    let picks = r.log.iter().filter(|e| e.kind == fretsync::session::EventKind::Pick).count();
    let plus = r.rewards.iter().filter(|row| row.right.pick.branch == fretsync::reward::PickBranch::Plus).count();
    assert_eq!(picks, tab.score.notes.len());
    assert_eq!(plus, tab.score.notes.len());
    assert!(r.rewards.iter().filter(|row| row.right.pick.branch == fretsync::reward::PickBranch::Plus).all(|row| row.right.pick.value == 1.0));
}
