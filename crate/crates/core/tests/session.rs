mod common;

use std::sync::Arc;

use common::geometry;
use fretsync::oracle::{play, OracleConfig};
use fretsync::suite::easy_suite;
use fretsync::{StringSession, StringTarget, TabNote, TabScore};
use nalgebra::Point3;
use num_rational::Ratio;
use serde_json::Value;

#[test]
fn pick_rule_fixtures_hold() {
    let n = common::pick_rule_fixtures().unwrap();
    assert!(n >= 15);
}

#[test]
fn event_log_is_json_lines_with_one_based_strings() {
    let g = geometry();
    let tab = &easy_suite().unwrap()[32];
    let run = play(&tab.score, g.clone(), &OracleConfig::default()).unwrap();
    let ledgers = fretsync::oracle::replay(&tab.score, g.clone(), &run.left, &run.right).unwrap();
    assert_eq!(ledgers, run.ledgers);

    let score = Arc::new(tab.score.clone());
    let mut session = StringSession::new(g.clone(), score);
    let x = g.pick_region_x();
    session.prime_tip(Point3::new(x, -0.03, g.action_height() - 0.001));
    let mut flip = false;
    while !session.is_finished() {
        flip = !flip;
        let y = if flip { 0.03 } else { -0.03 };
        session.step(None, Some(Point3::new(x, y, g.action_height() - 0.001)));
    }
    let log = session.log_jsonl();
    let mut picks = 0;
    for line in log.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let s = v["string"].as_u64().unwrap();
        assert!((1..=6).contains(&s));
        if v["kind"] == "pick" {
            picks += 1;
            assert!(v["direction"].is_string());
        }
    }
    assert_eq!(picks as u64, 6 * tab.score.total_frames());
}

#[test]
fn session_stops_at_the_end_of_the_score() {
    let g = geometry();
    let note = TabNote::new([StringTarget::Open; 6], Ratio::new(1, 8));
    let score = Arc::new(TabScore::new(120.0, vec![note; 2]).unwrap());
    let mut session = StringSession::new(g, score.clone());
    let mut frames = 0;
    while session.step(None, None).is_some() {
        frames += 1;
    }
    assert_eq!(frames, score.total_frames());
    assert!(session.is_finished());
    assert_eq!(session.ledgers().len(), 2);
    assert!(session.ledgers().iter().all(|l| l.is_complete()));
}
