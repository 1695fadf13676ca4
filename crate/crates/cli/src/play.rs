use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};
use fretsync::hand::NUM_DOF;
use fretsync::metrics::{aggregate, evaluate};
use fretsync::oracle::{self, left_rest_coordinates, parse_trajectory_jsonl, replay_with_rewards, right_rest_coordinates, trajectory_jsonl, OracleConfig, TrajectoryFrame};
use fretsync::{FretboardGeometry, GuitarSpec, HandSkeleton, PickModel, ScoreReport, TabScore, CONTROL_HZ};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::failure::CliResult;
use crate::manifest::RunManifest;
use crate::tab::load_tab;
use crate::{create_dir, read_config, read_text, write_text, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    /// Scripted placement and pick sweeps.
    Oracle,
    /// Uniform random joint velocities at the rate limits, from the rest pose.
    RandomWalk,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[arg(long, value_enum, default_value_t = PolicyKind::Oracle)]
    policy: PolicyKind,
    #[arg(long)]
    tab: PathBuf,
    /// Output directory for trajectories, events, report and manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle configuration (JSON). Relative paths resolve against
    /// FRETSYNC_CONFIG_ROOT when it is set.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    tab: PathBuf,
    /// Fretting-hand trajectory (JSON lines).
    #[arg(long)]
    left: PathBuf,
    /// Picking-hand trajectory (JSON lines).
    #[arg(long)]
    right: PathBuf,
    /// Write per-frame reward terms here (JSON lines).
    #[arg(long)]
    rewards: Option<PathBuf>,
    /// Write per-note F1 scores here (CSV).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the full report here; the manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn geometry() -> CliResult<Arc<FretboardGeometry>> {
    Ok(Arc::new(FretboardGeometry::new(GuitarSpec::default())?))
}

fn frame(i: usize, q: &[f64; NUM_DOF], pick_tip: Option<[f64; 3]>) -> TrajectoryFrame {
    TrajectoryFrame { frame: i as u64, time: i as f64 / CONTROL_HZ, joints: q.to_vec(), pick_tip }
}

fn random_walk(score: &TabScore, g: &FretboardGeometry, config: &OracleConfig, seed: u64) -> CliResult<(Vec<TrajectoryFrame>, Vec<TrajectoryFrame>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (left_sk, right_sk) = (HandSkeleton::left(), HandSkeleton::right());
    let pick = PickModel::for_skeleton(&right_sk);
    let (mut ql, mut qr) = (left_rest_coordinates(g, config), right_rest_coordinates(g, config));
    let dt = 1.0 / CONTROL_HZ;
    let mut walk = |q: &mut [f64; NUM_DOF], sk: &HandSkeleton| {
        for (j, v) in q.iter_mut().enumerate() {
            let rate = if j < 3 { config.rates.translation } else { config.rates.joint };
            *v += rate * dt * rng.random_range(-1.0..=1.0);
        }
        sk.clamp(q);
    };
    let frames = score.total_frames() as usize;
    let (mut left, mut right) = (Vec::with_capacity(frames), Vec::with_capacity(frames));
    for i in 0..frames {
        if i > 0 {
            walk(&mut ql, &left_sk);
            walk(&mut qr, &right_sk);
        }
        let tip = pick.tip_position(&right_sk.pose(qr)?);
        left.push(frame(i, &ql, None));
        right.push(frame(i, &qr, Some([tip.x, tip.y, tip.z])));
    }
    Ok((left, right))
}

fn jsonl<T: serde::Serialize>(rows: &[T]) -> CliResult<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

fn report_summary(report: &ScoreReport) -> serde_json::Value {
    json!({
        "notes": report.notes,
        "left_f1": report.track.left.f1,
        "right_f1": report.track.right.f1,
        "joint_f1": report.track.joint.f1,
    })
}

pub fn play(args: PlayArgs) -> CliResult<Outcome> {
    let score = load_tab(&args.tab)?;
    let config: OracleConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => OracleConfig::default(),
    };
    let g = geometry()?;
    let (left, right, rate_limited) = match args.policy {
        PolicyKind::Oracle => {
            let run = oracle::play(&score, Arc::clone(&g), &config)?;
            let misses = run.rate_limit_misses(&score);
            (run.left, run.right, misses)
        }
        PolicyKind::RandomWalk => {
            let (l, r) = random_walk(&score, &g, &config, args.seed)?;
            (l, r, Vec::new())
        }
    };
    // Scoring always goes through a fresh replay so that recorded files and
    // the report cannot disagree.
    let replay = replay_with_rewards(&score, g, &left, &right)?;
    let report = aggregate(&evaluate(&replay.ledgers, &replay.ledgers, &score)?)?;

    create_dir(&args.out)?;
    let files = [
        (args.out.join("left.jsonl"), trajectory_jsonl(&left)?),
        (args.out.join("right.jsonl"), trajectory_jsonl(&right)?),
        (args.out.join("events.jsonl"), jsonl(&replay.log)?),
        (args.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n"),
    ];
    for (path, text) in &files {
        write_text(path, text)?;
    }
    let outputs: Vec<PathBuf> = files.iter().map(|(p, _)| p.clone()).collect();
    let mut inputs = vec![args.tab.clone()];
    inputs.extend(args.config.as_deref().map(crate::config_path));
    let cfg = json!({ "policy": args.policy_name(), "oracle": config });
    let manifest = RunManifest::new(std::env::args().skip(1).collect(), cfg, Some(args.seed), &inputs, &outputs)?;
    let mut s = report_summary(&report);
    s["policy"] = json!(args.policy_name());
    s["frames"] = json!(left.len());
    s["picks"] = json!(replay.log.iter().filter(|e| e.kind == fretsync::session::EventKind::Pick).count());
    s["rate_limited_notes"] = json!(rate_limited);
    s["out"] = json!(args.out.display().to_string());
    Ok(Outcome { summary: s, manifest: Some((Some(args.out.join("manifest.json")), manifest)) })
}

impl PlayArgs {
    fn policy_name(&self) -> &'static str {
        match self.policy {
            PolicyKind::Oracle => "oracle",
            PolicyKind::RandomWalk => "random-walk",
        }
    }
}

fn trajectory(path: &Path) -> CliResult<Vec<TrajectoryFrame>> {
    Ok(parse_trajectory_jsonl(&read_text(path)?)?)
}

pub fn score(args: ScoreArgs) -> CliResult<Outcome> {
    let score = load_tab(&args.tab)?;
    let (left, right) = (trajectory(&args.left)?, trajectory(&args.right)?);
    let replay = replay_with_rewards(&score, geometry()?, &left, &right)?;
    let report = aggregate(&evaluate(&replay.ledgers, &replay.ledgers, &score)?)?;
    let mut outputs = Vec::new();
    if let Some(p) = &args.rewards {
        write_text(p, &jsonl(&replay.rewards)?)?;
        outputs.push(p.clone());
    }
    if let Some(p) = &args.csv {
        write_text(p, &report.per_note_csv())?;
        outputs.push(p.clone());
    }
    if let Some(p) = &args.out {
        write_text(p, &(serde_json::to_string_pretty(&report)? + "\n"))?;
        outputs.push(p.clone());
    }
    let mut s = report_summary(&report);
    s["chords"] = serde_json::to_value(report.chords)?;
    s["single"] = serde_json::to_value(report.single)?;
    let inputs = [args.tab, args.left, args.right];
    let manifest = RunManifest::new(std::env::args().skip(1).collect(), json!({}), None, &inputs, &outputs)?;
    let default = args.out.as_ref().map(|p| p.with_extension("manifest.json"));
    Ok(Outcome { summary: s, manifest: Some((default, manifest)) })
}
