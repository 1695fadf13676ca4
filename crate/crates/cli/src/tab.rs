use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use fretsync::tab::{augment, parse_tab, quantize_tempo, shift_score, to_json, AugmentConfig, OpenStringPolicy};
use fretsync::TabScore;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::failure::{CliResult, Failure};
use crate::manifest::RunManifest;
use crate::{read_text, write_text, Outcome};

#[derive(Debug, Subcommand)]
pub enum TabCommand {
    /// Parse a tab (JSON or text) and summarise it.
    Validate { file: PathBuf },
    /// Shift a tab along the neck and jitter its tempo.
    Augment(AugmentArgs),
    /// Snap a tempo down so the shortest note lasts whole control frames.
    Quantize(QuantizeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OpenPolicyArg {
    /// Any open string pins the whole score in place.
    WholeScore,
    /// Only notes with open strings stay in place.
    PerNote,
}

impl From<OpenPolicyArg> for OpenStringPolicy {
    fn from(p: OpenPolicyArg) -> Self {
        match p {
            OpenPolicyArg::WholeScore => OpenStringPolicy::WholeScore,
            OpenPolicyArg::PerNote => OpenStringPolicy::PerNote,
        }
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    file: PathBuf,
    /// Fixed fret offset. Fails if any note leaves the neck.
    #[arg(long, conflicts_with = "shift_range", allow_hyphen_values = true)]
    shift: Option<i32>,
    /// Draw the offset uniformly from the feasible ones in [-R, R].
    #[arg(long)]
    shift_range: Option<i32>,
    /// Uniform tempo jitter bound in BPM.
    #[arg(long, default_value_t = 0.0)]
    tempo_jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OpenPolicyArg::WholeScore)]
    open_policy: OpenPolicyArg,
    /// Write the augmented tab here; the manifest goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Tempo to quantize. Taken from the tab when omitted.
    bpm: Option<f64>,
    #[arg(long)]
    tab: Option<PathBuf>,
    /// Shortest note value, e.g. 1/16. Taken from the tab when omitted.
    #[arg(long, value_parser = parse_ratio)]
    shortest: Option<Ratio<u32>>,
    /// Write the retimed tab here (requires --tab).
    #[arg(long, requires = "tab")]
    out: Option<PathBuf>,
}

fn parse_ratio(s: &str) -> Result<Ratio<u32>, String> {
    let (n, d) = s.split_once('/').ok_or_else(|| format!("expected N/D, got {s}"))?;
    let n: u32 = n.trim().parse().map_err(|e| format!("{s}: {e}"))?;
    let d: u32 = d.trim().parse().map_err(|e| format!("{s}: {e}"))?;
    if n == 0 || d == 0 {
        return Err(format!("{s}: note value must be positive"));
    }
    Ok(Ratio::new(n, d))
}

pub fn load_tab(path: &std::path::Path) -> CliResult<TabScore> {
    Ok(parse_tab(&read_text(path)?)?)
}

pub fn summary(score: &TabScore) -> serde_json::Value {
    json!({
        "title": score.title,
        "tempo_bpm": score.tempo_bpm,
        "notes": score.notes.len(),
        "chords": score.notes.iter().filter(|n| n.pressed_count() >= 2).count(),
        "total_frames": score.total_frames(),
        "shortest": score.shortest_value().to_string(),
    })
}

pub fn run(cmd: TabCommand) -> CliResult<Outcome> {
    match cmd {
        TabCommand::Validate { file } => {
            let score = load_tab(&file)?;
            let mut s = summary(&score);
            s["valid"] = json!(true);
            Ok(Outcome::summary(s))
        }
        TabCommand::Augment(args) => augment_cmd(args),
        TabCommand::Quantize(args) => quantize_cmd(args),
    }
}

fn augment_cmd(args: AugmentArgs) -> CliResult<Outcome> {
    let score = load_tab(&args.file)?;
    let policy = OpenStringPolicy::from(args.open_policy);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let out = match args.shift {
        Some(offset) => {
            let mut s = shift_score(&score, offset, policy)?;
            if args.tempo_jitter > 0.0 {
                let cfg = AugmentConfig { shift_range: 0, tempo_jitter: args.tempo_jitter, open_policy: policy };
                s = augment(&s, &cfg, &mut rng)?;
            }
            s
        }
        None => {
            let cfg = AugmentConfig { shift_range: args.shift_range.unwrap_or(0), tempo_jitter: args.tempo_jitter, open_policy: policy };
            augment(&score, &cfg, &mut rng)?
        }
    };
    let text = to_json(&out);
    let mut s = summary(&out);
    let Some(path) = args.out else {
        s["tab"] = serde_json::from_str(&text)?;
        return Ok(Outcome::summary(s));
    };
    write_text(&path, &text)?;
    s["out"] = json!(path.display().to_string());
    let config = json!({
        "shift": args.shift,
        "shift_range": args.shift_range,
        "tempo_jitter": args.tempo_jitter,
        "open_policy": policy,
    });
    let manifest = RunManifest::new(std::env::args().skip(1).collect(), config, Some(args.seed), &[args.file], std::slice::from_ref(&path))?;
    Ok(Outcome { summary: s, manifest: Some((Some(path.with_extension("manifest.json")), manifest)) })
}

fn quantize_cmd(args: QuantizeArgs) -> CliResult<Outcome> {
    let score = args.tab.as_deref().map(load_tab).transpose()?;
    let bpm = args
        .bpm
        .or(score.as_ref().map(|s| s.tempo_bpm))
        .ok_or_else(|| Failure::Validation("give a tempo or --tab".into()))?;
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(Failure::Validation(format!("tempo must be positive, got {bpm}")));
    }
    let shortest = args
        .shortest
        .or(score.as_ref().map(|s| s.shortest_value()))
        .unwrap_or(Ratio::new(1, 16));
    let quantized = quantize_tempo(bpm, shortest);
    let mut s = json!({ "bpm": bpm, "shortest": shortest.to_string(), "quantized_bpm": quantized });
    if let (Some(mut score), Some(path)) = (score, args.out) {
        score.tempo_bpm = quantized;
        score.validate()?;
        write_text(&path, &to_json(&score))?;
        s["out"] = json!(path.display().to_string());
    }
    Ok(Outcome::summary(s))
}
