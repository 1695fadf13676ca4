//! Training environments.
//!
//! [`ToyFretEnv`] is a desk-scale stand-in: a point effector moving in the
//! vertical plane of string 1, scored with the same reward terms as the full
//! fretting hand. The hand environments drive the kinematic skeletons and the
//! string session frame by frame.

use std::sync::Arc;

use nalgebra::{Isometry3, Point3};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{point_to_segment_distance, FretboardGeometry};
use crate::hand::{pose_observation, HandPose, HandSkeleton, PickModel, NUM_DOF, OBS_FRAME_LEN};
use crate::learner::{joint_objectives, left_objectives, right_objectives, ObjectiveSpec};
use crate::reward::{
    energy_reward, left_frame_rewards, left_objective, press_reward, right_frame_reward, right_pick_reward,
    open_reward, PickContext,
};
use crate::session::{expected_press_predicate, FrameRecord, NoteLedger, StringSession};
use crate::tab::{goal_states, normalize_timer, StringTarget, TabNote, TabScore, HORIZON};
use crate::{Error, Result, CONTROL_HZ, NUM_STRINGS, PRESS_THRESHOLD};

/// Observation of one hand.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentObs {
    /// Stacked pose frames, oldest first.
    pub pose: Vec<f64>,
    pub goal: Vec<f64>,
    /// Goal as seen by the critic (may carry extra flags).
    pub critic_goal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<AgentObs>,
    /// One value per objective channel.
    pub rewards: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandIo {
    pub frame_dim: usize,
    pub frames: usize,
    pub goal_dim: usize,
    pub critic_goal_dim: usize,
    pub action_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub hands: Vec<HandIo>,
    pub objectives: Vec<ObjectiveSpec>,
}

pub trait Env: Send {
    fn spec(&self) -> EnvSpec;
    fn reset(&mut self) -> Vec<AgentObs>;
    /// Advances one control frame with one action per hand.
    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult>;
}

fn check_actions(actions: &[Vec<f64>], spec: &EnvSpec) -> Result<()> {
    if actions.len() != spec.hands.len() {
        return Err(Error::Shape(format!("expected {} action vectors, got {}", spec.hands.len(), actions.len())));
    }
    for (a, h) in actions.iter().zip(&spec.hands) {
        if a.len() != h.action_dim {
            return Err(Error::Shape(format!("action has {} values, expected {}", a.len(), h.action_dim)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub notes: usize,
    pub tempo_bpm: f64,
    /// Note value as (numerator, denominator) of a whole note.
    pub value: (u32, u32),
    pub min_fret: u8,
    pub max_fret: u8,
    /// Effector speed at full action, m/s.
    pub speed: f64,
    /// Start height above the string, m.
    pub hover: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            notes: 4,
            tempo_bpm: 120.0,
            value: (1, 4),
            min_fret: 1,
            max_fret: 7,
            speed: 0.6,
            hover: 0.02,
        }
    }
}

pub const TOY_FRAME_DIM: usize = 4;
pub const TOY_GOAL_DIM: usize = HORIZON * 2;
pub const TOY_ACTION_DIM: usize = 2;

/// Point effector over string 1: a fret target is rewarded by distance to its
/// press point, exactly as a fingertip would be.
#[derive(Debug, Clone)]
pub struct ToyFretEnv {
    geometry: Arc<FretboardGeometry>,
    config: ToyConfig,
    rng: ChaCha8Rng,
    fixed: Option<TabScore>,
    score: TabScore,
    frame: u64,
    pos: [f64; 2],
    vel: [f64; 2],
    prev_features: [f64; TOY_FRAME_DIM],
    ledgers: Vec<NoteLedger>,
}

impl ToyFretEnv {
    pub fn new(geometry: Arc<FretboardGeometry>, config: ToyConfig, seed: u64) -> Result<Self> {
        if config.min_fret < 1 || config.max_fret < config.min_fret || config.max_fret as usize > geometry.num_frets() {
            return Err(Error::Config("toy fret range outside the fretboard".into()));
        }
        if config.notes == 0 || !(config.speed > 0.0) {
            return Err(Error::Config("toy env needs notes and a positive speed".into()));
        }
        let mut env = ToyFretEnv {
            geometry,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fixed: None,
            score: TabScore::new(120.0, vec![TabNote::new([StringTarget::Mute; 6], Ratio::new(1, 4))])?,
            frame: 0,
            pos: [0.0; 2],
            vel: [0.0; 2],
            prev_features: [0.0; TOY_FRAME_DIM],
            ledgers: Vec::new(),
        };
        env.reset();
        Ok(env)
    }

    /// An environment that always replays `score`; only string 1 is used.
    pub fn with_score(geometry: Arc<FretboardGeometry>, config: ToyConfig, score: TabScore, seed: u64) -> Result<Self> {
        let mut env = Self::new(geometry, config, seed)?;
        env.fixed = Some(score);
        env.reset();
        Ok(env)
    }

    /// The fixed probe melody used to track fretting F1 during training.
    pub fn probe_score(config: &ToyConfig) -> TabScore {
        let span = (config.max_fret - config.min_fret) as usize + 1;
        let notes = [2usize, 5, 0, 6, 3, 1, 4]
            .iter()
            .map(|&i| melody_note(config.min_fret + (i % span) as u8, config.value))
            .collect();
        TabScore::new(config.tempo_bpm, notes).expect("probe score is valid")
    }

    pub fn score(&self) -> &TabScore {
        &self.score
    }

    pub fn ledgers(&self) -> &[NoteLedger] {
        &self.ledgers
    }

    pub fn position(&self) -> Point3<f64> {
        let x = self.pos[0];
        Point3::new(x, self.geometry.string_y(0, x), self.pos[1])
    }

    /// Moves the effector to `p` (x and z are used) with zero velocity.
    pub fn place(&mut self, x: f64, z: f64) {
        self.pos = [x, z];
        self.vel = [0.0; 2];
        self.prev_features = self.features();
    }

    pub fn episode_frames(&self) -> u64 {
        self.score.total_frames()
    }

    fn features(&self) -> [f64; TOY_FRAME_DIM] {
        let g = &self.geometry;
        let xc = g.fret_mid(((self.config.min_fret + self.config.max_fret) / 2) as usize);
        [
            (self.pos[0] - xc) / 0.2,
            (self.pos[1] - g.action_height()) / 0.02,
            self.vel[0] / self.config.speed,
            self.vel[1] / self.config.speed,
        ]
    }

    fn observe(&mut self) -> AgentObs {
        let now = self.features();
        let mut pose = self.prev_features.to_vec();
        pose.extend_from_slice(&now);
        self.prev_features = now;
        let (left, _) = goal_states(&self.score, self.frame, &[false; 6], &[false; 6]);
        let goal: Vec<f64> = left
            .rows
            .iter()
            .flat_map(|r| [r[0], normalize_timer(r[NUM_STRINGS])])
            .collect();
        AgentObs {
            pose,
            critic_goal: goal.clone(),
            goal,
        }
    }

    fn random_score(&mut self) -> TabScore {
        let c = self.config.clone();
        let notes = (0..c.notes)
            .map(|_| melody_note(self.rng.random_range(c.min_fret..=c.max_fret), c.value))
            .collect();
        TabScore::new(c.tempo_bpm, notes).expect("random toy score is valid")
    }
}

fn melody_note(fret: u8, value: (u32, u32)) -> TabNote {
    let mut strings = [StringTarget::Mute; NUM_STRINGS];
    strings[0] = StringTarget::Fret(fret);
    TabNote::new(strings, Ratio::new(value.0, value.1))
}

impl Env for ToyFretEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            hands: vec![HandIo {
                frame_dim: TOY_FRAME_DIM,
                frames: 2,
                goal_dim: TOY_GOAL_DIM,
                critic_goal_dim: TOY_GOAL_DIM,
                action_dim: TOY_ACTION_DIM,
            }],
            objectives: left_objectives(1),
        }
    }

    fn reset(&mut self) -> Vec<AgentObs> {
        self.score = match &self.fixed {
            Some(s) => s.clone(),
            None => self.random_score(),
        };
        self.frame = 0;
        self.ledgers.clear();
        let g = &self.geometry;
        let (a, b) = (g.fret_mid(self.config.min_fret as usize), g.fret_mid(self.config.max_fret as usize));
        let x = if self.fixed.is_some() { 0.5 * (a + b) } else { self.rng.random_range(a..=b) };
        self.place(x, g.action_height() + self.config.hover);
        vec![self.observe()]
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult> {
        check_actions(actions, &self.spec())?;
        let (note_index, offset) = self
            .score
            .locate(self.frame)
            .ok_or_else(|| Error::Config("step after the episode ended".into()))?;
        let dt = 1.0 / CONTROL_HZ;
        let g = Arc::clone(&self.geometry);
        for d in 0..2 {
            self.vel[d] = self.config.speed * actions[0][d].clamp(-1.0, 1.0);
        }
        let x = (self.pos[0] + self.vel[0] * dt).clamp(0.0, g.fretboard_length());
        let z = (self.pos[1] + self.vel[1] * dt).clamp(0.0, 0.1);
        self.vel = [(x - self.pos[0]) / dt, (z - self.pos[1]) / dt];
        self.pos = [x, z];

        let note = self.score.notes[note_index].clone();
        let p = self.position();
        let (d_string, closest) = point_to_segment_distance(&p, g.string_line(0));
        let touched = d_string < PRESS_THRESHOLD;
        let pressed = if touched {
            g.fret_at(closest.x).map(|k| k as u8)
        } else {
            None
        };
        let (r, correct) = match note.strings[0] {
            StringTarget::Fret(k) => {
                let d = (p - g.press_point(0, k as usize)).norm();
                (press_reward(d), pressed == Some(k))
            }
            _ => (open_reward(d_string), !touched),
        };
        let speed = (self.vel[0].powi(2) + self.vel[1].powi(2)).sqrt();
        let energy = energy_reward(speed, &[]);
        let objective = left_objective(r, if correct { 1.0 } else { 0.0 }, energy);

        if offset == 0 {
            let starts = self.score.note_starts();
            let dur = (starts[note_index + 1] - starts[note_index]) as u32;
            self.ledgers.push(NoteLedger::new(note_index, self.frame, dur));
        }
        let mut rec = FrameRecord::EMPTY;
        rec.pressed[0] = pressed;
        rec.touched[0] = touched;
        self.ledgers
            .last_mut()
            .expect("ledger opened at note start")
            .record(&note, rec, &[]);

        self.frame += 1;
        let done = self.frame >= self.score.total_frames();
        let mut rewards = vec![0.0; self.spec().objectives.len()];
        rewards[0] = objective;
        Ok(StepResult {
            obs: vec![self.observe()],
            rewards,
            done,
        })
    }
}

/// Rate limits of a kinematic hand driven by velocity actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandRates {
    /// Wrist translation speed at full action, m/s.
    pub translation: f64,
    /// Joint speed at full action, rad/s.
    pub joint: f64,
}

impl Default for HandRates {
    fn default() -> Self {
        HandRates {
            translation: 0.5,
            joint: 6.0,
        }
    }
}

fn apply_velocity(skeleton: &HandSkeleton, q: &[f64; NUM_DOF], action: &[f64], rates: HandRates) -> [f64; NUM_DOF] {
    let dt = 1.0 / CONTROL_HZ;
    let mut next: [f64; NUM_DOF] = std::array::from_fn(|j| {
        let rate = if j < 3 { rates.translation } else { rates.joint };
        q[j] + rate * action[j].clamp(-1.0, 1.0) * dt
    });
    skeleton.clamp(&mut next);
    next
}

/// Scores drawn for a hand environment's episodes.
pub trait ScoreSource: Send {
    fn next_score(&mut self) -> TabScore;
}

/// Cycles through a fixed list of scores.
#[derive(Debug, Clone)]
pub struct ScoreCycle {
    scores: Vec<TabScore>,
    next: usize,
}

impl ScoreCycle {
    pub fn new(scores: Vec<TabScore>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyScore);
        }
        Ok(ScoreCycle { scores, next: 0 })
    }
}

impl ScoreSource for ScoreCycle {
    fn next_score(&mut self) -> TabScore {
        let s = self.scores[self.next].clone();
        self.next = (self.next + 1) % self.scores.len();
        s
    }
}

fn hand_io(goal_dim: usize, critic_goal_dim: usize) -> HandIo {
    HandIo {
        frame_dim: OBS_FRAME_LEN,
        frames: 2,
        goal_dim,
        critic_goal_dim,
        action_dim: NUM_DOF,
    }
}

/// Shared state of the kinematic hand environments.
struct HandTrack {
    skeleton: HandSkeleton,
    start: [f64; NUM_DOF],
    q: [f64; NUM_DOF],
    history: Vec<HandPose>,
}

impl HandTrack {
    fn new(skeleton: HandSkeleton, start: [f64; NUM_DOF]) -> Result<Self> {
        let pose = skeleton.pose(start)?;
        Ok(HandTrack {
            skeleton,
            start,
            q: start,
            history: vec![pose.clone(), pose],
        })
    }

    fn reset(&mut self) {
        self.q = self.start;
        let pose = self.skeleton.pose_unchecked(self.q);
        self.history = vec![pose.clone(), pose];
    }

    fn advance(&mut self, action: &[f64], rates: HandRates) {
        self.q = apply_velocity(&self.skeleton, &self.q, action, rates);
        let pose = self.skeleton.pose_unchecked(self.q);
        if self.history.len() >= 3 {
            self.history.remove(0);
        }
        self.history.push(pose);
    }

    fn current(&self) -> &HandPose {
        self.history.last().expect("history is never empty")
    }

    fn refs(&self) -> Vec<&HandPose> {
        self.history.iter().collect()
    }

    fn observation(&self) -> Vec<f64> {
        pose_observation(&self.refs(), 1.0 / CONTROL_HZ, &Isometry3::identity())
            .expect("history holds at least two poses")
            .to_vec()
    }
}

/// Fretting-hand environment: eight objective channels, six string goals
/// followed by two imitation slots fed with zeros.
pub struct HandEnv {
    geometry: Arc<FretboardGeometry>,
    scores: Box<dyn ScoreSource>,
    hand: HandTrack,
    rates: HandRates,
    session: StringSession,
}

impl HandEnv {
    pub fn new(geometry: Arc<FretboardGeometry>, scores: Box<dyn ScoreSource>, start: [f64; NUM_DOF], rates: HandRates) -> Result<Self> {
        let hand = HandTrack::new(HandSkeleton::left(), start)?;
        let mut scores = scores;
        let score = Arc::new(scores.next_score());
        let session = StringSession::new(Arc::clone(&geometry), score);
        Ok(HandEnv {
            geometry,
            scores,
            hand,
            rates,
            session,
        })
    }

    fn observe(&self) -> AgentObs {
        let (left, _) = goal_states(self.session.score(), self.session.frame(), &[false; 6], &[false; 6]);
        let goal = left.to_input();
        AgentObs {
            pose: self.hand.observation(),
            critic_goal: goal.clone(),
            goal,
        }
    }
}

impl Env for HandEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            hands: vec![hand_io(crate::tab::GOAL_LEN, crate::tab::GOAL_LEN)],
            objectives: left_objectives(NUM_STRINGS),
        }
    }

    fn reset(&mut self) -> Vec<AgentObs> {
        let score = Arc::new(self.scores.next_score());
        self.session = StringSession::new(Arc::clone(&self.geometry), score);
        self.hand.reset();
        vec![self.observe()]
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult> {
        check_actions(actions, &self.spec())?;
        self.hand.advance(&actions[0], self.rates);
        let parts = self.hand.current().parts;
        let outcome = self
            .session
            .step(Some(&parts), None)
            .ok_or_else(|| Error::Config("step after the episode ended".into()))?;
        let note = self.session.score().notes[outcome.note_index].clone();
        let r = left_frame_rewards(&note, &self.hand.refs(), &self.geometry, 1.0 / CONTROL_HZ)?;
        let mut rewards = r.objectives.to_vec();
        rewards.extend([0.0, 0.0]);
        Ok(StepResult {
            obs: vec![self.observe()],
            rewards,
            done: self.session.is_finished(),
        })
    }
}

/// Picking-hand environment: the pick objective and one imitation slot.
pub struct RightHandEnv {
    geometry: Arc<FretboardGeometry>,
    scores: Box<dyn ScoreSource>,
    hand: HandTrack,
    pick: PickModel,
    rates: HandRates,
    session: StringSession,
    tips: Vec<Point3<f64>>,
}

impl RightHandEnv {
    pub fn new(geometry: Arc<FretboardGeometry>, scores: Box<dyn ScoreSource>, start: [f64; NUM_DOF], rates: HandRates) -> Result<Self> {
        let skeleton = HandSkeleton::right();
        let pick = PickModel::for_skeleton(&skeleton);
        let hand = HandTrack::new(skeleton, start)?;
        let mut scores = scores;
        let score = Arc::new(scores.next_score());
        let session = StringSession::new(Arc::clone(&geometry), score);
        let mut env = RightHandEnv {
            geometry,
            scores,
            hand,
            pick,
            rates,
            session,
            tips: Vec::new(),
        };
        env.reset();
        Ok(env)
    }

    fn observe(&self) -> AgentObs {
        let (picked, wrong) = match self.session.current() {
            Some((_, book)) => (book.picked(), book.wrongly_tackled),
            None => ([false; 6], [false; 6]),
        };
        let (_, right) = goal_states(self.session.score(), self.session.frame(), &picked, &wrong);
        AgentObs {
            pose: self.hand.observation(),
            goal: right.to_input(),
            critic_goal: right.to_critic_input(),
        }
    }

    fn tip(&self) -> Point3<f64> {
        self.pick.tip_position(self.hand.current())
    }
}

impl Env for RightHandEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            hands: vec![hand_io(crate::tab::GOAL_LEN, crate::tab::CRITIC_GOAL_LEN)],
            objectives: right_objectives(),
        }
    }

    fn reset(&mut self) -> Vec<AgentObs> {
        let score = Arc::new(self.scores.next_score());
        self.session = StringSession::new(Arc::clone(&self.geometry), score);
        self.hand.reset();
        self.tips = vec![self.tip()];
        self.session.prime_tip(self.tips[0]);
        vec![self.observe()]
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult> {
        check_actions(actions, &self.spec())?;
        self.hand.advance(&actions[0], self.rates);
        let tip = self.tip();
        push_tip(&mut self.tips, tip);
        let outcome = self
            .session
            .step(None, Some(tip))
            .ok_or_else(|| Error::Config("step after the episode ended".into()))?;
        let note = self.session.score().notes[outcome.note_index].clone();
        let ctx = PickContext {
            note: &note,
            book: &outcome.book,
            picked_this_frame: !outcome.picks.is_empty(),
            tip,
            cooperative_gate: None,
        };
        let pick = right_pick_reward(&ctx, &self.geometry);
        let contact = self.pick.contact(self.hand.current());
        let r = right_frame_reward(pick, contact, &self.hand.refs(), &self.tips, 1.0 / CONTROL_HZ);
        Ok(StepResult {
            obs: vec![self.observe()],
            rewards: vec![r.total, 0.0],
            done: self.session.is_finished(),
        })
    }
}

fn push_tip(tips: &mut Vec<Point3<f64>>, tip: Point3<f64>) {
    if tips.len() >= 3 {
        tips.remove(0);
    }
    tips.push(tip);
}

/// Both hands on one session, with the picking reward gated on the fretting
/// hand's pressing state. Nine channels: eight fretting, one picking.
pub struct DuetEnv {
    geometry: Arc<FretboardGeometry>,
    scores: Box<dyn ScoreSource>,
    left: HandTrack,
    right: HandTrack,
    pick: PickModel,
    rates: HandRates,
    session: StringSession,
    tips: Vec<Point3<f64>>,
    right_weight: f64,
}

impl DuetEnv {
    pub fn new(
        geometry: Arc<FretboardGeometry>,
        scores: Box<dyn ScoreSource>,
        left_start: [f64; NUM_DOF],
        right_start: [f64; NUM_DOF],
        rates: HandRates,
        right_weight: f64,
    ) -> Result<Self> {
        let right_skeleton = HandSkeleton::right();
        let pick = PickModel::for_skeleton(&right_skeleton);
        let mut scores = scores;
        let score = Arc::new(scores.next_score());
        let session = StringSession::new(Arc::clone(&geometry), score);
        let mut env = DuetEnv {
            left: HandTrack::new(HandSkeleton::left(), left_start)?,
            right: HandTrack::new(right_skeleton, right_start)?,
            geometry,
            scores,
            pick,
            rates,
            session,
            tips: Vec::new(),
            right_weight,
        };
        env.reset();
        Ok(env)
    }

    fn observe(&self) -> Vec<AgentObs> {
        let (picked, wrong) = match self.session.current() {
            Some((_, book)) => (book.picked(), book.wrongly_tackled),
            None => ([false; 6], [false; 6]),
        };
        let (left, right) = goal_states(self.session.score(), self.session.frame(), &picked, &wrong);
        let lg = left.to_input();
        vec![
            AgentObs {
                pose: self.left.observation(),
                critic_goal: lg.clone(),
                goal: lg,
            },
            AgentObs {
                pose: self.right.observation(),
                goal: right.to_input(),
                critic_goal: right.to_critic_input(),
            },
        ]
    }

    fn tip(&self) -> Point3<f64> {
        self.pick.tip_position(self.right.current())
    }
}

impl Env for DuetEnv {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            hands: vec![
                hand_io(crate::tab::GOAL_LEN, crate::tab::GOAL_LEN),
                hand_io(crate::tab::GOAL_LEN, crate::tab::CRITIC_GOAL_LEN),
            ],
            objectives: joint_objectives(NUM_STRINGS, self.right_weight),
        }
    }

    fn reset(&mut self) -> Vec<AgentObs> {
        let score = Arc::new(self.scores.next_score());
        self.session = StringSession::new(Arc::clone(&self.geometry), score);
        self.left.reset();
        self.right.reset();
        self.tips = vec![self.tip()];
        self.session.prime_tip(self.tips[0]);
        self.observe()
    }

    fn step(&mut self, actions: &[Vec<f64>]) -> Result<StepResult> {
        check_actions(actions, &self.spec())?;
        self.left.advance(&actions[0], self.rates);
        self.right.advance(&actions[1], self.rates);
        let tip = self.tip();
        push_tip(&mut self.tips, tip);
        let parts = self.left.current().parts;
        let outcome = self
            .session
            .step(Some(&parts), Some(tip))
            .ok_or_else(|| Error::Config("step after the episode ended".into()))?;
        let note = self.session.score().notes[outcome.note_index].clone();
        let left = left_frame_rewards(&note, &self.left.refs(), &self.geometry, 1.0 / CONTROL_HZ)?;
        let ctx = PickContext {
            note: &note,
            book: &outcome.book,
            picked_this_frame: !outcome.picks.is_empty(),
            tip,
            cooperative_gate: Some(expected_press_predicate(&outcome.presses, &note)),
        };
        let pick = right_pick_reward(&ctx, &self.geometry);
        let contact = self.pick.contact(self.right.current());
        let right = right_frame_reward(pick, contact, &self.right.refs(), &self.tips, 1.0 / CONTROL_HZ);
        let mut rewards = left.objectives.to_vec();
        rewards.extend([0.0, 0.0, right.total]);
        Ok(StepResult {
            obs: self.observe(),
            rewards,
            done: self.session.is_finished(),
        })
    }
}
