//! The episode engine: five actions, sparse reward, pass@3 termination.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{self, Grid, MAX_SIDE, NUM_COLORS};
use crate::task::{Pair, TaskSpec};

pub const MAX_STEPS: usize = 50;
pub const MAX_SUBMISSIONS: usize = 3;
pub const SUCCESS_REWARD: f64 = 1000.0;
pub const MATCH_REWARD: f64 = 1.0;
pub const CANVAS: usize = MAX_SIDE;

/// Registration name for external frameworks.
pub const ENV_ID: &str = "ArcRestricted-v0";
pub const ENV_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("task has no demo pairs")]
    EmptyTask,
    #[error("demo index {index} out of range for {len} demos")]
    PairOutOfRange { index: usize, len: usize },
    #[error("step called after the episode finished ({0})")]
    StepAfterTermination(Outcome),
    #[error("step called before reset")]
    NotReset,
    #[error("invalid action ordinal {0}, expected 0..=4")]
    InvalidAction(usize),
    #[error("unknown action `{0}` (valid: Rotate90, Rotate270, FlipH, FlipV, Submit or 0..=4)")]
    UnknownAction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Rotate90,
    Rotate270,
    FlipH,
    FlipV,
    Submit,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [Action::Rotate90, Action::Rotate270, Action::FlipH, Action::FlipV, Action::Submit];
    pub const TRANSFORMS: [Action; 4] = [Action::Rotate90, Action::Rotate270, Action::FlipH, Action::FlipV];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(ordinal: usize) -> Result<Action, EnvError> {
        Action::ALL.get(ordinal).copied().ok_or(EnvError::InvalidAction(ordinal))
    }

    pub fn is_transform(self) -> bool {
        self != Action::Submit
    }

    /// Applies a transform action; `None` for `Submit`.
    pub fn apply(self, g: &Grid) -> Option<Grid> {
        match self {
            Action::Rotate90 => Some(grid::rotate90(g)),
            Action::Rotate270 => Some(grid::rotate270(g)),
            Action::FlipH => Some(grid::flip_h(g)),
            Action::FlipV => Some(grid::flip_v(g)),
            Action::Submit => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Rotate90 => "Rotate90",
            Action::Rotate270 => "Rotate270",
            Action::FlipH => "FlipH",
            Action::FlipV => "FlipV",
            Action::Submit => "Submit",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = EnvError;

    /// Accepts an action name (case-insensitive, `-` and `_` ignored) or its ordinal.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(n) = s.parse::<usize>() {
            return Action::from_ordinal(n);
        }
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| EnvError::UnknownAction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Running,
    Success,
    FailSubmissions,
    FailTimeout,
}

impl Outcome {
    pub fn is_done(self) -> bool {
        self != Outcome::Running
    }

    /// Ended by the agent: a correct submission or the last wrong one.
    pub fn is_terminated(self) -> bool {
        matches!(self, Outcome::Success | Outcome::FailSubmissions)
    }

    /// Cut off by the step limit.
    pub fn is_truncated(self) -> bool {
        self == Outcome::FailTimeout
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeState {
    pub current: Grid,
    pub target: Grid,
    pub steps_taken: usize,
    pub submissions_used: usize,
    pub currently_matching: bool,
    pub finished: Outcome,
}

/// What an agent sees: the current grid plus budget counters.
///
/// The dense encoding is produced on demand by [`Observation::planes`]
/// and [`Observation::mask`]; the target grid is never exposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub grid: Grid,
    pub steps_remaining: usize,
    pub submissions_remaining: usize,
}

impl Observation {
    pub fn dims(&self) -> (usize, usize) {
        self.grid.dims()
    }

    /// Index of the next step within the episode.
    pub fn step_index(&self) -> usize {
        MAX_STEPS - self.steps_remaining
    }

    /// One-hot planes-first tensor, shape `[10][30][30]`, flattened as
    /// `color * 900 + row * 30 + col`. Padding cells are zero in every plane.
    pub fn planes(&self) -> Vec<f32> {
        let mut out = vec![0.0; NUM_COLORS * CANVAS * CANVAS];
        let cols = self.grid.cols();
        for (k, &c) in self.grid.cells().iter().enumerate() {
            let (r, col) = (k / cols, k % cols);
            out[c as usize * CANVAS * CANVAS + r * CANVAS + col] = 1.0;
        }
        out
    }

    /// Validity mask, shape `[30][30]`, flattened row-major.
    pub fn mask(&self) -> Vec<f32> {
        let mut out = vec![0.0; CANVAS * CANVAS];
        let (rows, cols) = self.grid.dims();
        for r in 0..rows {
            out[r * CANVAS..r * CANVAS + cols].fill(1.0);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub outcome: Outcome,
}

/// Constant environment metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvSpec {
    pub action_count: usize,
    pub canvas: (usize, usize, usize),
    pub reward_range: (f64, f64),
    pub max_steps: usize,
    pub max_submissions: usize,
}

pub fn env_spec() -> EnvSpec {
    EnvSpec {
        action_count: Action::COUNT,
        canvas: (NUM_COLORS, CANVAS, CANVAS),
        reward_range: (0.0, SUCCESS_REWARD),
        max_steps: MAX_STEPS,
        max_submissions: MAX_SUBMISSIONS,
    }
}

/// How `reset` picks a demo pair.
pub enum PairSelector<'a, R: Rng + ?Sized> {
    Index(usize),
    Random(&'a mut R),
}

/// Single-owner episode state machine.
#[derive(Debug, Clone, Default)]
pub struct ArcEnv {
    state: Option<EpisodeState>,
}

impl ArcEnv {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts an episode on one of the task's demo pairs.
    pub fn reset<R: Rng + ?Sized>(
        &mut self,
        task: &TaskSpec,
        selector: PairSelector<'_, R>,
    ) -> Result<Observation, EnvError> {
        if task.demos.is_empty() {
            return Err(EnvError::EmptyTask);
        }
        let index = match selector {
            PairSelector::Index(i) => i,
            PairSelector::Random(rng) => rng.random_range(0..task.demos.len()),
        };
        let pair = task
            .demos
            .get(index)
            .ok_or(EnvError::PairOutOfRange { index, len: task.demos.len() })?;
        Ok(self.reset_pair(pair))
    }

    /// Starts an episode on an explicit pair (used for eval pairs).
    pub fn reset_pair(&mut self, pair: &Pair) -> Observation {
        self.state = Some(EpisodeState {
            currently_matching: pair.input == pair.output,
            current: pair.input.clone(),
            target: pair.output.clone(),
            steps_taken: 0,
            submissions_used: 0,
            finished: Outcome::Running,
        });
        self.observe().expect("state was just set")
    }

    pub fn state(&self) -> Option<&EpisodeState> {
        self.state.as_ref()
    }

    pub fn observe(&self) -> Result<Observation, EnvError> {
        let s = self.state.as_ref().ok_or(EnvError::NotReset)?;
        Ok(Observation {
            grid: s.current.clone(),
            steps_remaining: MAX_STEPS - s.steps_taken,
            submissions_remaining: MAX_SUBMISSIONS - s.submissions_used,
        })
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, EnvError> {
        let s = self.state.as_mut().ok_or(EnvError::NotReset)?;
        if s.finished.is_done() {
            return Err(EnvError::StepAfterTermination(s.finished));
        }
        s.steps_taken += 1;
        let mut reward = 0.0;
        match action.apply(&s.current) {
            Some(next) => {
                let was_matching = s.currently_matching;
                s.current = next;
                s.currently_matching = s.current == s.target;
                if s.currently_matching && !was_matching {
                    reward = MATCH_REWARD;
                }
            }
            None if s.currently_matching => {
                reward = SUCCESS_REWARD;
                s.finished = Outcome::Success;
            }
            None => {
                s.submissions_used += 1;
                if s.submissions_used == MAX_SUBMISSIONS {
                    s.finished = Outcome::FailSubmissions;
                }
            }
        }
        if s.finished == Outcome::Running && s.steps_taken == MAX_STEPS {
            s.finished = Outcome::FailTimeout;
        }
        let outcome = s.finished;
        Ok(StepResult { observation: self.observe()?, reward, outcome })
    }
}
