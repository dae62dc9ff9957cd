//! Owned environment handle for foreign callers: a task, an env and the RNG
//! that picks demo pairs, driven by action ordinals.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::env::{Action, ArcEnv, EnvError, Observation, Outcome, PairSelector};
use crate::task::{substream, TaskSpec};

/// RNG stream of the session seed used to pick the pair for each reset.
pub const SESSION_STREAM: u64 = 3;

/// Side information returned with every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepInfo {
    pub rows: usize,
    pub cols: usize,
    pub steps_remaining: usize,
    pub submissions_remaining: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionStep {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Session {
    task: TaskSpec,
    env: ArcEnv,
    rng: ChaCha8Rng,
    closed: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session is closed")]
    Closed,
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl Session {
    pub fn new(task: TaskSpec, seed: u64) -> Self {
        Self { task, env: ArcEnv::new(), rng: substream(seed, SESSION_STREAM), closed: false }
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    /// Starts a new episode on a demo pair drawn from the session stream.
    pub fn reset(&mut self) -> Result<Observation, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        Ok(self.env.reset(&self.task, PairSelector::Random(&mut self.rng))?)
    }

    pub fn step(&mut self, ordinal: usize) -> Result<SessionStep, SessionError> {
        if self.closed {
            return Err(SessionError::Closed);
        }
        let result = self.env.step(Action::from_ordinal(ordinal)?)?;
        let obs = result.observation;
        let (rows, cols) = obs.dims();
        Ok(SessionStep {
            info: StepInfo {
                rows,
                cols,
                steps_remaining: obs.steps_remaining,
                submissions_remaining: obs.submissions_remaining,
                outcome: result.outcome,
            },
            observation: obs,
            reward: result.reward,
            terminated: result.outcome.is_terminated(),
            truncated: result.outcome.is_truncated(),
        })
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Plays `ordinals` through a fresh session, resetting after every episode end.
pub fn rollout(task: &TaskSpec, seed: u64, ordinals: &[usize]) -> Result<Vec<SessionStep>, SessionError> {
    let mut session = Session::new(task.clone(), seed);
    session.reset()?;
    let mut steps = Vec::with_capacity(ordinals.len());
    for &a in ordinals {
        let step = session.step(a)?;
        let done = step.terminated || step.truncated;
        steps.push(step);
        if done {
            session.reset()?;
        }
    }
    Ok(steps)
}
