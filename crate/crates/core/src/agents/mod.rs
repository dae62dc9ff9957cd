//! The agent contract and the three learning agents.
//!
//! * [`HashQ`]: tabular Q-learning keyed by grid digest (model-free).
//! * [`SeqPolicy`]: open-loop, step-indexed softmax policy trained with a
//!   score-function gradient (model-free).
//! * [`WmPlanner`]: learns what each action does, induces the rule from the
//!   demos by searching its own model, then executes the plan (model-based).

mod checkpoint;
mod hash_q;
mod seq_policy;
mod wm_planner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Observation, Outcome};
use crate::task::Pair;

pub use checkpoint::{AgentCheckpoint, LearnedState, TrainingMeta, CHECKPOINT_VERSION};
pub use hash_q::HashQ;
pub use seq_policy::{softmax, SeqPolicy};
pub use wm_planner::{KnownTransform, OpModel, PlanError, PlanState, WmPlanner};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("lifecycle violation: {0}")]
    Lifecycle(&'static str),
    #[error("checkpoint is for agent `{found}`, expected `{expected}`")]
    CheckpointKindMismatch { expected: AgentKind, found: AgentKind },
    #[error("checkpoint format version {found} is newer than supported version {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
    #[error("contradictory sample for {action}: same input produced two different outputs")]
    ContradictorySample { action: Action },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    HashQ,
    SeqPolicy,
    WmPlanner,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [AgentKind::HashQ, AgentKind::SeqPolicy, AgentKind::WmPlanner];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::HashQ => "hash-q",
            AgentKind::SeqPolicy => "seq-policy",
            AgentKind::WmPlanner => "wm-planner",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown agent `{s}` (valid: hash-q, seq-policy, wm-planner)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Explore,
    Greedy,
}

/// Hyperparameters shared by all agent kinds; each agent reads what it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training budget over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub eta: f64,
    pub max_len: usize,
    pub max_samples_per_action: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            eta: 0.05,
            max_len: 4,
            max_samples_per_action: 4096,
            seed: 0,
        }
    }
}

/// One environment transition as seen by the learner.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub obs: &'a Observation,
    pub action: Action,
    pub reward: f64,
    pub next_obs: &'a Observation,
    pub outcome: Outcome,
}

/// Uniform surface over all agents, driven by the harness:
/// `begin_episode`, then `select_action` / `observe_transition` per step,
/// then `end_episode`.
pub trait Agent: Send + Sync {
    fn kind(&self) -> AgentKind;

    /// Demos are handed over out-of-band; they are not part of the observation.
    fn begin_episode(&mut self, obs: &Observation, demos: &[Pair]) -> Result<(), AgentError>;

    /// Greedy mode is deterministic given the agent state.
    fn select_action(&mut self, obs: &Observation, mode: Mode) -> Result<Action, AgentError>;

    fn observe_transition(&mut self, transition: &Transition<'_>) -> Result<(), AgentError>;

    fn end_episode(&mut self) -> Result<(), AgentError>;

    fn save(&self) -> AgentCheckpoint;

    fn load(&mut self, checkpoint: &AgentCheckpoint) -> Result<(), AgentError>;

    /// Starts a training phase of `steps` environment steps (sets exploration schedules).
    fn start_training_phase(&mut self, _steps: u64) {}

    fn clone_box(&self) -> Box<dyn Agent>;

    /// A frozen copy with no episode in progress, for greedy evaluation.
    fn snapshot(&self) -> Box<dyn Agent>;
}

impl Clone for Box<dyn Agent> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

pub fn build_agent(kind: AgentKind, config: &AgentConfig) -> Box<dyn Agent> {
    match kind {
        AgentKind::HashQ => Box::new(HashQ::new(config)),
        AgentKind::SeqPolicy => Box::new(SeqPolicy::new(config)),
        AgentKind::WmPlanner => Box::new(WmPlanner::new(config)),
    }
}

/// Builds an agent of `expected` kind and restores it from `checkpoint`.
pub fn agent_from_checkpoint(
    expected: AgentKind,
    checkpoint: &AgentCheckpoint,
    config: &AgentConfig,
) -> Result<Box<dyn Agent>, AgentError> {
    let mut agent = build_agent(expected, config);
    agent.load(checkpoint)?;
    Ok(agent)
}

/// Index of the largest value, ties going to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_on_ties() {
        assert_eq!(argmax(&[0.0; 5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(argmax(&[-1.0, -3.0, 5.0]), 2);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        let err = "unknown".parse::<AgentKind>().unwrap_err();
        assert!(err.contains("wm-planner"));
    }
}
