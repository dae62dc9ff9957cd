//! Restricted-action ARC environment with learning agents and an
//! evaluation harness.
//!
//! The environment exposes five actions (two rotations, two flips and
//! `Submit`) on a single grid, rewards `+1` whenever the grid comes to match
//! the target and `1000` for a correct submission, and ends after 50 steps
//! or 3 submissions.

pub mod agents;
pub mod env;
pub mod grid;
pub mod harness;
pub mod par;
pub mod session;
pub mod task;

pub use agents::{build_agent, Agent, AgentCheckpoint, AgentConfig, AgentKind, Mode};
pub use env::{Action, ArcEnv, Observation, Outcome, StepResult};
pub use grid::{Color, Grid, GridError};
pub use task::{BuiltinTask, Pair, Rule, TaskSpec};
