use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, Agent, AgentCheckpoint, AgentConfig, AgentError, AgentKind, LearnedState, Mode, TrainingMeta, Transition};
use crate::env::{Action, Observation};
use crate::grid::grid_digest;
use crate::task::{substream, Pair};

const AGENT_STREAM: u64 = 0x51;

/// Tabular Q-learning over grid digests with linearly decaying epsilon-greedy exploration.
#[derive(Debug, Clone)]
pub struct HashQ {
    alpha: f64,
    gamma: f64,
    epsilon_start: f64,
    epsilon_end: f64,
    decay_fraction: f64,
    table: HashMap<u64, [f64; 5]>,
    rng: ChaCha8Rng,
    meta: TrainingMeta,
    phase_steps: u64,
    decay_steps: u64,
    in_episode: bool,
}

impl HashQ {
    pub fn new(config: &AgentConfig) -> Self {
        Self {
            alpha: config.alpha,
            gamma: config.gamma,
            epsilon_start: config.epsilon_start,
            epsilon_end: config.epsilon_end,
            decay_fraction: config.epsilon_decay_fraction,
            table: HashMap::new(),
            rng: substream(config.seed, AGENT_STREAM),
            meta: TrainingMeta { env_steps: 0, seed: config.seed },
            phase_steps: 0,
            decay_steps: 0,
            in_episode: false,
        }
    }

    /// Q-values for a state; unseen states read as all zeros.
    pub fn q_values(&self, state: u64) -> [f64; 5] {
        self.table.get(&state).copied().unwrap_or_default()
    }

    pub fn table_len(&self) -> usize {
        self.table.len()
    }

    pub fn epsilon(&self) -> f64 {
        if self.decay_steps == 0 || self.phase_steps >= self.decay_steps {
            return self.epsilon_end;
        }
        let frac = self.phase_steps as f64 / self.decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn greedy(&self, state: u64) -> Action {
        Action::ALL[argmax(&self.q_values(state))]
    }

    /// `Q(s,a) += alpha * (r + gamma * max_b Q(s',b) - Q(s,a))`, without the
    /// bootstrap term when the transition ended the episode.
    pub fn update(&mut self, state: u64, action: Action, reward: f64, next_state: u64, terminal: bool) {
        let bootstrap = if terminal {
            0.0
        } else {
            self.q_values(next_state).into_iter().fold(f64::NEG_INFINITY, f64::max)
        };
        let row = self.table.entry(state).or_default();
        let q = &mut row[action.ordinal()];
        *q += self.alpha * (reward + self.gamma * bootstrap - *q);
    }
}

impl Agent for HashQ {
    fn kind(&self) -> AgentKind {
        AgentKind::HashQ
    }

    fn begin_episode(&mut self, _obs: &Observation, _demos: &[Pair]) -> Result<(), AgentError> {
        if self.in_episode {
            return Err(AgentError::Lifecycle("begin_episode while an episode is running"));
        }
        self.in_episode = true;
        Ok(())
    }

    fn select_action(&mut self, obs: &Observation, mode: Mode) -> Result<Action, AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("select_action outside an episode"));
        }
        let state = grid_digest(&obs.grid);
        if mode == Mode::Explore && self.rng.random::<f64>() < self.epsilon() {
            return Ok(Action::ALL[self.rng.random_range(0..Action::COUNT)]);
        }
        Ok(self.greedy(state))
    }

    fn observe_transition(&mut self, t: &Transition<'_>) -> Result<(), AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("observe_transition outside an episode"));
        }
        let (s, s2) = (grid_digest(&t.obs.grid), grid_digest(&t.next_obs.grid));
        self.update(s, t.action, t.reward, s2, t.outcome.is_done());
        self.meta.env_steps += 1;
        self.phase_steps += 1;
        Ok(())
    }

    fn end_episode(&mut self) -> Result<(), AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("end_episode without begin_episode"));
        }
        self.in_episode = false;
        Ok(())
    }

    fn save(&self) -> AgentCheckpoint {
        let table = self.table.iter().map(|(&k, &v)| (k, v)).collect();
        AgentCheckpoint::new(AgentKind::HashQ, self.meta, LearnedState::HashQ { table })
    }

    fn load(&mut self, checkpoint: &AgentCheckpoint) -> Result<(), AgentError> {
        checkpoint.expect_kind(AgentKind::HashQ)?;
        let LearnedState::HashQ { table } = &checkpoint.state else {
            return Err(AgentError::MalformedCheckpoint("hash-q checkpoint without a Q-table".into()));
        };
        self.table = table.iter().map(|(&k, &v)| (k, v)).collect();
        self.meta.env_steps = checkpoint.meta.env_steps;
        Ok(())
    }

    fn start_training_phase(&mut self, steps: u64) {
        self.phase_steps = 0;
        self.decay_steps = (steps as f64 * self.decay_fraction).round() as u64;
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn snapshot(&self) -> Box<dyn Agent> {
        let mut copy = self.clone();
        copy.in_episode = false;
        Box::new(copy)
    }
}
