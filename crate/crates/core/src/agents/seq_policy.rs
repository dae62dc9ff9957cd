use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, Agent, AgentCheckpoint, AgentConfig, AgentError, AgentKind, LearnedState, Mode, TrainingMeta, Transition};
use crate::env::{Action, Observation, MAX_STEPS};
use crate::task::{substream, Pair};

const AGENT_STREAM: u64 = 0x5e;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; 5]) -> [f64; 5] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Open-loop categorical policy with one set of logits per step index.
///
/// After each episode every visited `(t, a)` moves along the score-function
/// gradient scaled by `G_t - b_t`, where `G_t` is the undiscounted
/// reward-to-go and `b_t` the running mean of past returns at step `t`.
#[derive(Debug, Clone)]
pub struct SeqPolicy {
    eta: f64,
    logits: Vec<[f64; 5]>,
    baselines: Vec<f64>,
    baseline_counts: Vec<u64>,
    trajectory: Vec<(usize, Action, f64)>,
    rng: ChaCha8Rng,
    meta: TrainingMeta,
    in_episode: bool,
}

impl SeqPolicy {
    pub fn new(config: &AgentConfig) -> Self {
        Self {
            eta: config.eta,
            logits: vec![[0.0; 5]; MAX_STEPS],
            baselines: vec![0.0; MAX_STEPS],
            baseline_counts: vec![0; MAX_STEPS],
            trajectory: Vec::with_capacity(MAX_STEPS),
            rng: substream(config.seed, AGENT_STREAM),
            meta: TrainingMeta { env_steps: 0, seed: config.seed },
            in_episode: false,
        }
    }

    pub fn probabilities(&self, step: usize) -> [f64; 5] {
        softmax(&self.logits[step.min(MAX_STEPS - 1)])
    }

    pub fn logits(&self, step: usize) -> [f64; 5] {
        self.logits[step]
    }

    /// Applies the policy-gradient update for one finished trajectory of
    /// `(step index, action, reward)` triples.
    pub fn update(&mut self, trajectory: &[(usize, Action, f64)]) {
        let mut to_go = 0.0;
        let mut returns = vec![0.0; trajectory.len()];
        for (i, &(_, _, r)) in trajectory.iter().enumerate().rev() {
            to_go += r;
            returns[i] = to_go;
        }
        for (&(t, action, _), &ret) in trajectory.iter().zip(&returns) {
            let advantage = ret - self.baselines[t];
            let probs = softmax(&self.logits[t]);
            for (b, logit) in self.logits[t].iter_mut().enumerate() {
                let indicator = if b == action.ordinal() { 1.0 } else { 0.0 };
                *logit += self.eta * advantage * (indicator - probs[b]);
            }
            self.baseline_counts[t] += 1;
            self.baselines[t] += (ret - self.baselines[t]) / self.baseline_counts[t] as f64;
        }
    }
}

impl Agent for SeqPolicy {
    fn kind(&self) -> AgentKind {
        AgentKind::SeqPolicy
    }

    fn begin_episode(&mut self, _obs: &Observation, _demos: &[Pair]) -> Result<(), AgentError> {
        if self.in_episode {
            return Err(AgentError::Lifecycle("begin_episode while an episode is running"));
        }
        self.in_episode = true;
        self.trajectory.clear();
        Ok(())
    }

    fn select_action(&mut self, obs: &Observation, mode: Mode) -> Result<Action, AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("select_action outside an episode"));
        }
        let t = obs.step_index().min(MAX_STEPS - 1);
        let index = match mode {
            Mode::Greedy => argmax(&self.logits[t]),
            Mode::Explore => {
                let probs = softmax(&self.logits[t]);
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                probs
                    .iter()
                    .position(|p| {
                        acc += p;
                        u < acc
                    })
                    .unwrap_or(Action::COUNT - 1)
            }
        };
        Ok(Action::ALL[index])
    }

    fn observe_transition(&mut self, t: &Transition<'_>) -> Result<(), AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("observe_transition outside an episode"));
        }
        self.trajectory.push((t.obs.step_index(), t.action, t.reward));
        self.meta.env_steps += 1;
        Ok(())
    }

    fn end_episode(&mut self) -> Result<(), AgentError> {
        if !self.in_episode {
            return Err(AgentError::Lifecycle("end_episode without begin_episode"));
        }
        let trajectory = std::mem::take(&mut self.trajectory);
        self.update(&trajectory);
        self.in_episode = false;
        Ok(())
    }

    fn save(&self) -> AgentCheckpoint {
        AgentCheckpoint::new(
            AgentKind::SeqPolicy,
            self.meta,
            LearnedState::SeqPolicy {
                logits: self.logits.clone(),
                baselines: self.baselines.clone(),
                baseline_counts: self.baseline_counts.clone(),
            },
        )
    }

    fn load(&mut self, checkpoint: &AgentCheckpoint) -> Result<(), AgentError> {
        checkpoint.expect_kind(AgentKind::SeqPolicy)?;
        let LearnedState::SeqPolicy { logits, baselines, baseline_counts } = &checkpoint.state else {
            return Err(AgentError::MalformedCheckpoint("seq-policy checkpoint without logits".into()));
        };
        if logits.len() != MAX_STEPS || baselines.len() != MAX_STEPS || baseline_counts.len() != MAX_STEPS {
            return Err(AgentError::MalformedCheckpoint(format!("expected {MAX_STEPS} step entries")));
        }
        self.logits = logits.clone();
        self.baselines = baselines.clone();
        self.baseline_counts = baseline_counts.clone();
        self.meta.env_steps = checkpoint.meta.env_steps;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn snapshot(&self) -> Box<dyn Agent> {
        let mut copy = self.clone();
        copy.in_episode = false;
        copy.trajectory.clear();
        Box::new(copy)
    }
}
