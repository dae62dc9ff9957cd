//! pass@3 evaluation, learning curves over environment steps, and the
//! single-task and transfer experiment protocols.

mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{agent_from_checkpoint, build_agent, Agent, AgentCheckpoint, AgentConfig, AgentError, AgentKind, Mode, Transition};
use crate::env::{Action, ArcEnv, EnvError, Outcome, PairSelector};
use crate::par;
use crate::task::{load_arc_task, substream, BuiltinTask, Pair, TaskError, TaskSpec};

pub use output::{format_curves, format_summary, write_curves, write_run, write_summary, Summary};

/// RNG stream of the run seed used to pick training demo pairs.
pub const TRAIN_STREAM: u64 = 2;
pub const DEFAULT_SINGLE_TASK_BUDGET: u64 = 100_000;
pub const DEFAULT_TRANSFER_BUDGET: u64 = 50_000;
pub const DEFAULT_EVAL_EVERY: u64 = 1_000;
pub const DEFAULT_DEMOS: usize = 1_000;
pub const DEFAULT_EVAL_COUNT: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("task has {have} eval pairs, {need} requested")]
    InsufficientEvals { have: usize, need: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// One point of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub env_steps: u64,
    pub accuracy: f64,
}

/// pass@3 accuracy against training environment steps for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub task_id: String,
    pub agent_kind: AgentKind,
    pub seed: u64,
    pub budget: u64,
    pub samples: Vec<CurveSample>,
}

impl CurveSeries {
    pub fn new(task_id: impl Into<String>, agent_kind: AgentKind, seed: u64, budget: u64) -> Self {
        Self { task_id: task_id.into(), agent_kind, seed, budget, samples: Vec::new() }
    }

    /// Appends a sample; `env_steps` must be strictly increasing and within budget.
    pub fn push(&mut self, env_steps: u64, accuracy: f64) {
        assert!((0.0..=1.0).contains(&accuracy), "accuracy {accuracy} outside [0, 1]");
        assert!(env_steps <= self.budget, "sample at {env_steps} beyond budget {}", self.budget);
        if let Some(last) = self.samples.last() {
            assert!(env_steps > last.env_steps, "env_steps must strictly increase");
        }
        self.samples.push(CurveSample { env_steps, accuracy });
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.samples.last().map(|s| s.accuracy)
    }

    pub fn first_perfect(&self) -> Option<u64> {
        self.samples.iter().find(|s| s.accuracy >= 1.0).map(|s| s.env_steps)
    }
}

/// Runs one greedy episode (no learning) on `pair` and reports its outcome.
pub fn run_greedy_episode(agent: &dyn Agent, pair: &Pair, demos: &[Pair]) -> Result<Outcome, HarnessError> {
    let mut agent = agent.snapshot();
    let mut env = ArcEnv::new();
    let mut obs = env.reset_pair(pair);
    agent.begin_episode(&obs, demos)?;
    loop {
        let action = agent.select_action(&obs, Mode::Greedy)?;
        let result = env.step(action)?;
        if result.outcome.is_done() {
            return Ok(result.outcome);
        }
        obs = result.observation;
    }
}

fn check_eval_count(task: &TaskSpec, eval_count: usize) -> Result<(), HarnessError> {
    if task.evals.len() < eval_count || eval_count == 0 {
        return Err(HarnessError::InsufficientEvals { have: task.evals.len(), need: eval_count.max(1) });
    }
    Ok(())
}

fn accuracy(outcomes: Vec<Result<Outcome, HarnessError>>) -> Result<f64, HarnessError> {
    let total = outcomes.len();
    let mut successes = 0;
    for outcome in outcomes {
        if outcome? == Outcome::Success {
            successes += 1;
        }
    }
    Ok(successes as f64 / total as f64)
}

/// pass@3 accuracy over the first `eval_count` eval pairs. Each pair gets its
/// own frozen snapshot of the agent, so the agent itself is never touched and
/// the parallel and serial paths agree exactly.
pub fn evaluate(agent: &dyn Agent, task: &TaskSpec, eval_count: usize) -> Result<f64, HarnessError> {
    check_eval_count(task, eval_count)?;
    accuracy(par::map_indices(eval_count, |i| run_greedy_episode(agent, &task.evals[i], &task.demos)))
}

/// [`evaluate`] on the calling thread only.
pub fn evaluate_serial(agent: &dyn Agent, task: &TaskSpec, eval_count: usize) -> Result<f64, HarnessError> {
    check_eval_count(task, eval_count)?;
    accuracy(par::map_indices_serial(eval_count, |i| run_greedy_episode(agent, &task.evals[i], &task.demos)))
}

/// Per-phase training bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStats {
    pub env_steps: u64,
    pub episodes: u64,
}

/// Trains `agent` for exactly `budget` environment steps on demo pairs drawn
/// from `seed`'s training stream, sampling held-out accuracy every
/// `eval_every` steps and at the end. Sample x-values are offset by `step_offset`.
pub fn train(
    agent: &mut dyn Agent,
    task: &TaskSpec,
    budget: u64,
    eval_every: u64,
    eval_count: usize,
    seed: u64,
    curve: Option<&mut CurveSeries>,
) -> Result<TrainStats, HarnessError> {
    if budget == 0 || eval_every == 0 {
        return Err(HarnessError::Config("budget and eval_every must be positive".into()));
    }
    let mut curve = curve;
    if curve.is_some() {
        check_eval_count(task, eval_count)?;
    }
    let mut rng = substream(seed, TRAIN_STREAM);
    let mut env = ArcEnv::new();
    let mut stats = TrainStats::default();
    agent.start_training_phase(budget);

    while stats.env_steps < budget {
        let mut obs = env.reset(task, PairSelector::Random(&mut rng))?;
        agent.begin_episode(&obs, &task.demos)?;
        stats.episodes += 1;
        loop {
            let action = agent.select_action(&obs, Mode::Explore)?;
            let result = env.step(action)?;
            agent.observe_transition(&Transition {
                obs: &obs,
                action,
                reward: result.reward,
                next_obs: &result.observation,
                outcome: result.outcome,
            })?;
            stats.env_steps += 1;
            let boundary = stats.env_steps % eval_every == 0 || stats.env_steps == budget;
            if let (true, Some(curve)) = (boundary, curve.as_deref_mut()) {
                let x = stats.env_steps;
                curve.push(x, evaluate(&*agent, task, eval_count)?);
            }
            obs = result.observation;
            if result.outcome.is_done() || stats.env_steps == budget {
                break;
            }
        }
        agent.end_episode()?;
    }
    Ok(stats)
}

/// Where a task comes from: a built-in name or an ARC JSON file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskSource {
    Builtin(String),
    File(PathBuf),
}

impl TaskSource {
    /// Built-in names win; anything else must be an existing file.
    pub fn parse(spec: &str) -> Result<Self, HarnessError> {
        if spec.parse::<BuiltinTask>().is_ok() {
            return Ok(TaskSource::Builtin(spec.to_string()));
        }
        let path = Path::new(spec);
        if path.is_file() {
            return Ok(TaskSource::File(path.to_path_buf()));
        }
        Err(TaskError::UnknownTask(spec.to_string()).into())
    }

    pub fn label(&self) -> String {
        match self {
            TaskSource::Builtin(name) => name.clone(),
            TaskSource::File(path) => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
        }
    }

    pub fn load(&self, n_demos: usize, n_evals: usize, seed: u64) -> Result<TaskSpec, HarnessError> {
        match self {
            TaskSource::Builtin(name) => Ok(name.parse::<BuiltinTask>()?.generate(n_demos, n_evals, seed)?),
            TaskSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                Ok(load_arc_task(self.label(), &text)?)
            }
        }
    }
}

/// How the agent for a transfer run gets its prior knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pretrain {
    Checkpoint(PathBuf),
    Train { task: TaskSource, budget: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Protocol {
    SingleTask,
    Transfer { pretrain: Pretrain },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub task: TaskSource,
    pub agent_kind: AgentKind,
    pub agent: AgentConfig,
    pub train_budget: u64,
    pub eval_every: u64,
    pub eval_count: usize,
    pub n_demos: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn single_task(task: TaskSource, agent_kind: AgentKind, seed: u64) -> Self {
        Self {
            protocol: Protocol::SingleTask,
            task,
            agent_kind,
            agent: AgentConfig { seed, ..AgentConfig::default() },
            train_budget: DEFAULT_SINGLE_TASK_BUDGET,
            eval_every: DEFAULT_EVAL_EVERY,
            eval_count: DEFAULT_EVAL_COUNT,
            n_demos: DEFAULT_DEMOS,
            seed,
        }
    }

    pub fn transfer(task: TaskSource, pretrain: Pretrain, agent_kind: AgentKind, seed: u64) -> Self {
        Self {
            protocol: Protocol::Transfer { pretrain },
            train_budget: DEFAULT_TRANSFER_BUDGET,
            ..Self::single_task(task, agent_kind, seed)
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.train_budget == 0 || self.eval_every == 0 || self.eval_count == 0 || self.n_demos == 0 {
            return Err(HarnessError::Config("budgets, eval_every, eval_count and demos must be positive".into()));
        }
        if let Protocol::Transfer { pretrain: Pretrain::Train { budget: 0, .. } } = self.protocol {
            return Err(HarnessError::Config("pretrain budget must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a finished run produces.
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub task: TaskSpec,
    pub curve: CurveSeries,
    pub stats: TrainStats,
    pub agent: Box<dyn Agent>,
    pub zero_shot: Option<f64>,
    pub pretrain_stats: Option<TrainStats>,
}

impl RunOutput {
    pub fn summary(&self) -> Summary {
        Summary::from_run(self)
    }
}

/// Seed offset for the task an agent is pretrained on, so pretraining and
/// adaptation never share demo draws.
const PRETRAIN_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trains from scratch and samples the learning curve.
pub fn run_single_task(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let task = config.task.load(config.n_demos, config.eval_count, config.seed)?;
    let agent = build_agent(config.agent_kind, &config.agent);
    run_from(config, task, agent, None, None)
}

/// Loads or pretrains an agent, records a zero-shot sample at step 0, then
/// fine-tunes on the adaptation task.
pub fn run_transfer(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let Protocol::Transfer { pretrain } = &config.protocol else {
        return Err(HarnessError::Config("run_transfer needs a transfer protocol".into()));
    };
    let (agent, pretrain_stats) = match pretrain {
        Pretrain::Checkpoint(path) => {
            let checkpoint = AgentCheckpoint::read(path).map_err(|e| match e {
                AgentError::Io(source) => HarnessError::Io { path: path.clone(), source },
                other => other.into(),
            })?;
            (agent_from_checkpoint(config.agent_kind, &checkpoint, &config.agent)?, None)
        }
        Pretrain::Train { task, budget } => {
            let pre_seed = config.seed.wrapping_add(PRETRAIN_SEED_OFFSET);
            let pre_task = task.load(config.n_demos, 0, pre_seed)?;
            let mut agent = build_agent(config.agent_kind, &config.agent);
            let stats = train(agent.as_mut(), &pre_task, *budget, config.eval_every, 0, pre_seed, None)?;
            (agent, Some(stats))
        }
    };
    let task = config.task.load(config.n_demos, config.eval_count, config.seed)?;
    let zero_shot = evaluate(agent.as_ref(), &task, config.eval_count)?;
    run_from(config, task, agent, Some(zero_shot), pretrain_stats)
}

fn run_from(
    config: &ExperimentConfig,
    task: TaskSpec,
    mut agent: Box<dyn Agent>,
    zero_shot: Option<f64>,
    pretrain_stats: Option<TrainStats>,
) -> Result<RunOutput, HarnessError> {
    let mut curve = CurveSeries::new(task.task_id.clone(), config.agent_kind, config.seed, config.train_budget);
    if let Some(acc) = zero_shot {
        curve.push(0, acc);
    }
    let stats = train(
        agent.as_mut(),
        &task,
        config.train_budget,
        config.eval_every,
        config.eval_count,
        config.seed,
        Some(&mut curve),
    )?;
    Ok(RunOutput { config: config.clone(), task, curve, stats, agent, zero_shot, pretrain_stats })
}

/// One step of a replayed action script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub step: usize,
    pub action: Action,
    pub reward: f64,
    pub outcome: Outcome,
}

/// Replays `actions` from a reset on demo `pair_index`, stopping at termination.
pub fn replay(task: &TaskSpec, pair_index: usize, actions: &[Action]) -> Result<Vec<ReplayStep>, HarnessError> {
    let mut env = ArcEnv::new();
    env.reset::<rand_chacha::ChaCha8Rng>(task, PairSelector::Index(pair_index))?;
    let mut steps = Vec::new();
    for (i, &action) in actions.iter().enumerate() {
        let r = env.step(action)?;
        steps.push(ReplayStep { step: i + 1, action, reward: r.reward, outcome: r.outcome });
        if r.outcome.is_done() {
            break;
        }
    }
    Ok(steps)
}
