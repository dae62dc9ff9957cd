use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use arc_rl::agents::{agent_from_checkpoint, AgentCheckpoint, AgentConfig, AgentKind};
use arc_rl::env::Action;
use arc_rl::harness::{
    evaluate, replay, run_single_task, run_transfer, write_run, ExperimentConfig, Pretrain, RunOutput, TaskSource,
    DEFAULT_DEMOS, DEFAULT_EVAL_COUNT, DEFAULT_EVAL_EVERY, DEFAULT_SINGLE_TASK_BUDGET, DEFAULT_TRANSFER_BUDGET,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arc-rl", version, about = "Restricted-action ARC environment: train, transfer and evaluate agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task and write it as ARC JSON.
    GenTask(GenTaskArgs),
    /// Train an agent from scratch and record its learning curve.
    Train(TrainArgs),
    /// Adapt a pretrained agent to a new task.
    Transfer(TransferArgs),
    /// Evaluate a saved agent on a task's eval pairs.
    Eval(EvalArgs),
    /// Replay an action script on one demo pair.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TaskArgs {
    /// Built-in task name or path to an ARC task file.
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = DEFAULT_DEMOS)]
    demos: usize,
    #[arg(long, default_value_t = DEFAULT_EVAL_COUNT)]
    eval_count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon_start: Option<f64>,
    #[arg(long)]
    epsilon_end: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
}

impl HyperArgs {
    fn apply(&self, seed: u64) -> AgentConfig {
        let mut c = AgentConfig { seed, ..AgentConfig::default() };
        c.alpha = self.alpha.unwrap_or(c.alpha);
        c.gamma = self.gamma.unwrap_or(c.gamma);
        c.epsilon_start = self.epsilon_start.unwrap_or(c.epsilon_start);
        c.epsilon_end = self.epsilon_end.unwrap_or(c.epsilon_end);
        c.eta = self.eta.unwrap_or(c.eta);
        c.max_len = self.max_len.unwrap_or(c.max_len);
        c
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// hash-q, seq-policy or wm-planner.
    #[arg(long)]
    agent: AgentKind,
    /// Training budget in environment steps.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_EVAL_EVERY)]
    eval_every: u64,
    /// Output directory (falls back to $ARC_RL_OUT, then `runs`).
    #[arg(long, env = "ARC_RL_OUT", default_value = "runs")]
    out: PathBuf,
    /// Also copy the final checkpoint to this path.
    #[arg(long)]
    save_checkpoint: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

impl RunArgs {
    fn config(&self, base: ExperimentConfig, default_steps: u64) -> ExperimentConfig {
        ExperimentConfig {
            agent: self.hyper.apply(self.task.seed),
            train_budget: self.steps.unwrap_or(default_steps),
            eval_every: self.eval_every,
            eval_count: self.task.eval_count,
            n_demos: self.task.demos,
            ..base
        }
    }

    fn finish(&self, run: &RunOutput) -> Result<()> {
        let written = write_run(&self.out, run, true)?;
        if let Some(path) = &self.save_checkpoint {
            run.agent.save().write(path).with_context(|| format!("writing {}", path.display()))?;
        }
        let summary = run.summary();
        println!(
            "{} on {}: final accuracy {:.4}, first 1.0 at {}",
            summary.agent,
            summary.task_id,
            summary.final_accuracy,
            summary.steps_to_first_perfect.0.map_or("never".to_string(), |s| s.to_string())
        );
        for path in written {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct TransferArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Start from this checkpoint.
    #[arg(long, conflicts_with = "pretrain_task")]
    load_checkpoint: Option<PathBuf>,
    /// Pretrain on this task instead of loading a checkpoint.
    #[arg(long)]
    pretrain_task: Option<String>,
    #[arg(long, default_value_t = DEFAULT_SINGLE_TASK_BUDGET)]
    pretrain_steps: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    load_checkpoint: PathBuf,
    /// Expected agent kind; defaults to the one stored in the checkpoint.
    #[arg(long)]
    agent: Option<AgentKind>,
}

#[derive(Args)]
struct GenTaskArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Output file; prints to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// Demo pair index.
    #[arg(long, default_value_t = 0)]
    pair: usize,
    /// Comma-separated action names or ordinals, e.g. `rotate90,flip-h,submit`.
    #[arg(long, value_delimiter = ',', required = true)]
    actions: Vec<Action>,
}

fn source(spec: &str) -> Result<TaskSource> {
    Ok(TaskSource::parse(spec)?)
}

fn read_checkpoint(path: &Path) -> Result<AgentCheckpoint> {
    AgentCheckpoint::read(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenTask(args) => {
            let t = &args.task;
            let task = source(&t.task)?.load(t.demos, t.eval_count, t.seed)?;
            let mut text = serde_json::to_string(&task.to_arc_json())?;
            text.push('\n');
            match args.out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Train(TrainArgs { run }) => {
            let base = ExperimentConfig::single_task(source(&run.task.task)?, run.agent, run.task.seed);
            let config = run.config(base, DEFAULT_SINGLE_TASK_BUDGET);
            run.finish(&run_single_task(&config)?)?;
        }
        Command::Transfer(args) => {
            let run = &args.run;
            let pretrain = match (&args.load_checkpoint, &args.pretrain_task) {
                (Some(path), None) => Pretrain::Checkpoint(path.clone()),
                (None, Some(task)) => Pretrain::Train { task: source(task)?, budget: args.pretrain_steps },
                _ => bail!("transfer needs --load-checkpoint or --pretrain-task"),
            };
            let base = ExperimentConfig::transfer(source(&run.task.task)?, pretrain, run.agent, run.task.seed);
            let config = run.config(base, DEFAULT_TRANSFER_BUDGET);
            run.finish(&run_transfer(&config)?)?;
        }
        Command::Eval(args) => {
            let t = &args.task;
            let checkpoint = read_checkpoint(&args.load_checkpoint)?;
            let kind = args.agent.unwrap_or(checkpoint.agent_kind);
            let agent = agent_from_checkpoint(kind, &checkpoint, &AgentConfig { seed: t.seed, ..AgentConfig::default() })?;
            let task = source(&t.task)?.load(t.demos, t.eval_count, t.seed)?;
            let accuracy = evaluate(agent.as_ref(), &task, t.eval_count)?;
            println!("{}", serde_json::json!({ "task_id": task.task_id, "agent": kind, "eval_count": t.eval_count, "accuracy": accuracy }));
        }
        Command::Replay(args) => {
            let t = &args.task;
            let task = source(&t.task)?.load(t.demos, 0, t.seed)?;
            for step in replay(&task, args.pair, &args.actions)? {
                println!("{} {} {} {}", step.step, step.action, step.reward, step.outcome);
            }
        }
    }
    Ok(())
}
