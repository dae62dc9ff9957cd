use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use super::{CurveSeries, ExperimentConfig, HarnessError, Protocol, RunOutput, TrainStats};
use crate::agents::AgentKind;

/// Steps at which accuracy first hit 1.0, or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstPerfect(pub Option<u64>);

impl Serialize for FirstPerfect {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(n) => s.serialize_u64(n),
            None => s.serialize_str("never"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub task_id: String,
    pub agent: AgentKind,
    pub seed: u64,
    pub final_accuracy: f64,
    pub steps_to_first_perfect: FirstPerfect,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_shot_accuracy: Option<f64>,
    pub demo_eval_overlap: f64,
    pub train: TrainStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<TrainStats>,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
}

impl Summary {
    pub fn from_run(run: &RunOutput) -> Self {
        let mut notes = Vec::new();
        if matches!(run.config.protocol, Protocol::Transfer { .. }) && run.config.agent_kind == AgentKind::WmPlanner {
            notes.push(
                "wm-planner stores a size-independent action sequence, so transfer between \
                 fixed-size and varying-size tasks is symmetric for it"
                    .to_string(),
            );
        }
        if run.task.overlap_fraction() > 0.0 {
            notes.push("some eval inputs also appear among the demos".to_string());
        }
        Self {
            task_id: run.task.task_id.clone(),
            agent: run.config.agent_kind,
            seed: run.config.seed,
            final_accuracy: run.curve.final_accuracy().unwrap_or(0.0),
            steps_to_first_perfect: FirstPerfect(run.curve.first_perfect()),
            zero_shot_accuracy: run.zero_shot,
            demo_eval_overlap: run.task.overlap_fraction(),
            train: run.stats,
            pretrain: run.pretrain_stats,
            config: run.config.clone(),
            notes,
        }
    }
}

/// `env_steps,accuracy` CSV, one row per sample.
pub fn format_curves(curve: &CurveSeries) -> String {
    let mut out = String::from("env_steps,accuracy\n");
    for s in &curve.samples {
        writeln!(out, "{},{:.4}", s.env_steps, s.accuracy).unwrap();
    }
    out
}

pub fn format_summary(summary: &Summary) -> String {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    text
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub fn write_curves(path: &Path, curve: &CurveSeries) -> Result<(), HarnessError> {
    write_file(path, &format_curves(curve))
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), HarnessError> {
    write_file(path, &format_summary(summary))
}

/// Writes `curves.csv`, `summary.json` and, if asked, `checkpoint.json` into
/// `dir`, returning the paths written.
pub fn write_run(dir: &Path, run: &RunOutput, checkpoint: bool) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_path_buf(), source })?;
    let curves = dir.join("curves.csv");
    let summary = dir.join("summary.json");
    write_curves(&curves, &run.curve)?;
    write_summary(&summary, &run.summary())?;
    let mut written = vec![curves, summary];
    if checkpoint {
        let path = dir.join("checkpoint.json");
        write_file(&path, &(run.agent.save().to_json() + "\n"))?;
        written.push(path);
    }
    Ok(written)
}
