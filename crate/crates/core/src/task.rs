//! Benchmark rules, seeded augmentation of demo/eval sets, and ARC task files.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::grid::{self, Grid, GridError, MAX_SIDE, NUM_COLORS};

/// Resampling attempts before a grid draw gives up.
pub const MAX_SAMPLE_ATTEMPTS: usize = 1_000;
/// Side range used by the `NxN` built-in tasks.
pub const DEFAULT_VARYING: SizeSpec = SizeSpec::Varying { min: 2, max: 10 };

/// RNG stream of `seed` used for demo draws.
pub const DEMO_STREAM: u64 = 0;
/// RNG stream of `seed` used for eval draws.
pub const EVAL_STREAM: u64 = 1;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("could not draw a valid grid after {0} attempts")]
    SamplingExhausted(usize),
    #[error("invalid size spec: {0}")]
    InvalidSize(String),
    #[error("malformed task document: {0}")]
    MalformedTask(String),
    #[error("unknown task `{0}` (built-in tasks: flip-d-3x3, flip-d-NxN, rotate-ccw-3x3, flip-h-NxN)")]
    UnknownTask(String),
    #[error("a task needs at least one demo")]
    NoDemos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Diagonal {
    Main,
    Anti,
}

/// A benchmark transformation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    DiagonalFlip(Diagonal),
    RotateCcw,
    HorizontalFlip,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::DiagonalFlip(Diagonal::Main),
        Rule::DiagonalFlip(Diagonal::Anti),
        Rule::RotateCcw,
        Rule::HorizontalFlip,
    ];
}

/// Applies `rule` to `g`.
pub fn apply_rule(rule: Rule, g: &Grid) -> Grid {
    match rule {
        Rule::DiagonalFlip(Diagonal::Main) => grid::transpose(g),
        Rule::DiagonalFlip(Diagonal::Anti) => grid::anti_transpose(g),
        Rule::RotateCcw => grid::rotate270(g),
        Rule::HorizontalFlip => grid::flip_h(g),
    }
}

/// Side lengths of generated square grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeSpec {
    Fixed(usize),
    Varying { min: usize, max: usize },
}

impl SizeSpec {
    pub fn validate(self) -> Result<Self, TaskError> {
        let (lo, hi) = self.bounds();
        if lo == 0 || lo > hi || hi > MAX_SIDE {
            return Err(TaskError::InvalidSize(format!("{self:?}")));
        }
        Ok(self)
    }

    pub fn bounds(self) -> (usize, usize) {
        match self {
            SizeSpec::Fixed(n) => (n, n),
            SizeSpec::Varying { min, max } => (min, max),
        }
    }
}

/// One demo or eval example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub input: Grid,
    pub output: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    /// Absent for ingested ARC files.
    pub rule: Option<Rule>,
    pub demos: Vec<Pair>,
    pub evals: Vec<Pair>,
    pub seed: u64,
}

impl TaskSpec {
    /// Fraction of eval inputs that also occur among the demo inputs.
    pub fn overlap_fraction(&self) -> f64 {
        if self.evals.is_empty() {
            return 0.0;
        }
        let demo_inputs: HashSet<&Grid> = self.demos.iter().map(|p| &p.input).collect();
        let hits = self.evals.iter().filter(|p| demo_inputs.contains(&p.input)).count();
        hits as f64 / self.evals.len() as f64
    }

    /// ARC task JSON (`train` / `test` arrays).
    pub fn to_arc_json(&self) -> Value {
        let pairs = |ps: &[Pair]| -> Vec<Value> {
            ps.iter().map(|p| json!({ "input": p.input, "output": p.output })).collect()
        };
        json!({ "train": pairs(&self.demos), "test": pairs(&self.evals) })
    }
}

/// Seeded RNG for stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a square grid with i.i.d. uniform colors, rejecting grids the rule leaves unchanged.
pub fn sample_grid<R: Rng + ?Sized>(size: SizeSpec, rule: Rule, rng: &mut R) -> Result<Grid, TaskError> {
    let (lo, hi) = size.validate()?.bounds();
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let n = rng.random_range(lo..=hi);
        let cells = (0..n * n).map(|_| rng.random_range(0..NUM_COLORS as u8)).collect();
        let g = Grid::new(n, n, cells)?;
        if apply_rule(rule, &g) != g {
            return Ok(g);
        }
    }
    Err(TaskError::SamplingExhausted(MAX_SAMPLE_ATTEMPTS))
}

/// Generates a rule-consistent task with `n_demos` demos and `n_evals`
/// distinct eval inputs, deterministically from `seed`.
pub fn generate_task(
    task_id: impl Into<String>,
    rule: Rule,
    size: SizeSpec,
    n_demos: usize,
    n_evals: usize,
    seed: u64,
) -> Result<TaskSpec, TaskError> {
    if n_demos == 0 {
        return Err(TaskError::NoDemos);
    }
    let pair = |g: Grid| Pair { output: apply_rule(rule, &g), input: g };

    let mut demo_rng = substream(seed, DEMO_STREAM);
    let demos = (0..n_demos)
        .map(|_| sample_grid(size, rule, &mut demo_rng).map(pair))
        .collect::<Result<Vec<_>, _>>()?;

    let mut eval_rng = substream(seed, EVAL_STREAM);
    let mut seen = HashSet::with_capacity(n_evals);
    let mut evals = Vec::with_capacity(n_evals);
    let mut dup_streak = 0;
    while evals.len() < n_evals {
        let g = sample_grid(size, rule, &mut eval_rng)?;
        if seen.insert(g.clone()) {
            dup_streak = 0;
            evals.push(pair(g));
        } else {
            dup_streak += 1;
            if dup_streak >= MAX_SAMPLE_ATTEMPTS {
                return Err(TaskError::SamplingExhausted(MAX_SAMPLE_ATTEMPTS));
            }
        }
    }

    Ok(TaskSpec { task_id: task_id.into(), rule: Some(rule), demos, evals, seed })
}

/// Reads an ARC task document: `{"train": [{"input", "output"}...], "test": [...]}`.
pub fn load_arc_task(task_id: impl Into<String>, document: &str) -> Result<TaskSpec, TaskError> {
    let doc: Value =
        serde_json::from_str(document).map_err(|e| TaskError::MalformedTask(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| TaskError::MalformedTask("top level must be an object".into()))?;
    let read_pairs = |key: &str| -> Result<Vec<Pair>, TaskError> {
        let arr = obj
            .get(key)
            .ok_or_else(|| TaskError::MalformedTask(format!("missing `{key}`")))?
            .as_array()
            .ok_or_else(|| TaskError::MalformedTask(format!("`{key}` must be an array")))?;
        arr.iter()
            .enumerate()
            .map(|(i, entry)| {
                let grid_at = |field: &str| -> Result<Grid, TaskError> {
                    let v = entry
                        .get(field)
                        .ok_or_else(|| TaskError::MalformedTask(format!("{key}[{i}] has no `{field}`")))?;
                    Ok(grid::parse_grid(&v.to_string())?)
                };
                Ok(Pair { input: grid_at("input")?, output: grid_at("output")? })
            })
            .collect()
    };
    Ok(TaskSpec {
        task_id: task_id.into(),
        rule: None,
        demos: read_pairs("train")?,
        evals: read_pairs("test")?,
        seed: 0,
    })
}

/// The four benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTask {
    FlipD3x3,
    FlipDNxN,
    RotateCcw3x3,
    FlipHNxN,
}

impl BuiltinTask {
    pub const ALL: [BuiltinTask; 4] =
        [BuiltinTask::FlipD3x3, BuiltinTask::FlipDNxN, BuiltinTask::RotateCcw3x3, BuiltinTask::FlipHNxN];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTask::FlipD3x3 => "flip-d-3x3",
            BuiltinTask::FlipDNxN => "flip-d-NxN",
            BuiltinTask::RotateCcw3x3 => "rotate-ccw-3x3",
            BuiltinTask::FlipHNxN => "flip-h-NxN",
        }
    }

    pub fn rule(self) -> Rule {
        match self {
            BuiltinTask::FlipD3x3 | BuiltinTask::FlipDNxN => Rule::DiagonalFlip(Diagonal::Main),
            BuiltinTask::RotateCcw3x3 => Rule::RotateCcw,
            BuiltinTask::FlipHNxN => Rule::HorizontalFlip,
        }
    }

    pub fn size(self) -> SizeSpec {
        match self {
            BuiltinTask::FlipD3x3 | BuiltinTask::RotateCcw3x3 => SizeSpec::Fixed(3),
            BuiltinTask::FlipDNxN | BuiltinTask::FlipHNxN => DEFAULT_VARYING,
        }
    }

    pub fn generate(self, n_demos: usize, n_evals: usize, seed: u64) -> Result<TaskSpec, TaskError> {
        generate_task(self.name(), self.rule(), self.size(), n_demos, n_evals, seed)
    }
}

impl fmt::Display for BuiltinTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinTask {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BuiltinTask::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| TaskError::UnknownTask(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_grid;

    #[test]
    fn apply_rule_delegates() {
        let g = parse_grid("[[1,2],[3,4]]").unwrap();
        assert_eq!(apply_rule(Rule::HorizontalFlip, &parse_grid("[[1,2]]").unwrap()), parse_grid("[[2,1]]").unwrap());
        assert_eq!(apply_rule(Rule::RotateCcw, &g), parse_grid("[[2,4],[1,3]]").unwrap());
        assert_eq!(apply_rule(Rule::DiagonalFlip(Diagonal::Main), &g), parse_grid("[[1,3],[2,4]]").unwrap());
        assert_eq!(apply_rule(Rule::DiagonalFlip(Diagonal::Anti), &g), parse_grid("[[4,2],[3,1]]").unwrap());
    }

    #[test]
    fn sample_grid_fixed_and_degenerate() {
        let mut rng = substream(3, 0);
        for rule in Rule::ALL {
            let g = sample_grid(SizeSpec::Fixed(3), rule, &mut rng).unwrap();
            assert_eq!(g.dims(), (3, 3));
            assert_ne!(apply_rule(rule, &g), g);
        }
        let err = sample_grid(SizeSpec::Fixed(1), Rule::DiagonalFlip(Diagonal::Main), &mut rng);
        assert!(matches!(err, Err(TaskError::SamplingExhausted(_))));
    }

    #[test]
    fn sample_grid_seeded() {
        let size = SizeSpec::Varying { min: 2, max: 10 };
        let a = sample_grid(size, Rule::HorizontalFlip, &mut substream(42, 0)).unwrap();
        let b = sample_grid(size, Rule::HorizontalFlip, &mut substream(42, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_sizes_rejected() {
        for bad in [SizeSpec::Fixed(0), SizeSpec::Fixed(31), SizeSpec::Varying { min: 5, max: 4 }] {
            assert!(matches!(bad.validate(), Err(TaskError::InvalidSize(_))));
        }
    }

    #[test]
    fn generate_default_counts() {
        let task = generate_task("t", Rule::HorizontalFlip, SizeSpec::Fixed(3), 1000, 100, 9).unwrap();
        assert_eq!(task.demos.len(), 1000);
        assert_eq!(task.evals.len(), 100);
        for p in task.demos.iter().chain(&task.evals) {
            assert_eq!(p.output, grid::flip_h(&p.input));
            assert_ne!(p.input, p.output);
        }
        let again = generate_task("t", Rule::HorizontalFlip, SizeSpec::Fixed(3), 1000, 100, 9).unwrap();
        assert_eq!(task, again);
    }

    #[test]
    fn generate_varying_sides_and_distinct_evals() {
        let task = generate_task("t", Rule::DiagonalFlip(Diagonal::Main), DEFAULT_VARYING, 10, 5, 1).unwrap();
        for p in task.demos.iter().chain(&task.evals) {
            assert!(p.input.is_square());
            assert!((2..=10).contains(&p.input.rows()));
        }
        let distinct: HashSet<_> = task.evals.iter().map(|p| &p.input).collect();
        assert_eq!(distinct.len(), task.evals.len());
    }

    #[test]
    fn small_grid_space_still_yields_distinct_evals() {
        let task = generate_task("t", Rule::RotateCcw, SizeSpec::Fixed(2), 1, 100, 5).unwrap();
        let distinct: HashSet<_> = task.evals.iter().map(|p| &p.input).collect();
        assert_eq!(distinct.len(), 100);
        assert!(matches!(generate_task("t", Rule::RotateCcw, SizeSpec::Fixed(3), 0, 1, 5), Err(TaskError::NoDemos)));
    }

    #[test]
    fn load_arc_examples() {
        let t = load_arc_task("x", r#"{"train":[{"input":[[1]],"output":[[2]]}],"test":[]}"#).unwrap();
        assert_eq!(t.demos.len(), 1);
        assert!(t.evals.is_empty());
        assert!(t.rule.is_none());
        assert!(matches!(load_arc_task("x", r#"{"test":[]}"#), Err(TaskError::MalformedTask(_))));
        let ragged = r#"{"train":[{"input":[[1,2],[3]],"output":[[2]]}],"test":[]}"#;
        assert!(matches!(load_arc_task("x", ragged), Err(TaskError::Grid(GridError::RaggedRows { .. }))));
        assert!(matches!(load_arc_task("x", "not json"), Err(TaskError::MalformedTask(_))));
    }

    #[test]
    fn arc_json_export_reloads() {
        let task = BuiltinTask::FlipDNxN.generate(4, 3, 2).unwrap();
        let reloaded = load_arc_task("flip-d-NxN", &task.to_arc_json().to_string()).unwrap();
        assert_eq!(reloaded.demos, task.demos);
        assert_eq!(reloaded.evals, task.evals);
    }

    #[test]
    fn builtin_names() {
        for t in BuiltinTask::ALL {
            assert_eq!(t.name().parse::<BuiltinTask>().unwrap(), t);
        }
        assert!(matches!("nope".parse::<BuiltinTask>(), Err(TaskError::UnknownTask(_))));
    }

    #[test]
    fn overlap_fraction_counts_shared_inputs() {
        let mut task = BuiltinTask::FlipD3x3.generate(5, 4, 0).unwrap();
        assert_eq!(task.overlap_fraction(), 0.0);
        task.evals[0] = task.demos[0].clone();
        assert_eq!(task.overlap_fraction(), 0.25);
    }
}
