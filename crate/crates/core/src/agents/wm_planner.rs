//! Model-based agent: learn each action's effect, induce the task rule by
//! searching the learned model, then execute the plan and submit.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::hash::Hasher;
use std::sync::Arc;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Agent, AgentCheckpoint, AgentConfig, AgentError, AgentKind, LearnedState, Mode, TrainingMeta, Transition};
use crate::env::{Action, Observation, Outcome};
use crate::grid::{self, grid_digest, Grid};
use crate::task::Pair;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no action sequence of length <= {max_len} explains every demo")]
    NoRuleFound { max_len: usize },
    #[error("operation model incomplete: no closed form yet for {missing:?}")]
    ModelIncomplete { missing: Vec<Action> },
    #[error("max_len must be at least 1")]
    InvalidMaxLen,
}

/// Closed-form hypotheses an action's learned behavior can be matched against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnownTransform {
    Rotate90,
    Rotate270,
    FlipH,
    FlipV,
}

impl KnownTransform {
    pub const ALL: [KnownTransform; 4] =
        [KnownTransform::Rotate90, KnownTransform::Rotate270, KnownTransform::FlipH, KnownTransform::FlipV];

    pub fn apply(self, g: &Grid) -> Grid {
        match self {
            KnownTransform::Rotate90 => grid::rotate90(g),
            KnownTransform::Rotate270 => grid::rotate270(g),
            KnownTransform::FlipH => grid::flip_h(g),
            KnownTransform::FlipV => grid::flip_v(g),
        }
    }
}

/// What the agent has learned about one transform action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionModel {
    /// Hypotheses consistent with every sample seen so far.
    candidates: Vec<KnownTransform>,
    /// Input digest to observed output.
    #[serde(with = "super::checkpoint::digest_keys")]
    samples: BTreeMap<u64, Grid>,
}

impl Default for ActionModel {
    fn default() -> Self {
        Self { candidates: KnownTransform::ALL.to_vec(), samples: BTreeMap::new() }
    }
}

impl ActionModel {
    /// The closed form, held only while exactly one hypothesis survives.
    pub fn tag(&self) -> Option<KnownTransform> {
        match self.candidates.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    pub fn candidates(&self) -> &[KnownTransform] {
        &self.candidates
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }
}

/// Learned dynamics of the four transform actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpModel {
    actions: [ActionModel; 4],
    max_samples: usize,
    /// Bumped whenever a hypothesis set shrinks.
    revision: u64,
}

/// A 2x3 grid with distinct cells: its image identifies a D4 element uniquely.
fn probe() -> Grid {
    Grid::new(2, 3, vec![0, 1, 2, 3, 4, 5]).expect("probe grid is valid")
}

impl OpModel {
    pub fn new(max_samples: usize) -> Self {
        Self { actions: Default::default(), max_samples, revision: 0 }
    }

    pub fn action(&self, action: Action) -> Option<&ActionModel> {
        self.actions.get(action.ordinal())
    }

    pub fn tag(&self, action: Action) -> Option<KnownTransform> {
        self.action(action).and_then(ActionModel::tag)
    }

    pub fn missing(&self) -> Vec<Action> {
        Action::TRANSFORMS.into_iter().filter(|&a| self.tag(a).is_none()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.missing().is_empty()
    }

    /// Records `input --action--> output`. Submit transitions are ignored.
    pub fn learn(&mut self, input: &Grid, action: Action, output: &Grid) -> Result<(), AgentError> {
        let Some(model) = self.actions.get_mut(action.ordinal()) else {
            return Ok(());
        };
        let key = grid_digest(input);
        match model.samples.get(&key) {
            Some(stored) if stored != output => return Err(AgentError::ContradictorySample { action }),
            Some(_) => {}
            None if model.samples.len() < self.max_samples => {
                model.samples.insert(key, output.clone());
            }
            None => {}
        }
        let before = model.candidates.len();
        model.candidates.retain(|c| &c.apply(input) == output);
        if model.candidates.len() != before {
            self.revision += 1;
        }
        Ok(())
    }

    /// Predicted effect of one action: the closed form when tagged, else a
    /// stored sample for this exact input.
    pub fn predict(&self, action: Action, g: &Grid) -> Option<Grid> {
        let model = self.action(action)?;
        match model.tag() {
            Some(t) => Some(t.apply(g)),
            None => model.samples.get(&grid_digest(g)).cloned(),
        }
    }

    pub fn predict_sequence(&self, sequence: &[Action], g: &Grid) -> Option<Grid> {
        sequence.iter().try_fold(g.clone(), |acc, &a| self.predict(a, &acc))
    }

    /// Breadth-first search over transform sequences (shortest first, then
    /// lexicographic by action ordinal), run entirely on the learned model.
    /// Returns the first sequence mapping every demo input to its output.
    pub fn induce_rule(&self, demos: &[Pair], max_len: usize) -> Result<Vec<Action>, PlanError> {
        if max_len == 0 {
            return Err(PlanError::InvalidMaxLen);
        }
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(PlanError::ModelIncomplete { missing });
        }
        // Sequences composing to the same symmetry behave identically, so each
        // distinct composite is checked against the demos only once.
        let probe = probe();
        let mut verdicts: HashMap<Grid, bool> = HashMap::new();
        let mut queue: VecDeque<(Vec<Action>, Grid)> =
            Action::TRANSFORMS.iter().map(|&a| (vec![a], self.predict(a, &probe).expect("tagged"))).collect();
        while let Some((sequence, image)) = queue.pop_front() {
            let explains = *verdicts.entry(image.clone()).or_insert_with(|| {
                demos
                    .iter()
                    .all(|p| self.predict_sequence(&sequence, &p.input).as_ref() == Some(&p.output))
            });
            if explains {
                return Ok(sequence);
            }
            if sequence.len() < max_len {
                for a in Action::TRANSFORMS {
                    let mut next = sequence.clone();
                    next.push(a);
                    let next_image = self.predict(a, &image).expect("tagged");
                    queue.push_back((next, next_image));
                }
            }
        }
        Err(PlanError::NoRuleFound { max_len })
    }

    /// Shortest imagined sequence (possibly empty) taking `from` to `to`.
    pub fn bridge(&self, from: &Grid, to: &Grid, max_len: usize) -> Option<Vec<Action>> {
        let mut frontier = vec![(Vec::new(), from.clone())];
        for _ in 0..=max_len {
            if let Some((seq, _)) = frontier.iter().find(|(_, g)| g == to) {
                return Some(seq.clone());
            }
            frontier = frontier
                .into_iter()
                .flat_map(|(seq, g)| {
                    Action::TRANSFORMS.into_iter().filter_map(move |a| {
                        let next = self.predict(a, &g)?;
                        let mut s = seq.clone();
                        s.push(a);
                        Some((s, next))
                    })
                })
                .collect();
        }
        None
    }
}

/// An induced action sequence and how far into it the current episode is.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlanState {
    pub sequence: Vec<Action>,
    pub cursor: usize,
}

impl PlanState {
    pub fn new(sequence: Vec<Action>) -> Self {
        Self { sequence, cursor: 0 }
    }

    fn next(&mut self) -> Option<Action> {
        let a = self.sequence.get(self.cursor).copied()?;
        self.cursor += 1;
        Some(a)
    }
}

#[derive(Debug, Clone)]
struct Episode {
    start: Grid,
    plan: Option<PlanState>,
    submitted: bool,
    abandoned: bool,
    explore_cursor: usize,
}

fn demo_fingerprint(demos: &[Pair]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(demos.len() as u64);
    for p in demos {
        h.write_u64(grid_digest(&p.input));
        h.write_u64(grid_digest(&p.output));
    }
    h.finish()
}

#[derive(Debug, Clone)]
pub struct WmPlanner {
    model: OpModel,
    max_len: usize,
    rule: Option<Vec<Action>>,
    rule_fingerprint: Option<u64>,
    failed_induction: Option<(u64, u64)>,
    demos: Arc<Vec<Pair>>,
    demos_fingerprint: u64,
    episode: Option<Episode>,
    meta: TrainingMeta,
}

impl WmPlanner {
    pub fn new(config: &AgentConfig) -> Self {
        Self {
            model: OpModel::new(config.max_samples_per_action),
            max_len: config.max_len,
            rule: None,
            rule_fingerprint: None,
            failed_induction: None,
            demos: Arc::new(Vec::new()),
            demos_fingerprint: demo_fingerprint(&[]),
            episode: None,
            meta: TrainingMeta { env_steps: 0, seed: config.seed },
        }
    }

    pub fn model(&self) -> &OpModel {
        &self.model
    }

    pub fn rule(&self) -> Option<&[Action]> {
        self.rule.as_deref()
    }

    /// Current episode plan, if one exists.
    pub fn plan(&self) -> Option<&PlanState> {
        self.episode.as_ref()?.plan.as_ref()
    }

    pub fn learn(&mut self, input: &Grid, action: Action, output: &Grid) -> Result<(), AgentError> {
        self.model.learn(input, action, output)
    }

    pub fn induce_rule(&self, demos: &[Pair]) -> Result<Vec<Action>, PlanError> {
        self.model.induce_rule(demos, self.max_len)
    }

    /// Makes sure a rule for the current demo set exists, inducing one if the
    /// model allows it. Failed attempts are not retried until the model changes.
    fn ensure_rule(&mut self) -> Option<Vec<Action>> {
        if self.rule_fingerprint == Some(self.demos_fingerprint) {
            if let Some(rule) = &self.rule {
                return Some(rule.clone());
            }
        }
        if !self.model.is_complete() || self.failed_induction == Some((self.demos_fingerprint, self.model.revision)) {
            return None;
        }
        match self.model.induce_rule(&self.demos, self.max_len) {
            Ok(rule) => {
                self.rule = Some(rule.clone());
                self.rule_fingerprint = Some(self.demos_fingerprint);
                Some(rule)
            }
            Err(_) => {
                self.failed_induction = Some((self.demos_fingerprint, self.model.revision));
                None
            }
        }
    }

    /// Gives the running episode a plan from `current`, bridging in
    /// imagination when the episode has already moved off its start grid.
    fn refresh_plan(&mut self, current: &Grid) {
        match &self.episode {
            Some(ep) if ep.plan.is_none() && !ep.abandoned => {}
            _ => return,
        }
        let Some(rule) = self.ensure_rule() else { return };
        let max_len = self.max_len;
        let model = &self.model;
        let ep = self.episode.as_mut().expect("checked above");
        let sequence = if *current == ep.start {
            Some(rule)
        } else {
            model
                .predict_sequence(&rule, &ep.start)
                .and_then(|goal| model.bridge(current, &goal, max_len))
        };
        ep.plan = sequence.map(PlanState::new);
    }
}

impl Agent for WmPlanner {
    fn kind(&self) -> AgentKind {
        AgentKind::WmPlanner
    }

    fn begin_episode(&mut self, obs: &Observation, demos: &[Pair]) -> Result<(), AgentError> {
        if self.episode.is_some() {
            return Err(AgentError::Lifecycle("begin_episode while an episode is running"));
        }
        let fingerprint = demo_fingerprint(demos);
        if fingerprint != self.demos_fingerprint {
            self.demos = Arc::new(demos.to_vec());
            self.demos_fingerprint = fingerprint;
        }
        self.episode = Some(Episode {
            start: obs.grid.clone(),
            plan: None,
            submitted: false,
            abandoned: false,
            explore_cursor: 0,
        });
        self.refresh_plan(&obs.grid);
        Ok(())
    }

    fn select_action(&mut self, _obs: &Observation, _mode: Mode) -> Result<Action, AgentError> {
        let ep = self
            .episode
            .as_mut()
            .ok_or(AgentError::Lifecycle("select_action outside an episode"))?;
        if let Some(plan) = ep.plan.as_mut() {
            if let Some(a) = plan.next() {
                return Ok(a);
            }
            if !ep.submitted {
                ep.submitted = true;
                return Ok(Action::Submit);
            }
        }
        let a = Action::TRANSFORMS[ep.explore_cursor % Action::TRANSFORMS.len()];
        ep.explore_cursor += 1;
        Ok(a)
    }

    fn observe_transition(&mut self, t: &Transition<'_>) -> Result<(), AgentError> {
        if self.episode.is_none() {
            return Err(AgentError::Lifecycle("observe_transition outside an episode"));
        }
        self.meta.env_steps += 1;
        if t.action.is_transform() {
            self.model.learn(&t.obs.grid, t.action, &t.next_obs.grid)?;
        } else if t.outcome == Outcome::Running {
            // A wrong submit: the rule does not hold for this pair.
            let ep = self.episode.as_mut().expect("checked above");
            ep.plan = None;
            ep.abandoned = true;
            self.rule = None;
            self.rule_fingerprint = None;
        }
        if !t.outcome.is_done() {
            self.refresh_plan(&t.next_obs.grid);
        }
        Ok(())
    }

    fn end_episode(&mut self) -> Result<(), AgentError> {
        self.episode
            .take()
            .map(|_| ())
            .ok_or(AgentError::Lifecycle("end_episode without begin_episode"))
    }

    fn save(&self) -> AgentCheckpoint {
        AgentCheckpoint::new(
            AgentKind::WmPlanner,
            self.meta,
            LearnedState::WmPlanner {
                model: self.model.clone(),
                rule: self.rule.clone(),
                rule_fingerprint: self.rule_fingerprint,
            },
        )
    }

    fn load(&mut self, checkpoint: &AgentCheckpoint) -> Result<(), AgentError> {
        checkpoint.expect_kind(AgentKind::WmPlanner)?;
        let LearnedState::WmPlanner { model, rule, rule_fingerprint } = &checkpoint.state else {
            return Err(AgentError::MalformedCheckpoint("wm-planner checkpoint without a model".into()));
        };
        self.model = model.clone();
        self.rule = rule.clone();
        self.rule_fingerprint = *rule_fingerprint;
        self.failed_induction = None;
        self.meta.env_steps = checkpoint.meta.env_steps;
        Ok(())
    }

    fn clone_box(&self) -> Box<dyn Agent> {
        Box::new(self.clone())
    }

    fn snapshot(&self) -> Box<dyn Agent> {
        let mut copy = self.clone();
        copy.episode = None;
        Box::new(copy)
    }
}
