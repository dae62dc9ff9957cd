use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::wm_planner::OpModel;
use super::{AgentError, AgentKind};
use crate::env::Action;

/// Current checkpoint schema version. Newer versions are rejected on load.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub env_steps: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LearnedState {
    HashQ {
        /// Keyed by grid digest.
        #[serde(with = "digest_keys")]
        table: BTreeMap<u64, [f64; 5]>,
    },
    SeqPolicy {
        logits: Vec<[f64; 5]>,
        baselines: Vec<f64>,
        baseline_counts: Vec<u64>,
    },
    WmPlanner {
        model: OpModel,
        rule: Option<Vec<Action>>,
        rule_fingerprint: Option<u64>,
    },
}

/// Digest-keyed maps as JSON objects with decimal string keys. Integer keys
/// do not survive the buffering serde does for tagged enums.
pub(crate) mod digest_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<V: Serialize, S: Serializer>(map: &BTreeMap<u64, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v)))
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, V>, D::Error> {
        BTreeMap::<String, V>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| k.parse::<u64>().map(|k| (k, v)).map_err(|_| D::Error::custom(format!("bad digest key `{k}`"))))
            .collect()
    }
}

/// Persisted agent state, stored as a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format_version: u32,
    pub agent_kind: AgentKind,
    pub meta: TrainingMeta,
    pub state: LearnedState,
}

impl AgentCheckpoint {
    pub fn new(agent_kind: AgentKind, meta: TrainingMeta, state: LearnedState) -> Self {
        Self { format_version: CHECKPOINT_VERSION, agent_kind, meta, state }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, AgentError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| AgentError::MalformedCheckpoint(e.to_string()))?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| AgentError::MalformedCheckpoint("missing `format_version`".into()))?;
        if version > CHECKPOINT_VERSION as u64 {
            return Err(AgentError::UnsupportedVersion {
                found: version.min(u32::MAX as u64) as u32,
                supported: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| AgentError::MalformedCheckpoint(e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), AgentError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, AgentError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub(crate) fn expect_kind(&self, expected: AgentKind) -> Result<(), AgentError> {
        if self.agent_kind != expected {
            return Err(AgentError::CheckpointKindMismatch { expected, found: self.agent_kind });
        }
        Ok(())
    }
}
