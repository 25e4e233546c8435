//! Experiment file schema. Every struct rejects unknown fields.

use std::path::{Path, PathBuf};

use rcabench::engine::{Rule, RuleDescription};
use rcabench::lattice::Geometry;
use rcabench::universality::Policy;
use serde::{Deserialize, Serialize};

/// A built-in rule name, a rule file, or an inline rule description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RuleRef {
    Builtin(String),
    File {
        file: PathBuf,
    },
    Inline(Rule),
}

impl RuleRef {
    /// Relative rule files resolve against `base` (the config's directory).
    pub fn load(&self, base: &Path) -> Result<Rule, String> {
        match self {
            RuleRef::Builtin(name) => Rule::builtin(name).map_err(|e| e.to_string()),
            RuleRef::File { file } => {
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                RuleDescription::parse_json(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
            RuleRef::Inline(rule) => Ok(rule.clone()),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rule: RuleRef,
    pub geometry: Geometry,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub experiments: Vec<Experiment>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    #[serde(default)]
    pub axis: usize,
    pub boundary: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hot_width: Option<usize>,
}

/// Random programs instead of exhaustive enumeration; results are not canonical.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heuristic {
    pub samples: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub region: String,
    /// One `input -> output` line per input configuration.
    pub table: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub region: String,
    pub members: Vec<String>,
}

/// One experiment. Regions are `;`-separated coordinates (`0,1;0,2` in 2D),
/// configurations are `<region>=<symbols>` with symbols in cell-index order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        /// Full state text; default is a seeded uniform random state.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<String>,
        /// Configuration on an otherwise zero state.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<String>,
        steps: i64,
    },
    SearchPrep {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        target: String,
        /// Symbols of `c_i` on the target region; absent means unconditional.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<String>,
        window: String,
        max_time: u64,
        #[serde(default)]
        policy: Policy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heuristic: Option<Heuristic>,
    },
    SearchMap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        map: MapSpec,
        window: String,
        max_time: u64,
        #[serde(default)]
        policy: Policy,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heuristic: Option<Heuristic>,
    },
    Prior {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        split: Split,
        target: String,
        time: u64,
        /// Monte-Carlo sample count; exact when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
    },
    PriorSketch {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        split: Split,
        target: String,
        max_time: u64,
    },
    Complexity {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        split: Split,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<MapSpec>,
        window: String,
        max_time: u64,
        max_program: usize,
    },
    Kraft {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        split: Split,
        region: String,
        /// Symbol strings on `region`; every configuration when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        members: Option<Vec<String>>,
        window: String,
        max_time: u64,
        max_program: usize,
    },
    CycleCost {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        target: String,
        tau: u64,
        k: u64,
        /// Averages `F_k` over `tau..=tau_max` when given.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau_max: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
    },
    Influx {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        region: String,
        displacement: Vec<i64>,
        /// Program configuration; empty when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        program: Option<String>,
        time: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<String>,
    },
    Mixing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        sets: Vec<Cylinder>,
        horizon: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<u64>,
    },
    Persistence {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        program: Option<String>,
        horizon: u64,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::SearchPrep { .. } => "search-prep",
            Experiment::SearchMap { .. } => "search-map",
            Experiment::Prior { .. } => "prior",
            Experiment::PriorSketch { .. } => "prior-sketch",
            Experiment::Complexity { .. } => "complexity",
            Experiment::Kraft { .. } => "kraft",
            Experiment::CycleCost { .. } => "cycle-cost",
            Experiment::Influx { .. } => "influx",
            Experiment::Mixing { .. } => "mixing",
            Experiment::Persistence { .. } => "persistence",
        }
    }

    /// The stanza's own id, or `<index>-<kind>`.
    pub fn id(&self, index: usize) -> String {
        let own = match self {
            Experiment::Simulate { id, .. }
            | Experiment::SearchPrep { id, .. }
            | Experiment::SearchMap { id, .. }
            | Experiment::Prior { id, .. }
            | Experiment::PriorSketch { id, .. }
            | Experiment::Complexity { id, .. }
            | Experiment::Kraft { id, .. }
            | Experiment::CycleCost { id, .. }
            | Experiment::Influx { id, .. }
            | Experiment::Mixing { id, .. }
            | Experiment::Persistence { id, .. } => id,
        };
        own.clone().unwrap_or_else(|| format!("{index}-{}", self.kind()))
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("config: {e}"))
}
