use std::fs;
use std::path::Path;

use fuzzy_pomdp::em::Checkpoint;
use fuzzy_pomdp::eval::EvalReport;
use fuzzy_pomdp::experiment::{ExperimentConfig, RegimeSummary};
use fuzzy_pomdp::fuzzy::FuzzyModel;
use fuzzy_pomdp::fuzzy_map::TrainingReport;
use fuzzy_pomdp::pomdp::{validate_model, GroundTruthEnv, Policy, PomdpModel, Trajectory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Parameters a dataset was generated with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// `gen-data` or `gen-fuzzy-data`.
    pub generator: String,
    pub source: String,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub policy: Policy,
    /// Standard deviation of the noise that was actually applied.
    pub noise_sigma: f64,
    /// The `--noise` value as given, when it was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_arg: Option<f64>,
    #[serde(default)]
    pub noise_is_std: bool,
    pub num_actions: usize,
    pub obs_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_states: Option<usize>,
    #[serde(default)]
    pub action_labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
}

/// A dataset as read back: with or without a manifest.
#[derive(Deserialize)]
#[serde(untagged)]
enum DatasetInput {
    File(DatasetFile),
    Bare { trajectories: Vec<Trajectory> },
    List(Vec<Trajectory>),
}

pub fn read_dataset(path: &Path) -> Result<(Vec<Trajectory>, Option<DatasetManifest>), CliError> {
    let input: DatasetInput = read_json(path)?;
    Ok(match input {
        DatasetInput::File(f) => (f.trajectories, Some(f.manifest)),
        DatasetInput::Bare { trajectories } | DatasetInput::List(trajectories) => (trajectories, None),
    })
}

/// One result of a `sweep` grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub summary: RegimeSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub regime: String,
    pub seeds: Vec<u64>,
    pub grid_t: Vec<f64>,
    pub grid_o: Vec<f64>,
    pub points: Vec<SweepPoint>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline, so reruns are byte-identical.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Reads a model from a checkpoint, a training report or a bare model file.
pub fn read_model(path: &Path) -> Result<PomdpModel, CliError> {
    let value: Value = read_json(path)?;
    let parsed = match detect(&value) {
        Some(Kind::TrainingReport) => serde_json::from_value::<TrainingReport>(value).map(|r| r.model),
        Some(Kind::Checkpoint) => serde_json::from_value::<Checkpoint>(value).map(|c| c.model),
        _ => serde_json::from_value::<PomdpModel>(value),
    };
    parsed.map_err(|e| CliError::Runtime(format!("{}: not a model: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Dataset,
    Env,
    FuzzyModel,
    Model,
    Checkpoint,
    TrainingReport,
    EvalReport,
    Summary,
    Sweep,
    Config,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Dataset => "dataset",
            Kind::Env => "env",
            Kind::FuzzyModel => "fuzzy-model",
            Kind::Model => "model",
            Kind::Checkpoint => "checkpoint",
            Kind::TrainingReport => "training-report",
            Kind::EvalReport => "eval-report",
            Kind::Summary => "summary",
            Kind::Sweep => "sweep",
            Kind::Config => "config",
        }
    }
}

/// Guesses a file's kind from its top-level keys.
pub fn detect(value: &Value) -> Option<Kind> {
    let obj = match value {
        Value::Array(_) => return Some(Kind::Dataset),
        Value::Object(o) => o,
        _ => return None,
    };
    let has = |k: &str| obj.contains_key(k);
    Some(if has("trajectories") {
        Kind::Dataset
    } else if has("rules") && has("variables") {
        Kind::FuzzyModel
    } else if has("beta_params") {
        Kind::Env
    } else if has("algorithm") && has("model") {
        Kind::TrainingReport
    } else if has("transitions") && has("loglik_trace") {
        Kind::Checkpoint
    } else if has("transitions") {
        Kind::Model
    } else if has("state_matching") {
        Kind::EvalReport
    } else if has("points") && has("grid_t") {
        Kind::Sweep
    } else if has("algorithms") && has("seeds") {
        Kind::Summary
    } else if has("regime") {
        Kind::Config
    } else {
        return None;
    })
}

fn typed<T: DeserializeOwned>(value: Value) -> Result<T, String> {
    serde_json::from_value(value).map_err(|e| e.to_string())
}

fn model_ok(m: &PomdpModel) -> Result<(), String> {
    let v = validate_model(m);
    if v.is_empty() {
        Ok(())
    } else {
        Err(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    }
}

fn config_ok(c: &ExperimentConfig) -> Result<(), String> {
    c.check().map_err(|e| e.to_string())
}

/// Parses `value` as `kind` and runs that kind's consistency checks.
pub fn validate_as(kind: Kind, value: Value) -> Result<(), String> {
    match kind {
        Kind::Dataset => {
            let (trajectories, manifest) = match typed::<DatasetInput>(value)? {
                DatasetInput::File(f) => (f.trajectories, Some(f.manifest)),
                DatasetInput::Bare { trajectories } | DatasetInput::List(trajectories) => (trajectories, None),
            };
            let (na, d) = match &manifest {
                Some(m) => (m.num_actions, m.obs_dim),
                None => (
                    trajectories.iter().flat_map(|t| t.actions.iter().copied()).max().map_or(1, |a| a + 1),
                    trajectories.first().and_then(|t| t.observations.first()).map_or(0, Vec::len),
                ),
            };
            for (i, t) in trajectories.iter().enumerate() {
                t.check(na, d).map_err(|e| format!("trajectory {i}: {e}"))?;
            }
            if let Some(m) = manifest {
                if m.n != trajectories.len() {
                    return Err(format!("manifest says {} trajectories, file has {}", m.n, trajectories.len()));
                }
            }
            Ok(())
        }
        Kind::Env => typed::<GroundTruthEnv>(value)?.check().map_err(|e| e.to_string()),
        Kind::FuzzyModel => typed::<FuzzyModel>(value)?.check().map_err(|e| e.to_string()),
        Kind::Model => model_ok(&typed::<PomdpModel>(value)?),
        Kind::Checkpoint => {
            let c = typed::<Checkpoint>(value)?;
            if c.loglik_trace.is_empty() {
                return Err("empty log-likelihood trace".into());
            }
            model_ok(&c.model)
        }
        Kind::TrainingReport => {
            let r = typed::<TrainingReport>(value)?;
            model_ok(&r.model)?;
            model_ok(&r.initial_model)
        }
        Kind::EvalReport => {
            let r = typed::<EvalReport>(value)?;
            let n = r.truth_labels.len();
            if r.state_matching.len() != n || r.kl_per_state.len() != n {
                return Err("state matching and KL lengths disagree with the label count".into());
            }
            Ok(())
        }
        Kind::Summary => config_ok(&typed::<RegimeSummary>(value)?.config),
        Kind::Sweep => {
            let s = typed::<SweepReport>(value)?;
            s.points.iter().try_for_each(|p| config_ok(&p.summary.config))
        }
        Kind::Config => config_ok(&typed::<ExperimentConfig>(value)?),
    }
}
