//! Seeded experiment pipelines comparing standard EM with Fuzzy-MAP EM:
//! the synthetic low-data and high-noise regimes and an MG-style pipeline
//! trained on fuzzy-model rollouts.

mod data;
mod init;
mod output;

pub use data::{add_noise, expert_r2, generate_fuzzy_trajectories, sample_dataset};
pub use init::{kmeans, kmeans_init, random_init, KMeans, KMEANS_MAX_ITERATIONS, KMEANS_TOLERANCE};
pub use output::{format_mg_table, format_summary_table, write_outputs, MG_TABLE, RUNS_CSV, SUMMARY_JSON, TABLE_TXT};

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assets;
use crate::em::{run_em, EmConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, KlValue};
use crate::fuzzy::FuzzyModel;
use crate::fuzzy_map::{run_fuzzy_map_em, FuzzyMapConfig, IterationDiagnostics};
use crate::pomdp::{validate_model, GroundTruthEnv, PomdpModel, Policy, Trajectory};
use crate::seeding;

/// Mean gap below which two states count as collapsed.
pub const COLLAPSE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LowData,
    HighNoise,
    MgPipeline,
    Custom,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::LowData => "low_data",
            Regime::HighNoise => "high_noise",
            Regime::MgPipeline => "mg_pipeline",
            Regime::Custom => "custom",
        }
    }

    fn uses_env(self) -> bool {
        self != Regime::MgPipeline
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "em")]
    Em,
    #[serde(rename = "fuzzy-map")]
    FuzzyMap,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Em => "em",
            Algorithm::FuzzyMap => "fuzzy-map",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub num_trajectories: usize,
    pub horizon: usize,
    /// Standard deviation of the additive observation noise.
    pub noise_sigma: f64,
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub seeds: Vec<u64>,
    pub policy: Policy,
    /// Ground-truth environment; the shipped one when absent.
    pub env_file: Option<PathBuf>,
    /// Expert model; the shipped one for the regime when absent.
    pub fuzzy_model_file: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    /// Random restarts per seed for the environment regimes.
    pub restarts: usize,
    /// Latent states to learn; defaults to the environment's, or 2 for MG.
    pub num_states: Option<usize>,
    /// Noise on fuzzy-model rollouts in the MG pipeline.
    pub generation_noise_sigma: f64,
    pub final_standard_em_iterations: usize,
    pub matchant_samples: usize,
    /// Fresh environment trajectories used to score the expert model.
    pub expert_holdout_trajectories: usize,
    pub em: EmConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Regime::LowData, 20)
    }
}

impl ExperimentConfig {
    /// Defaults for each regime with seeds `0..num_seeds`.
    pub fn preset(regime: Regime, num_seeds: u64) -> Self {
        let base = Self {
            regime,
            num_trajectories: 3,
            horizon: 5,
            noise_sigma: 0.0,
            lambda_t: 0.1,
            lambda_o: 0.05,
            seeds: (0..num_seeds).collect(),
            policy: Policy::UniformRandom,
            env_file: None,
            fuzzy_model_file: None,
            out_dir: None,
            restarts: 5,
            num_states: None,
            generation_noise_sigma: 0.05,
            final_standard_em_iterations: 0,
            matchant_samples: 1000,
            expert_holdout_trajectories: 500,
            em: EmConfig::default(),
        };
        match regime {
            Regime::LowData | Regime::Custom => base,
            Regime::HighNoise => Self {
                num_trajectories: 10,
                noise_sigma: 0.5,
                ..base
            },
            Regime::MgPipeline => Self {
                num_trajectories: 40,
                horizon: 9,
                lambda_t: 0.05,
                lambda_o: 0.05,
                restarts: 1,
                num_states: Some(2),
                final_standard_em_iterations: 1,
                ..base
            },
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.num_trajectories == 0 || self.horizon == 0 {
            return bad("num_trajectories and horizon must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative");
        }
        if !(self.generation_noise_sigma >= 0.0 && self.generation_noise_sigma.is_finite()) {
            return bad("generation_noise_sigma must be finite and non-negative");
        }
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        if self.num_states == Some(0) {
            return bad("num_states must be positive");
        }
        self.fuzzy_config(0, 0).check()?;
        self.em.check()
    }

    fn fuzzy_config(&self, seed: u64, restart: usize) -> FuzzyMapConfig {
        FuzzyMapConfig {
            lambda_t: self.lambda_t,
            lambda_o: self.lambda_o,
            matchant_samples: self.matchant_samples,
            seed: seeding::derive_seed(seed, "matchant", &[restart as u64]),
            final_standard_em_iterations: self.final_standard_em_iterations,
        }
    }
}

/// One algorithm's best run on one seed.
#[derive(Clone, Debug)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub model: PomdpModel,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    /// Index of the restart that was kept.
    pub restart: usize,
    pub eval: Option<EvalReport>,
    pub prior_mass_ratios: Vec<IterationDiagnostics>,
}

impl AlgorithmRun {
    pub fn final_loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Clone, Debug)]
pub struct SeedResult {
    pub seed: u64,
    pub dataset: Vec<Trajectory>,
    /// Em first, then Fuzzy-MAP; failures carry the error text.
    pub runs: Vec<(Algorithm, std::result::Result<AlgorithmRun, String>)>,
}

impl SeedResult {
    pub fn run(&self, algorithm: Algorithm) -> Option<&AlgorithmRun> {
        self.runs
            .iter()
            .find(|(a, _)| *a == algorithm)
            .and_then(|(_, r)| r.as_ref().ok())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub algorithm: Option<Algorithm>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub completed: usize,
    pub median_l1_avg: Option<f64>,
    pub median_l1_total: Option<f64>,
    /// Aligned with [`RegimeSummary::state_labels`].
    pub median_kl: Vec<KlValue>,
    pub median_final_loglik: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Seeds where both algorithms produced an evaluated model.
    pub paired_seeds: usize,
    /// Fraction of paired seeds where Fuzzy-MAP has strictly lower L1.
    pub l1_win_rate: f64,
    /// Median over seeds of `(l1_em - l1_fuzzy) / l1_em`.
    pub median_relative_l1_improvement: f64,
    /// Per truth state, fraction of seeds where Fuzzy-MAP has strictly lower KL.
    pub kl_win_rate: Vec<f64>,
}

/// Structural facts about a learned two-or-more-state model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgStructure {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub valid: bool,
    /// Largest per-dimension gap between any two state means.
    pub max_mean_gap: f64,
    /// Largest per-dimension gap in units of the pooled state deviation.
    pub max_separation_sigma: f64,
    pub collapsed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub regime: Regime,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
    pub state_labels: Vec<String>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub comparison: Option<Comparison>,
    /// Holdout R^2 of the expert model per observation dimension.
    pub expert_r2: Option<Vec<f64>>,
    pub mg_structure: Vec<MgStructure>,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug)]
pub struct RegimeReport {
    pub config: ExperimentConfig,
    pub results: Vec<SeedResult>,
    pub summary: RegimeSummary,
    pub action_labels: Vec<String>,
}

/// Inputs resolved from the config.
#[derive(Clone, Debug)]
pub struct RegimeInputs {
    pub env: Option<GroundTruthEnv>,
    pub fuzzy: FuzzyModel,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_inputs(config: &ExperimentConfig) -> Result<RegimeInputs> {
    let env = if config.regime.uses_env() {
        Some(match &config.env_file {
            Some(p) => read_json(p)?,
            None => assets::synthetic_env()?,
        })
    } else {
        None
    };
    let fuzzy = match (&config.fuzzy_model_file, config.regime) {
        (Some(p), _) => read_json(p)?,
        (None, Regime::MgPipeline) => assets::mg_placeholder()?,
        (None, _) => assets::synthetic_expert()?,
    };
    Ok(RegimeInputs { env, fuzzy })
}

/// Training data for one seed.
pub fn seed_dataset(config: &ExperimentConfig, inputs: &RegimeInputs, seed: u64) -> Result<Vec<Trajectory>> {
    let mut rng = seeding::stream(seed, "data", &[]);
    match &inputs.env {
        Some(env) => {
            let clean = sample_dataset(env, &config.policy, config.num_trajectories, config.horizon, &mut rng)?;
            let mut noise_rng = seeding::stream(seed, "noise", &[]);
            add_noise(&clean, config.noise_sigma, &mut noise_rng)
        }
        None => generate_fuzzy_trajectories(
            &inputs.fuzzy,
            config.num_trajectories,
            config.horizon,
            &config.policy,
            config.generation_noise_sigma,
            &mut rng,
        ),
    }
}

fn train(
    algorithm: Algorithm,
    config: &ExperimentConfig,
    fuzzy: &FuzzyModel,
    data: &[Trajectory],
    init: &PomdpModel,
    seed: u64,
    restart: usize,
) -> Result<AlgorithmRun> {
    let em_config = EmConfig {
        seed,
        ..config.em.clone()
    };
    let (model, loglik_trace, converged, prior_mass_ratios) = match algorithm {
        Algorithm::Em => {
            let out = run_em(data, init, &em_config)?;
            (out.model, out.loglik_trace, out.converged, Vec::new())
        }
        Algorithm::FuzzyMap => {
            let out = run_fuzzy_map_em(data, init, fuzzy, &config.fuzzy_config(seed, restart), &em_config)?;
            (out.model, out.loglik_trace, out.converged, out.diagnostics)
        }
    };
    Ok(AlgorithmRun {
        algorithm,
        model,
        loglik_trace,
        converged,
        restart,
        eval: None,
        prior_mass_ratios,
    })
}

/// Runs both algorithms on one seed. Both see the same dataset and the
/// same initial models.
pub fn run_seed(config: &ExperimentConfig, inputs: &RegimeInputs, seed: u64) -> Result<SeedResult> {
    let data = seed_dataset(config, inputs, seed)?;
    let na = inputs.fuzzy.num_actions;
    let ns = config
        .num_states
        .or(inputs.env.as_ref().map(GroundTruthEnv::num_states))
        .unwrap_or(2);
    let inits: Vec<PomdpModel> = match config.regime {
        Regime::MgPipeline => vec![kmeans_init(&data, ns, na, &mut seeding::stream(seed, "init", &[]))?],
        _ => (0..config.restarts)
            .map(|r| random_init(&data, ns, na, config.em.covariance_ridge, &mut seeding::stream(seed, "init", &[r as u64])))
            .collect::<Result<_>>()?,
    };

    let mut runs = Vec::new();
    for algorithm in [Algorithm::Em, Algorithm::FuzzyMap] {
        let mut best: Option<AlgorithmRun> = None;
        let mut last_err = None;
        for (r, init) in inits.iter().enumerate() {
            match train(algorithm, config, &inputs.fuzzy, &data, init, seed, r) {
                Ok(run) => {
                    if best.as_ref().is_none_or(|b| run.final_loglik() > b.final_loglik()) {
                        best = Some(run);
                    }
                }
                Err(e) => {
                    log::warn!("seed {seed}, {}, restart {r}: {e}", algorithm.as_str());
                    last_err = Some(e.to_string());
                }
            }
        }
        let outcome = match best {
            Some(mut run) => {
                if let Some(env) = &inputs.env {
                    match evaluate(&run.model, env) {
                        Ok(report) => run.eval = Some(report),
                        Err(e) => last_err = Some(format!("evaluation failed: {e}")),
                    }
                }
                if run.eval.is_none() && inputs.env.is_some() {
                    Err(last_err.unwrap_or_default())
                } else {
                    Ok(run)
                }
            }
            None => Err(last_err.unwrap_or_else(|| "no restart completed".into())),
        };
        runs.push((algorithm, outcome));
    }
    Ok(SeedResult { seed, dataset: data, runs })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Mean separation facts for a learned model.
pub fn mg_structure(model: &PomdpModel, seed: u64, algorithm: Algorithm) -> MgStructure {
    let ns = model.num_states();
    let d = model.obs_dim();
    let (mut gap, mut sep) = (0.0_f64, 0.0_f64);
    for i in 0..ns {
        for j in i + 1..ns {
            for k in 0..d {
                let g = (model.obs_means[i][k] - model.obs_means[j][k]).abs();
                let pooled = (0.5 * (model.obs_covs[i][(k, k)] + model.obs_covs[j][(k, k)])).sqrt();
                gap = gap.max(g);
                if pooled > 0.0 {
                    sep = sep.max(g / pooled);
                }
            }
        }
    }
    MgStructure {
        seed,
        algorithm,
        valid: validate_model(model).is_empty(),
        max_mean_gap: gap,
        max_separation_sigma: sep,
        collapsed: gap < COLLAPSE_TOLERANCE,
    }
}

pub fn summarize(config: &ExperimentConfig, inputs: &RegimeInputs, results: &[SeedResult], failures: Vec<Failure>) -> Result<RegimeSummary> {
    let state_labels = inputs.env.as_ref().map(|e| e.state_labels.clone()).unwrap_or_default();
    let mut failures = failures;
    for r in results {
        for (alg, outcome) in &r.runs {
            if let Err(e) = outcome {
                failures.push(Failure {
                    seed: r.seed,
                    algorithm: Some(*alg),
                    error: e.clone(),
                });
            }
        }
    }
    failures.sort_by_key(|a| (a.seed, a.algorithm));

    let algorithms = [Algorithm::Em, Algorithm::FuzzyMap]
        .into_iter()
        .map(|alg| {
            let runs: Vec<&AlgorithmRun> = results.iter().filter_map(|r| r.run(alg)).collect();
            let evals: Vec<&EvalReport> = runs.iter().filter_map(|r| r.eval.as_ref()).collect();
            let median_kl = (0..state_labels.len())
                .map(|s| {
                    let v = median(evals.iter().map(|e| e.kl_per_state[s].as_f64()).collect());
                    KlValue::from_f64(v.unwrap_or(f64::NAN))
                })
                .collect();
            AlgorithmSummary {
                algorithm: alg,
                completed: runs.len(),
                median_l1_avg: median(evals.iter().map(|e| e.l1_transition).collect()),
                median_l1_total: median(evals.iter().map(|e| e.l1_transition_total).collect()),
                median_kl,
                median_final_loglik: median(runs.iter().map(|r| r.final_loglik()).collect()),
            }
        })
        .collect();

    let paired: Vec<(&EvalReport, &EvalReport)> = results
        .iter()
        .filter_map(|r| {
            let em = r.run(Algorithm::Em)?.eval.as_ref()?;
            let fz = r.run(Algorithm::FuzzyMap)?.eval.as_ref()?;
            Some((em, fz))
        })
        .collect();
    let comparison = (!paired.is_empty()).then(|| {
        let n = paired.len() as f64;
        let wins = paired.iter().filter(|(e, f)| f.l1_transition < e.l1_transition).count() as f64;
        let rel = paired
            .iter()
            .map(|(e, f)| {
                if e.l1_transition > 0.0 {
                    (e.l1_transition - f.l1_transition) / e.l1_transition
                } else {
                    0.0
                }
            })
            .collect();
        let kl_win_rate = (0..state_labels.len())
            .map(|s| {
                paired
                    .iter()
                    .filter(|(e, f)| f.kl_per_state[s].as_f64() < e.kl_per_state[s].as_f64())
                    .count() as f64
                    / n
            })
            .collect();
        Comparison {
            paired_seeds: paired.len(),
            l1_win_rate: wins / n,
            median_relative_l1_improvement: median(rel).unwrap_or(0.0),
            kl_win_rate,
        }
    });

    let expert_r2 = match &inputs.env {
        Some(env) if config.expert_holdout_trajectories > 0 => {
            let mut rng = seeding::stream(config.seeds[0], "expert_holdout", &[]);
            Some(expert_r2(
                &inputs.fuzzy,
                env,
                &config.policy,
                config.expert_holdout_trajectories,
                config.horizon.max(2),
                &mut rng,
            )?)
        }
        _ => None,
    };

    let mg_structure = if config.regime == Regime::MgPipeline {
        results
            .iter()
            .flat_map(|r| r.runs.iter().filter_map(|(_, o)| o.as_ref().ok()).map(|run| mg_structure(&run.model, r.seed, run.algorithm)))
            .collect()
    } else {
        Vec::new()
    };

    Ok(RegimeSummary {
        regime: config.regime,
        seeds: config.seeds.clone(),
        config: config.clone(),
        state_labels,
        algorithms,
        comparison,
        expert_r2,
        mg_structure,
        failures,
    })
}

/// Runs every seed (in parallel) and aggregates in seed order. Failing
/// seeds are recorded and skipped.
pub fn run_regime(config: &ExperimentConfig) -> Result<RegimeReport> {
    config.check()?;
    let inputs = load_inputs(config)?;
    if let Some(env) = &inputs.env {
        if env.num_actions() != inputs.fuzzy.num_actions || env.obs_dim() != inputs.fuzzy.obs_dim {
            return Err(Error::InvalidConfig("fuzzy model and environment disagree on actions or dimension".into()));
        }
    }
    let outcomes: Vec<(u64, Result<SeedResult>)> = config
        .seeds
        .par_iter()
        .map(|&seed| (seed, run_seed(config, &inputs, seed)))
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                failures.push(Failure {
                    seed,
                    algorithm: None,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = summarize(config, &inputs, &results, failures)?;
    let action_labels = match &inputs.env {
        Some(env) => env.action_labels.clone(),
        None => inputs.fuzzy.action_labels.clone(),
    };
    Ok(RegimeReport {
        config: config.clone(),
        results,
        summary,
        action_labels,
    })
}
