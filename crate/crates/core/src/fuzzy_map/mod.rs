//! Fuzzy-MAP EM: the M-step adds pseudo-counts synthesized from a
//! Takagi-Sugeno expert model, evaluated against the current parameters.

mod pseudocounts;

pub use pseudocounts::{
    consequent_expectation, consequent_likelihood, consequent_log_likelihood, fuzzy_observation_pseudocounts,
    fuzzy_pseudocounts, fuzzy_transition_pseudocounts, match_antecedent, match_antecedent_with_error,
    observation_pseudocounts, rule_tables, transition_pseudocounts, FuzzyPseudoCounts, RuleTables,
};

use serde::{Deserialize, Serialize};

use crate::em::{self, parameters_from_counts, EmConfig, EmOutcome, OnNonPd, SufficientCounts};
use crate::error::{Error, Result};
use crate::fuzzy::FuzzyModel;
use crate::pomdp::{PomdpModel, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuzzyMapConfig {
    pub lambda_t: f64,
    pub lambda_o: f64,
    /// Monte-Carlo draws per `(s, a, r)` for the antecedent match.
    pub matchant_samples: usize,
    pub seed: u64,
    /// Plain EM iterations run after the Fuzzy-MAP phase converges.
    pub final_standard_em_iterations: usize,
}

impl Default for FuzzyMapConfig {
    fn default() -> Self {
        Self {
            lambda_t: 0.1,
            lambda_o: 0.05,
            matchant_samples: 1000,
            seed: 0,
            final_standard_em_iterations: 0,
        }
    }
}

impl FuzzyMapConfig {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [("lambda_t", self.lambda_t), ("lambda_o", self.lambda_o)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.matchant_samples == 0 {
            return Err(Error::InvalidConfig("matchant_samples must be positive".into()));
        }
        Ok(())
    }
}

/// `N + lambda * N_fuzzy` for all four statistics, then the usual parameter
/// formulas. A zero weight skips the addition entirely, so `lambda = 0`
/// reproduces the standard M-step exactly.
pub fn m_step_fuzzy_map(
    empirical: &SufficientCounts,
    fuzzy_counts: &FuzzyPseudoCounts,
    config: &FuzzyMapConfig,
    em_config: &EmConfig,
    previous: &PomdpModel,
) -> Result<PomdpModel> {
    let mut blended = empirical.clone();
    if config.lambda_t != 0.0 {
        if fuzzy_counts.n_t_fuzzy.as_slice().len() != blended.n_t.as_slice().len() {
            return Err(Error::DimensionMismatch {
                what: "fuzzy transition pseudo-counts",
                expected: blended.n_t.as_slice().len(),
                actual: fuzzy_counts.n_t_fuzzy.as_slice().len(),
            });
        }
        for (b, f) in blended.n_t.as_mut_slice().iter_mut().zip(fuzzy_counts.n_t_fuzzy.as_slice()) {
            *b += config.lambda_t * f;
        }
    }
    if config.lambda_o != 0.0 {
        if fuzzy_counts.n_o_fuzzy.len() != blended.n_o.len() {
            return Err(Error::DimensionMismatch {
                what: "fuzzy observation pseudo-counts",
                expected: blended.n_o.len(),
                actual: fuzzy_counts.n_o_fuzzy.len(),
            });
        }
        let l = config.lambda_o;
        for s in 0..blended.n_o.len() {
            blended.n_o[s] += l * fuzzy_counts.n_o_fuzzy[s];
            blended.s_o[s].axpy(l, &fuzzy_counts.s_o_fuzzy[s], 1.0);
            blended.s_o2[s] += &fuzzy_counts.s_o2_fuzzy[s] * l;
        }
    }
    // Without observation pseudo-counts behave exactly like standard EM.
    let on_non_pd = if config.lambda_o != 0.0 {
        OnNonPd::Fail
    } else {
        OnNonPd::KeepPrevious
    };
    parameters_from_counts(&blended, em_config.covariance_ridge, previous, on_non_pd)
}

/// Prior weight relative to the data, per iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// `lambda_t * sum N_T^fuzzy / sum N_T`; `None` without empirical mass.
    pub transition_prior_ratio: Option<f64>,
    /// `lambda_o * sum N_O^fuzzy / sum N_O`; `None` without empirical mass.
    pub observation_prior_ratio: Option<f64>,
    pub total_match: f64,
}

fn ratio(prior: f64, data: f64) -> Option<f64> {
    (data > 0.0).then(|| prior / data)
}

#[derive(Clone, Debug)]
pub struct FuzzyMapOutcome {
    pub model: PomdpModel,
    /// Fuzzy-MAP phase followed by any standard EM polish iterations.
    pub loglik_trace: Vec<f64>,
    /// Number of trace entries belonging to the Fuzzy-MAP phase.
    pub fuzzy_phase_len: usize,
    pub history: Vec<PomdpModel>,
    pub converged: bool,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// `[s][a][r]` antecedent matches under the returned model.
    pub final_match_ant: Vec<Vec<Vec<f64>>>,
}

impl FuzzyMapOutcome {
    pub fn iterations(&self) -> usize {
        self.loglik_trace.len().saturating_sub(1)
    }

    pub fn final_loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Fuzzy-MAP EM. With an empty dataset both weights must be positive and
/// the parameters are driven by the prior alone.
pub fn run_fuzzy_map_em(
    dataset: &[Trajectory],
    init: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    em_config: &EmConfig,
) -> Result<FuzzyMapOutcome> {
    config.check()?;
    em_config.check()?;
    fuzzy.check()?;
    if fuzzy.obs_dim != init.obs_dim() {
        return Err(Error::DimensionMismatch {
            what: "fuzzy model obs_dim",
            expected: init.obs_dim(),
            actual: fuzzy.obs_dim,
        });
    }
    if fuzzy.num_actions != init.num_actions() {
        return Err(Error::DimensionMismatch {
            what: "fuzzy model num_actions",
            expected: init.num_actions(),
            actual: fuzzy.num_actions,
        });
    }
    if dataset.is_empty() && !(config.lambda_t > 0.0 && config.lambda_o > 0.0) {
        return Err(Error::EmptyDataset);
    }

    let mut diagnostics = Vec::new();
    let fuzzy_phase: EmOutcome = em::em_loop(dataset, init, em_config, |k, counts, model| {
        let (pseudo, tables) = fuzzy_pseudocounts(model, fuzzy, config, k)?;
        diagnostics.push(IterationDiagnostics {
            iteration: k,
            transition_prior_ratio: ratio(
                config.lambda_t * pseudo.n_t_fuzzy.as_slice().iter().sum::<f64>(),
                counts.total_transition_mass(),
            ),
            observation_prior_ratio: ratio(
                config.lambda_o * pseudo.n_o_fuzzy.iter().sum::<f64>(),
                counts.total_observation_mass(),
            ),
            total_match: tables.total_match(),
        });
        m_step_fuzzy_map(counts, &pseudo, config, em_config, model)
    })?;
    if !fuzzy_phase.converged {
        // Expected with small MC budgets: fresh MatchAnt draws each
        // iteration keep |dL| above tight tolerances.
        log::info!(
            "Fuzzy-MAP phase stopped at the iteration cap ({}) without converging",
            em_config.max_iterations
        );
    }

    let fuzzy_phase_len = fuzzy_phase.loglik_trace.len();
    let mut loglik_trace = fuzzy_phase.loglik_trace;
    let mut history = fuzzy_phase.history;
    let mut model = fuzzy_phase.model;
    let polish = config.final_standard_em_iterations;
    if polish > 0 {
        if dataset.is_empty() {
            log::warn!("skipping {polish} standard EM iteration(s): no data");
        } else {
            let polish_config = EmConfig {
                max_iterations: polish,
                ..em_config.clone()
            };
            let out = em::run_em(dataset, &model, &polish_config)?;
            // The first entry re-evaluates the model the fuzzy phase ended on.
            loglik_trace.extend_from_slice(&out.loglik_trace[1..]);
            if em_config.record_history {
                history.extend(out.history.into_iter().skip(1));
            }
            model = out.model;
        }
    }

    let final_tables = rule_tables(&model, fuzzy, config, loglik_trace.len())?;
    Ok(FuzzyMapOutcome {
        model,
        loglik_trace,
        fuzzy_phase_len,
        history,
        converged: fuzzy_phase.converged,
        diagnostics,
        final_match_ant: final_tables.match_ant_nested(),
    })
}

/// Everything needed to audit a training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingReport {
    pub algorithm: String,
    pub model: PomdpModel,
    pub iteration: usize,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub em_config: EmConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fuzzy_config: Option<FuzzyMapConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prior_mass_ratios: Vec<IterationDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub match_ant: Vec<Vec<Vec<f64>>>,
    /// How the starting model was obtained, and the model itself.
    pub init: String,
    pub initial_model: PomdpModel,
}

impl TrainingReport {
    pub fn from_em(outcome: &EmOutcome, em_config: &EmConfig, init: &str, initial_model: &PomdpModel) -> Self {
        Self {
            algorithm: "em".into(),
            model: outcome.model.clone(),
            iteration: outcome.iterations(),
            loglik_trace: outcome.loglik_trace.clone(),
            converged: outcome.converged,
            em_config: em_config.clone(),
            fuzzy_config: None,
            prior_mass_ratios: Vec::new(),
            match_ant: Vec::new(),
            init: init.into(),
            initial_model: initial_model.clone(),
        }
    }

    pub fn from_fuzzy_map(
        outcome: &FuzzyMapOutcome,
        config: &FuzzyMapConfig,
        em_config: &EmConfig,
        init: &str,
        initial_model: &PomdpModel,
    ) -> Self {
        Self {
            algorithm: "fuzzy-map".into(),
            model: outcome.model.clone(),
            iteration: outcome.iterations(),
            loglik_trace: outcome.loglik_trace.clone(),
            converged: outcome.converged,
            em_config: em_config.clone(),
            fuzzy_config: Some(config.clone()),
            prior_mass_ratios: outcome.diagnostics.clone(),
            match_ant: outcome.final_match_ant.clone(),
            init: init.into(),
            initial_model: initial_model.clone(),
        }
    }
}
