//! Standard EM (Baum-Welch) for action-conditioned POMDPs with Gaussian
//! observation models.

mod counts;
mod forward_backward;
mod mstep;

pub use counts::{accumulate_counts, SufficientCounts};
pub use forward_backward::{forward_backward, Posteriors};
pub use mstep::{m_step_standard, MIN_STATE_MASS};

pub(crate) use forward_backward::forward_backward_with;
pub(crate) use mstep::{parameters_from_counts, OnNonPd};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{PomdpModel, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_iterations: usize,
    /// Stop once `|L_k - L_{k-1}|` falls below this.
    pub loglik_tolerance: f64,
    /// Added to every covariance diagonal after each M-step.
    pub covariance_ridge: f64,
    pub seed: u64,
    /// Keep every intermediate model in [`EmOutcome::history`].
    #[serde(skip)]
    pub record_history: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            loglik_tolerance: 1e-6,
            covariance_ridge: 1e-6,
            seed: 0,
            record_history: false,
        }
    }
}

impl EmConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(self.loglik_tolerance > 0.0) {
            return Err(Error::InvalidConfig("loglik_tolerance must be positive".into()));
        }
        if !(self.covariance_ridge >= 0.0) {
            return Err(Error::InvalidConfig("covariance_ridge must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EmOutcome {
    pub model: PomdpModel,
    /// `loglik_trace[k]` is the data log-likelihood of the k-th model.
    pub loglik_trace: Vec<f64>,
    /// Models `0..=k` when history recording is enabled.
    pub history: Vec<PomdpModel>,
    pub converged: bool,
}

impl EmOutcome {
    pub fn iterations(&self) -> usize {
        self.loglik_trace.len().saturating_sub(1)
    }

    pub fn final_loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs the E-step over every trajectory; returns posteriors and the
/// total log-likelihood summed in dataset order.
pub fn e_step(model: &PomdpModel, dataset: &[Trajectory]) -> Result<(Vec<Posteriors>, f64)> {
    let emitters = model.emitters()?;
    let posteriors = dataset
        .par_iter()
        .map(|traj| forward_backward_with(model, &emitters, traj))
        .collect::<Result<Vec<_>>>()?;
    let total = posteriors.iter().map(|p| p.log_likelihood).sum();
    Ok((posteriors, total))
}

/// Data log-likelihood of `model`.
pub fn log_likelihood(model: &PomdpModel, dataset: &[Trajectory]) -> Result<f64> {
    e_step(model, dataset).map(|(_, l)| l)
}

/// Shared EM driver. `m_step` receives the iteration index, the empirical
/// counts and the current model.
pub(crate) fn em_loop<F>(dataset: &[Trajectory], init: &PomdpModel, config: &EmConfig, mut m_step: F) -> Result<EmOutcome>
where
    F: FnMut(usize, &SufficientCounts, &PomdpModel) -> Result<PomdpModel>,
{
    config.check()?;
    let na = init.num_actions();
    let d = init.obs_dim();
    let mut model = init.clone();
    let mut trace = Vec::new();
    let mut history = Vec::new();

    if dataset.is_empty() {
        // Prior-only: nothing to observe, iterate until parameters settle.
        let counts = SufficientCounts::zeros(init.num_states(), na, d);
        for k in 0..config.max_iterations {
            if config.record_history {
                history.push(model.clone());
            }
            trace.push(0.0);
            let next = m_step(k, &counts, &model).map_err(|e| e.at_iteration(k))?;
            let delta = next.max_abs_diff(&model);
            model = next;
            if delta < config.loglik_tolerance {
                if config.record_history {
                    history.push(model.clone());
                }
                trace.push(0.0);
                return Ok(EmOutcome {
                    model,
                    loglik_trace: trace,
                    history,
                    converged: true,
                });
            }
        }
        return Ok(EmOutcome {
            model,
            loglik_trace: trace,
            history,
            converged: false,
        });
    }

    for traj in dataset {
        traj.check(na, d)?;
    }
    for k in 0..=config.max_iterations {
        let (posteriors, ll) = e_step(&model, dataset).map_err(|e| e.at_iteration(k))?;
        if config.record_history {
            history.push(model.clone());
        }
        trace.push(ll);
        if k > 0 && (ll - trace[k - 1]).abs() < config.loglik_tolerance {
            return Ok(EmOutcome {
                model,
                loglik_trace: trace,
                history,
                converged: true,
            });
        }
        if k == config.max_iterations {
            break;
        }
        let counts = accumulate_counts(dataset, &posteriors, na, d);
        model = m_step(k, &counts, &model).map_err(|e| e.at_iteration(k))?;
    }
    Ok(EmOutcome {
        model,
        loglik_trace: trace,
        history,
        converged: false,
    })
}

/// Standard maximum-likelihood EM.
pub fn run_em(dataset: &[Trajectory], init: &PomdpModel, config: &EmConfig) -> Result<EmOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    em_loop(dataset, init, config, |_, counts, prev| Ok(m_step_standard(counts, config, prev)))
}

/// A model plus its training trace, as written to disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(flatten)]
    pub model: PomdpModel,
    pub iteration: usize,
    pub loglik_trace: Vec<f64>,
}
