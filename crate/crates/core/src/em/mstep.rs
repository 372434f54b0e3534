use nalgebra::DMatrix;

use super::{EmConfig, SufficientCounts};
use crate::error::{Error, Result};
use crate::pomdp::{regularize_covariance, PomdpModel, TransitionTensor};

/// Occupancy below which a state keeps its previous observation model.
pub const MIN_STATE_MASS: f64 = 1e-10;

/// How to react to a covariance that is not positive definite after the ridge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum OnNonPd {
    KeepPrevious,
    Fail,
}

/// Turns (possibly augmented) counts into parameters.
pub(crate) fn parameters_from_counts(
    counts: &SufficientCounts,
    ridge: f64,
    previous: &PomdpModel,
    on_non_pd: OnNonPd,
) -> Result<PomdpModel> {
    let ns = previous.num_states();
    let na = previous.num_actions();
    let mut transitions = TransitionTensor::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let row = counts.n_t.row(s, a);
            let sum: f64 = row.iter().sum();
            let out = transitions.row_mut(s, a);
            if sum > 0.0 && sum.is_finite() {
                for (o, &c) in out.iter_mut().zip(row) {
                    *o = c / sum;
                }
            } else {
                log::debug!("no transition mass for (s={s}, a={a}); using uniform row");
                out.fill(1.0 / ns as f64);
            }
        }
    }

    let mut obs_means = Vec::with_capacity(ns);
    let mut obs_covs = Vec::with_capacity(ns);
    for s in 0..ns {
        let n = counts.n_o[s];
        if !(n > MIN_STATE_MASS && n.is_finite()) {
            log::debug!("state {s} has occupancy {n}; keeping previous observation model");
            obs_means.push(previous.obs_means[s].clone());
            obs_covs.push(previous.obs_covs[s].clone());
            continue;
        }
        let mean = &counts.s_o[s] / n;
        let raw: DMatrix<f64> = &counts.s_o2[s] / n - &mean * mean.transpose();
        let cov = regularize_covariance(&raw, ridge);
        if cov.clone().cholesky().is_none() {
            match on_non_pd {
                OnNonPd::Fail => return Err(Error::NotPositiveDefinite { state: Some(s) }),
                OnNonPd::KeepPrevious => {
                    log::warn!("covariance of state {s} lost definiteness; keeping previous covariance");
                    obs_means.push(mean);
                    obs_covs.push(previous.obs_covs[s].clone());
                    continue;
                }
            }
        }
        obs_means.push(mean);
        obs_covs.push(cov);
    }

    Ok(PomdpModel {
        transitions,
        obs_means,
        obs_covs,
        initial_dist: previous.initial_dist.clone(),
        state_labels: previous.state_labels.clone(),
    })
}

/// Maximum-likelihood M-step.
///
/// Rows without transition mass become uniform and states without
/// occupancy keep the observation model of `previous`.
pub fn m_step_standard(counts: &SufficientCounts, config: &EmConfig, previous: &PomdpModel) -> PomdpModel {
    parameters_from_counts(counts, config.covariance_ridge, previous, OnNonPd::KeepPrevious)
        .expect("KeepPrevious never fails")
}
