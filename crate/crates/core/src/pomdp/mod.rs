//! POMDP data model: transition tensors, Gaussian observation models,
//! trajectories, and ground-truth simulation environments.
//!
//! Observations live in `R^d`. A trajectory holds `T` observations and
//! `T - 1` actions; `actions[t]` is taken after observing
//! `observations[t]` and conditions the transition into `observations[t + 1]`.

mod env;
mod gaussian;
mod validate;

pub use env::{sample_trajectory, sample_trajectory_with_states, BetaParams, GroundTruthEnv, Policy};
pub use gaussian::{gaussian_log_density, regularize_covariance, Gaussian};
pub use validate::{validate_model, Violation};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for probability-vector sums.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Row-stochastic tensor `T(s, a, s')` stored densely in `(s, a, s')` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Vec<f64>>>", into = "Vec<Vec<Vec<f64>>>")]
pub struct TransitionTensor {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TransitionTensor {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![0.0; num_states * num_actions * num_states],
        }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_states as f64;
        Self {
            num_states,
            num_actions,
            probs: vec![p; num_states * num_actions * num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.num_actions + a) * self.num_states
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize, next: usize) -> f64 {
        self.probs[self.offset(s, a) + next]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, next: usize, value: f64) {
        let o = self.offset(s, a);
        self.probs[o + next] = value;
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let o = self.offset(s, a);
        &self.probs[o..o + self.num_states]
    }

    pub fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let o = self.offset(s, a);
        let n = self.num_states;
        &mut self.probs[o..o + n]
    }

    /// All entries in `(s, a, s')` order.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    /// Iterates over `(s, a)` pairs in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, &[f64])> + '_ {
        let na = self.num_actions;
        self.probs
            .chunks(self.num_states.max(1))
            .enumerate()
            .map(move |(i, row)| (i / na, i % na, row))
    }

    /// Reorders states so that new state `i` is old state `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::zeros(self.num_states, self.num_actions);
        for (new_s, &old_s) in order.iter().enumerate() {
            for a in 0..self.num_actions {
                for (new_n, &old_n) in order.iter().enumerate() {
                    out.set(new_s, a, new_n, self.get(old_s, a, old_n));
                }
            }
        }
        out
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect())
            .collect()
    }
}

impl TryFrom<Vec<Vec<Vec<f64>>>> for TransitionTensor {
    type Error = Error;

    fn try_from(nested: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_states = nested.len();
        let num_actions = nested.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(num_states * num_actions * num_states);
        for per_action in &nested {
            if per_action.len() != num_actions {
                return Err(Error::DimensionMismatch {
                    what: "transition actions",
                    expected: num_actions,
                    actual: per_action.len(),
                });
            }
            for row in per_action {
                if row.len() != num_states {
                    return Err(Error::DimensionMismatch {
                        what: "transition row",
                        expected: num_states,
                        actual: row.len(),
                    });
                }
                probs.extend_from_slice(row);
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            probs,
        })
    }
}

impl From<TransitionTensor> for Vec<Vec<Vec<f64>>> {
    fn from(t: TransitionTensor) -> Self {
        t.to_nested()
    }
}

/// Learnable POMDP parameters: transitions plus one multivariate Gaussian
/// observation model per state. The initial distribution is fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PomdpModelFile", into = "PomdpModelFile")]
pub struct PomdpModel {
    pub transitions: TransitionTensor,
    pub obs_means: Vec<DVector<f64>>,
    pub obs_covs: Vec<DMatrix<f64>>,
    pub initial_dist: Vec<f64>,
    pub state_labels: Vec<String>,
}

impl PomdpModel {
    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_means.first().map_or(0, DVector::len)
    }

    /// Precomputes a Gaussian emitter per state.
    pub fn emitters(&self) -> Result<Vec<Gaussian>> {
        self.obs_means
            .iter()
            .zip(&self.obs_covs)
            .enumerate()
            .map(|(s, (m, c))| Gaussian::for_state(s, m.clone(), c))
            .collect()
    }

    /// Relabels states so that new state `i` is old state `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            transitions: self.transitions.permuted(order),
            obs_means: order.iter().map(|&i| self.obs_means[i].clone()).collect(),
            obs_covs: order.iter().map(|&i| self.obs_covs[i].clone()).collect(),
            initial_dist: order.iter().map(|&i| self.initial_dist[i]).collect(),
            state_labels: order.iter().map(|&i| self.state_labels[i].clone()).collect(),
        }
    }

    /// Largest absolute difference over every parameter.
    pub fn max_abs_diff(&self, other: &PomdpModel) -> f64 {
        let mut d = 0.0_f64;
        for (a, b) in self
            .transitions
            .as_slice()
            .iter()
            .zip(other.transitions.as_slice())
        {
            d = d.max((a - b).abs());
        }
        for (a, b) in self.obs_means.iter().zip(&other.obs_means) {
            d = d.max((a - b).amax());
        }
        for (a, b) in self.obs_covs.iter().zip(&other.obs_covs) {
            d = d.max((a - b).amax());
        }
        d
    }
}

pub fn default_state_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("state_{i}")).collect()
}

pub fn uniform_dist(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// On-disk layout of a [`PomdpModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PomdpModelFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub obs_dim: usize,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub obs_means: Vec<Vec<f64>>,
    pub obs_covs: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
    #[serde(default)]
    pub state_labels: Vec<String>,
}

impl From<PomdpModel> for PomdpModelFile {
    fn from(m: PomdpModel) -> Self {
        let d = m.obs_dim();
        Self {
            num_states: m.num_states(),
            num_actions: m.num_actions(),
            obs_dim: d,
            transitions: m.transitions.to_nested(),
            obs_means: m.obs_means.iter().map(|v| v.iter().copied().collect()).collect(),
            obs_covs: m
                .obs_covs
                .iter()
                .map(|c| (0..d).map(|i| c.row(i).iter().copied().collect()).collect())
                .collect(),
            initial_dist: m.initial_dist,
            state_labels: m.state_labels,
        }
    }
}

impl TryFrom<PomdpModelFile> for PomdpModel {
    type Error = Error;

    fn try_from(f: PomdpModelFile) -> Result<Self> {
        let transitions = TransitionTensor::try_from(f.transitions)?;
        let check = |what, expected, actual| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                })
            }
        };
        check("num_states", f.num_states, transitions.num_states())?;
        check("num_actions", f.num_actions, transitions.num_actions())?;
        check("obs_means", f.num_states, f.obs_means.len())?;
        check("obs_covs", f.num_states, f.obs_covs.len())?;
        check("initial_dist", f.num_states, f.initial_dist.len())?;
        let d = f.obs_dim;
        let mut obs_means = Vec::with_capacity(f.num_states);
        for m in f.obs_means {
            check("obs_means[s]", d, m.len())?;
            obs_means.push(DVector::from_vec(m));
        }
        let mut obs_covs = Vec::with_capacity(f.num_states);
        for c in f.obs_covs {
            check("obs_covs[s]", d, c.len())?;
            for r in &c {
                check("obs_covs[s][j]", d, r.len())?;
            }
            obs_covs.push(DMatrix::from_fn(d, d, |i, j| c[i][j]));
        }
        let state_labels = if f.state_labels.is_empty() {
            default_state_labels(f.num_states)
        } else {
            check("state_labels", f.num_states, f.state_labels.len())?;
            f.state_labels
        };
        Ok(Self {
            transitions,
            obs_means,
            obs_covs,
            initial_dist: f.initial_dist,
            state_labels,
        })
    }
}

/// One action-observation sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Checks the alignment and dimensional invariants.
    pub fn check(&self, num_actions: usize, obs_dim: usize) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "trajectory length",
                expected: 1,
                actual: 0,
            });
        }
        if self.actions.len() + 1 != self.observations.len() {
            return Err(Error::DimensionMismatch {
                what: "actions per trajectory",
                expected: self.observations.len() - 1,
                actual: self.actions.len(),
            });
        }
        if let Some(&a) = self.actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::DimensionMismatch {
                what: "action index bound",
                expected: num_actions,
                actual: a,
            });
        }
        if let Some(o) = self.observations.iter().find(|o| o.len() != obs_dim) {
            return Err(Error::DimensionMismatch {
                what: "observation dimension",
                expected: obs_dim,
                actual: o.len(),
            });
        }
        Ok(())
    }
}

/// A dataset is an ordered list of trajectories.
pub type Dataset = Vec<Trajectory>;

pub fn total_observations(dataset: &[Trajectory]) -> usize {
    dataset.iter().map(Trajectory::len).sum()
}
