use nalgebra::{DMatrix, DVector};

use super::Posteriors;
use crate::pomdp::{TransitionTensor, Trajectory};

/// Expected sufficient statistics of the complete-data likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct SufficientCounts {
    /// Expected transition counts, `(s, a, s')`.
    pub n_t: TransitionTensor,
    /// Expected occupancy per state.
    pub n_o: Vec<f64>,
    /// Occupancy-weighted observation sums.
    pub s_o: Vec<DVector<f64>>,
    /// Occupancy-weighted outer-product sums.
    pub s_o2: Vec<DMatrix<f64>>,
}

impl SufficientCounts {
    pub fn zeros(num_states: usize, num_actions: usize, obs_dim: usize) -> Self {
        Self {
            n_t: TransitionTensor::zeros(num_states, num_actions),
            n_o: vec![0.0; num_states],
            s_o: vec![DVector::zeros(obs_dim); num_states],
            s_o2: vec![DMatrix::zeros(obs_dim, obs_dim); num_states],
        }
    }

    pub fn num_states(&self) -> usize {
        self.n_o.len()
    }

    /// `self += weight * other`, entrywise over all four statistics.
    pub fn add_scaled(&mut self, other: &SufficientCounts, weight: f64) {
        for (a, b) in self.n_t.as_mut_slice().iter_mut().zip(other.n_t.as_slice()) {
            *a += weight * b;
        }
        for (a, b) in self.n_o.iter_mut().zip(&other.n_o) {
            *a += weight * b;
        }
        for (a, b) in self.s_o.iter_mut().zip(&other.s_o) {
            a.axpy(weight, b, 1.0);
        }
        for (a, b) in self.s_o2.iter_mut().zip(&other.s_o2) {
            *a += b * weight;
        }
    }

    pub fn total_transition_mass(&self) -> f64 {
        self.n_t.as_slice().iter().sum()
    }

    pub fn total_observation_mass(&self) -> f64 {
        self.n_o.iter().sum()
    }
}

/// Sums expected counts over the dataset in trajectory order.
pub fn accumulate_counts(
    dataset: &[Trajectory],
    posteriors: &[Posteriors],
    num_actions: usize,
    obs_dim: usize,
) -> SufficientCounts {
    let ns = posteriors.first().map_or(0, Posteriors::num_states);
    let mut c = SufficientCounts::zeros(ns, num_actions, obs_dim);
    for (traj, post) in dataset.iter().zip(posteriors) {
        for (t, &a) in traj.actions.iter().enumerate() {
            for s in 0..ns {
                let row = c.n_t.row_mut(s, a);
                for (next, slot) in row.iter_mut().enumerate() {
                    *slot += post.xi_at(t, s, next);
                }
            }
        }
        for (obs, g) in traj.observations.iter().zip(&post.gamma) {
            let o = DVector::from_column_slice(obs);
            let outer = &o * o.transpose();
            for s in 0..ns {
                c.n_o[s] += g[s];
                c.s_o[s].axpy(g[s], &o, 1.0);
                c.s_o2[s] += &outer * g[s];
            }
        }
    }
    c
}
