//! Model quality against a ground-truth environment: transition L1
//! distance, observation KL divergence and automatic state matching.

mod kl;
mod quadrature;

pub use kl::{
    kl_by_quadrature, kl_observation, kl_observation_mc, kl_observation_raw, KlQuadrature, KlValue,
    DEFAULT_QUADRATURE_NODES, KL_INFINITY_THRESHOLD, MAX_QUADRATURE_DIM,
};
pub use quadrature::{for_each_tensor_node, gauss_legendre, gauss_legendre_on};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::{GroundTruthEnv, PomdpModel, TransitionTensor};

/// Per-row L1 deviation, averaged over rows and summed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Distance {
    pub average: f64,
    pub total: f64,
}

/// `sum_{s'} |est - truth|` per `(s, a)` row.
pub fn l1_transition_distance(est: &TransitionTensor, truth: &TransitionTensor) -> Result<L1Distance> {
    if est.num_states() != truth.num_states() || est.num_actions() != truth.num_actions() {
        return Err(Error::DimensionMismatch {
            what: "transition tensor",
            expected: truth.as_slice().len(),
            actual: est.as_slice().len(),
        });
    }
    let total: f64 = est.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b).abs()).sum();
    let rows = (truth.num_states() * truth.num_actions()) as f64;
    Ok(L1Distance {
        average: total / rows,
        total,
    })
}

/// `cost[l][t]`: raw KL from truth state `t` to learned state `l`.
pub fn matching_costs(learned: &PomdpModel, truth: &GroundTruthEnv) -> Result<Vec<Vec<f64>>> {
    if learned.num_states() != truth.num_states() {
        return Err(Error::StateCountMismatch {
            learned: learned.num_states(),
            truth: truth.num_states(),
        });
    }
    let emitters = learned.emitters()?;
    emitters
        .iter()
        .map(|g| {
            truth
                .beta_params
                .iter()
                .map(|b| kl_observation_raw(b, g, DEFAULT_QUADRATURE_NODES).map(|q| q.estimate))
                .collect()
        })
        .collect()
}

/// Exhaustive search for the assignment minimizing total KL. Returns
/// `mapping[learned] = truth`; among equal totals the lexicographically
/// smallest mapping wins.
pub fn match_states(learned: &PomdpModel, truth: &GroundTruthEnv) -> Result<Vec<usize>> {
    let costs = matching_costs(learned, truth)?;
    Ok(best_assignment(&costs))
}

pub fn best_assignment(costs: &[Vec<f64>]) -> Vec<usize> {
    let total = |p: &[usize]| -> f64 { p.iter().enumerate().map(|(l, &t)| costs[l][t]).sum() };
    let mut perm: Vec<usize> = (0..costs.len()).collect();
    let mut best = perm.clone();
    let mut best_cost = total(&perm);
    while next_permutation(&mut perm) {
        let c = total(&perm);
        if c < best_cost {
            best_cost = c;
            best.clone_from(&perm);
        }
    }
    best
}

// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("successor exists");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Reorders the learned model so that its state `t` corresponds to truth
/// state `t`.
pub fn align_to_truth(learned: &PomdpModel, mapping: &[usize]) -> PomdpModel {
    let mut order = vec![0; mapping.len()];
    for (l, &t) in mapping.iter().enumerate() {
        order[t] = l;
    }
    learned.permuted(&order)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `state_matching[learned] = truth`.
    pub state_matching: Vec<usize>,
    pub truth_labels: Vec<String>,
    /// Per-row averaged L1.
    pub l1_transition: f64,
    pub l1_transition_total: f64,
    /// Indexed by truth state.
    pub kl_per_state: Vec<KlValue>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn kl_for(&self, label: &str) -> Option<KlValue> {
        self.truth_labels.iter().position(|l| l == label).map(|i| self.kl_per_state[i])
    }
}

/// Matches states, then scores transitions and observation models.
pub fn evaluate(learned: &PomdpModel, truth: &GroundTruthEnv) -> Result<EvalReport> {
    let mapping = match_states(learned, truth)?;
    let aligned = align_to_truth(learned, &mapping);
    let l1 = l1_transition_distance(&aligned.transitions, &truth.transitions)?;
    let emitters = aligned.emitters()?;
    let mut notes = Vec::new();
    let mut kl_per_state = Vec::with_capacity(emitters.len());
    for (t, g) in emitters.iter().enumerate() {
        let q = kl_observation_raw(&truth.beta_params[t], g, DEFAULT_QUADRATURE_NODES)?;
        let v = q.value();
        if v.is_infinite() {
            notes.push(format!(
                "KL for {} is inf (estimate {:.3e}, underflow mass {:.3e})",
                truth.state_labels[t], q.estimate, q.underflow_mass
            ));
        }
        kl_per_state.push(v);
    }
    Ok(EvalReport {
        state_matching: mapping,
        truth_labels: truth.state_labels.clone(),
        l1_transition: l1.average,
        l1_transition_total: l1.total,
        kl_per_state,
        notes,
    })
}
