//! Random models, trajectories and rule bases shared by several test targets.
#![allow(dead_code)]

use fuzzy_pomdp::fuzzy::{Clause, FuzzyModel, FuzzyRule, LinguisticVariable, MembershipFunction, TNorm, ZeroFiring};
use fuzzy_pomdp::pomdp::{default_state_labels, uniform_dist, PomdpModel, TransitionTensor, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_model(rng: &mut ChaCha8Rng, ns: usize, na: usize, d: usize) -> PomdpModel {
    let mut t = TransitionTensor::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let row: Vec<f64> = (0..ns).map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = row.iter().sum();
            for (n, p) in row.iter().enumerate() {
                t.set(s, a, n, p / sum);
            }
        }
    }
    let mut init: Vec<f64> = (0..ns).map(|_| rng.random_range(0.1..1.0)).collect();
    let sum: f64 = init.iter().sum();
    init.iter_mut().for_each(|x| *x /= sum);
    PomdpModel {
        transitions: t,
        obs_means: (0..ns)
            .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
            .collect(),
        obs_covs: (0..ns)
            .map(|_| {
                let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.5..0.5));
                &a * a.transpose() + DMatrix::identity(d, d) * 0.3
            })
            .collect(),
        initial_dist: init,
        state_labels: default_state_labels(ns),
    }
}

pub fn random_traj(rng: &mut ChaCha8Rng, len: usize, na: usize, d: usize) -> Trajectory {
    Trajectory {
        observations: (0..len)
            .map(|_| (0..d).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect(),
        actions: (0..len - 1).map(|_| rng.random_range(0..na)).collect(),
    }
}

/// A model and a rule base of mixed membership shapes over `[0, 1]^d`.
pub fn random_pair(seed: u64, ns: usize, na: usize, d: usize, nr: usize) -> (PomdpModel, FuzzyModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transitions = TransitionTensor::zeros(ns, na);
    for s in 0..ns {
        for a in 0..na {
            let raw: Vec<f64> = (0..ns).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            for (n, v) in raw.iter().enumerate() {
                transitions.set(s, a, n, v / sum);
            }
        }
    }
    let m = PomdpModel {
        transitions,
        obs_means: (0..ns).map(|_| DVector::from_fn(d, |_, _| rng.random_range(0.0..1.0))).collect(),
        obs_covs: (0..ns)
            .map(|_| {
                let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.2..0.2));
                &b * b.transpose() + DMatrix::identity(d, d) * 0.01
            })
            .collect(),
        initial_dist: uniform_dist(ns),
        state_labels: default_state_labels(ns),
    };
    let rules = (0..nr)
        .map(|_| {
            let inputs: Vec<usize> = (0..d).filter(|_| rng.random_bool(0.7)).collect();
            let antecedent = inputs
                .into_iter()
                .map(|j| {
                    let mf = match rng.random_range(0..3) {
                        0 => MembershipFunction::Gaussian {
                            center: rng.random_range(0.0..1.0),
                            sigma: rng.random_range(0.05..0.5),
                        },
                        1 => {
                            let mut p = [rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2), rng.random_range(-0.2..1.2)];
                            p.sort_by(f64::total_cmp);
                            MembershipFunction::Triangular { a: p[0], b: p[1], c: p[2] }
                        }
                        _ => {
                            let mut p = [0.0; 4].map(|_| rng.random_range(-0.2..1.2));
                            p.sort_by(f64::total_cmp);
                            MembershipFunction::Trapezoidal { a: p[0], b: p[1], c: p[2], d: p[3] }
                        }
                    };
                    Clause { input: j, term: 0, mf }
                })
                .collect();
            FuzzyRule {
                antecedent,
                action: rng.random_bool(0.5).then(|| rng.random_range(0..na)),
                consequent: (0..d).map(|_| (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect(),
            }
        })
        .collect();
    (
        m,
        FuzzyModel {
            obs_dim: d,
            num_actions: na,
            tnorm: TNorm::Product,
            zero_firing: ZeroFiring::Identity,
            variables: (0..d)
                .map(|j| LinguisticVariable {
                    name: format!("x{j}"),
                    range: (0.0, 1.0),
                    terms: vec![],
                })
                .collect(),
            rules,
            action_labels: (0..na).map(|a| format!("a{a}")).collect(),
        },
    )
}
