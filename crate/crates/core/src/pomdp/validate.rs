use std::fmt;

use nalgebra::SymmetricEigen;

use super::{PomdpModel, PROB_TOLERANCE};

const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// A single broken [`PomdpModel`] invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Shape {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    NonFinite {
        what: String,
    },
    NegativeTransition {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    TransitionRowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    CovarianceAsymmetric {
        state: usize,
    },
    CovarianceNotPositiveDefinite {
        state: usize,
        min_eigenvalue: f64,
    },
    InitialDistSum {
        sum: f64,
    },
    NegativeInitial {
        state: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                what,
                expected,
                actual,
            } => write!(f, "{what}: expected {expected}, got {actual}"),
            Violation::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Violation::NegativeTransition {
                state,
                action,
                next,
                value,
            } => write!(f, "transition (s={state}, a={action}, s'={next}) is negative: {value}"),
            Violation::TransitionRowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}")
            }
            Violation::CovarianceAsymmetric { state } => write!(f, "covariance of state {state} is not symmetric"),
            Violation::CovarianceNotPositiveDefinite {
                state,
                min_eigenvalue,
            } => write!(
                f,
                "covariance of state {state} is not positive definite (min eigenvalue {min_eigenvalue})"
            ),
            Violation::InitialDistSum { sum } => write!(f, "initial distribution sums to {sum}"),
            Violation::NegativeInitial { state, value } => {
                write!(f, "initial probability of state {state} is negative: {value}")
            }
        }
    }
}

/// Lists every invariant violation of `model`; empty means valid.
pub fn validate_model(model: &PomdpModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = model.num_states();
    let d = model.obs_dim();
    let mut shape = |what, expected: usize, actual: usize| {
        if expected != actual {
            out.push(Violation::Shape {
                what,
                expected,
                actual,
            });
        }
    };
    shape("obs_means", n, model.obs_means.len());
    shape("obs_covs", n, model.obs_covs.len());
    shape("initial_dist", n, model.initial_dist.len());
    shape("state_labels", n, model.state_labels.len());
    for m in &model.obs_means {
        shape("obs_means[s]", d, m.len());
    }
    for c in &model.obs_covs {
        shape("obs_covs[s] rows", d, c.nrows());
        shape("obs_covs[s] cols", d, c.ncols());
    }
    if !out.is_empty() {
        return out;
    }

    for (s, a, row) in model.transitions.rows() {
        if row.iter().any(|p| !p.is_finite()) {
            out.push(Violation::NonFinite {
                what: format!("transition row (s={s}, a={a})"),
            });
            continue;
        }
        for (next, &p) in row.iter().enumerate() {
            if p < 0.0 {
                out.push(Violation::NegativeTransition {
                    state: s,
                    action: a,
                    next,
                    value: p,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            out.push(Violation::TransitionRowSum {
                state: s,
                action: a,
                sum,
            });
        }
    }

    for (s, (m, c)) in model.obs_means.iter().zip(&model.obs_covs).enumerate() {
        if m.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            out.push(Violation::NonFinite {
                what: format!("observation model of state {s}"),
            });
            continue;
        }
        if (c - c.transpose()).amax() > SYMMETRY_TOLERANCE * c.amax().max(1.0) {
            out.push(Violation::CovarianceAsymmetric { state: s });
        }
        let sym = (c + c.transpose()) * 0.5;
        let min_eigenvalue = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eigenvalue <= 0.0 {
            out.push(Violation::CovarianceNotPositiveDefinite {
                state: s,
                min_eigenvalue,
            });
        }
    }

    for (s, &p) in model.initial_dist.iter().enumerate() {
        if p < 0.0 {
            out.push(Violation::NegativeInitial { state: s, value: p });
        }
    }
    let sum: f64 = model.initial_dist.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > PROB_TOLERANCE {
        out.push(Violation::InitialDistSum { sum });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{default_state_labels, uniform_dist, TransitionTensor};
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn two_state() -> PomdpModel {
        PomdpModel {
            transitions: TransitionTensor::uniform(2, 1),
            obs_means: vec![DVector::zeros(2); 2],
            obs_covs: vec![DMatrix::identity(2, 2); 2],
            initial_dist: uniform_dist(2),
            state_labels: default_state_labels(2),
        }
    }

    #[test]
    fn valid_model_has_no_violations() {
        assert!(validate_model(&two_state()).is_empty());
    }

    #[test]
    fn bad_row_sum_is_reported_with_index() {
        let mut m = two_state();
        m.transitions.row_mut(1, 0).copy_from_slice(&[0.5, 0.6]);
        let v = validate_model(&m);
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::TransitionRowSum { state, action, sum } => {
                assert_eq!((*state, *action), (1, 0));
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_eigenvalue_names_state() {
        let mut m = two_state();
        m.obs_covs[1] = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.01]));
        let v = validate_model(&m);
        assert!(v.iter().any(|x| matches!(
            x,
            Violation::CovarianceNotPositiveDefinite { state: 1, min_eigenvalue } if (*min_eigenvalue + 0.01).abs() < 1e-12
        )));
        assert!(v[0].to_string().contains("state 1"));
    }

    #[test]
    fn initial_distribution_is_checked() {
        let mut m = two_state();
        m.initial_dist = vec![0.7, 0.7];
        assert!(matches!(validate_model(&m)[..], [Violation::InitialDistSum { .. }]));
    }
}
