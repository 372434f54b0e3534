use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::FuzzyMapConfig;
use crate::em::SufficientCounts;
use crate::error::Result;
use crate::fuzzy::{firing_strength, FuzzyModel};
use crate::pomdp::{Gaussian, PomdpModel, TransitionTensor};
use crate::seeding;

/// Fuzzy prior counts for transitions and observations.
#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyPseudoCounts {
    pub n_t_fuzzy: TransitionTensor,
    pub n_o_fuzzy: Vec<f64>,
    pub s_o_fuzzy: Vec<DVector<f64>>,
    pub s_o2_fuzzy: Vec<DMatrix<f64>>,
}

impl FuzzyPseudoCounts {
    pub fn zeros(num_states: usize, num_actions: usize, obs_dim: usize) -> Self {
        let z = SufficientCounts::zeros(num_states, num_actions, obs_dim);
        Self {
            n_t_fuzzy: z.n_t,
            n_o_fuzzy: z.n_o,
            s_o_fuzzy: z.s_o,
            s_o2_fuzzy: z.s_o2,
        }
    }

    pub fn as_counts(&self) -> SufficientCounts {
        SufficientCounts {
            n_t: self.n_t_fuzzy.clone(),
            n_o: self.n_o_fuzzy.clone(),
            s_o: self.s_o_fuzzy.clone(),
            s_o2: self.s_o2_fuzzy.clone(),
        }
    }
}

/// Per-`(s, a, r)` antecedent matches and expected consequents under the
/// current model, stored in `(s, a, r)` order.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleTables {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_rules: usize,
    pub match_ant: Vec<f64>,
    pub y_star: Vec<Vec<f64>>,
}

impl RuleTables {
    #[inline]
    fn idx(&self, s: usize, a: usize, r: usize) -> usize {
        (s * self.num_actions + a) * self.num_rules + r
    }

    pub fn match_ant(&self, s: usize, a: usize, r: usize) -> f64 {
        self.match_ant[self.idx(s, a, r)]
    }

    pub fn y_star(&self, s: usize, a: usize, r: usize) -> &[f64] {
        &self.y_star[self.idx(s, a, r)]
    }

    pub fn total_match(&self) -> f64 {
        self.match_ant.iter().sum()
    }

    /// `[s][a][r]` nesting, for reports.
    pub fn match_ant_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| {
                (0..self.num_actions)
                    .map(|a| (0..self.num_rules).map(|r| self.match_ant(s, a, r)).collect())
                    .collect()
            })
            .collect()
    }
}

/// Monte-Carlo estimate of the expected firing strength of rule `r` under
/// the observation density of state `s`, with its standard error.
pub fn match_antecedent_with_error(
    emitter: &Gaussian,
    s: usize,
    a: usize,
    r: usize,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> (f64, f64) {
    let rule = &fuzzy.rules[r];
    if rule.action.is_some_and(|x| x != a) {
        return (0.0, 0.0);
    }
    if rule.antecedent.is_empty() {
        return (1.0, 0.0);
    }
    let n = config.matchant_samples;
    let mut rng = seeding::stream(config.seed, "matchant", &[s as u64, a as u64, r as u64, iteration as u64]);
    let mut obs = vec![0.0; emitter.dim()];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        emitter.sample_into(&mut rng, &mut obs);
        let w = firing_strength(rule, &obs, a, fuzzy.tnorm);
        sum += w;
        sum_sq += w * w;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt())
}

/// `MatchAnt(s, a, r)` at EM iteration `iteration`.
pub fn match_antecedent(
    s: usize,
    a: usize,
    r: usize,
    model: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> Result<f64> {
    let emitter = Gaussian::for_state(s, model.obs_means[s].clone(), &model.obs_covs[s])?;
    Ok(match_antecedent_with_error(&emitter, s, a, r, fuzzy, config, iteration).0)
}

/// `Y*_r(s, a)`: the consequent expected under state `s`. Exact for affine
/// consequents, where it equals the consequent at the state mean.
pub fn consequent_expectation(s: usize, r: usize, model: &PomdpModel, fuzzy: &FuzzyModel) -> Vec<f64> {
    fuzzy.rules[r].consequent_at(model.obs_means[s].as_slice())
}

pub fn consequent_log_likelihood(y: &[f64], next: usize, model: &PomdpModel) -> Result<f64> {
    let g = Gaussian::for_state(next, model.obs_means[next].clone(), &model.obs_covs[next])?;
    Ok(g.log_density(y))
}

/// Density of `y` under the observation model of `next`.
pub fn consequent_likelihood(y: &[f64], next: usize, model: &PomdpModel) -> Result<f64> {
    consequent_log_likelihood(y, next, model).map(f64::exp)
}

/// Evaluates every `(s, a, r)` triple in parallel; the result order is fixed.
pub fn rule_tables(
    model: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> Result<RuleTables> {
    let ns = model.num_states();
    let na = model.num_actions();
    let nr = fuzzy.rules.len();
    let emitters = model.emitters()?;
    let triples: Vec<(usize, usize, usize)> = (0..ns)
        .flat_map(|s| (0..na).flat_map(move |a| (0..nr).map(move |r| (s, a, r))))
        .collect();
    let match_ant: Vec<f64> = triples
        .par_iter()
        .map(|&(s, a, r)| match_antecedent_with_error(&emitters[s], s, a, r, fuzzy, config, iteration).0)
        .collect();
    let y_star = triples
        .iter()
        .map(|&(s, _, r)| consequent_expectation(s, r, model, fuzzy))
        .collect();
    Ok(RuleTables {
        num_states: ns,
        num_actions: na,
        num_rules: nr,
        match_ant,
        y_star,
    })
}

/// `N_T(s, a, s') = sum_r MatchAnt(s, a, r) * L(Y*_r(s, a) | s')`.
pub fn transition_pseudocounts(tables: &RuleTables, model: &PomdpModel) -> Result<TransitionTensor> {
    let emitters = model.emitters()?;
    let ns = tables.num_states;
    let mut out = TransitionTensor::zeros(ns, tables.num_actions);
    for s in 0..ns {
        for a in 0..tables.num_actions {
            for r in 0..tables.num_rules {
                let m = tables.match_ant(s, a, r);
                if m == 0.0 {
                    continue;
                }
                let y = tables.y_star(s, a, r);
                for (next, e) in emitters.iter().enumerate() {
                    let v = out.get(s, a, next) + m * e.density(y);
                    out.set(s, a, next, v);
                }
            }
        }
    }
    Ok(out)
}

/// Observation pseudo-counts weighted by
/// `strength(s, a, s', r) = T(s, a, s') * MatchAnt(s, a, r)`.
pub fn observation_pseudocounts(
    tables: &RuleTables,
    model: &PomdpModel,
) -> (Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
    let ns = tables.num_states;
    let d = model.obs_dim();
    let mut n_o = vec![0.0; ns];
    let mut s_o = vec![DVector::zeros(d); ns];
    let mut s_o2 = vec![DMatrix::zeros(d, d); ns];
    for s in 0..ns {
        for a in 0..tables.num_actions {
            for r in 0..tables.num_rules {
                let m = tables.match_ant(s, a, r);
                if m == 0.0 {
                    continue;
                }
                let y = DVector::from_column_slice(tables.y_star(s, a, r));
                let outer = &y * y.transpose();
                for next in 0..ns {
                    let w = model.transitions.get(s, a, next) * m;
                    n_o[next] += w;
                    s_o[next].axpy(w, &y, 1.0);
                    s_o2[next] += &outer * w;
                }
            }
        }
    }
    (n_o, s_o, s_o2)
}

/// Transition pseudo-counts for the current model.
pub fn fuzzy_transition_pseudocounts(
    model: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> Result<TransitionTensor> {
    let tables = rule_tables(model, fuzzy, config, iteration)?;
    transition_pseudocounts(&tables, model)
}

/// Observation pseudo-counts `(N_O, S_O, S_O2)` for the current model.
pub fn fuzzy_observation_pseudocounts(
    model: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>)> {
    let tables = rule_tables(model, fuzzy, config, iteration)?;
    Ok(observation_pseudocounts(&tables, model))
}

/// All pseudo-counts, sharing one set of MatchAnt estimates.
pub fn fuzzy_pseudocounts(
    model: &PomdpModel,
    fuzzy: &FuzzyModel,
    config: &FuzzyMapConfig,
    iteration: usize,
) -> Result<(FuzzyPseudoCounts, RuleTables)> {
    let tables = rule_tables(model, fuzzy, config, iteration)?;
    let n_t_fuzzy = transition_pseudocounts(&tables, model)?;
    let (n_o_fuzzy, s_o_fuzzy, s_o2_fuzzy) = observation_pseudocounts(&tables, model);
    Ok((
        FuzzyPseudoCounts {
            n_t_fuzzy,
            n_o_fuzzy,
            s_o_fuzzy,
            s_o2_fuzzy,
        },
        tables,
    ))
}
