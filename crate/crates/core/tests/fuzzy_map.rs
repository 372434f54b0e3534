mod common;

use approx::assert_abs_diff_eq;
use fuzzy_pomdp::em::{m_step_standard, run_em, EmConfig, SufficientCounts};
use fuzzy_pomdp::fuzzy::{Clause, FuzzyModel, FuzzyRule, LinguisticVariable, MembershipFunction, TNorm, ZeroFiring};
use fuzzy_pomdp::fuzzy_map::*;
use fuzzy_pomdp::pomdp::{default_state_labels, uniform_dist, PomdpModel, TransitionTensor, Trajectory};
use fuzzy_pomdp::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::oracle::gaussian_membership_integral;
use common::random::random_pair;

fn model(means: &[&[f64]], vars: &[&[f64]], rows: &[(usize, usize, &[f64])], na: usize) -> PomdpModel {
    let ns = means.len();
    let mut transitions = TransitionTensor::uniform(ns, na);
    for &(s, a, row) in rows {
        transitions.row_mut(s, a).copy_from_slice(row);
    }
    PomdpModel {
        transitions,
        obs_means: means.iter().map(|m| DVector::from_column_slice(m)).collect(),
        obs_covs: vars.iter().map(|v| DMatrix::from_diagonal(&DVector::from_column_slice(v))).collect(),
        initial_dist: uniform_dist(ns),
        state_labels: default_state_labels(ns),
    }
}

fn fuzzy(d: usize, na: usize, rules: Vec<FuzzyRule>) -> FuzzyModel {
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
    }
}

fn constant(values: &[f64], antecedent: Vec<Clause>, action: Option<usize>) -> FuzzyRule {
    let d = values.len();
    FuzzyRule {
        antecedent,
        action,
        consequent: values
            .iter()
            .map(|&v| {
                let mut c = vec![0.0; d + 1];
                c[0] = v;
                c
            })
            .collect(),
    }
}

fn gauss_clause(input: usize, center: f64, sigma: f64) -> Clause {
    Clause {
        input,
        term: 0,
        mf: MembershipFunction::Gaussian { center, sigma },
    }
}

fn normal_pdf(x: f64, mu: f64, var: f64) -> f64 {
    (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

fn cfg(samples: usize, seed: u64) -> FuzzyMapConfig {
    FuzzyMapConfig {
        matchant_samples: samples,
        seed,
        ..FuzzyMapConfig::default()
    }
}

#[test]
fn empty_antecedent_matches_exactly_one_and_gate_exactly_zero() {
    let m = model(&[&[0.3, 0.3]], &[&[0.1, 0.1]], &[], 2);
    let f = fuzzy(2, 2, vec![constant(&[0.1, 0.1], vec![], Some(1)), constant(&[0.1, 0.1], vec![gauss_clause(0, 0.3, 0.1)], Some(0))]);
    let c = cfg(1000, 3);
    assert_eq!(match_antecedent(0, 1, 0, &m, &f, &c, 0).unwrap(), 1.0);
    assert_eq!(match_antecedent(0, 0, 0, &m, &f, &c, 0).unwrap(), 0.0);
    assert_eq!(match_antecedent(0, 1, 1, &m, &f, &c, 0).unwrap(), 0.0);
    let v = match_antecedent(0, 0, 1, &m, &f, &c, 0).unwrap();
    assert!(v > 0.0 && v < 1.0);
}

#[test]
fn gaussian_membership_match_agrees_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut within = 0;
    let trials = 40;
    for trial in 0..trials {
        let mu: f64 = rng.random_range(0.0..1.0);
        let sigma: f64 = rng.random_range(0.05..0.4);
        let center: f64 = rng.random_range(0.0..1.0);
        let sigma_m: f64 = rng.random_range(0.05..0.5);
        let m = model(&[&[mu]], &[&[sigma * sigma]], &[], 1);
        let f = fuzzy(1, 1, vec![constant(&[0.0], vec![gauss_clause(0, center, sigma_m)], None)]);
        let g = m.emitters().unwrap().remove(0);
        let (est, se) = match_antecedent_with_error(&g, 0, 0, 0, &f, &cfg(10_000, trial), 0);
        let exact = gaussian_membership_integral(center, sigma_m, mu, sigma);
        if (est - exact).abs() <= 3.0 * se {
            within += 1;
        }
    }
    assert!(within as f64 >= 0.9 * trials as f64, "{within}/{trials}");
}

#[test]
fn match_standard_error_shrinks_with_root_of_budget() {
    let m = model(&[&[0.4]], &[&[0.04]], &[], 1);
    let f = fuzzy(1, 1, vec![constant(&[0.0], vec![gauss_clause(0, 0.5, 0.15)], None)]);
    let spread = |n: usize| {
        let est: Vec<f64> = (0..300)
            .map(|seed| match_antecedent(0, 0, 0, &m, &f, &cfg(n, seed), 0).unwrap())
            .collect();
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt()
    };
    let base = spread(250);
    let quad = spread(1000);
    let ratio = quad / base;
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn match_is_reproducible_and_iteration_dependent() {
    let m = model(&[&[0.4, 0.6]], &[&[0.04, 0.02]], &[], 1);
    let f = fuzzy(2, 1, vec![constant(&[0.0, 0.0], vec![gauss_clause(0, 0.5, 0.15), gauss_clause(1, 0.2, 0.3)], None)]);
    let c = cfg(500, 9);
    let a = match_antecedent(0, 0, 0, &m, &f, &c, 4).unwrap();
    assert_eq!(a.to_bits(), match_antecedent(0, 0, 0, &m, &f, &c, 4).unwrap().to_bits());
    assert_ne!(a, match_antecedent(0, 0, 0, &m, &f, &c, 5).unwrap());
}

#[test]
fn consequent_expectation_constant_and_identity() {
    let m = model(&[&[0.2, 0.7], &[0.9, 0.1]], &[&[0.1, 0.1], &[0.1, 0.1]], &[], 1);
    let identity = FuzzyRule {
        antecedent: vec![],
        action: None,
        consequent: vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
    };
    let f = fuzzy(2, 1, vec![constant(&[0.3, 0.8], vec![], None), identity]);
    for s in 0..2 {
        assert_eq!(consequent_expectation(s, 0, &m, &f), vec![0.3, 0.8]);
        assert_eq!(consequent_expectation(s, 1, &m, &f), m.obs_means[s].as_slice().to_vec());
    }
}

#[test]
fn consequent_expectation_matches_sample_average() {
    let mean = DVector::from_vec(vec![0.3, 0.6]);
    let cov = DMatrix::from_row_slice(2, 2, &[0.05, 0.02, 0.02, 0.08]);
    let m = PomdpModel {
        transitions: TransitionTensor::uniform(1, 1),
        obs_means: vec![mean.clone()],
        obs_covs: vec![cov.clone()],
        initial_dist: vec![1.0],
        state_labels: default_state_labels(1),
    };
    let rule = FuzzyRule {
        antecedent: vec![],
        action: None,
        consequent: vec![vec![0.1, 0.5, -1.2], vec![-0.4, 2.0, 0.3]],
    };
    let f = fuzzy(2, 1, vec![rule.clone()]);
    let exact = consequent_expectation(0, 0, &m, &f);

    let l = cov.cholesky().unwrap().l();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 100_000;
    let mut sums = [0.0; 2];
    let mut sq = [0.0; 2];
    for _ in 0..n {
        let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let o = &mean + &l * z;
        let y = rule.consequent_at(o.as_slice());
        for j in 0..2 {
            sums[j] += y[j];
            sq[j] += y[j] * y[j];
        }
    }
    for j in 0..2 {
        let avg = sums[j] / n as f64;
        let se = ((sq[j] / n as f64 - avg * avg) / n as f64).sqrt();
        assert!((avg - exact[j]).abs() < 3.0 * se, "dim {j}: {avg} vs {}", exact[j]);
    }
}

#[test]
fn consequent_likelihood_values() {
    let m = model(&[&[0.4, 0.6], &[0.0, 0.0]], &[&[1.0, 1.0], &[0.04, 0.09]], &[], 1);
    assert_abs_diff_eq!(consequent_likelihood(&[0.4, 0.6], 0, &m).unwrap(), 0.159_154_9, epsilon = 1e-7);

    let far = [20.0 * 0.2, 0.0];
    assert!(consequent_likelihood(&far, 1, &m).unwrap() < 1e-80);
    let log = consequent_log_likelihood(&far, 1, &m).unwrap();
    assert!(log.is_finite());

    let y = [0.1, -0.2];
    let product = normal_pdf(0.1, 0.0, 0.04) * normal_pdf(-0.2, 0.0, 0.09);
    assert_abs_diff_eq!(consequent_likelihood(&y, 1, &m).unwrap(), product, epsilon = 1e-12);
}

#[test]
fn empty_rule_set_gives_zero_counts() {
    let m = model(&[&[0.2], &[0.8]], &[&[0.01], &[0.01]], &[], 2);
    let f = fuzzy(1, 2, vec![]);
    let c = cfg(100, 0);
    let nt = fuzzy_transition_pseudocounts(&m, &f, &c, 0).unwrap();
    assert!(nt.as_slice().iter().all(|&v| v == 0.0));
    let (n_o, s_o, s_o2) = fuzzy_observation_pseudocounts(&m, &f, &c, 0).unwrap();
    assert!(n_o.iter().all(|&v| v == 0.0));
    assert!(s_o.iter().all(|v| v.iter().all(|&x| x == 0.0)));
    assert!(s_o2.iter().all(|v| v.iter().all(|&x| x == 0.0)));
}

#[test]
fn always_firing_rule_concentrates_on_matching_successor() {
    let m = model(&[&[0.1, 0.1], &[0.5, 0.5], &[0.9, 0.9]], &[&[1e-3, 1e-3], &[1e-3, 1e-3], &[1e-3, 1e-3]], &[], 1);
    let f = fuzzy(2, 1, vec![constant(&[0.5, 0.5], vec![], None)]);
    let nt = fuzzy_transition_pseudocounts(&m, &f, &cfg(10, 0), 0).unwrap();
    for s in 0..3 {
        let row = nt.row(s, 0);
        assert!(row[1] > 1e3 * (row[0] + row[2]), "{row:?}");
    }
}

// Two states, one dimension, two rules whose matches are exactly 0 or 1 so
// every term can be written out by hand.
#[test]
fn two_state_two_rule_counts_match_hand_unrolled_sums() {
    let (mu, var) = ([0.1, 0.8], [0.04, 0.09]);
    let t = [[[0.7, 0.3], [0.2, 0.8]], [[0.4, 0.6], [0.1, 0.9]]];
    let m = model(
        &[&[mu[0]], &[mu[1]]],
        &[&[var[0]], &[var[1]]],
        &[(0, 0, &t[0][0]), (0, 1, &t[0][1]), (1, 0, &t[1][0]), (1, 1, &t[1][1])],
        2,
    );
    let r0 = FuzzyRule {
        antecedent: vec![],
        action: None,
        consequent: vec![vec![0.2, 0.5]],
    };
    let r1 = constant(&[0.9], vec![], Some(1));
    let f = fuzzy(1, 2, vec![r0, r1]);
    let (counts, tables) = fuzzy_pseudocounts(&m, &f, &cfg(50, 1), 0).unwrap();

    // y*_0(s) = 0.2 + 0.5 mu_s; y*_1 = 0.9 under action 1 only.
    let y0 = [0.2 + 0.5 * mu[0], 0.2 + 0.5 * mu[1]];
    let y1 = 0.9;
    for s in 0..2 {
        for a in 0..2 {
            assert_eq!(tables.match_ant(s, a, 0), 1.0);
            assert_eq!(tables.match_ant(s, a, 1), if a == 1 { 1.0 } else { 0.0 });
            for n in 0..2 {
                let mut expect = normal_pdf(y0[s], mu[n], var[n]);
                if a == 1 {
                    expect += normal_pdf(y1, mu[n], var[n]);
                }
                assert_abs_diff_eq!(counts.n_t_fuzzy.get(s, a, n), expect, epsilon = 1e-12);
            }
        }
    }

    for n in 0..2 {
        let (mut no, mut so, mut so2) = (0.0, 0.0, 0.0);
        for s in 0..2 {
            for a in 0..2 {
                let w = t[s][a][n];
                no += w;
                so += w * y0[s];
                so2 += w * y0[s] * y0[s];
                if a == 1 {
                    no += w;
                    so += w * y1;
                    so2 += w * y1 * y1;
                }
            }
        }
        assert_abs_diff_eq!(counts.n_o_fuzzy[n], no, epsilon = 1e-12);
        assert_abs_diff_eq!(counts.s_o_fuzzy[n][0], so, epsilon = 1e-12);
        assert_abs_diff_eq!(counts.s_o2_fuzzy[n][(0, 0)], so2, epsilon = 1e-12);
    }
}

fn random_counts(rng: &mut ChaCha8Rng, ns: usize, na: usize, d: usize) -> SufficientCounts {
    let mut c = SufficientCounts::zeros(ns, na, d);
    for v in c.n_t.as_mut_slice() {
        *v = rng.random_range(0.0..3.0);
    }
    for s in 0..ns {
        let k = rng.random_range(2..6);
        for _ in 0..k {
            let w: f64 = rng.random_range(0.1..1.0);
            let o = DVector::from_fn(d, |_, _| rng.random_range(0.0..1.0));
            c.n_o[s] += w;
            c.s_o[s] += &o * w;
            c.s_o2[s] += &o * o.transpose() * w;
        }
    }
    c
}

fn prev_model(ns: usize, na: usize, d: usize) -> PomdpModel {
    PomdpModel {
        transitions: TransitionTensor::uniform(ns, na),
        obs_means: vec![DVector::zeros(d); ns],
        obs_covs: vec![DMatrix::identity(d, d); ns],
        initial_dist: uniform_dist(ns),
        state_labels: default_state_labels(ns),
    }
}

#[test]
fn zero_weights_reproduce_the_standard_m_step_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let emp = random_counts(&mut rng, 3, 2, 2);
    let prior = random_counts(&mut rng, 3, 2, 2);
    let pseudo = FuzzyPseudoCounts {
        n_t_fuzzy: prior.n_t,
        n_o_fuzzy: prior.n_o,
        s_o_fuzzy: prior.s_o,
        s_o2_fuzzy: prior.s_o2,
    };
    let em = EmConfig::default();
    let c = FuzzyMapConfig {
        lambda_t: 0.0,
        lambda_o: 0.0,
        ..FuzzyMapConfig::default()
    };
    let prev = prev_model(3, 2, 2);
    let a = m_step_fuzzy_map(&emp, &pseudo, &c, &em, &prev).unwrap();
    let b = m_step_standard(&emp, &em, &prev);
    assert_eq!(a, b);
}

#[test]
fn zero_empirical_counts_give_prior_only_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let prior = random_counts(&mut rng, 2, 2, 2);
    let pseudo = FuzzyPseudoCounts {
        n_t_fuzzy: prior.n_t.clone(),
        n_o_fuzzy: prior.n_o.clone(),
        s_o_fuzzy: prior.s_o.clone(),
        s_o2_fuzzy: prior.s_o2.clone(),
    };
    let em = EmConfig::default();
    let c = FuzzyMapConfig {
        lambda_t: 1.0,
        lambda_o: 1.0,
        ..FuzzyMapConfig::default()
    };
    let prev = prev_model(2, 2, 2);
    let out = m_step_fuzzy_map(&SufficientCounts::zeros(2, 2, 2), &pseudo, &c, &em, &prev).unwrap();
    let direct = m_step_standard(&prior, &em, &prev);
    assert!(out.max_abs_diff(&direct) < 1e-12);
}

#[test]
fn blended_step_matches_weighted_average_of_count_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let emp = random_counts(&mut rng, 2, 2, 2);
    let prior = random_counts(&mut rng, 2, 2, 2);
    let pseudo = FuzzyPseudoCounts {
        n_t_fuzzy: prior.n_t.clone(),
        n_o_fuzzy: prior.n_o.clone(),
        s_o_fuzzy: prior.s_o.clone(),
        s_o2_fuzzy: prior.s_o2.clone(),
    };
    let (lt, lo) = (0.3, 2.5);
    let c = FuzzyMapConfig {
        lambda_t: lt,
        lambda_o: lo,
        ..FuzzyMapConfig::default()
    };
    let em = EmConfig {
        covariance_ridge: 0.0,
        ..EmConfig::default()
    };
    let out = m_step_fuzzy_map(&emp, &pseudo, &c, &em, &prev_model(2, 2, 2)).unwrap();
    for s in 0..2 {
        for a in 0..2 {
            let num: Vec<f64> = (0..2).map(|n| emp.n_t.get(s, a, n) + lt * prior.n_t.get(s, a, n)).collect();
            let den: f64 = num.iter().sum();
            for n in 0..2 {
                assert_abs_diff_eq!(out.transitions.get(s, a, n), num[n] / den, epsilon = 1e-12);
            }
        }
        let w = emp.n_o[s] + lo * prior.n_o[s];
        let mean_emp = &emp.s_o[s] / emp.n_o[s];
        let mean_pri = &prior.s_o[s] / prior.n_o[s];
        // Mixture of the two weighted means.
        let mean = (&mean_emp * emp.n_o[s] + &mean_pri * (lo * prior.n_o[s])) / w;
        assert!((&out.obs_means[s] - &mean).amax() < 1e-12);
        let second = (&emp.s_o2[s] + &prior.s_o2[s] * lo) / w;
        let cov = second - &mean * mean.transpose();
        assert!((&out.obs_covs[s] - cov).amax() < 1e-12);
    }
}

fn toy_dataset(seed: u64, n: usize, len: usize) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Trajectory {
            observations: (0..len)
                .map(|t| {
                    let c = if (t / 2) % 2 == 0 { 0.2 } else { 0.8 };
                    vec![c + 0.1 * rng.sample::<f64, _>(StandardNormal), c + 0.1 * rng.sample::<f64, _>(StandardNormal)]
                })
                .collect(),
            actions: (0..len - 1).map(|_| rng.random_range(0..2)).collect(),
        })
        .collect()
}

fn grid_expert() -> FuzzyModel {
    fuzzy(
        2,
        2,
        vec![
            constant(&[0.25, 0.25], vec![gauss_clause(0, 0.2, 0.2), gauss_clause(1, 0.2, 0.2)], None),
            constant(&[0.75, 0.75], vec![gauss_clause(0, 0.8, 0.2), gauss_clause(1, 0.8, 0.2)], None),
            constant(&[0.3, 0.3], vec![gauss_clause(0, 0.8, 0.2)], Some(1)),
        ],
    )
}

#[test]
fn zero_weights_follow_standard_em_iteration_by_iteration() {
    let data = toy_dataset(4, 6, 8);
    let init = model(&[&[0.3, 0.4], &[0.6, 0.5]], &[&[0.2, 0.2], &[0.2, 0.2]], &[], 2);
    let em = EmConfig {
        record_history: true,
        ..EmConfig::default()
    };
    let c = FuzzyMapConfig {
        lambda_t: 0.0,
        lambda_o: 0.0,
        matchant_samples: 200,
        ..FuzzyMapConfig::default()
    };
    let fm = run_fuzzy_map_em(&data, &init, &grid_expert(), &c, &em).unwrap();
    let std = run_em(&data, &init, &em).unwrap();
    assert_eq!(fm.history.len(), std.history.len());
    for (a, b) in fm.history.iter().zip(&std.history) {
        assert!(a.max_abs_diff(b) < 1e-9);
    }
    assert_eq!(fm.loglik_trace, std.loglik_trace);
}

#[test]
fn run_is_bit_reproducible_and_reports_prior_ratios() {
    let data = toy_dataset(5, 4, 6);
    let init = model(&[&[0.3, 0.4], &[0.6, 0.5]], &[&[0.2, 0.2], &[0.2, 0.2]], &[], 2);
    let c = FuzzyMapConfig {
        lambda_t: 0.5,
        lambda_o: 0.5,
        matchant_samples: 300,
        seed: 17,
        final_standard_em_iterations: 1,
    };
    let em = EmConfig::default();
    let a = run_fuzzy_map_em(&data, &init, &grid_expert(), &c, &em).unwrap();
    let b = run_fuzzy_map_em(&data, &init, &grid_expert(), &c, &em).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.loglik_trace, b.loglik_trace);
    assert_eq!(a.loglik_trace.len(), a.fuzzy_phase_len + 1);
    assert!(!a.diagnostics.is_empty());
    for d in &a.diagnostics {
        assert!(d.transition_prior_ratio.unwrap() > 0.0);
        assert!(d.observation_prior_ratio.unwrap() > 0.0);
    }
    assert_eq!(a.final_match_ant.len(), 2);
    assert_eq!(a.final_match_ant[0][1].len(), 3);
}

#[test]
fn prior_only_mode_needs_both_weights_and_converges() {
    let init = model(&[&[0.3, 0.4], &[0.6, 0.5]], &[&[0.2, 0.2], &[0.2, 0.2]], &[], 2);
    let em = EmConfig::default();
    let mut c = FuzzyMapConfig {
        lambda_t: 1.0,
        lambda_o: 0.0,
        matchant_samples: 200,
        ..FuzzyMapConfig::default()
    };
    let err = run_fuzzy_map_em(&[], &init, &grid_expert(), &c, &em).unwrap_err();
    assert!(matches!(err, Error::EmptyDataset));
    c.lambda_o = 1.0;
    let out = run_fuzzy_map_em(&[], &init, &grid_expert(), &c, &em).unwrap();
    assert!(fuzzy_pomdp::pomdp::validate_model(&out.model).is_empty());
    assert!(out.diagnostics.iter().all(|d| d.transition_prior_ratio.is_none()));
}

// With a single rule predicting one value, every state is pulled toward the
// same mean once the prior dominates.
#[test]
fn overwhelming_single_prediction_collapses_states() {
    let data = toy_dataset(6, 6, 8);
    let init = model(&[&[0.2, 0.2], &[0.8, 0.8]], &[&[0.05, 0.05], &[0.05, 0.05]], &[], 2);
    let f = fuzzy(2, 2, vec![constant(&[0.5, 0.5], vec![gauss_clause(0, 0.5, 0.3)], None)]);
    let c = FuzzyMapConfig {
        lambda_t: 1e6,
        lambda_o: 1e6,
        matchant_samples: 200,
        ..FuzzyMapConfig::default()
    };
    let out = run_fuzzy_map_em(&data, &init, &f, &c, &EmConfig::default()).unwrap();
    let gap = (&out.model.obs_means[0] - &out.model.obs_means[1]).amax();
    assert!(gap < 0.05, "gap {gap}");
}

#[test]
fn invalid_weights_are_rejected() {
    let c = FuzzyMapConfig {
        lambda_t: -1.0,
        ..FuzzyMapConfig::default()
    };
    assert!(matches!(c.check(), Err(Error::InvalidConfig(_))));
    let c = FuzzyMapConfig {
        lambda_o: f64::NAN,
        ..FuzzyMapConfig::default()
    };
    assert!(c.check().is_err());
}

fn arb_case() -> impl Strategy<Value = (u64, usize, usize, usize, usize)> {
    (any::<u64>(), 1usize..4, 1usize..3, 1usize..3, 1usize..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn pseudo_counts_are_nonnegative_and_conserve_mass(case in arb_case()) {
        let (seed, ns, na, d, nr) = case;
        let (m, f) = random_pair(seed, ns, na, d, nr);
        let (counts, tables) = fuzzy_pseudocounts(&m, &f, &cfg(200, seed), 0).unwrap();
        prop_assert!(tables.match_ant.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(counts.n_t_fuzzy.as_slice().iter().all(|&v| v >= 0.0));
        prop_assert!(counts.n_o_fuzzy.iter().all(|&v| v >= 0.0));
        let total: f64 = counts.n_o_fuzzy.iter().sum();
        prop_assert!((total - tables.total_match()).abs() < 1e-9);
        for s2 in &counts.s_o2_fuzzy {
            prop_assert!((s2 - s2.transpose()).amax() < 1e-12);
            let eig = s2.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.iter().all(|&e| e > -1e-9));
        }
    }
}
