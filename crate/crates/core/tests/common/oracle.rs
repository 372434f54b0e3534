//! Independent reference computations used only by tests.
#![allow(dead_code)]

use fuzzy_pomdp::pomdp::{PomdpModel, Trajectory};
use nalgebra::{DVector, Dyn};
use statrs::distribution::{Continuous, MultivariateNormal};

/// Exact posteriors by summing over every latent state sequence.
pub struct Enumerated {
    pub gamma: Vec<Vec<f64>>,
    pub xi: Vec<Vec<Vec<f64>>>,
    pub log_likelihood: f64,
}

pub fn enumerate_posteriors(model: &PomdpModel, traj: &Trajectory) -> Enumerated {
    let ns = model.num_states();
    let len = traj.observations.len();
    let dists: Vec<MultivariateNormal<Dyn>> = (0..ns)
        .map(|s| {
            let d = model.obs_dim();
            let cov: Vec<f64> = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| model.obs_covs[s][(i, j)])
                .collect();
            MultivariateNormal::new(model.obs_means[s].iter().copied().collect(), cov).unwrap()
        })
        .collect();
    let dens: Vec<Vec<f64>> = traj
        .observations
        .iter()
        .map(|o| {
            let x = DVector::from_column_slice(o);
            dists.iter().map(|d| d.pdf(&x)).collect()
        })
        .collect();

    let mut gamma = vec![vec![0.0; ns]; len];
    let mut xi = vec![vec![vec![0.0; ns]; ns]; len.saturating_sub(1)];
    let mut total = 0.0;
    let mut path = vec![0usize; len];
    let count = ns.pow(len as u32);
    for code in 0..count {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % ns;
            c /= ns;
        }
        let mut p = model.initial_dist[path[0]] * dens[0][path[0]];
        for t in 1..len {
            p *= model.transitions.get(path[t - 1], traj.actions[t - 1], path[t]) * dens[t][path[t]];
        }
        total += p;
        for t in 0..len {
            gamma[t][path[t]] += p;
        }
        for t in 0..len.saturating_sub(1) {
            xi[t][path[t]][path[t + 1]] += p;
        }
    }
    for g in gamma.iter_mut() {
        g.iter_mut().for_each(|x| *x /= total);
    }
    for m in xi.iter_mut() {
        m.iter_mut().flatten().for_each(|x| *x /= total);
    }
    Enumerated {
        gamma,
        xi,
        log_likelihood: total.ln(),
    }
}

/// Closed-form integral of a Gaussian membership `exp(-(x-c)^2 / (2 s_m^2))`
/// against the density `N(mu, s^2)`.
pub fn gaussian_membership_integral(center: f64, sigma_m: f64, mu: f64, sigma: f64) -> f64 {
    let v = sigma_m * sigma_m + sigma * sigma;
    sigma_m / v.sqrt() * (-(center - mu) * (center - mu) / (2.0 * v)).exp()
}

/// Closed-form `KL(N(mp, cp) || N(mq, cq))`.
pub fn gaussian_kl(mp: &DVector<f64>, cp: &nalgebra::DMatrix<f64>, mq: &DVector<f64>, cq: &nalgebra::DMatrix<f64>) -> f64 {
    let d = mp.len() as f64;
    let inv = cq.clone().try_inverse().unwrap();
    let diff = mq - mp;
    let trace = (&inv * cp).trace();
    let quad = (diff.transpose() * &inv * &diff)[(0, 0)];
    0.5 * (trace + quad - d + (cq.determinant() / cp.determinant()).ln())
}

/// All permutations of `0..n`, in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in permutations(n - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|x| if x >= first { x + 1 } else { x }));
            out.push(p);
        }
    }
    out
}

/// Closed-form integral of a product of Gaussian memberships against
/// `N(mean, cov)`. `clauses` holds `(input, center, sigma_m)`; inputs
/// without a clause are integrated out.
pub fn gaussian_rule_integral(clauses: &[(usize, f64, f64)], mean: &DVector<f64>, cov: &nalgebra::DMatrix<f64>) -> f64 {
    let k = clauses.len();
    let d_m = nalgebra::DMatrix::from_diagonal(&DVector::from_iterator(k, clauses.iter().map(|c| c.2 * c.2)));
    let sub = nalgebra::DMatrix::from_fn(k, k, |i, j| cov[(clauses[i].0, clauses[j].0)]);
    let diff = DVector::from_iterator(k, clauses.iter().map(|c| c.1 - mean[c.0]));
    let total = &d_m + &sub;
    let quad = (diff.transpose() * total.clone().try_inverse().unwrap() * &diff)[(0, 0)];
    (d_m.determinant() / total.determinant()).sqrt() * (-0.5 * quad).exp()
}
