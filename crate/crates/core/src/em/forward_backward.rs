use crate::error::{Error, Result};
use crate::pomdp::{Gaussian, PomdpModel, Trajectory};

/// Posterior state marginals for one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Posteriors {
    /// `gamma[t][s] = P(s_t = s | o, a)` for `t = 0..T`.
    pub gamma: Vec<Vec<f64>>,
    /// `xi[t][s * S + s'] = P(s_t = s, s_{t+1} = s' | o, a)` for `t = 0..T-1`.
    pub xi: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

impl Posteriors {
    pub fn num_states(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    pub fn xi_at(&self, t: usize, s: usize, next: usize) -> f64 {
        self.xi[t][s * self.num_states() + next]
    }
}

/// Scaled forward-backward pass.
pub fn forward_backward(model: &PomdpModel, traj: &Trajectory) -> Result<Posteriors> {
    let emitters = model.emitters()?;
    forward_backward_with(model, &emitters, traj)
}

fn normalize(v: &mut [f64]) -> f64 {
    let c: f64 = v.iter().sum();
    if c > 0.0 && c.is_finite() {
        v.iter_mut().for_each(|x| *x /= c);
    }
    c
}

/// Forward-backward with precomputed emitters.
///
/// Emission densities are shifted by their per-step maximum log value
/// before exponentiation; the shift is added back into the likelihood.
pub(crate) fn forward_backward_with(
    model: &PomdpModel,
    emitters: &[Gaussian],
    traj: &Trajectory,
) -> Result<Posteriors> {
    traj.check(model.num_actions(), model.obs_dim())?;
    let ns = model.num_states();
    let len = traj.len();
    let trans = &model.transitions;

    let mut emis = vec![vec![0.0; ns]; len];
    let mut log_shift = vec![0.0; len];
    for (t, obs) in traj.observations.iter().enumerate() {
        let row = &mut emis[t];
        for (s, e) in emitters.iter().enumerate() {
            row[s] = e.log_density(obs);
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::NumericalUnderflow { step: t });
        }
        row.iter_mut().for_each(|x| *x = (*x - m).exp());
        log_shift[t] = m;
    }

    let mut alpha = vec![vec![0.0; ns]; len];
    let mut scale = vec![0.0; len];
    for s in 0..ns {
        alpha[0][s] = model.initial_dist[s] * emis[0][s];
    }
    for t in 0..len {
        if t > 0 {
            let a = traj.actions[t - 1];
            let (prev, cur) = alpha.split_at_mut(t);
            let prev = &prev[t - 1];
            let cur = &mut cur[0];
            for (next, slot) in cur.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (s, &p) in prev.iter().enumerate() {
                    acc += p * trans.get(s, a, next);
                }
                *slot = acc * emis[t][next];
            }
        }
        let c = normalize(&mut alpha[t]);
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::NumericalUnderflow { step: t });
        }
        scale[t] = c;
    }
    let log_likelihood = scale
        .iter()
        .zip(&log_shift)
        .map(|(c, m)| c.ln() + m)
        .sum();

    let mut beta = vec![vec![1.0; ns]; len];
    for t in (0..len.saturating_sub(1)).rev() {
        let a = traj.actions[t];
        for s in 0..ns {
            let mut acc = 0.0;
            for next in 0..ns {
                acc += trans.get(s, a, next) * emis[t + 1][next] * beta[t + 1][next];
            }
            beta[t][s] = acc / scale[t + 1];
        }
    }

    let gamma: Vec<Vec<f64>> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| {
            let mut g: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
            normalize(&mut g);
            g
        })
        .collect();

    let mut xi = Vec::with_capacity(len.saturating_sub(1));
    for t in 0..len.saturating_sub(1) {
        let a = traj.actions[t];
        let mut m = vec![0.0; ns * ns];
        for s in 0..ns {
            for next in 0..ns {
                m[s * ns + next] = alpha[t][s] * trans.get(s, a, next) * emis[t + 1][next] * beta[t + 1][next]
                    / scale[t + 1];
            }
        }
        normalize(&mut m);
        xi.push(m);
    }

    Ok(Posteriors {
        gamma,
        xi,
        log_likelihood,
    })
}
