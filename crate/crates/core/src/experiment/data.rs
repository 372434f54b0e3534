use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyModel;
use crate::pomdp::{sample_trajectory, GroundTruthEnv, Policy, Trajectory};

/// Adds independent `N(0, sigma^2)` noise to every observation component.
/// Values are not clipped.
pub fn add_noise<R: Rng + ?Sized>(dataset: &[Trajectory], sigma: f64, rng: &mut R) -> Result<Vec<Trajectory>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise sigma must be finite and non-negative, got {sigma}")));
    }
    let mut out = dataset.to_vec();
    if sigma == 0.0 {
        return Ok(out);
    }
    for traj in &mut out {
        for o in &mut traj.observations {
            for v in o.iter_mut() {
                *v += sigma * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(out)
}

/// `n` trajectories simulated from the environment.
pub fn sample_dataset<R: Rng + ?Sized>(
    env: &GroundTruthEnv,
    policy: &Policy,
    n: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    (0..n).map(|_| sample_trajectory(env, policy, horizon, rng)).collect()
}

/// Rolls the fuzzy model forward: `o_{t+1} = infer(o_t, a_t) + noise`,
/// clamped to the variable ranges. Initial observations are uniform on the
/// ranges.
pub fn generate_fuzzy_trajectories<R: Rng + ?Sized>(
    fuzzy: &FuzzyModel,
    n: usize,
    horizon: usize,
    policy: &Policy,
    output_noise_sigma: f64,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    fuzzy.check()?;
    policy.check(fuzzy.num_actions)?;
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    if !(output_noise_sigma >= 0.0 && output_noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig("output noise sigma must be finite and non-negative".into()));
    }
    let ranges = fuzzy.ranges();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut o: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        let mut observations = vec![o.clone()];
        let mut actions = Vec::with_capacity(horizon - 1);
        for t in 0..horizon - 1 {
            let a = policy.choose(t, fuzzy.num_actions, rng);
            let mut next = fuzzy.infer(&o, a).map_err(|e| e.at_step(t))?;
            for (v, &(lo, hi)) in next.iter_mut().zip(&ranges) {
                if output_noise_sigma > 0.0 {
                    *v += output_noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
                *v = v.clamp(lo, hi);
            }
            actions.push(a);
            observations.push(next.clone());
            o = next;
        }
        out.push(Trajectory { observations, actions });
    }
    Ok(out)
}

/// Per-dimension coefficient of determination of one-step fuzzy
/// predictions on fresh environment rollouts.
pub fn expert_r2<R: Rng + ?Sized>(
    fuzzy: &FuzzyModel,
    env: &GroundTruthEnv,
    policy: &Policy,
    n: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let data = sample_dataset(env, policy, n, horizon, rng)?;
    let d = env.obs_dim();
    let mut truth: Vec<Vec<f64>> = vec![Vec::new(); d];
    let mut pred: Vec<Vec<f64>> = vec![Vec::new(); d];
    for traj in &data {
        for (t, &a) in traj.actions.iter().enumerate() {
            let p = fuzzy.infer(&traj.observations[t], a)?;
            for j in 0..d {
                truth[j].push(traj.observations[t + 1][j]);
                pred[j].push(p[j]);
            }
        }
    }
    Ok((0..d)
        .map(|j| {
            let m = truth[j].iter().sum::<f64>() / truth[j].len() as f64;
            let ss_tot: f64 = truth[j].iter().map(|y| (y - m).powi(2)).sum();
            let ss_res: f64 = truth[j].iter().zip(&pred[j]).map(|(y, p)| (y - p).powi(2)).sum();
            1.0 - ss_res / ss_tot
        })
        .collect())
}
