use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{default_state_labels, uniform_dist, TransitionTensor, Trajectory, PROB_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Log-density on (0, 1).
    pub fn ln_pdf(&self, x: f64) -> f64 {
        use statrs::function::beta::ln_beta;
        if x <= 0.0 || x >= 1.0 {
            return f64::NEG_INFINITY;
        }
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (1.0 - x).ln() - ln_beta(self.alpha, self.beta)
    }
}

/// Ground-truth simulator: a latent Markov chain with independent Beta
/// emitters per observation dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvFile", into = "EnvFile")]
pub struct GroundTruthEnv {
    pub transitions: TransitionTensor,
    pub beta_params: Vec<Vec<BetaParams>>,
    pub state_labels: Vec<String>,
    pub action_labels: Vec<String>,
    pub initial_dist: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EnvFile {
    num_states: usize,
    num_actions: usize,
    obs_dim: usize,
    transitions: TransitionTensor,
    beta_params: Vec<Vec<BetaParams>>,
    #[serde(default)]
    state_labels: Vec<String>,
    #[serde(default)]
    action_labels: Vec<String>,
    #[serde(default)]
    initial_dist: Option<Vec<f64>>,
}

impl From<GroundTruthEnv> for EnvFile {
    fn from(e: GroundTruthEnv) -> Self {
        Self {
            num_states: e.num_states(),
            num_actions: e.num_actions(),
            obs_dim: e.obs_dim(),
            transitions: e.transitions,
            beta_params: e.beta_params,
            state_labels: e.state_labels,
            action_labels: e.action_labels,
            initial_dist: Some(e.initial_dist),
        }
    }
}

impl TryFrom<EnvFile> for GroundTruthEnv {
    type Error = Error;

    fn try_from(f: EnvFile) -> Result<Self> {
        let n = f.transitions.num_states();
        let state_labels = if f.state_labels.is_empty() {
            default_state_labels(n)
        } else {
            f.state_labels
        };
        let action_labels = if f.action_labels.is_empty() {
            (0..f.transitions.num_actions()).map(|a| format!("action_{a}")).collect()
        } else {
            f.action_labels
        };
        let env = Self {
            initial_dist: f.initial_dist.unwrap_or_else(|| uniform_dist(n)),
            transitions: f.transitions,
            beta_params: f.beta_params,
            state_labels,
            action_labels,
        };
        if env.num_states() != f.num_states
            || env.num_actions() != f.num_actions
            || env.obs_dim() != f.obs_dim
        {
            return Err(Error::InvalidModel(vec![format!(
                "declared shape ({}, {}, {}) does not match contents ({}, {}, {})",
                f.num_states,
                f.num_actions,
                f.obs_dim,
                env.num_states(),
                env.num_actions(),
                env.obs_dim()
            )]));
        }
        env.check()?;
        Ok(env)
    }
}

impl GroundTruthEnv {
    pub fn num_states(&self) -> usize {
        self.transitions.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.num_actions()
    }

    pub fn obs_dim(&self) -> usize {
        self.beta_params.first().map_or(0, Vec::len)
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        let n = self.num_states();
        for (s, a, row) in self.transitions.rows() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOLERANCE || row.iter().any(|&p| p < 0.0) {
                problems.push(format!("transition row (s={s}, a={a}) sums to {sum}"));
            }
        }
        if self.beta_params.len() != n {
            problems.push(format!("beta_params has {} states, expected {n}", self.beta_params.len()));
        }
        let d = self.obs_dim();
        for (s, per_dim) in self.beta_params.iter().enumerate() {
            if per_dim.len() != d {
                problems.push(format!("beta_params[{s}] has {} dims, expected {d}", per_dim.len()));
            }
            for (j, b) in per_dim.iter().enumerate() {
                if !(b.alpha > 0.0 && b.beta > 0.0) {
                    problems.push(format!("beta_params[{s}][{j}] must have alpha, beta > 0"));
                }
            }
        }
        if self.state_labels.len() != n {
            problems.push("state_labels length differs from num_states".into());
        }
        if self.initial_dist.len() != n
            || (self.initial_dist.iter().sum::<f64>() - 1.0).abs() > PROB_TOLERANCE
        {
            problems.push("initial_dist must be a distribution over states".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(problems))
        }
    }

    /// Draws one observation vector for `state`.
    pub fn emit<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Vec<f64> {
        self.beta_params[state]
            .iter()
            .map(|b| {
                Beta::new(b.alpha, b.beta)
                    .expect("beta parameters validated at construction")
                    .sample(rng)
            })
            .collect()
    }
}

/// Behaviour policy used to pick actions while simulating.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Policy {
    #[default]
    UniformRandom,
    Constant {
        action: usize,
    },
    /// Repeats the listed actions in order.
    Cycle {
        actions: Vec<usize>,
    },
}

impl Policy {
    pub fn choose<R: Rng + ?Sized>(&self, t: usize, num_actions: usize, rng: &mut R) -> usize {
        match self {
            Policy::UniformRandom => rng.random_range(0..num_actions),
            Policy::Constant { action } => *action,
            Policy::Cycle { actions } => actions[t % actions.len()],
        }
    }

    pub fn check(&self, num_actions: usize) -> Result<()> {
        let bad = match self {
            Policy::UniformRandom => num_actions == 0,
            Policy::Constant { action } => *action >= num_actions,
            Policy::Cycle { actions } => actions.is_empty() || actions.iter().any(|&a| a >= num_actions),
        };
        if bad {
            Err(Error::InvalidConfig(format!(
                "policy {self:?} is invalid for {num_actions} actions"
            )))
        } else {
            Ok(())
        }
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Simulates one trajectory of `horizon` observations.
pub fn sample_trajectory<R: Rng + ?Sized>(
    env: &GroundTruthEnv,
    policy: &Policy,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    sample_trajectory_with_states(env, policy, horizon, rng).map(|(t, _)| t)
}

/// Like [`sample_trajectory`] but also returns the latent state path.
pub fn sample_trajectory_with_states<R: Rng + ?Sized>(
    env: &GroundTruthEnv,
    policy: &Policy,
    horizon: usize,
    rng: &mut R,
) -> Result<(Trajectory, Vec<usize>)> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    policy.check(env.num_actions())?;
    let mut state = sample_categorical(&env.initial_dist, rng);
    let mut states = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    let mut actions = Vec::with_capacity(horizon - 1);
    for t in 0..horizon {
        states.push(state);
        observations.push(env.emit(state, rng));
        if t + 1 < horizon {
            let a = policy.choose(t, env.num_actions(), rng);
            actions.push(a);
            state = sample_categorical(env.transitions.row(state, a), rng);
        }
    }
    Ok((
        Trajectory {
            observations,
            actions,
        },
        states,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table1() -> TransitionTensor {
        TransitionTensor::try_from(vec![
            vec![vec![0.85, 0.14, 0.01], vec![0.80, 0.15, 0.05]],
            vec![vec![0.30, 0.60, 0.10], vec![0.65, 0.35, 0.00]],
            vec![vec![0.05, 0.01, 0.94], vec![0.10, 0.65, 0.25]],
        ])
        .unwrap()
    }

    fn env_with(transitions: TransitionTensor, beta: BetaParams) -> GroundTruthEnv {
        let n = transitions.num_states();
        GroundTruthEnv {
            transitions,
            beta_params: vec![vec![beta; 2]; n],
            state_labels: default_state_labels(n),
            action_labels: vec!["wait".into(), "treat".into()],
            initial_dist: uniform_dist(n),
        }
    }

    #[test]
    fn absorbing_dynamics_keep_state_constant() {
        let mut t = TransitionTensor::zeros(3, 2);
        for s in 0..3 {
            t.set(s, 0, s, 1.0);
            t.set(s, 1, s, 1.0);
        }
        let env = env_with(t, BetaParams { alpha: 2.0, beta: 2.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (traj, states) =
                sample_trajectory_with_states(&env, &Policy::Constant { action: 0 }, 5, &mut rng).unwrap();
            assert_eq!(traj.len(), 5);
            assert_eq!(traj.actions.len(), 4);
            assert!(states.iter().all(|&s| s == states[0]));
        }
    }

    #[test]
    fn critical_wait_frequencies_follow_table() {
        let mut env = env_with(table1(), BetaParams { alpha: 8.0, beta: 2.0 });
        env.initial_dist = vec![0.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let (_, states) =
                sample_trajectory_with_states(&env, &Policy::Constant { action: 0 }, 2, &mut rng).unwrap();
            assert_eq!(states[0], 2);
            counts[states[1]] += 1;
        }
        let expected = [0.05, 0.01, 0.94];
        for (c, e) in counts.iter().zip(expected) {
            assert!((*c as f64 / n as f64 - e).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn uniform_beta_emitter_passes_ks_check() {
        let env = env_with(table1(), BetaParams { alpha: 1.0, beta: 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<f64> = (0..10_000).map(|i| env.emit(i % 3, &mut rng)[i % 2]).collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1% critical value for n = 10,000 is about 1.63 / sqrt(n).
        assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let env = env_with(table1(), BetaParams { alpha: 2.0, beta: 8.0 });
        let a = sample_trajectory(&env, &Policy::UniformRandom, 9, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_trajectory(&env, &Policy::UniformRandom, 9, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.observations.iter().flatten().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn invalid_env_file_is_rejected() {
        let json = serde_json::json!({
            "num_states": 1, "num_actions": 1, "obs_dim": 1,
            "transitions": [[[1.0]]],
            "beta_params": [[{"alpha": -1.0, "beta": 2.0}]]
        });
        assert!(serde_json::from_value::<GroundTruthEnv>(json).is_err());
    }

    #[test]
    fn beta_ln_pdf_is_normalized() {
        let b = BetaParams { alpha: 2.0, beta: 8.0 };
        let n = 100_000;
        let h = 1.0 / n as f64;
        let total: f64 = (0..n).map(|i| b.ln_pdf((i as f64 + 0.5) * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
