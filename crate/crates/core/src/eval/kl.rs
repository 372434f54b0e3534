use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::quadrature::for_each_tensor_node;
use crate::error::{Error, Result};
use crate::pomdp::{BetaParams, Gaussian};

/// Estimates above this are reported as infinite.
pub const KL_INFINITY_THRESHOLD: f64 = 1e4;
pub const DEFAULT_QUADRATURE_NODES: usize = 64;
/// Largest dimension handled by tensor quadrature.
pub const MAX_QUADRATURE_DIM: usize = 3;

// exp() of anything below this is zero or subnormal.
const LOG_UNDERFLOW: f64 = -708.0;
// Truth mass on underflowing nodes that counts as a positive-measure region.
const UNDERFLOW_MASS: f64 = 1e-9;

/// A divergence value with an explicit infinite sentinel. Serializes as a
/// number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KlValue {
    Finite(f64),
    Infinite,
}

impl KlValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, KlValue::Infinite)
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            KlValue::Finite(v) => *v,
            KlValue::Infinite => f64::INFINITY,
        }
    }

    pub fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            KlValue::Finite(v)
        } else {
            KlValue::Infinite
        }
    }
}

impl std::fmt::Display for KlValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KlValue::Finite(v) => write!(f, "{v:.6}"),
            KlValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for KlValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KlValue::Finite(v) => s.serialize_f64(*v),
            KlValue::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for KlValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(KlValue::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(KlValue::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

/// Raw quadrature result before the sentinel is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlQuadrature {
    /// `sum w p (log p - log q)`, finite whenever both log densities are.
    pub estimate: f64,
    /// Truth mass sitting on nodes where `q` underflows.
    pub underflow_mass: f64,
}

impl KlQuadrature {
    pub fn value(&self) -> KlValue {
        if self.underflow_mass > UNDERFLOW_MASS {
            log::info!("KL reported as inf: learned density underflows on {:.3e} of the truth mass", self.underflow_mass);
            KlValue::Infinite
        } else if !(self.estimate <= KL_INFINITY_THRESHOLD) {
            log::info!("KL reported as inf: estimate {:.3e} exceeds {KL_INFINITY_THRESHOLD}", self.estimate);
            KlValue::Infinite
        } else {
            if self.estimate < -1e-9 {
                log::warn!("negative KL estimate {:.3e} clamped to 0", self.estimate);
            }
            KlValue::Finite(self.estimate.max(0.0))
        }
    }
}

/// `KL(p || q)` over a box by tensor-product Gauss-Legendre quadrature.
pub fn kl_by_quadrature(
    log_p: impl Fn(&[f64]) -> f64,
    log_q: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    nodes_per_dim: usize,
) -> KlQuadrature {
    let mut estimate = 0.0;
    let mut underflow_mass = 0.0;
    for_each_tensor_node(bounds, nodes_per_dim, |x, w| {
        let lp = log_p(x);
        if lp == f64::NEG_INFINITY {
            return;
        }
        let p = lp.exp();
        let lq = log_q(x);
        if lq < LOG_UNDERFLOW {
            underflow_mass += w * p;
        }
        estimate += w * p * (lp - lq);
    });
    KlQuadrature {
        estimate,
        underflow_mass,
    }
}

fn beta_log_density(beta: &[BetaParams], x: &[f64]) -> f64 {
    beta.iter().zip(x).map(|(b, &xi)| b.ln_pdf(xi)).sum()
}

fn check_dims(beta: &[BetaParams], learned: &Gaussian) -> Result<()> {
    if beta.len() != learned.dim() {
        return Err(Error::DimensionMismatch {
            what: "KL observation dimension",
            expected: beta.len(),
            actual: learned.dim(),
        });
    }
    Ok(())
}

/// Quadrature KL from a product of Beta marginals on `[0, 1]^d` to a
/// Gaussian, without the sentinel.
pub fn kl_observation_raw(beta: &[BetaParams], learned: &Gaussian, nodes_per_dim: usize) -> Result<KlQuadrature> {
    check_dims(beta, learned)?;
    let d = beta.len();
    if d > MAX_QUADRATURE_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    let bounds = vec![(0.0, 1.0); d];
    Ok(kl_by_quadrature(
        |x| beta_log_density(beta, x),
        |x| learned.log_density(x),
        &bounds,
        nodes_per_dim,
    ))
}

/// `KL(truth || learned)` with the infinite sentinel, at the default
/// quadrature resolution.
pub fn kl_observation(beta: &[BetaParams], learned: &Gaussian) -> Result<KlValue> {
    kl_observation_raw(beta, learned, DEFAULT_QUADRATURE_NODES).map(|q| q.value())
}

/// Monte-Carlo estimate of the same divergence, for dimensions beyond the
/// quadrature limit. Returns the estimate and its standard error.
pub fn kl_observation_mc<R: Rng + ?Sized>(
    beta: &[BetaParams],
    learned: &Gaussian,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_dims(beta, learned)?;
    if samples < 2 {
        return Err(Error::InvalidConfig("at least two Monte-Carlo samples required".into()));
    }
    let dists = beta
        .iter()
        .map(|b| Beta::new(b.alpha, b.beta).map_err(|e| Error::InvalidConfig(format!("beta emitter: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut x = vec![0.0; beta.len()];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        for (xi, dist) in x.iter_mut().zip(&dists) {
            *xi = dist.sample(rng);
        }
        let v = beta_log_density(beta, &x) - learned.log_density(&x);
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}
