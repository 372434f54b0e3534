//! Type-1 Takagi-Sugeno fuzzy models.
//!
//! Rules read the current observation (and optionally a crisp action) and
//! predict the next observation with an affine consequent per output
//! dimension. The model output is the firing-strength-weighted average of
//! the rule consequents.

mod membership;

pub use membership::{membership, MembershipFunction, TNorm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What `infer` does when no rule fires.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroFiring {
    /// Predict the input observation unchanged.
    #[default]
    Identity,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinguisticTerm {
    pub label: String,
    pub mf: MembershipFunction,
}

/// One input variable (an observation component) with its terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LinguisticVariable {
    pub name: String,
    pub range: (f64, f64),
    pub terms: Vec<LinguisticTerm>,
}

/// `input is term`, with the membership function resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub input: usize,
    pub term: usize,
    pub mf: MembershipFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyRule {
    pub antecedent: Vec<Clause>,
    /// Crisp action gate; `None` fires for every action.
    pub action: Option<usize>,
    /// Row `j` holds `[c0, c1, .., cd]` for output dimension `j`.
    pub consequent: Vec<Vec<f64>>,
}

impl FuzzyRule {
    /// Evaluates the affine consequent at `obs`.
    pub fn consequent_at(&self, obs: &[f64]) -> Vec<f64> {
        self.consequent
            .iter()
            .map(|c| c[0] + c[1..].iter().zip(obs).map(|(w, x)| w * x).sum::<f64>())
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.consequent.iter().all(|c| c[1..].iter().all(|&w| w == 0.0))
    }
}

/// Antecedent firing strength of `rule`.
pub fn firing_strength(rule: &FuzzyRule, obs: &[f64], action: usize, tnorm: TNorm) -> f64 {
    if rule.action.is_some_and(|a| a != action) {
        return 0.0;
    }
    rule.antecedent
        .iter()
        .fold(tnorm.identity(), |acc, c| tnorm.combine(acc, c.mf.eval(obs[c.input])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FuzzyModelFile", into = "FuzzyModelFile")]
pub struct FuzzyModel {
    pub obs_dim: usize,
    pub num_actions: usize,
    pub tnorm: TNorm,
    pub zero_firing: ZeroFiring,
    pub variables: Vec<LinguisticVariable>,
    pub rules: Vec<FuzzyRule>,
    pub action_labels: Vec<String>,
}

impl FuzzyModel {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFuzzyModel(m));
        if self.rules.is_empty() {
            return bad("rule list is empty".into());
        }
        if self.variables.len() != self.obs_dim {
            return bad(format!(
                "{} variables declared for obs_dim {}",
                self.variables.len(),
                self.obs_dim
            ));
        }
        for v in &self.variables {
            if !(v.range.0 < v.range.1) {
                return bad(format!("variable {} has an empty range", v.name));
            }
            for t in &v.terms {
                t.mf.check()?;
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            let mut seen = vec![false; self.obs_dim];
            for c in &r.antecedent {
                if c.input >= self.obs_dim {
                    return bad(format!("rule {i} references input {}", c.input));
                }
                if std::mem::replace(&mut seen[c.input], true) {
                    return bad(format!("rule {i} has two clauses on input {}", c.input));
                }
            }
            if r.action.is_some_and(|a| a >= self.num_actions) {
                return bad(format!("rule {i} gates on an out-of-range action"));
            }
            if r.consequent.len() != self.obs_dim
                || r.consequent.iter().any(|c| c.len() != self.obs_dim + 1)
            {
                return bad(format!(
                    "rule {i} consequent must be {} rows of {} coefficients",
                    self.obs_dim,
                    self.obs_dim + 1
                ));
            }
            if r.consequent.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("rule {i} has non-finite coefficients"));
            }
        }
        Ok(())
    }

    pub fn firing_strengths(&self, obs: &[f64], action: usize) -> Vec<f64> {
        self.rules
            .iter()
            .map(|r| firing_strength(r, obs, action, self.tnorm))
            .collect()
    }

    /// Predicts the next observation.
    pub fn infer(&self, obs: &[f64], action: usize) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                what: "fuzzy input",
                expected: self.obs_dim,
                actual: obs.len(),
            });
        }
        let mut num = vec![0.0; self.obs_dim];
        let mut den = 0.0;
        for rule in &self.rules {
            let w = firing_strength(rule, obs, action, self.tnorm);
            if w > 0.0 {
                den += w;
                for (n, f) in num.iter_mut().zip(rule.consequent_at(obs)) {
                    *n += w * f;
                }
            }
        }
        if den > 0.0 {
            return Ok(num.into_iter().map(|n| n / den).collect());
        }
        match self.zero_firing {
            ZeroFiring::Identity => {
                log::debug!("no rule fires at {obs:?} (action {action}); predicting identity");
                Ok(obs.to_vec())
            }
            ZeroFiring::Error => Err(Error::ZeroFiring {
                obs: obs.to_vec(),
                action,
            }),
        }
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.variables.iter().map(|v| v.range).collect()
    }
}

/// Predicts the next observation with `model`.
pub fn infer(model: &FuzzyModel, obs: &[f64], action: usize) -> Result<Vec<f64>> {
    model.infer(obs, action)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TermFile {
    label: String,
    shape: String,
    params: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct VariableFile {
    name: String,
    #[serde(default = "unit_range")]
    range: [f64; 2],
    terms: Vec<TermFile>,
}

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ClauseFile {
    var: String,
    term: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ActionRef {
    Index(usize),
    Label(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RuleFile {
    #[serde(default)]
    antecedent: Vec<ClauseFile>,
    #[serde(default)]
    action: Option<ActionRef>,
    consequent: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FuzzyModelFile {
    obs_dim: usize,
    num_actions: usize,
    #[serde(default)]
    tnorm: TNorm,
    #[serde(default)]
    zero_firing: ZeroFiring,
    #[serde(default)]
    action_labels: Vec<String>,
    variables: Vec<VariableFile>,
    rules: Vec<RuleFile>,
}

impl TryFrom<FuzzyModelFile> for FuzzyModel {
    type Error = Error;

    fn try_from(f: FuzzyModelFile) -> Result<Self> {
        let variables = f
            .variables
            .iter()
            .map(|v| {
                Ok(LinguisticVariable {
                    name: v.name.clone(),
                    range: (v.range[0], v.range[1]),
                    terms: v
                        .terms
                        .iter()
                        .map(|t| {
                            Ok(LinguisticTerm {
                                label: t.label.clone(),
                                mf: MembershipFunction::from_shape(&t.shape, &t.params)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let action_labels = if f.action_labels.is_empty() {
            (0..f.num_actions).map(|a| format!("action_{a}")).collect()
        } else {
            f.action_labels
        };
        let mut rules = Vec::with_capacity(f.rules.len());
        for (i, r) in f.rules.into_iter().enumerate() {
            let mut antecedent = Vec::with_capacity(r.antecedent.len());
            for c in &r.antecedent {
                let input = variables
                    .iter()
                    .position(|v| v.name == c.var)
                    .ok_or_else(|| Error::InvalidFuzzyModel(format!("rule {i}: unknown variable {:?}", c.var)))?;
                let term = variables[input]
                    .terms
                    .iter()
                    .position(|t| t.label == c.term)
                    .ok_or_else(|| {
                        Error::InvalidFuzzyModel(format!("rule {i}: unknown term {:?} of {:?}", c.term, c.var))
                    })?;
                antecedent.push(Clause {
                    input,
                    term,
                    mf: variables[input].terms[term].mf,
                });
            }
            let action = match r.action {
                None => None,
                Some(ActionRef::Index(a)) => Some(a),
                Some(ActionRef::Label(l)) => Some(
                    action_labels
                        .iter()
                        .position(|x| *x == l)
                        .ok_or_else(|| Error::InvalidFuzzyModel(format!("rule {i}: unknown action {l:?}")))?,
                ),
            };
            rules.push(FuzzyRule {
                antecedent,
                action,
                consequent: r.consequent,
            });
        }
        let model = FuzzyModel {
            obs_dim: f.obs_dim,
            num_actions: f.num_actions,
            tnorm: f.tnorm,
            zero_firing: f.zero_firing,
            variables,
            rules,
            action_labels,
        };
        model.check()?;
        Ok(model)
    }
}

impl From<FuzzyModel> for FuzzyModelFile {
    fn from(m: FuzzyModel) -> Self {
        let rules = m
            .rules
            .iter()
            .map(|r| RuleFile {
                antecedent: r
                    .antecedent
                    .iter()
                    .map(|c| ClauseFile {
                        var: m.variables[c.input].name.clone(),
                        term: m.variables[c.input].terms[c.term].label.clone(),
                    })
                    .collect(),
                action: r.action.map(ActionRef::Index),
                consequent: r.consequent.clone(),
            })
            .collect();
        let variables = m
            .variables
            .into_iter()
            .map(|v| VariableFile {
                name: v.name,
                range: [v.range.0, v.range.1],
                terms: v
                    .terms
                    .into_iter()
                    .map(|t| TermFile {
                        label: t.label,
                        shape: t.mf.shape_name().into(),
                        params: t.mf.params(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            obs_dim: m.obs_dim,
            num_actions: m.num_actions,
            tnorm: m.tnorm,
            zero_firing: m.zero_firing,
            action_labels: m.action_labels,
            variables,
            rules,
        }
    }
}
