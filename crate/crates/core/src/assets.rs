//! Inputs shipped with the crate.
//!
//! The synthetic environment's Beta parameters approximate published
//! density plots and are not exact ground truth. The expert model is
//! hand-curated, and the MG model is an illustrative placeholder.

use crate::error::Result;
use crate::fuzzy::FuzzyModel;
use crate::pomdp::GroundTruthEnv;

pub const SYNTHETIC_ENV_JSON: &str = include_str!("../assets/synthetic_env.json");
pub const SYNTHETIC_EXPERT_JSON: &str = include_str!("../assets/synthetic_expert.json");
pub const MG_PLACEHOLDER_JSON: &str = include_str!("../assets/mg_placeholder.json");

/// Three-state Healthy/Sick/Critical environment with Wait/Treat actions.
pub fn synthetic_env() -> Result<GroundTruthEnv> {
    Ok(serde_json::from_str(SYNTHETIC_ENV_JSON)?)
}

/// Expert fuzzy model for the synthetic environment.
pub fn synthetic_expert() -> Result<FuzzyModel> {
    Ok(serde_json::from_str(SYNTHETIC_EXPERT_JSON)?)
}

/// Ten-variable, two-action fuzzy model for the MG-style pipeline.
pub fn mg_placeholder() -> Result<FuzzyModel> {
    Ok(serde_json::from_str(MG_PLACEHOLDER_JSON)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_assets_load() {
        let env = synthetic_env().unwrap();
        assert_eq!(env.state_labels, ["Healthy", "Sick", "Critical"]);
        assert_eq!(env.transitions.get(2, 0, 2), 0.94);
        let expert = synthetic_expert().unwrap();
        assert_eq!((expert.obs_dim, expert.num_actions), (2, 2));
        let mg = mg_placeholder().unwrap();
        assert_eq!((mg.obs_dim, mg.num_actions), (10, 2));
    }
}
