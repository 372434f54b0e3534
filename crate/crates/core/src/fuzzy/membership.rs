use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membership function of a linguistic term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "shape")]
pub enum MembershipFunction {
    Triangular { a: f64, b: f64, c: f64 },
    Trapezoidal { a: f64, b: f64, c: f64, d: f64 },
    Gaussian { center: f64, sigma: f64 },
}

impl MembershipFunction {
    /// Builds from the `{shape, params[]}` file representation.
    pub fn from_shape(shape: &str, params: &[f64]) -> Result<Self> {
        let mf = match (shape, params) {
            ("triangular", &[a, b, c]) => Self::Triangular { a, b, c },
            ("trapezoidal", &[a, b, c, d]) => Self::Trapezoidal { a, b, c, d },
            ("gaussian", &[center, sigma]) => Self::Gaussian { center, sigma },
            _ => {
                return Err(Error::InvalidFuzzyModel(format!(
                    "unsupported membership shape {shape:?} with {} parameters",
                    params.len()
                )))
            }
        };
        mf.check()?;
        Ok(mf)
    }

    pub fn shape_name(&self) -> &'static str {
        match self {
            Self::Triangular { .. } => "triangular",
            Self::Trapezoidal { .. } => "trapezoidal",
            Self::Gaussian { .. } => "gaussian",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Self::Triangular { a, b, c } => vec![a, b, c],
            Self::Trapezoidal { a, b, c, d } => vec![a, b, c, d],
            Self::Gaussian { center, sigma } => vec![center, sigma],
        }
    }

    pub fn check(&self) -> Result<()> {
        let p = self.params();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFuzzyModel(format!("non-finite parameters in {self:?}")));
        }
        let ok = match *self {
            Self::Triangular { a, b, c } => a <= b && b <= c && a < c,
            Self::Trapezoidal { a, b, c, d } => a <= b && b <= c && c <= d && a < d,
            Self::Gaussian { sigma, .. } => sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidFuzzyModel(format!("ill-formed membership function {self:?}")))
        }
    }

    /// Degree of membership of `x`, always in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let v = match *self {
            Self::Triangular { a, b, c } => {
                if x < a || x > c {
                    0.0
                } else if x <= b {
                    if b > a {
                        (x - a) / (b - a)
                    } else {
                        1.0
                    }
                } else if c > b {
                    (c - x) / (c - b)
                } else {
                    1.0
                }
            }
            Self::Trapezoidal { a, b, c, d } => {
                if x < a || x > d {
                    0.0
                } else if x < b {
                    (x - a) / (b - a)
                } else if x <= c {
                    1.0
                } else {
                    (d - x) / (d - c)
                }
            }
            Self::Gaussian { center, sigma } => {
                let z = (x - center) / sigma;
                (-0.5 * z * z).exp()
            }
        };
        if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, 1.0)
        }
    }
}

/// Conjunction operator combining clause memberships.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TNorm {
    #[default]
    Product,
    Minimum,
}

impl TNorm {
    pub fn identity(self) -> f64 {
        1.0
    }

    pub fn combine(self, acc: f64, x: f64) -> f64 {
        match self {
            TNorm::Product => acc * x,
            TNorm::Minimum => acc.min(x),
        }
    }
}

/// Evaluates a membership function.
pub fn membership(mf: &MembershipFunction, x: f64) -> f64 {
    mf.eval(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn triangular_apex_and_ramp() {
        let t = MembershipFunction::Triangular { a: 0.0, b: 0.5, c: 1.0 };
        assert_eq!(membership(&t, 0.5), 1.0);
        assert_abs_diff_eq!(membership(&t, 0.25), 0.5, epsilon = 1e-15);
        assert_eq!(membership(&t, -0.1), 0.0);
        assert_eq!(membership(&t, 1.1), 0.0);
        assert_eq!(membership(&t, 0.0), 0.0);
    }

    #[test]
    fn gaussian_values() {
        let g = MembershipFunction::Gaussian { center: 0.5, sigma: 0.1 };
        assert_eq!(membership(&g, 0.5), 1.0);
        assert_abs_diff_eq!(membership(&g, 0.6), (-0.5_f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(membership(&g, 0.6), 0.6065, epsilon = 1e-4);
    }

    #[test]
    fn trapezoid_plateau_and_shoulders() {
        let t = MembershipFunction::Trapezoidal { a: 0.0, b: 0.2, c: 0.4, d: 1.0 };
        assert_eq!(t.eval(0.3), 1.0);
        assert_abs_diff_eq!(t.eval(0.1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.eval(0.7), 0.5, epsilon = 1e-12);
        let shoulder = MembershipFunction::Trapezoidal { a: -1.0, b: -1.0, c: 0.2, d: 0.5 };
        assert_eq!(shoulder.eval(-1.0), 1.0);
        assert_eq!(shoulder.eval(-1.5), 0.0);
        let degenerate = MembershipFunction::Triangular { a: 0.2, b: 0.2, c: 0.5 };
        assert_eq!(degenerate.eval(0.2), 1.0);
    }

    #[test]
    fn ill_formed_shapes_are_rejected() {
        assert!(MembershipFunction::from_shape("triangular", &[0.5, 0.2, 1.0]).is_err());
        assert!(MembershipFunction::from_shape("gaussian", &[0.5, 0.0]).is_err());
        assert!(MembershipFunction::from_shape("bell", &[0.5, 0.1]).is_err());
        assert!(MembershipFunction::from_shape("trapezoidal", &[0.0, 0.1, 0.2]).is_err());
    }

    #[test]
    fn outputs_stay_in_unit_interval_on_dense_grid() {
        let mfs = [
            MembershipFunction::Triangular { a: 0.0, b: 0.5, c: 1.0 },
            MembershipFunction::Triangular { a: 0.0, b: 0.0, c: 1.0 },
            MembershipFunction::Triangular { a: 0.0, b: 1.0, c: 1.0 },
            MembershipFunction::Trapezoidal { a: 0.1, b: 0.2, c: 0.2, d: 0.9 },
            MembershipFunction::Trapezoidal { a: 0.0, b: 0.0, c: 1.0, d: 1.0 },
            MembershipFunction::Gaussian { center: 0.3, sigma: 1e-3 },
        ];
        for mf in &mfs {
            let mut xs: Vec<f64> = (-2000..=3000).map(|i| i as f64 * 1e-3).collect();
            xs.extend(mf.params());
            for x in xs {
                let v = mf.eval(x);
                assert!((0.0..=1.0).contains(&v), "{mf:?} at {x} gave {v}");
            }
        }
    }

    proptest! {
        #[test]
        fn membership_in_unit_interval(
            mut pts in proptest::collection::vec(-5.0f64..5.0, 4),
            x in -10.0f64..10.0,
            sigma in 1e-4f64..5.0,
        ) {
            pts.sort_by(f64::total_cmp);
            prop_assume!(pts[0] < pts[3] && pts[0] < pts[2]);
            let tri = MembershipFunction::Triangular { a: pts[0], b: pts[1], c: pts[2] };
            let trap = MembershipFunction::Trapezoidal { a: pts[0], b: pts[1], c: pts[2], d: pts[3] };
            let g = MembershipFunction::Gaussian { center: pts[1], sigma };
            for mf in [tri, trap, g] {
                let v = mf.eval(x);
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
