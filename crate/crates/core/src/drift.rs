//! Drift families. Every drift reads the current state of its own vertex
//! and, on graphs, the mean of its neighbours; evaluation at step `i` never
//! looks past `t_i`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DriftFunctional {
    Zero,
    Constant { theta: f64 },
    /// `θ₀ + θ₁ x`.
    Linear { theta0: f64, theta1: f64 },
    /// `θ tanh(x / scale)`.
    BoundedTanh { theta: f64, scale: f64 },
    /// `θ₀ + θ₁ x_u + θ₂ mean(x_{N_u})`.
    NeighborLinear { theta0: f64, theta1: f64, theta2: f64 },
}

impl DriftFunctional {
    /// `b(t, x_u, mean of neighbours)`; a missing neighbourhood counts as 0.
    pub fn eval(&self, _t: f64, x: f64, neighbor_mean: Option<f64>) -> f64 {
        match *self {
            DriftFunctional::Zero => 0.0,
            DriftFunctional::Constant { theta } => theta,
            DriftFunctional::Linear { theta0, theta1 } => theta0 + theta1 * x,
            DriftFunctional::BoundedTanh { theta, scale } => theta * (x / scale).tanh(),
            DriftFunctional::NeighborLinear { theta0, theta1, theta2 } => {
                theta0 + theta1 * x + theta2 * neighbor_mean.unwrap_or(0.0)
            }
        }
    }

    /// `M` with `|b(t, x)| ≤ M (1 + ‖x‖_∞)`, the sup taken over the vertex and
    /// its neighbours.
    pub fn certificate(&self) -> f64 {
        match *self {
            DriftFunctional::Zero => 0.0,
            DriftFunctional::Constant { theta } => theta.abs(),
            DriftFunctional::Linear { theta0, theta1 } => theta0.abs().max(theta1.abs()),
            DriftFunctional::BoundedTanh { theta, .. } => theta.abs(),
            DriftFunctional::NeighborLinear { theta0, theta1, theta2 } => theta0.abs().max(theta1.abs() + theta2.abs()),
        }
    }

    /// True when `b` ignores the state, so one `q` serves every path.
    pub fn is_state_free(&self) -> bool {
        matches!(self, DriftFunctional::Zero | DriftFunctional::Constant { .. })
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DriftFunctional::Zero => true,
            DriftFunctional::Constant { theta } => theta == 0.0,
            DriftFunctional::Linear { theta0, theta1 } => theta0 == 0.0 && theta1 == 0.0,
            DriftFunctional::BoundedTanh { theta, .. } => theta == 0.0,
            DriftFunctional::NeighborLinear { theta0, theta1, theta2 } => theta0 == 0.0 && theta1 == 0.0 && theta2 == 0.0,
        }
    }
}

impl FromStr for DriftFunctional {
    type Err = Error;

    /// `zero`, `const:θ`, `linear:θ₀,θ₁`, `tanh:θ,scale`, `neighbor:θ₀,θ₁,θ₂`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|e| Error::Parse(format!("drift '{s}': {e}"))))
                .collect::<Result<_>>()?
        };
        let want = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::Parse(format!("drift '{name}' takes {k} parameters, got {}", nums.len())))
            }
        };
        let d = match name {
            "zero" => {
                want(0)?;
                DriftFunctional::Zero
            }
            "const" => {
                want(1)?;
                DriftFunctional::Constant { theta: nums[0] }
            }
            "linear" => {
                want(2)?;
                DriftFunctional::Linear { theta0: nums[0], theta1: nums[1] }
            }
            "tanh" => {
                want(2)?;
                if !(nums[1] > 0.0) {
                    return Err(Error::Parse("tanh scale must be positive".into()));
                }
                DriftFunctional::BoundedTanh { theta: nums[0], scale: nums[1] }
            }
            "neighbor" => {
                want(3)?;
                DriftFunctional::NeighborLinear { theta0: nums[0], theta1: nums[1], theta2: nums[2] }
            }
            _ => return Err(Error::Parse(format!("unknown drift family '{name}'"))),
        };
        if nums.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("drift '{s}' has non-finite parameters")));
        }
        Ok(d)
    }
}

impl fmt::Display for DriftFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DriftFunctional::Zero => write!(f, "zero"),
            DriftFunctional::Constant { theta } => write!(f, "const:{theta}"),
            DriftFunctional::Linear { theta0, theta1 } => write!(f, "linear:{theta0},{theta1}"),
            DriftFunctional::BoundedTanh { theta, scale } => write!(f, "tanh:{theta},{scale}"),
            DriftFunctional::NeighborLinear { theta0, theta1, theta2 } => write!(f, "neighbor:{theta0},{theta1},{theta2}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["zero", "const:0.7", "linear:0.5,-1", "tanh:1,2", "neighbor:0.1,-0.5,0.8"] {
            let d: DriftFunctional = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("const".parse::<DriftFunctional>().is_err());
        assert!("tanh:1,0".parse::<DriftFunctional>().is_err());
        assert!("wobble:1".parse::<DriftFunctional>().is_err());
    }

    #[test]
    fn certificate_bounds_drift() {
        let drifts: Vec<DriftFunctional> = ["const:-0.7", "linear:0.5,-1", "tanh:1.5,2", "neighbor:0.1,-0.5,0.8"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        for d in drifts {
            let m = d.certificate();
            for &x in &[-10.0, -1.0, 0.0, 0.3, 4.0] {
                for &nb in &[-3.0, 0.0, 2.5] {
                    let sup = f64::max(f64::abs(x), f64::abs(nb));
                    assert!(d.eval(0.0, x, Some(nb)).abs() <= m * (1.0 + sup) + 1e-12, "{d} at {x},{nb}");
                }
            }
        }
    }

    #[test]
    fn zero_detection() {
        assert!(DriftFunctional::Constant { theta: 0.0 }.is_zero());
        assert!(!"tanh:1,1".parse::<DriftFunctional>().unwrap().is_zero());
    }
}
