//! Finite-sample mean squared error bounds for the nested estimator.
//!
//! All functions return the leading terms only; the asymptotically dominated
//! remainders are left out, except in [`bound_single_exact`] which keeps every
//! characterized term for single nesting.

use serde::{Deserialize, Serialize};

use crate::error::{NmcError, Result};
use crate::problem::AllocationPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Lipschitz,
    ContinuouslyDifferentiable,
}

impl std::str::FromStr for Smoothness {
    type Err = NmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lipschitz" => Ok(Self::Lipschitz),
            "smooth" | "continuously_differentiable" => Ok(Self::ContinuouslyDifferentiable),
            other => Err(NmcError::Parse(format!("unknown smoothness '{other}'"))),
        }
    }
}

/// Problem constants `K_0..K_{D-1}`, optional `C_0..C_{D-1}` and `sigma_0..sigma_D`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    lipschitz: Vec<f64>,
    second_deriv: Option<Vec<f64>>,
    sigma: Vec<f64>,
}

fn check_entries(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        Some(v) => Err(NmcError::ParameterDomain(format!("{name} entries must be finite and >= 0, got {v}"))),
        None => Ok(()),
    }
}

impl BoundInputs {
    /// Depth is `sigma.len() - 1`; `lipschitz` (and `second_deriv` if given)
    /// must have one entry per nesting level.
    pub fn new(lipschitz: Vec<f64>, second_deriv: Option<Vec<f64>>, sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(NmcError::Shape { expected: "at least one sigma".into(), got: "none".into() });
        }
        let depth = sigma.len() - 1;
        if lipschitz.len() != depth {
            return Err(NmcError::Shape {
                expected: format!("{depth} Lipschitz constants"),
                got: lipschitz.len().to_string(),
            });
        }
        if let Some(c) = &second_deriv {
            if c.len() != depth {
                return Err(NmcError::Shape {
                    expected: format!("{depth} second-derivative constants"),
                    got: c.len().to_string(),
                });
            }
            check_entries("C", c)?;
        }
        check_entries("K", &lipschitz)?;
        check_entries("sigma", &sigma)?;
        Ok(Self { lipschitz, second_deriv, sigma })
    }

    pub fn depth(&self) -> usize {
        self.sigma.len() - 1
    }

    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn second_deriv(&self) -> Option<&[f64]> {
        self.second_deriv.as_deref()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    fn counts(&self, plan: &AllocationPlan) -> Result<Vec<f64>> {
        if plan.depth() != self.depth() {
            return Err(NmcError::Shape {
                expected: format!("plan with {} levels", self.depth() + 1),
                got: format!("{} levels", plan.counts().len()),
            });
        }
        Ok(plan.counts().iter().map(|&n| n as f64).collect())
    }
}

/// `s_0^2/N_0 + sum_{k=1..D} (prod_{l<k} K_l^2) s_k^2/N_k`.
pub fn bound_lipschitz(inputs: &BoundInputs, plan: &AllocationPlan) -> Result<f64> {
    let n = inputs.counts(plan)?;
    let s = &inputs.sigma;
    let mut total = s[0] * s[0] / n[0];
    let mut gain = 1.0;
    for k in 1..n.len() {
        gain *= inputs.lipschitz[k - 1] * inputs.lipschitz[k - 1];
        total += gain * s[k] * s[k] / n[k];
    }
    Ok(total)
}

/// `s_0^2/N_0 + (C_0 s_1^2/(2N_1) + sum_{k=0..D-2} (prod_{d<=k} K_d) C_{k+1} s_{k+2}^2/(2N_{k+2}))^2`.
pub fn bound_smooth(inputs: &BoundInputs, plan: &AllocationPlan) -> Result<f64> {
    let c = inputs.second_deriv.as_deref().ok_or(NmcError::MissingInput("second-derivative constants C"))?;
    let n = inputs.counts(plan)?;
    let s = &inputs.sigma;
    let depth = inputs.depth();
    let mut bias = 0.0;
    if depth >= 1 {
        bias = c[0] * s[1] * s[1] / (2.0 * n[1]);
        let mut gain = 1.0;
        for k in 0..depth.saturating_sub(1) {
            gain *= inputs.lipschitz[k];
            bias += gain * c[k + 1] * s[k + 2] * s[k + 2] / (2.0 * n[k + 2]);
        }
    }
    Ok(s[0] * s[0] / n[0] + bias * bias)
}

/// Single-nesting bound including the characterized cross terms.
pub fn bound_single_exact(inputs: &BoundInputs, n0: u64, n1: u64, smoothness: Smoothness) -> Result<f64> {
    if inputs.depth() != 1 {
        return Err(NmcError::Shape { expected: "depth 1".into(), got: format!("depth {}", inputs.depth()) });
    }
    if n0 == 0 || n1 == 0 {
        return Err(NmcError::ParameterDomain("N0 and N1 must be >= 1".into()));
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    let k = inputs.lipschitz[0];
    let (s0, s1) = (inputs.sigma[0], inputs.sigma[1]);
    Ok(match smoothness {
        Smoothness::Lipschitz => {
            s0 * s0 / n0
                + 4.0 * k * k * s1 * s1 / (n0 * n1)
                + 2.0 * k * s0 * s1 / (n0 * n1.sqrt())
                + k * k * s1 * s1 / n1
        }
        Smoothness::ContinuouslyDifferentiable => {
            let c = inputs.second_deriv.as_deref().ok_or(NmcError::MissingInput("second-derivative constants C"))?[0];
            let bias_sq = c * c * s1.powi(4) / (4.0 * n1 * n1);
            s0 * s0 / n0
                + bias_sq * (1.0 + 1.0 / n0)
                + k * k * s1 * s1 / (n0 * n1)
                + (2.0 * k * s1 / (n0 * n1.sqrt())) * (s0 * s0 + bias_sq).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(c: &[u64]) -> AllocationPlan {
        AllocationPlan::manual(c.to_vec()).unwrap()
    }

    #[test]
    fn lipschitz_examples() {
        let i = BoundInputs::new(vec![1.0], None, vec![1.0, 1.0]).unwrap();
        assert!((bound_lipschitz(&i, &plan(&[100, 100])).unwrap() - 0.02).abs() < 1e-15);
        let zero = BoundInputs::new(vec![3.0, 2.0], None, vec![0.0; 3]).unwrap();
        assert_eq!(bound_lipschitz(&zero, &plan(&[7, 8, 9])).unwrap(), 0.0);
        let k0 = BoundInputs::new(vec![0.0], None, vec![2.0, 5.0]).unwrap();
        assert_eq!(bound_lipschitz(&k0, &plan(&[8, 3])).unwrap(), 0.5);
    }

    #[test]
    fn lipschitz_depth_two_by_hand() {
        let i = BoundInputs::new(vec![2.0, 3.0], None, vec![1.0, 1.0, 1.0]).unwrap();
        let got = bound_lipschitz(&i, &plan(&[10, 20, 40])).unwrap();
        assert!((got - (0.1 + 4.0 / 20.0 + 36.0 / 40.0)).abs() < 1e-15);
    }

    #[test]
    fn smooth_examples() {
        let i = BoundInputs::new(vec![1.0], Some(vec![2.0]), vec![1.0, 1.0]).unwrap();
        assert!((bound_smooth(&i, &plan(&[100, 100])).unwrap() - 0.0101).abs() < 1e-15);
        let a = bound_smooth(&i, &plan(&[100, 100])).unwrap() - 0.01;
        let b = bound_smooth(&i, &plan(&[100, 200])).unwrap() - 0.01;
        assert!((a / b - 4.0).abs() < 1e-9);
        let exact = BoundInputs::new(vec![1.0], Some(vec![2.0]), vec![1.0, 0.0]).unwrap();
        assert_eq!(bound_smooth(&exact, &plan(&[100, 3])).unwrap(), 0.01);
        let no_c = BoundInputs::new(vec![1.0], None, vec![1.0, 1.0]).unwrap();
        assert!(matches!(bound_smooth(&no_c, &plan(&[1, 1])), Err(NmcError::MissingInput(_))));
    }

    #[test]
    fn smooth_depth_two_by_hand() {
        let i = BoundInputs::new(vec![2.0, 7.0], Some(vec![1.0, 3.0]), vec![1.0, 2.0, 1.0]).unwrap();
        let got = bound_smooth(&i, &plan(&[10, 4, 6])).unwrap();
        let bias = 1.0 * 4.0 / 8.0 + 2.0 * 3.0 * 1.0 / 12.0;
        assert!((got - (0.1 + bias * bias)).abs() < 1e-15);
    }

    #[test]
    fn single_exact_examples() {
        let i = BoundInputs::new(vec![1.0], None, vec![1.0, 1.0]).unwrap();
        let got = bound_single_exact(&i, 100, 100, Smoothness::Lipschitz).unwrap();
        assert!((got - 0.0224).abs() < 1e-12);
        let k0 = BoundInputs::new(vec![0.0], None, vec![1.0, 4.0]).unwrap();
        assert_eq!(bound_single_exact(&k0, 50, 9, Smoothness::Lipschitz).unwrap(), 0.02);
        let s = BoundInputs::new(vec![2.0], Some(vec![3.0]), vec![1.0, 0.0]).unwrap();
        assert_eq!(bound_single_exact(&s, 50, 9, Smoothness::ContinuouslyDifferentiable).unwrap(), 0.02);
        let deep = BoundInputs::new(vec![1.0, 1.0], None, vec![1.0; 3]).unwrap();
        assert!(matches!(bound_single_exact(&deep, 1, 1, Smoothness::Lipschitz), Err(NmcError::Shape { .. })));
    }

    #[test]
    fn inputs_are_validated() {
        assert!(BoundInputs::new(vec![1.0, 1.0], None, vec![1.0, 1.0]).is_err());
        assert!(BoundInputs::new(vec![-1.0], None, vec![1.0, 1.0]).is_err());
        assert!(BoundInputs::new(vec![1.0], Some(vec![]), vec![1.0, 1.0]).is_err());
        assert!(BoundInputs::new(vec![1.0], None, vec![f64::NAN, 1.0]).is_err());
        let i = BoundInputs::new(vec![1.0], None, vec![1.0, 1.0]).unwrap();
        assert!(matches!(bound_lipschitz(&i, &plan(&[1, 1, 1])), Err(NmcError::Shape { .. })));
    }
}
