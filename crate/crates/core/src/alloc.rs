//! Sample allocations across nesting levels for a total budget `T`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bounds::Smoothness;
use crate::error::{NmcError, Result};
use crate::problem::{AllocationPlan, MAX_DEPTH};

/// Predicted MSE rate exponent `num/den` in `MSE = O(T^(num/den))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: i64,
    pub den: i64,
}

impl Rate {
    fn reduced(num: i64, den: i64) -> Self {
        let (mut a, mut b) = (num.unsigned_abs(), den.unsigned_abs());
        while b != 0 {
            (a, b) = (b, a % b);
        }
        let g = a.max(1) as i64;
        Self { num: num / g, den: den / g }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Rate implied by [`optimal_allocation`] at depth `D`.
pub fn predicted_rate(depth: usize, smoothness: Smoothness) -> Rate {
    let d = depth as i64;
    match smoothness {
        Smoothness::Lipschitz => Rate::reduced(-1, d + 1),
        Smoothness::ContinuouslyDifferentiable => Rate::reduced(-2, d + 2),
    }
}

/// `round_half_even(T^e)`, at least 1.
pub fn rounded_power(t: u64, exponent: f64) -> u64 {
    let v = (t as f64).powf(exponent).round_ties_even();
    if v < 1.0 {
        1
    } else {
        v as u64
    }
}

/// Asymptotically optimal counts: all equal under the Lipschitz rule;
/// `N_0 = T^(2/(D+2))` and `N_k = T^(1/(D+2))` when `f` is smooth.
pub fn optimal_allocation(t: u64, depth: usize, smoothness: Smoothness) -> Result<AllocationPlan> {
    if depth == 0 || depth > MAX_DEPTH {
        return Err(NmcError::ParameterDomain(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
    }
    let minimum = 1u64 << (depth + 1);
    if t < minimum {
        return Err(NmcError::InfeasibleBudget { budget: t, minimum });
    }
    let d = depth as f64;
    let (rule, counts) = match smoothness {
        Smoothness::Lipschitz => ("lipschitz", vec![rounded_power(t, 1.0 / (d + 1.0)); depth + 1]),
        Smoothness::ContinuouslyDifferentiable => {
            let mut counts = vec![rounded_power(t, 1.0 / (d + 2.0)); depth + 1];
            counts[0] = rounded_power(t, 2.0 / (d + 2.0));
            ("smooth", counts)
        }
    };
    let label = format!("{rule} rate={}", predicted_rate(depth, smoothness));
    AllocationPlan::new(counts, label)
}

/// Exponents of `T` per level: `alpha_1`, then `alpha_2 (1 - alpha_1)`, and so
/// on, with the innermost level taking what remains.
pub fn alpha_exponents(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() || alphas.len() > MAX_DEPTH {
        return Err(NmcError::Shape {
            expected: format!("1..={MAX_DEPTH} alphas"),
            got: alphas.len().to_string(),
        });
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(NmcError::ParameterDomain(format!("alpha must be in (0, 1), got {a}")));
    }
    let mut remaining = 1.0;
    let mut exponents = Vec::with_capacity(alphas.len() + 1);
    for &a in alphas {
        exponents.push(a * remaining);
        remaining *= 1.0 - a;
    }
    exponents.push(remaining);
    Ok(exponents)
}

pub fn alpha_allocation(t: u64, alphas: &[f64]) -> Result<AllocationPlan> {
    if t == 0 {
        return Err(NmcError::InfeasibleBudget { budget: 0, minimum: 1 });
    }
    let counts = alpha_exponents(alphas)?.into_iter().map(|e| rounded_power(t, e)).collect();
    let label = format!(
        "alpha={}",
        alphas.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    );
    AllocationPlan::new(counts, label)
}
