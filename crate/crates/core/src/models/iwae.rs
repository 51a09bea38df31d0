//! Log of an inner mean of unit-mean lognormal weights, `w = exp(sigma eps - sigma^2/2)`.
//! The target `ln E[w]` is 0.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{NmcError, Result};
use crate::estimator::nmc_estimate;
use crate::problem::{AllocationPlan, Draw, EstimateRecord, NestedProblem};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug)]
pub struct IwaeProblem {
    sigma: f64,
}

impl IwaeProblem {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(NmcError::ParameterDomain(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl NestedProblem for IwaeProblem {
    fn depth(&self) -> usize {
        1
    }

    fn sample(&self, level: usize, _prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        if level == 0 {
            Draw::EMPTY
        } else {
            Draw::scalar(StandardNormal.sample(stream))
        }
    }

    fn leaf(&self, path: &[Draw]) -> f64 {
        (self.sigma * path[1][0] - 0.5 * self.sigma * self.sigma).exp()
    }

    fn combine(&self, _level: usize, _path: &[Draw], inner: f64) -> f64 {
        inner.ln()
    }

    fn ground_truth(&self) -> Option<f64> {
        Some(0.0)
    }
}

pub fn iwae_objective(n: u64, m: u64, sigma: f64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    let plan = AllocationPlan::new(vec![n, m], "iwae")?;
    nmc_estimate(&IwaeProblem::new(sigma)?, &plan, stream)
}
