use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::estimator::nmc_estimate;
use crate::problem::{AllocationPlan, EstimateRecord, NestedProblem};
use crate::rng::RandomStream;

/// Anything that turns a plan and a stream into one estimate.
pub trait Estimator: Send + Sync {
    /// Depth of the plans accepted: `plan.counts().len() == depth() + 1`.
    fn depth(&self) -> usize;

    fn estimate(&self, plan: &AllocationPlan, stream: &mut RandomStream) -> Result<EstimateRecord>;
}

/// The recursive estimator applied to a [`NestedProblem`].
pub struct Nested<P>(pub P);

impl<P: NestedProblem> Estimator for Nested<P> {
    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn estimate(&self, plan: &AllocationPlan, stream: &mut RandomStream) -> Result<EstimateRecord> {
        nmc_estimate(&self.0, plan, stream)
    }
}

pub struct FnEstimator<F> {
    depth: usize,
    f: F,
}

impl<F> Estimator for FnEstimator<F>
where
    F: Fn(&AllocationPlan, &mut RandomStream) -> Result<EstimateRecord> + Send + Sync,
{
    fn depth(&self) -> usize {
        self.depth
    }

    fn estimate(&self, plan: &AllocationPlan, stream: &mut RandomStream) -> Result<EstimateRecord> {
        (self.f)(plan, stream)
    }
}

pub fn fn_estimator<F>(depth: usize, f: F) -> FnEstimator<F>
where
    F: Fn(&AllocationPlan, &mut RandomStream) -> Result<EstimateRecord> + Send + Sync,
{
    FnEstimator { depth, f }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Enumeration,
    SelfReference { budget: u64, seed: u64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Analytic => f.write_str("analytic"),
            Provenance::Enumeration => f.write_str("enumeration"),
            Provenance::SelfReference { budget, seed } => write!(f, "self-reference(budget={budget},seed={seed})"),
        }
    }
}

/// Value errors are measured against. Exact truths have `std_error == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Truth {
    pub value: f64,
    pub std_error: f64,
    pub provenance: Provenance,
}

impl Truth {
    pub fn analytic(value: f64) -> Self {
        Self { value, std_error: 0.0, provenance: Provenance::Analytic }
    }

    pub fn enumerated(value: f64) -> Self {
        Self { value, std_error: 0.0, provenance: Provenance::Enumeration }
    }

    pub fn self_reference(value: f64, std_error: f64, budget: u64, seed: u64) -> Self {
        Self { value, std_error, provenance: Provenance::SelfReference { budget, seed } }
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.provenance, Provenance::SelfReference { .. })
    }
}
