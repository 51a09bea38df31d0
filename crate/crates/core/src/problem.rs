//! Nested expectation problems, allocation plans and estimate records.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{NmcError, Result};
use crate::rng::RandomStream;

/// Largest number of reals in a single level draw.
pub const MAX_ARITY: usize = 4;

/// Deepest nesting the recursive estimator accepts.
pub const MAX_DEPTH: usize = 16;

/// One level draw `y^(k)`: a fixed-arity tuple of reals. Components beyond
/// the arity declared by the problem are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Draw([f64; MAX_ARITY]);

impl Draw {
    pub const EMPTY: Draw = Draw([0.0; MAX_ARITY]);

    pub fn scalar(x: f64) -> Self {
        let mut d = Self::EMPTY;
        d.0[0] = x;
        d
    }

    pub fn pair(a: f64, b: f64) -> Self {
        let mut d = Self::EMPTY;
        d.0[0] = a;
        d.0[1] = b;
        d
    }

    pub fn from_slice(values: &[f64]) -> Self {
        assert!(values.len() <= MAX_ARITY, "draw arity exceeds {MAX_ARITY}");
        let mut d = Self::EMPTY;
        d.0[..values.len()].copy_from_slice(values);
        d
    }

    pub fn values(&self) -> &[f64; MAX_ARITY] {
        &self.0
    }
}

impl Index<usize> for Draw {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A depth-`D` nested expectation
///
/// `gamma_k(y^(0:k-1)) = E[ f_k(y^(0:k), gamma_{k+1}(y^(0:k))) ]`, with
/// `gamma_D(y^(0:D-1)) = E[ f_D(y^(0:D)) ]` and target `gamma_0`.
///
/// `sample(k, prefix, ..)` draws `y^(k)` given `prefix = y^(0:k-1)`; it may
/// ignore the prefix entirely. `leaf` is `f_D` and `combine(k, ..)` is `f_k`
/// for `k < D`; both must be deterministic.
pub trait NestedProblem: Send + Sync {
    fn depth(&self) -> usize;

    fn sample(&self, level: usize, prefix: &[Draw], stream: &mut RandomStream) -> Draw;

    fn leaf(&self, path: &[Draw]) -> f64;

    fn combine(&self, level: usize, path: &[Draw], inner: f64) -> f64;

    fn ground_truth(&self) -> Option<f64> {
        None
    }

    /// Exact conditional law of `y^(level)` as `(value, probability)` pairs,
    /// for problems whose samplers are enumerable.
    fn support(&self, _level: usize, _prefix: &[Draw]) -> Option<Vec<(Draw, f64)>> {
        None
    }
}

/// Per-level sample counts `N_0 ... N_D`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    counts: Vec<u64>,
    pub strategy_label: String,
}

impl AllocationPlan {
    pub fn new(counts: Vec<u64>, strategy_label: impl Into<String>) -> Result<Self> {
        if counts.is_empty() {
            return Err(NmcError::Shape {
                expected: "at least one level count".into(),
                got: "empty plan".into(),
            });
        }
        if counts.len() > MAX_DEPTH + 1 {
            return Err(NmcError::Shape {
                expected: format!("at most {} levels", MAX_DEPTH + 1),
                got: format!("{} levels", counts.len()),
            });
        }
        if counts.contains(&0) {
            return Err(NmcError::ParameterDomain("every level count must be >= 1".into()));
        }
        Ok(Self { counts, strategy_label: strategy_label.into() })
    }

    pub fn manual(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts, "manual")
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn depth(&self) -> usize {
        self.counts.len() - 1
    }

    /// `T = prod_k N_k`, the number of innermost function evaluations.
    pub fn effective_budget(&self) -> Result<u64> {
        effective_budget(&self.counts)
    }
}

pub fn effective_budget(counts: &[u64]) -> Result<u64> {
    counts
        .iter()
        .try_fold(1u64, |acc, &n| acc.checked_mul(n))
        .ok_or(NmcError::BudgetOverflow)
}

/// Result of one estimator evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub value: f64,
    pub plan: AllocationPlan,
    pub base_seed: u64,
    pub stream_path: Vec<u64>,
    pub effective_budget: u64,
    pub wall_time: f64,
}

impl EstimateRecord {
    pub(crate) fn new(value: f64, plan: AllocationPlan, stream: &RandomStream, wall_time: f64) -> Result<Self> {
        let effective_budget = plan.effective_budget()?;
        Ok(Self {
            value,
            plan,
            base_seed: stream.base_seed(),
            stream_path: stream.path().to_vec(),
            effective_budget,
            wall_time,
        })
    }
}

pub type LeafFn = Box<dyn Fn(&[Draw]) -> f64 + Send + Sync>;
pub type CombineFn = Box<dyn Fn(&[Draw], f64) -> f64 + Send + Sync>;
pub type ConditionalFn = Box<dyn Fn(&[Draw]) -> DistributionSpec + Send + Sync>;
pub type CustomSamplerFn = Box<dyn Fn(&[Draw], &mut RandomStream) -> Draw + Send + Sync>;

/// How one level of an [`FnProblem`] draws `y^(k)`.
pub enum Sampler {
    /// Degenerate at a fixed draw.
    Constant(Draw),
    /// Scalar draw from a distribution that ignores the prefix.
    Fixed(DistributionSpec),
    /// Scalar draw from a distribution built from the prefix.
    Conditional(ConditionalFn),
    /// Arbitrary sampler; not enumerable.
    Custom(CustomSamplerFn),
}

impl Sampler {
    pub fn conditional(f: impl Fn(&[Draw]) -> DistributionSpec + Send + Sync + 'static) -> Self {
        Self::Conditional(Box::new(f))
    }

    pub fn custom(f: impl Fn(&[Draw], &mut RandomStream) -> Draw + Send + Sync + 'static) -> Self {
        Self::Custom(Box::new(f))
    }

    fn draw(&self, prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        match self {
            Sampler::Constant(d) => *d,
            Sampler::Fixed(spec) => Draw::scalar(spec.sample(stream)),
            Sampler::Conditional(f) => Draw::scalar(f(prefix).sample(stream)),
            Sampler::Custom(f) => f(prefix, stream),
        }
    }

    fn support(&self, prefix: &[Draw]) -> Option<Vec<(Draw, f64)>> {
        let scalar = |pairs: Vec<(f64, f64)>| pairs.into_iter().map(|(v, p)| (Draw::scalar(v), p)).collect();
        match self {
            Sampler::Constant(d) => Some(vec![(*d, 1.0)]),
            Sampler::Fixed(spec) => spec.support().map(scalar),
            Sampler::Conditional(f) => f(prefix).support().map(scalar),
            Sampler::Custom(_) => None,
        }
    }
}

/// A [`NestedProblem`] assembled from closures, for problems defined in host code.
pub struct FnProblem {
    samplers: Vec<Sampler>,
    combiners: Vec<CombineFn>,
    leaf: LeafFn,
    truth: Option<f64>,
}

impl FnProblem {
    /// `samplers` holds levels `0..=D`, `combiners` holds `f_0 .. f_{D-1}` and
    /// `leaf` is `f_D`.
    pub fn new(
        samplers: Vec<Sampler>,
        combiners: Vec<CombineFn>,
        leaf: impl Fn(&[Draw]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if samplers.is_empty() || samplers.len() > MAX_DEPTH + 1 {
            return Err(NmcError::Shape {
                expected: format!("1..={} samplers", MAX_DEPTH + 1),
                got: samplers.len().to_string(),
            });
        }
        if combiners.len() + 1 != samplers.len() {
            return Err(NmcError::Shape {
                expected: format!("{} combining functions", samplers.len() - 1),
                got: combiners.len().to_string(),
            });
        }
        Ok(Self { samplers, combiners, leaf: Box::new(leaf), truth: None })
    }

    pub fn with_truth(mut self, truth: f64) -> Self {
        self.truth = Some(truth);
        self
    }
}

/// Box a combining function `f_k(y^(0:k), inner)`.
pub fn combiner(f: impl Fn(&[Draw], f64) -> f64 + Send + Sync + 'static) -> CombineFn {
    Box::new(f)
}

impl NestedProblem for FnProblem {
    fn depth(&self) -> usize {
        self.samplers.len() - 1
    }

    fn sample(&self, level: usize, prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        self.samplers[level].draw(prefix, stream)
    }

    fn leaf(&self, path: &[Draw]) -> f64 {
        (self.leaf)(path)
    }

    fn combine(&self, level: usize, path: &[Draw], inner: f64) -> f64 {
        (self.combiners[level])(path, inner)
    }

    fn ground_truth(&self) -> Option<f64> {
        self.truth
    }

    fn support(&self, level: usize, prefix: &[Draw]) -> Option<Vec<(Draw, f64)>> {
        self.samplers[level].support(prefix)
    }
}
