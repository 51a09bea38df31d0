//! Expected information gain for a binary delay-discounting choice.
//!
//! A participant chooses between `A` now and `B` after `D` days. Given
//! `theta = (k, alpha)` they pick the delayed option with probability
//! `0.01 + 0.98 Phi((B / (1 + e^k D) - A) / alpha)`. Priors are
//! `k ~ N(-4.5, 0.5)` (standard deviation) and `alpha ~ Gamma(shape 2, rate 2)`.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

use crate::dist::{normal_cdf, sample_gamma};
use crate::error::{NmcError, Result};
use crate::estimator::{nmc_estimate_with, push_mean};
use crate::exec::Execution;
use crate::problem::{AllocationPlan, Draw, EstimateRecord, NestedProblem};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignPoint {
    pub a: f64,
    pub b: f64,
    pub delay: f64,
}

impl DesignPoint {
    pub fn new(a: f64, b: f64, delay: f64) -> Result<Self> {
        if [a, b, delay].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(Self { a, b, delay })
        } else {
            Err(NmcError::ParameterDomain(format!("design needs A, B, D > 0, got ({a}, {b}, {delay})")))
        }
    }

    /// `A` now versus 100 in 50 days.
    pub fn with_a(a: f64) -> Result<Self> {
        Self::new(a, 100.0, 50.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DDParams {
    pub k: f64,
    pub alpha: f64,
}

impl DDParams {
    pub fn new(k: f64, alpha: f64) -> Result<Self> {
        if k.is_finite() && alpha.is_finite() && alpha > 0.0 {
            Ok(Self { k, alpha })
        } else {
            Err(NmcError::ParameterDomain(format!("need finite k and alpha > 0, got ({k}, {alpha})")))
        }
    }

    pub fn sample_prior(stream: &mut RandomStream) -> Self {
        let z: f64 = StandardNormal.sample(stream);
        Self { k: -4.5 + 0.5 * z, alpha: sample_gamma(2.0, 2.0, stream) }
    }
}

/// Probability of choosing the delayed reward.
pub fn dd_response_prob(theta: &DDParams, d: &DesignPoint) -> f64 {
    let discounted = d.b / (1.0 + theta.k.exp() * d.delay);
    0.01 + 0.98 * normal_cdf((discounted - d.a) / theta.alpha)
}

/// Likelihood of a binary response `y = 1` given parameters and design.
pub trait ResponseModel: Send + Sync {
    fn prob(&self, theta: &DDParams, d: &DesignPoint) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DelayDiscounting;

impl ResponseModel for DelayDiscounting {
    fn prob(&self, theta: &DDParams, d: &DesignPoint) -> f64 {
        dd_response_prob(theta, d)
    }
}

/// Likelihood that ignores the parameters; the information gain is zero.
#[derive(Clone, Copy, Debug)]
pub struct ConstantResponse(pub f64);

impl ResponseModel for ConstantResponse {
    fn prob(&self, _theta: &DDParams, _d: &DesignPoint) -> f64 {
        self.0
    }
}

fn likelihood(p1: f64, y: f64) -> f64 {
    if y == 1.0 {
        p1
    } else {
        1.0 - p1
    }
}

fn theta_of(draw: &Draw) -> DDParams {
    DDParams { k: draw[0], alpha: draw[1] }
}

/// Level 0 draws `(k, alpha, y)`, level 1 draws `(k, alpha)` from the prior.
pub struct BedNaiveProblem<R = DelayDiscounting> {
    pub design: DesignPoint,
    pub response: R,
}

impl<R: ResponseModel> BedNaiveProblem<R> {
    pub fn new(design: DesignPoint, response: R) -> Self {
        Self { design, response }
    }
}

impl<R: ResponseModel> NestedProblem for BedNaiveProblem<R> {
    fn depth(&self) -> usize {
        1
    }

    fn sample(&self, level: usize, _prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        let theta = DDParams::sample_prior(stream);
        if level == 0 {
            let p = self.response.prob(&theta, &self.design);
            let y = if stream.next_f64() < p { 1.0 } else { 0.0 };
            Draw::from_slice(&[theta.k, theta.alpha, y])
        } else {
            Draw::pair(theta.k, theta.alpha)
        }
    }

    fn leaf(&self, path: &[Draw]) -> f64 {
        likelihood(self.response.prob(&theta_of(&path[1]), &self.design), path[0][2])
    }

    fn combine(&self, _level: usize, path: &[Draw], inner: f64) -> f64 {
        let own = likelihood(self.response.prob(&theta_of(&path[0]), &self.design), path[0][2]);
        own.ln() - inner.ln()
    }
}

/// One outer term `ln p(y | theta_0) - ln((1/M) sum_m p(y | theta_m))`.
pub fn naive_term<R: ResponseModel>(response: &R, d: &DesignPoint, theta0: &DDParams, y: f64, inner: &[DDParams]) -> f64 {
    let mut mean = 0.0;
    for (m, theta) in inner.iter().enumerate() {
        push_mean(&mut mean, likelihood(response.prob(theta, d), y), m as u64 + 1);
    }
    likelihood(response.prob(theta0, d), y).ln() - mean.ln()
}

pub fn bed_naive_eig_with<R: ResponseModel>(
    response: R,
    d: &DesignPoint,
    n: u64,
    m: u64,
    stream: &mut RandomStream,
    exec: Execution,
) -> Result<EstimateRecord> {
    let plan = AllocationPlan::new(vec![n, m], "bed-naive")?;
    nmc_estimate_with(&BedNaiveProblem::new(*d, response), &plan, stream, exec)
}

pub fn bed_naive_eig(d: &DesignPoint, n: u64, m: u64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    bed_naive_eig_with(DelayDiscounting, d, n, m, stream, Execution::Serial)
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Reformulated estimate with a delta-method standard error.
#[derive(Clone, Debug, PartialEq)]
pub struct ReformulatedEig {
    pub record: EstimateRecord,
    pub std_error: f64,
}

/// `(1/N) sum_n sum_c p_c(theta_n) ln p_c(theta_n) - sum_c P_c ln P_c` with
/// `P_c = (1/N) sum_n p_c(theta_n)`.
pub fn bed_reformulated_eig_with<R: ResponseModel>(
    response: &R,
    d: &DesignPoint,
    n: u64,
    stream: &mut RandomStream,
) -> Result<ReformulatedEig> {
    if n == 0 {
        return Err(NmcError::ParameterDomain("N must be >= 1".into()));
    }
    let start = Instant::now();
    let origin = stream.clone();
    // running means of h = sum_c p_c ln p_c, p_0, p_1 and the moments needed for the SE
    let (mut h, mut p0, mut p1) = (0.0, 0.0, 0.0);
    let (mut hh, mut pp, mut hp) = (0.0, 0.0, 0.0);
    for i in 1..=n {
        let theta = DDParams::sample_prior(stream);
        let q1 = response.prob(&theta, d);
        let q0 = 1.0 - q1;
        if ((q0 + q1) - 1.0).abs() > 1e-12 || !(0.0..=1.0).contains(&q1) {
            return Err(NmcError::ParameterDomain(format!("response probability {q1} is not a valid Bernoulli law")));
        }
        let v = xlnx(q0) + xlnx(q1);
        push_mean(&mut h, v, i);
        push_mean(&mut p0, q0, i);
        push_mean(&mut p1, q1, i);
        push_mean(&mut hh, v * v, i);
        push_mean(&mut pp, q1 * q1, i);
        push_mean(&mut hp, v * q1, i);
    }
    let value = h - (xlnx(p0) + xlnx(p1));
    // influence of each theta: h_n - q1_n (ln P1 - ln P0), up to a constant
    let slope = if p0 > 0.0 && p1 > 0.0 { p1.ln() - p0.ln() } else { 0.0 };
    let var_h = hh - h * h;
    let var_p = pp - p1 * p1;
    let cov = hp - h * p1;
    let var = (var_h - 2.0 * slope * cov + slope * slope * var_p).max(0.0);
    let std_error = if n > 1 { (var * n as f64 / (n - 1) as f64 / n as f64).sqrt() } else { f64::INFINITY };
    let plan = AllocationPlan::new(vec![n], "bed-reform")?;
    let record = EstimateRecord::new(value, plan, &origin, start.elapsed().as_secs_f64())?;
    Ok(ReformulatedEig { record, std_error })
}

pub fn bed_reformulated_eig(d: &DesignPoint, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    bed_reformulated_eig_with(&DelayDiscounting, d, n, stream).map(|r| r.record)
}
