use crate::error::{NmcError, Result};
use crate::estimator::nmc_outer_term;
use crate::exec::Execution;
use crate::harness::{fn_estimator, Estimator, Nested, Truth};
use crate::models::bed::bed_reformulated_eig_with;
use crate::models::{
    AnalyticModel, BedNaiveProblem, CancerModel, CancerParams, ConstantResponse, DDParams, DelayDiscounting,
    DesignPoint, IwaeProblem, ResponseModel, TripleModel,
};
use crate::problem::AllocationPlan;
use crate::rng::make_stream;

pub const MODEL_NAMES: [&str; 7] = ["analytic", "triple", "triple-mod", "cancer", "bed-naive", "bed-reform", "iwae"];

/// Stream reserved for reference runs, disjoint from replicate streams `[r]`.
const REFERENCE_PATH: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct ModelOptions {
    pub cancer: CancerParams,
    pub design: DesignPoint,
    pub sigma: f64,
    /// Replace the response model with a constant likelihood `p`.
    pub constant_likelihood: Option<f64>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            cancer: CancerParams::default(),
            design: DesignPoint::with_a(70.0).expect("valid design"),
            sigma: 1.0,
            constant_likelihood: None,
        }
    }
}

pub struct ModelEntry {
    pub name: String,
    pub estimator: Box<dyn Estimator>,
    /// Exact truth when known; other models need a reference run.
    pub truth: Option<Truth>,
}

#[derive(Clone, Copy)]
enum Response {
    Discounting,
    Constant(f64),
}

impl ResponseModel for Response {
    fn prob(&self, theta: &DDParams, d: &DesignPoint) -> f64 {
        match self {
            Response::Discounting => DelayDiscounting.prob(theta, d),
            Response::Constant(p) => ConstantResponse(*p).prob(theta, d),
        }
    }
}

pub fn model(name: &str, options: &ModelOptions) -> Result<ModelEntry> {
    let response = match options.constant_likelihood {
        Some(p) if (0.0..=1.0).contains(&p) => Response::Constant(p),
        Some(p) => return Err(NmcError::ParameterDomain(format!("constant likelihood must be in [0, 1], got {p}"))),
        None => Response::Discounting,
    };
    let zero_if_constant = options.constant_likelihood.map(|_| Truth::analytic(0.0));
    let (estimator, truth): (Box<dyn Estimator>, Option<Truth>) = match name {
        "analytic" => (Box::new(Nested(AnalyticModel)), Some(Truth::analytic(AnalyticModel::truth()))),
        "triple" => (Box::new(Nested(TripleModel::new(false))), Some(Truth::analytic(TripleModel::truth(false)))),
        "triple-mod" => (Box::new(Nested(TripleModel::new(true))), Some(Truth::analytic(TripleModel::truth(true)))),
        "cancer" => (Box::new(Nested(CancerModel::new(options.cancer.clone())?)), None),
        "bed-naive" => (Box::new(Nested(BedNaiveProblem::new(options.design, response))), zero_if_constant),
        "bed-reform" => {
            let design = options.design;
            let est = fn_estimator(0, move |plan: &AllocationPlan, stream: &mut _| {
                bed_reformulated_eig_with(&response, &design, plan.counts()[0], stream).map(|r| r.record)
            });
            (Box::new(est), zero_if_constant)
        }
        "iwae" => (Box::new(Nested(IwaeProblem::new(options.sigma)?)), Some(Truth::analytic(0.0))),
        other => {
            return Err(NmcError::Unsupported(format!(
                "unknown model '{other}' (expected one of {})",
                MODEL_NAMES.join(", ")
            )))
        }
    };
    Ok(ModelEntry { name: name.to_string(), estimator, truth })
}

/// Single high-budget cancer run at plan `[n, m]`; its error is the standard
/// error of the outer terms.
pub fn cancer_reference(params: &CancerParams, n: u64, m: u64, seed: u64, exec: Execution) -> Result<Truth> {
    let problem = CancerModel::new(params.clone())?;
    let plan = AllocationPlan::new(vec![n, m], "reference")?;
    let stream = make_stream(seed, &[REFERENCE_PATH]);
    let terms = exec.map_indexed(n as usize, |i| nmc_outer_term(&problem, &plan, &stream, i as u64));
    let terms = terms.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut mean = 0.0;
    for (i, t) in terms.iter().enumerate() {
        mean += (t - mean) / (i + 1) as f64;
    }
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok(Truth::self_reference(mean, (var / n as f64).sqrt(), plan.effective_budget()?, seed))
}

/// Reformulated information gain at `n` prior draws.
pub fn bed_reference(design: &DesignPoint, n: u64, seed: u64) -> Result<Truth> {
    let run = bed_reformulated_eig_with(&DelayDiscounting, design, n, &mut make_stream(seed, &[REFERENCE_PATH]))?;
    Ok(Truth::self_reference(run.record.value, run.std_error, n, seed))
}
