use crate::error::{NmcError, Result};
use crate::exec::Execution;
use crate::harness::Estimator;
use crate::problem::{AllocationPlan, EstimateRecord};
use crate::rng::make_stream;

/// Successful records in replicate order, plus the replicates that failed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRun {
    pub records: Vec<EstimateRecord>,
    pub failures: Vec<(u64, NmcError)>,
}

impl ReplicateRun {
    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }
}

/// Replicate `r` runs on stream `[r]` of `base_seed`. Failed replicates are
/// dropped and listed; more than 1% failures aborts the run.
pub fn run_replicates(
    estimator: &dyn Estimator,
    plan: &AllocationPlan,
    replicates: u64,
    base_seed: u64,
    exec: Execution,
) -> Result<ReplicateRun> {
    if replicates == 0 {
        return Err(NmcError::InsufficientData { needed: 1, got: 0 });
    }
    if plan.depth() != estimator.depth() {
        return Err(NmcError::Shape {
            expected: format!("plan with {} levels", estimator.depth() + 1),
            got: format!("{} levels", plan.counts().len()),
        });
    }
    let results = exec.map_indexed(replicates as usize, |r| {
        estimator.estimate(plan, &mut make_stream(base_seed, &[r as u64]))
    });
    let mut run = ReplicateRun { records: Vec::with_capacity(results.len()), failures: Vec::new() };
    for (r, result) in results.into_iter().enumerate() {
        match result {
            Ok(record) if record.value.is_finite() => run.records.push(record),
            Ok(_) => run.failures.push((r as u64, NmcError::NonFinite { level: 0 })),
            Err(e @ (NmcError::NonFinite { .. } | NmcError::Integration { .. })) => run.failures.push((r as u64, e)),
            Err(e) => return Err(e),
        }
    }
    if run.failures.len() as u64 * 100 > replicates {
        return Err(NmcError::TooManyFailures { failed: run.failures.len(), total: replicates as usize });
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{fn_estimator, Nested};
    use crate::models::AnalyticModel;
    use crate::rng::RandomStream;

    #[test]
    fn replicates_are_reproducible() {
        let plan = AllocationPlan::manual(vec![20, 5]).unwrap();
        let a = run_replicates(&Nested(AnalyticModel), &plan, 3, 11, Execution::Serial).unwrap();
        let b = run_replicates(&Nested(AnalyticModel), &plan, 3, 11, Execution::Parallel).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.records[2].stream_path, vec![2]);
    }

    #[test]
    fn constant_estimator() {
        let est = fn_estimator(0, |plan: &AllocationPlan, s: &mut RandomStream| EstimateRecord::new(5.0, plan.clone(), s, 0.0));
        let run = run_replicates(&est, &AllocationPlan::manual(vec![3]).unwrap(), 4, 0, Execution::Serial).unwrap();
        assert_eq!(run.values(), vec![5.0; 4]);
    }

    #[test]
    fn failures_are_counted_then_abort() {
        let flaky = |every: u64| {
            fn_estimator(0, move |plan: &AllocationPlan, s: &mut RandomStream| {
                if s.path()[0] % every == 0 {
                    Err(NmcError::NonFinite { level: 0 })
                } else {
                    EstimateRecord::new(1.0, plan.clone(), s, 0.0)
                }
            })
        };
        let plan = AllocationPlan::manual(vec![3]).unwrap();
        let run = run_replicates(&flaky(200), &plan, 400, 0, Execution::Serial).unwrap();
        assert_eq!(run.failures.len(), 2);
        assert_eq!(run.records.len(), 398);
        assert!(matches!(
            run_replicates(&flaky(50), &plan, 400, 0, Execution::Serial),
            Err(NmcError::TooManyFailures { failed: 8, total: 400 })
        ));
    }
}
