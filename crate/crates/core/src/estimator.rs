//! Plain and nested Monte Carlo estimators.
//!
//! Stream discipline: at a non-innermost level `k`, outer sample `n` draws
//! `y^(k)_n` from `stream.split(n)` and the whole subtree below it continues
//! on that child stream. The innermost level draws its `N_D` samples in
//! sequence from the stream it was handed. The value of every subtree is
//! therefore a pure function of its stream, independent of sibling order.
//!
//! Averages are running means, which are exact when every term is equal.

use std::time::Instant;

use crate::error::{NmcError, Result};
use crate::exec::Execution;
use crate::problem::{AllocationPlan, Draw, EstimateRecord, NestedProblem};
use crate::rng::RandomStream;

#[inline]
pub(crate) fn push_mean(mean: &mut f64, value: f64, count: u64) {
    *mean += (value - *mean) / count as f64;
}

/// Plain Monte Carlo, `(1/N) sum_n f_0(y_n)`, for a depth-0 problem.
pub fn mc_estimate<P>(problem: &P, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord>
where
    P: NestedProblem + ?Sized,
{
    if problem.depth() != 0 {
        return Err(NmcError::Shape {
            expected: "depth-0 problem".into(),
            got: format!("depth {}", problem.depth()),
        });
    }
    let plan = AllocationPlan::new(vec![n], "mc")?;
    nmc_estimate(problem, &plan, stream)
}

/// Nested Monte Carlo estimate of `gamma_0` under `plan`.
pub fn nmc_estimate<P>(problem: &P, plan: &AllocationPlan, stream: &mut RandomStream) -> Result<EstimateRecord>
where
    P: NestedProblem + ?Sized,
{
    nmc_estimate_with(problem, plan, stream, Execution::Serial)
}

/// As [`nmc_estimate`], optionally evaluating the outermost subtrees in
/// parallel. The result is bit-identical for both execution modes.
pub fn nmc_estimate_with<P>(
    problem: &P,
    plan: &AllocationPlan,
    stream: &mut RandomStream,
    exec: Execution,
) -> Result<EstimateRecord>
where
    P: NestedProblem + ?Sized,
{
    check_plan(problem, plan)?;
    let start = Instant::now();
    let origin = stream.clone();
    let counts = plan.counts();
    let value = if counts.len() == 1 || exec == Execution::Serial {
        let mut prefix = Vec::with_capacity(counts.len());
        level_mean(problem, 0, counts, &mut prefix, stream)?
    } else {
        let terms = exec.map_indexed(counts[0] as usize, |n| {
            let mut prefix = Vec::with_capacity(counts.len());
            subtree_term(problem, 0, counts, &mut prefix, stream, n as u64)
        });
        let mut mean = 0.0;
        for (i, term) in terms.into_iter().enumerate() {
            push_mean(&mut mean, term?, i as u64 + 1);
        }
        mean
    };
    EstimateRecord::new(value, plan.clone(), &origin, start.elapsed().as_secs_f64())
}

/// The `n`-th outermost term `f_0(y^(0)_n, I_1(y^(0)_n))` of
/// [`nmc_estimate`] with the same stream; the estimate is the mean of these.
pub fn nmc_outer_term<P>(problem: &P, plan: &AllocationPlan, stream: &RandomStream, n: u64) -> Result<f64>
where
    P: NestedProblem + ?Sized,
{
    check_plan(problem, plan)?;
    if plan.depth() == 0 {
        return Err(NmcError::Shape {
            expected: "nested problem (depth >= 1)".into(),
            got: "depth 0".into(),
        });
    }
    let mut prefix = Vec::with_capacity(plan.counts().len());
    subtree_term(problem, 0, plan.counts(), &mut prefix, stream, n)
}

fn check_plan<P: NestedProblem + ?Sized>(problem: &P, plan: &AllocationPlan) -> Result<()> {
    if plan.counts().len() != problem.depth() + 1 {
        return Err(NmcError::Shape {
            expected: format!("{} level counts", problem.depth() + 1),
            got: format!("{} level counts", plan.counts().len()),
        });
    }
    plan.effective_budget().map(|_| ())
}

fn level_mean<P: NestedProblem + ?Sized>(
    problem: &P,
    level: usize,
    counts: &[u64],
    prefix: &mut Vec<Draw>,
    stream: &mut RandomStream,
) -> Result<f64> {
    let mut mean = 0.0;
    if level + 1 == counts.len() {
        for i in 0..counts[level] {
            let y = problem.sample(level, prefix, stream);
            prefix.push(y);
            let value = problem.leaf(prefix);
            prefix.pop();
            if !value.is_finite() {
                return Err(NmcError::NonFinite { level });
            }
            push_mean(&mut mean, value, i + 1);
        }
    } else {
        for i in 0..counts[level] {
            let value = subtree_term(problem, level, counts, prefix, stream, i)?;
            push_mean(&mut mean, value, i + 1);
        }
    }
    Ok(mean)
}

fn subtree_term<P: NestedProblem + ?Sized>(
    problem: &P,
    level: usize,
    counts: &[u64],
    prefix: &mut Vec<Draw>,
    parent: &RandomStream,
    index: u64,
) -> Result<f64> {
    let mut child = parent.split(index);
    let y = problem.sample(level, prefix, &mut child);
    prefix.push(y);
    let value = level_mean(problem, level + 1, counts, prefix, &mut child)
        .map(|inner| problem.combine(level, prefix, inner));
    prefix.pop();
    match value {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(NmcError::NonFinite { level }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::exec::with_workers;
    use crate::problem::{combiner, FnProblem, Sampler};
    use crate::rng::make_stream;
    use std::sync::atomic::{AtomicU64, Ordering};

    fn constant(x: f64) -> Sampler {
        Sampler::Constant(Draw::scalar(x))
    }

    #[test]
    fn degenerate_sampler_gives_exact_mean() {
        let p = FnProblem::new(vec![constant(3.0)], vec![], |y| y[0][0]).unwrap();
        let r = mc_estimate(&p, 5, &mut make_stream(1, &[])).unwrap();
        assert_eq!(r.value, 3.0);
        assert_eq!(r.effective_budget, 5);
    }

    #[test]
    fn constant_integrand_normalizes() {
        let u = DistributionSpec::uniform(0.0, 1.0).unwrap();
        let p = FnProblem::new(vec![Sampler::Fixed(u)], vec![], |_| 1.0).unwrap();
        let r = mc_estimate(&p, 100, &mut make_stream(2, &[])).unwrap();
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn second_moment_of_uniform() {
        let u = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        let p = FnProblem::new(vec![Sampler::Fixed(u)], vec![], |y| y[0][0] * y[0][0]).unwrap();
        let n = 1_000_000;
        let r = mc_estimate(&p, n, &mut make_stream(3, &[])).unwrap();
        // Var(y^2) = E y^4 - (E y^2)^2 = 1/5 - 1/9
        let se = ((1.0 / 5.0 - 1.0 / 9.0) / n as f64).sqrt();
        assert!((r.value - 1.0 / 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn mc_rejects_nested_problem() {
        let p = FnProblem::new(vec![constant(0.0), constant(1.0)], vec![combiner(|_, g| g)], |_| 1.0).unwrap();
        assert!(matches!(
            mc_estimate(&p, 3, &mut make_stream(1, &[])),
            Err(NmcError::Shape { .. })
        ));
    }

    #[test]
    fn degenerate_inner_is_exact_for_any_plan() {
        let n = DistributionSpec::normal(0.0, 1.0).unwrap();
        let p = FnProblem::new(vec![Sampler::Fixed(n), constant(1.0)], vec![combiner(|_, g| g)], |y| y[1][0])
            .unwrap();
        for counts in [vec![1, 1], vec![7, 3], vec![100, 13]] {
            let plan = AllocationPlan::manual(counts).unwrap();
            let r = nmc_estimate(&p, &plan, &mut make_stream(4, &[])).unwrap();
            assert_eq!(r.value, 1.0);
        }
    }

    #[test]
    fn depth_zero_nmc_equals_mc() {
        let n = DistributionSpec::normal(1.0, 2.0).unwrap();
        let p = FnProblem::new(vec![Sampler::Fixed(n)], vec![], |y| y[0][0].sin()).unwrap();
        let a = mc_estimate(&p, 500, &mut make_stream(9, &[1])).unwrap();
        let plan = AllocationPlan::manual(vec![500]).unwrap();
        let b = nmc_estimate(&p, &plan, &mut make_stream(9, &[1])).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn plan_length_mismatch_is_a_shape_error() {
        let p = FnProblem::new(vec![constant(0.0), constant(1.0)], vec![combiner(|_, g| g)], |_| 1.0).unwrap();
        let plan = AllocationPlan::manual(vec![10]).unwrap();
        assert!(matches!(
            nmc_estimate(&p, &plan, &mut make_stream(1, &[])),
            Err(NmcError::Shape { .. })
        ));
    }

    #[test]
    fn log_of_zero_inner_mean_reports_level() {
        let p = FnProblem::new(vec![constant(0.0), constant(0.0)], vec![combiner(|_, g| g.ln())], |_| 0.0)
            .unwrap();
        let plan = AllocationPlan::manual(vec![3, 3]).unwrap();
        assert_eq!(
            nmc_estimate(&p, &plan, &mut make_stream(1, &[])),
            Err(NmcError::NonFinite { level: 0 })
        );
        let q = FnProblem::new(vec![constant(0.0), constant(0.0)], vec![combiner(|_, g| g)], |_| f64::NAN)
            .unwrap();
        assert_eq!(
            nmc_estimate(&q, &plan, &mut make_stream(1, &[])),
            Err(NmcError::NonFinite { level: 1 })
        );
    }

    struct Counting<P> {
        inner: P,
        leaf_draws: AtomicU64,
    }

    impl<P: NestedProblem> NestedProblem for Counting<P> {
        fn depth(&self) -> usize {
            self.inner.depth()
        }
        fn sample(&self, level: usize, prefix: &[Draw], stream: &mut RandomStream) -> Draw {
            if level == self.depth() {
                self.leaf_draws.fetch_add(1, Ordering::Relaxed);
            }
            self.inner.sample(level, prefix, stream)
        }
        fn leaf(&self, path: &[Draw]) -> f64 {
            self.inner.leaf(path)
        }
        fn combine(&self, level: usize, path: &[Draw], inner: f64) -> f64 {
            self.inner.combine(level, path, inner)
        }
    }

    fn normal_chain(depth: usize) -> FnProblem {
        let samplers = (0..=depth)
            .map(|_| Sampler::Fixed(DistributionSpec::normal(0.0, 1.0).unwrap()))
            .collect();
        let combiners = (0..depth).map(|_| combiner(|y, g| y.last().unwrap()[0] + g.tanh())).collect();
        FnProblem::new(samplers, combiners, |y| y.iter().map(|d| d[0]).sum::<f64>()).unwrap()
    }

    #[test]
    fn innermost_draws_equal_budget() {
        for counts in [vec![5], vec![4, 6], vec![3, 2, 7], vec![2, 3, 2, 2]] {
            let p = Counting { inner: normal_chain(counts.len() - 1), leaf_draws: AtomicU64::new(0) };
            let plan = AllocationPlan::manual(counts).unwrap();
            nmc_estimate(&p, &plan, &mut make_stream(5, &[])).unwrap();
            assert_eq!(p.leaf_draws.load(Ordering::Relaxed), plan.effective_budget().unwrap());
        }
    }

    #[test]
    fn outer_terms_are_independent_of_siblings() {
        let p = normal_chain(2);
        let stream = make_stream(21, &[3]);
        let plan2 = AllocationPlan::manual(vec![2, 4, 3]).unwrap();
        let both = nmc_estimate(&p, &plan2, &mut stream.clone()).unwrap().value;
        let t1 = nmc_outer_term(&p, &plan2, &stream, 1).unwrap();
        let t0 = nmc_outer_term(&p, &plan2, &stream, 0).unwrap();
        assert_eq!(both, t0 + (t1 - t0) / 2.0);
        // the first term of a larger plan is the same subtree
        let plan1 = AllocationPlan::manual(vec![1, 4, 3]).unwrap();
        let single = nmc_estimate(&p, &plan1, &mut stream.clone()).unwrap().value;
        assert_eq!(single, t0);
    }

    #[test]
    fn parallel_matches_serial_bitwise() {
        let p = normal_chain(1);
        let plan = AllocationPlan::manual(vec![257, 9]).unwrap();
        let serial = nmc_estimate(&p, &plan, &mut make_stream(8, &[])).unwrap();
        let parallel = with_workers(4, || {
            nmc_estimate_with(&p, &plan, &mut make_stream(8, &[]), Execution::Parallel).unwrap()
        });
        assert_eq!(serial.value.to_bits(), parallel.value.to_bits());
    }

    #[test]
    fn record_carries_stream_identity() {
        let p = normal_chain(0);
        let plan = AllocationPlan::manual(vec![10]).unwrap();
        let r = nmc_estimate(&p, &plan, &mut make_stream(77, &[4, 2])).unwrap();
        assert_eq!(r.base_seed, 77);
        assert_eq!(r.stream_path, vec![4, 2]);
        assert_eq!(r.plan, plan);
    }
}
