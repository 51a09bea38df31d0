//! Special cases of nested estimation that admit plain Monte Carlo estimators
//! with the usual `O(1/N)` mean squared error.
//!
//! * [`linear_estimate`]: `f` linear in its second argument collapses to a
//!   single expectation.
//! * [`finite_outcome_estimate`]: finitely many outer values `y_1..y_C` turn
//!   the problem into `C` plain estimates sharing one outer sample.
//! * [`product_expectation_estimate`]: a product of conditional expectations
//!   estimated from independently re-drawn coordinates.
//! * [`polynomial_estimate`]: `g(y) gamma(y)^alpha` via products of
//!   independent inner draws.

use std::sync::Arc;
use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{NmcError, Result};
use crate::estimator::push_mean;
use crate::problem::{AllocationPlan, Draw, EstimateRecord, NestedProblem};
use crate::rng::RandomStream;

type OuterFn = Box<dyn Fn(&mut RandomStream) -> f64 + Send + Sync>;
type IndexFn = Box<dyn Fn(&mut RandomStream) -> usize + Send + Sync>;
type InnerFn = Box<dyn Fn(f64, &mut RandomStream) -> f64 + Send + Sync>;
type CategoryInnerFn = Box<dyn Fn(usize, &mut RandomStream) -> f64 + Send + Sync>;
type JointFn = Box<dyn Fn(f64, &mut RandomStream, &mut [f64]) + Send + Sync>;
type BinaryFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type UnaryFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Stream child reserved for the linearity probe so it never overlaps the
/// estimator's own draws.
const PROBE_STREAM: u64 = u64::MAX;
const LINEARITY_PROBES: usize = 8;
const LINEARITY_TOLERANCE: f64 = 1e-9;

fn record(value: f64, counts: Vec<u64>, label: &str, stream: &RandomStream, start: Instant) -> Result<EstimateRecord> {
    let plan = AllocationPlan::new(counts, label)?;
    EstimateRecord::new(value, plan, stream, start.elapsed().as_secs_f64())
}

fn require_depth<P: NestedProblem + ?Sized>(problem: &P, depth: usize) -> Result<()> {
    if problem.depth() == depth {
        Ok(())
    } else {
        Err(NmcError::Shape {
            expected: format!("depth-{depth} problem"),
            got: format!("depth {}", problem.depth()),
        })
    }
}

/// Check `f_0(y, a v + b w) = a f_0(y, v) + b f_0(y, w)` at random probes.
pub fn probe_linearity<P: NestedProblem + ?Sized>(problem: &P, stream: &RandomStream) -> Result<()> {
    require_depth(problem, 1)?;
    let mut probe = stream.split(PROBE_STREAM);
    for _ in 0..LINEARITY_PROBES {
        let y = problem.sample(0, &[], &mut probe);
        let [v, w, a, b]: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut probe));
        let path = [y];
        let lhs = problem.combine(0, &path, a * v + b * w);
        let fv = problem.combine(0, &path, v);
        let fw = problem.combine(0, &path, w);
        let rhs = a * fv + b * fw;
        let scale = 1f64.max(lhs.abs()).max((a * fv).abs() + (b * fw).abs());
        let residual = (lhs - rhs).abs() / scale;
        if !(residual <= LINEARITY_TOLERANCE) {
            return Err(NmcError::LinearityViolation { y: y[0], residual });
        }
    }
    Ok(())
}

/// `(1/N) sum_n f_0(y_n, f_1(y_n, z_n))` with one inner draw per outer draw.
///
/// The caller asserts that `f_0` is linear in its second argument; this is
/// spot-checked with [`probe_linearity`] before estimating.
pub fn linear_estimate<P>(problem: &P, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord>
where
    P: NestedProblem + ?Sized,
{
    probe_linearity(problem, stream)?;
    let start = Instant::now();
    let origin = stream.clone();
    let mut mean = 0.0;
    for i in 0..n {
        let y = problem.sample(0, &[], stream);
        let z = problem.sample(1, &[y], stream);
        let path = [y, z];
        let value = problem.combine(0, &path[..1], problem.leaf(&path));
        if !value.is_finite() {
            return Err(NmcError::NonFinite { level: 0 });
        }
        push_mean(&mut mean, value, i + 1);
    }
    record(mean, vec![n], "linear", &origin, start)
}

/// Nested problem whose outer variable takes one of finitely many values.
pub struct FiniteOutcomeProblem {
    outcomes: Vec<f64>,
    outer: IndexFn,
    inner: CategoryInnerFn,
    phi: BinaryFn,
    f: BinaryFn,
}

impl FiniteOutcomeProblem {
    /// `outer` returns a 0-based index into `outcomes`; `inner(c, ..)` draws
    /// `z ~ p(z | y_c)`; `phi(y_c, z)` is the inner integrand and `f(y_c, gamma)`
    /// the outer function.
    pub fn new(
        outcomes: Vec<f64>,
        outer: impl Fn(&mut RandomStream) -> usize + Send + Sync + 'static,
        inner: impl Fn(usize, &mut RandomStream) -> f64 + Send + Sync + 'static,
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(NmcError::ParameterDomain("at least one outcome is required".into()));
        }
        for (i, a) in outcomes.iter().enumerate() {
            if outcomes[..i].contains(a) {
                return Err(NmcError::ParameterDomain(format!("outcome {a} is repeated")));
            }
        }
        Ok(Self {
            outcomes,
            outer: Box::new(outer),
            inner: Box::new(inner),
            phi: Box::new(phi),
            f: Box::new(f),
        })
    }

    /// View a depth-1 problem with scalar draws and an enumerable outer
    /// sampler as a finite-outcome problem.
    pub fn from_nested<P: NestedProblem + 'static>(problem: Arc<P>) -> Result<Self> {
        require_depth(&*problem, 1)?;
        let support = problem
            .support(0, &[])
            .ok_or_else(|| NmcError::Unsupported("outer sampler is not enumerable".into()))?;
        let outcomes: Vec<f64> = support.iter().map(|(d, _)| d[0]).collect();
        let (p1, p2, p3, p4) = (problem.clone(), problem.clone(), problem.clone(), problem);
        let values = outcomes.clone();
        let lookup = outcomes.clone();
        Self::new(
            outcomes,
            move |s| {
                let y = p1.sample(0, &[], s)[0];
                lookup.iter().position(|&v| v == y).unwrap_or(usize::MAX)
            },
            move |c, s| p2.sample(1, &[Draw::scalar(values[c])], s)[0],
            move |y, z| p3.leaf(&[Draw::scalar(y), Draw::scalar(z)]),
            move |y, g| p4.combine(0, &[Draw::scalar(y)], g),
        )
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }
}

/// Per-category pieces of a finite-outcome estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteOutcomeParts {
    pub counts: Vec<u64>,
    pub probabilities: Vec<f64>,
    /// `f(y_c, inner mean)`; `None` for categories that were never drawn.
    pub values: Vec<Option<f64>>,
    pub estimate: f64,
}

/// `sum_c P_c f(y_c, (1/N) sum_n phi(y_c, z_{n,c}))` with `P_c` the empirical
/// frequency of `y_c` among `N` outer draws.
///
/// Outer draws use `stream.split(0)`; the inner draws for category `c` use
/// `stream.split(c + 1)`, so they are independent of the outer draws.
/// Categories with zero empirical frequency contribute nothing and their
/// inner estimate is skipped.
pub fn finite_outcome_parts(problem: &FiniteOutcomeProblem, n: u64, stream: &RandomStream) -> Result<FiniteOutcomeParts> {
    if n == 0 {
        return Err(NmcError::ParameterDomain("N must be >= 1".into()));
    }
    let categories = problem.outcomes.len();
    let mut counts = vec![0u64; categories];
    let mut outer = stream.split(0);
    for _ in 0..n {
        let c = (problem.outer)(&mut outer);
        if c >= categories {
            return Err(NmcError::ParameterDomain(format!(
                "outer sampler returned index {c} for {categories} outcomes"
            )));
        }
        counts[c] += 1;
    }
    let probabilities: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
    let mut values = Vec::with_capacity(categories);
    let mut estimate = 0.0;
    for (c, &y) in problem.outcomes.iter().enumerate() {
        if counts[c] == 0 {
            values.push(None);
            continue;
        }
        let mut inner = stream.split(c as u64 + 1);
        let mut gamma = 0.0;
        for m in 0..n {
            let z = (problem.inner)(c, &mut inner);
            push_mean(&mut gamma, (problem.phi)(y, z), m + 1);
        }
        let value = (problem.f)(y, gamma);
        if !value.is_finite() {
            return Err(NmcError::NonFinite { level: 0 });
        }
        estimate += probabilities[c] * value;
        values.push(Some(value));
    }
    Ok(FiniteOutcomeParts { counts, probabilities, values, estimate })
}

pub fn finite_outcome_estimate(problem: &FiniteOutcomeProblem, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    let start = Instant::now();
    let parts = finite_outcome_parts(problem, n, stream)?;
    record(parts.estimate, vec![n], "finite-outcome", stream, start)
}

/// `E[ f(y, prod_l E[psi_l(y, z_l) | y]) ]` with a joint inner law over `z_1..z_L`.
pub struct ProductProblem {
    outer: OuterFn,
    joint_inner: JointFn,
    psi: Vec<BinaryFn>,
    f: BinaryFn,
    inner_counts: Vec<u64>,
}

impl ProductProblem {
    /// `joint_inner(y, stream, out)` fills `out[0..L]` with one joint draw.
    pub fn new(
        outer: impl Fn(&mut RandomStream) -> f64 + Send + Sync + 'static,
        joint_inner: impl Fn(f64, &mut RandomStream, &mut [f64]) + Send + Sync + 'static,
        psi: Vec<BinaryFn>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        inner_counts: Vec<u64>,
    ) -> Result<Self> {
        if psi.is_empty() {
            return Err(NmcError::ParameterDomain("L must be >= 1".into()));
        }
        if inner_counts.len() != psi.len() {
            return Err(NmcError::Shape {
                expected: format!("{} inner counts", psi.len()),
                got: inner_counts.len().to_string(),
            });
        }
        if inner_counts.contains(&0) {
            return Err(NmcError::ParameterDomain("every M_l must be >= 1".into()));
        }
        Ok(Self {
            outer: Box::new(outer),
            joint_inner: Box::new(joint_inner),
            psi,
            f: Box::new(f),
            inner_counts,
        })
    }

    pub fn factors(&self) -> usize {
        self.psi.len()
    }
}

/// Box one factor function `psi_l(y, z_l)`.
pub fn factor(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> BinaryFn {
    Box::new(f)
}

/// `(1/N) sum_n f(y_n, prod_l (1/M_l) sum_m psi_l(y_n, z'_{n,l,m}))`, where
/// `z'_{n,l,m}` is coordinate `l` of its own joint draw, so coordinates used
/// for different factors are independent given `y_n`.
pub fn product_expectation_estimate(problem: &ProductProblem, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    let start = Instant::now();
    let origin = stream.clone();
    let mut joint = vec![0.0; problem.factors()];
    let mut mean = 0.0;
    for i in 0..n {
        let y = (problem.outer)(stream);
        let mut product = 1.0;
        for (l, psi) in problem.psi.iter().enumerate() {
            let mut factor_mean = 0.0;
            for m in 0..problem.inner_counts[l] {
                (problem.joint_inner)(y, stream, &mut joint);
                push_mean(&mut factor_mean, psi(y, joint[l]), m + 1);
            }
            product *= factor_mean;
        }
        let value = (problem.f)(y, product);
        if !value.is_finite() {
            return Err(NmcError::NonFinite { level: 0 });
        }
        push_mean(&mut mean, value, i + 1);
    }
    record(mean, vec![n], "product-of-expectations", &origin, start)
}

/// `E[ g(y) gamma(y)^alpha ]` with `gamma(y) = E[phi(y, z) | y]` and integer `alpha >= 0`.
pub struct PolynomialProblem {
    outer: OuterFn,
    inner: InnerFn,
    g: UnaryFn,
    phi: BinaryFn,
    alpha: u32,
}

impl PolynomialProblem {
    pub fn new(
        outer: impl Fn(&mut RandomStream) -> f64 + Send + Sync + 'static,
        inner: impl Fn(f64, &mut RandomStream) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        alpha: u32,
    ) -> Self {
        Self {
            outer: Box::new(outer),
            inner: Box::new(inner),
            g: Box::new(g),
            phi: Box::new(phi),
            alpha,
        }
    }
}

/// `(1/N) sum_n g(y_n) prod_{l=1..alpha} phi(y_n, z_{n,l})` with independent inner draws.
pub fn polynomial_estimate(problem: &PolynomialProblem, n: u64, stream: &mut RandomStream) -> Result<EstimateRecord> {
    let start = Instant::now();
    let origin = stream.clone();
    let mut mean = 0.0;
    for i in 0..n {
        let y = (problem.outer)(stream);
        let mut value = (problem.g)(y);
        for _ in 0..problem.alpha {
            let z = (problem.inner)(y, stream);
            value *= (problem.phi)(y, z);
        }
        if !value.is_finite() {
            return Err(NmcError::NonFinite { level: 0 });
        }
        push_mean(&mut mean, value, i + 1);
    }
    record(mean, vec![n], "polynomial", &origin, start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::problem::{combiner, FnProblem, Sampler};
    use crate::rng::make_stream;

    fn bern(p: f64) -> DistributionSpec {
        DistributionSpec::bernoulli(p).unwrap()
    }

    fn linear_problem(f0: impl Fn(&[Draw], f64) -> f64 + Send + Sync + 'static, inner: Sampler) -> FnProblem {
        FnProblem::new(
            vec![Sampler::Constant(Draw::scalar(0.0)), inner],
            vec![combiner(f0)],
            |y| y[1][0],
        )
        .unwrap()
    }

    #[test]
    fn linear_twice_bernoulli_mean() {
        let p = linear_problem(|_, g| 2.0 * g, Sampler::Fixed(bern(0.5)));
        let n = 1_000_000;
        let r = linear_estimate(&p, n, &mut make_stream(1, &[])).unwrap();
        // sd of 2 z is 1
        assert!((r.value - 1.0).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn linear_degenerate_inner_is_exact() {
        let p = linear_problem(|_, g| g, Sampler::Constant(Draw::scalar(2.5)));
        let r = linear_estimate(&p, 100, &mut make_stream(1, &[])).unwrap();
        assert_eq!(r.value, 2.5);
    }

    #[test]
    fn quadratic_fails_linearity_probe() {
        let p = linear_problem(|_, g| g * g, Sampler::Fixed(bern(0.5)));
        assert!(matches!(
            linear_estimate(&p, 10, &mut make_stream(1, &[])),
            Err(NmcError::LinearityViolation { .. })
        ));
        let affine = linear_problem(|_, g| g + 1.0, Sampler::Fixed(bern(0.5)));
        assert!(probe_linearity(&affine, &make_stream(1, &[])).is_err());
    }

    fn toy_finite() -> FiniteOutcomeProblem {
        let y = bern(0.5);
        let z = bern(0.5);
        FiniteOutcomeProblem::new(
            vec![0.0, 1.0],
            move |s| y.sample(s) as usize,
            move |_, s| z.sample(s),
            |y, z| y + z,
            |_, g| g * g,
        )
        .unwrap()
    }

    #[test]
    fn finite_outcome_toy_value() {
        let n = 1_000_000;
        let r = finite_outcome_estimate(&toy_finite(), n, &mut make_stream(2, &[])).unwrap();
        // linearized sd is about sqrt(1.625 / n)
        assert!((r.value - 1.25).abs() < 4.0 * (1.625 / n as f64).sqrt(), "{}", r.value);
    }

    #[test]
    fn finite_outcome_probabilities_partition() {
        for seed in 0..20 {
            let parts = finite_outcome_parts(&toy_finite(), 37, &make_stream(seed, &[])).unwrap();
            assert_eq!(parts.counts.iter().sum::<u64>(), 37);
            assert!((parts.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn finite_outcome_single_category() {
        let z = DistributionSpec::normal(1.0, 1.0).unwrap();
        let zz = z.clone();
        let p = FiniteOutcomeProblem::new(vec![3.0], |_| 0, move |_, s| zz.sample(s), |y, z| y * z, |_, g| g.exp())
            .unwrap();
        let stream = make_stream(4, &[]);
        let parts = finite_outcome_parts(&p, 50, &stream).unwrap();
        let mut inner = stream.split(1);
        let mut mean = 0.0;
        for m in 0..50 {
            push_mean(&mut mean, 3.0 * z.sample(&mut inner), m + 1);
        }
        assert_eq!(parts.estimate, mean.exp());
    }

    #[test]
    fn finite_outcome_from_discrete_nested() {
        let nested = FnProblem::new(
            vec![Sampler::Fixed(bern(0.5)), Sampler::Fixed(bern(0.5))],
            vec![combiner(|_, g| g * g)],
            |y| y[0][0] + y[1][0],
        )
        .unwrap();
        let bridged = FiniteOutcomeProblem::from_nested(Arc::new(nested)).unwrap();
        assert_eq!(bridged.outcomes(), &[0.0, 1.0]);
        let a = finite_outcome_parts(&bridged, 500, &make_stream(9, &[])).unwrap();
        let b = finite_outcome_parts(&toy_finite(), 500, &make_stream(9, &[])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finite_outcome_rejects_bad_problems() {
        assert!(FiniteOutcomeProblem::new(vec![1.0, 1.0], |_| 0, |_, _| 0.0, |_, _| 0.0, |_, g| g).is_err());
        let bad = FiniteOutcomeProblem::new(vec![1.0], |_| 3, |_, _| 0.0, |_, _| 0.0, |_, g| g).unwrap();
        assert!(finite_outcome_parts(&bad, 5, &make_stream(0, &[])).is_err());
    }

    fn correlated_product(m: u64) -> ProductProblem {
        let b = bern(0.5);
        ProductProblem::new(
            |_| 0.0,
            move |_, s, out| {
                let z = b.sample(s);
                out[0] = z;
                out[1] = z;
            },
            vec![factor(|_, z| z), factor(|_, z| z)],
            |_, g| g,
            vec![m, m],
        )
        .unwrap()
    }

    #[test]
    fn product_uses_independent_coordinates() {
        let n = 1_000_000;
        let r = product_expectation_estimate(&correlated_product(3), n, &mut make_stream(5, &[])).unwrap();
        // Var(mean of 3 Bernoulli(1/2))^2-product: E[X^2]^2 - 1/16 with E[X^2] = 1/3
        let sd = (1.0f64 / 9.0 - 1.0 / 16.0).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((r.value - 0.25).abs() < 4.0 * se, "{}", r.value);
        assert!((r.value - 0.5).abs() > 5.0 * se);
    }

    #[test]
    fn product_single_factor_and_degenerate() {
        let b = bern(0.5);
        let single = ProductProblem::new(
            |_| 0.0,
            move |_, s, out| out[0] = b.sample(s),
            vec![factor(|_, z| z)],
            |_, g| g,
            vec![3],
        )
        .unwrap();
        let n = 1_000_000;
        let r = product_expectation_estimate(&single, n, &mut make_stream(6, &[])).unwrap();
        assert!((r.value - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());

        let ones = ProductProblem::new(
            |_| 0.0,
            |_, _, out| out.fill(1.0),
            vec![factor(|_, z| z), factor(|_, z| z), factor(|_, z| z)],
            |_, g| g,
            vec![2, 3, 4],
        )
        .unwrap();
        let r = product_expectation_estimate(&ones, 100, &mut make_stream(6, &[])).unwrap();
        assert_eq!(r.value, 1.0);
        assert!(ProductProblem::new(|_| 0.0, |_, _, _| {}, vec![], |_, g| g, vec![]).is_err());
    }

    fn bernoulli_poly(alpha: u32) -> PolynomialProblem {
        let b = bern(0.5);
        PolynomialProblem::new(|_| 0.0, move |_, s| b.sample(s), |_| 1.0, |_, z| z, alpha)
    }

    #[test]
    fn polynomial_square_of_mean() {
        let n = 1_000_000;
        let r = polynomial_estimate(&bernoulli_poly(2), n, &mut make_stream(7, &[])).unwrap();
        assert!((r.value - 0.25).abs() < 4.0 * (0.1875 / n as f64).sqrt());
    }

    #[test]
    fn polynomial_alpha_zero_is_plain_mc() {
        let u = DistributionSpec::uniform(0.0, 2.0).unwrap();
        let p = PolynomialProblem::new(move |s| u.sample(s), |_, _| panic!("no inner draws"), |y| y * y, |_, z| z, 0);
        let r = polynomial_estimate(&p, 1000, &mut make_stream(8, &[])).unwrap();
        let mut s = make_stream(8, &[]);
        let u = DistributionSpec::uniform(0.0, 2.0).unwrap();
        let mut mean = 0.0;
        for i in 0..1000 {
            let y = u.sample(&mut s);
            push_mean(&mut mean, y * y, i + 1);
        }
        assert_eq!(r.value, mean);
    }

    #[test]
    fn polynomial_alpha_one_reduces_to_linear() {
        let u = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        let z = DistributionSpec::normal(0.0, 1.0).unwrap();
        let (u2, z2) = (u.clone(), z.clone());
        let poly = PolynomialProblem::new(
            move |s| u.sample(s),
            move |_, s| z.sample(s),
            |y| 1.0 + y,
            |y, z| y * z + 1.0,
            1,
        );
        let linear = FnProblem::new(
            vec![Sampler::Fixed(u2), Sampler::Fixed(z2)],
            vec![combiner(|y, g| (1.0 + y[0][0]) * g)],
            |y| y[0][0] * y[1][0] + 1.0,
        )
        .unwrap();
        let a = polynomial_estimate(&poly, 5000, &mut make_stream(9, &[])).unwrap();
        let b = linear_estimate(&linear, 5000, &mut make_stream(9, &[])).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }
}
