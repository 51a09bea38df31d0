use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::alloc::{alpha_allocation, optimal_allocation};
use crate::bounds::Smoothness;
use crate::error::{NmcError, Result};
use crate::exec::Execution;
use crate::harness::{empirical_mse, run_replicates, Estimator, MseStats, Truth};
use crate::problem::AllocationPlan;

/// Fraction of the largest-`T` ladder points used for slope fits.
pub const DEFAULT_WINDOW: f64 = 0.6;

/// How a total budget `T` is split across levels.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// Innermost count held at `M`; the outer levels share `T / M` with
    /// `N_0 = N_k^2` among them (so `N_0 = T / M` for single nesting).
    FixedInner(u64),
    /// All levels equal.
    Equal,
    /// `N_0 = N_k^2` for every inner level.
    Squared,
    /// `alpha_allocation` exponents.
    Alpha(Vec<f64>),
}

impl Strategy {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Plan for budget `t` at `depth`. Depth-0 estimators always get `[t]`.
    pub fn plan(&self, t: u64, depth: usize) -> Result<AllocationPlan> {
        let label = self.label();
        if depth == 0 {
            return AllocationPlan::new(vec![t], label);
        }
        let counts = match self {
            Strategy::FixedInner(m) => {
                if t < *m {
                    return Err(NmcError::InfeasibleBudget { budget: t, minimum: *m });
                }
                let rest = t as f64 / *m as f64;
                let d = depth as f64;
                let outer = |e: f64| (rest.powf(e).round_ties_even() as u64).max(1);
                let mut counts = vec![outer(1.0 / (d + 1.0)); depth + 1];
                counts[0] = outer(2.0 / (d + 1.0));
                counts[depth] = *m;
                counts
            }
            Strategy::Equal => optimal_allocation(t, depth, Smoothness::Lipschitz)?.counts().to_vec(),
            Strategy::Squared => optimal_allocation(t, depth, Smoothness::ContinuouslyDifferentiable)?.counts().to_vec(),
            Strategy::Alpha(alphas) => {
                if alphas.len() != depth {
                    return Err(NmcError::Shape {
                        expected: format!("{depth} alphas"),
                        got: alphas.len().to_string(),
                    });
                }
                alpha_allocation(t, alphas)?.counts().to_vec()
            }
        };
        AllocationPlan::new(counts, label)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::FixedInner(m) => write!(f, "fixed_inner({m})"),
            Strategy::Equal => f.write_str("equal"),
            Strategy::Squared => f.write_str("squared"),
            Strategy::Alpha(a) => {
                let parts: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                write!(f, "alpha({})", parts.join(","))
            }
        }
    }
}

impl FromStr for Strategy {
    type Err = NmcError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || NmcError::Parse(format!("unknown strategy '{s}'"));
        match s {
            "equal" => return Ok(Strategy::Equal),
            "squared" => return Ok(Strategy::Squared),
            _ => {}
        }
        let (name, args) = s.strip_suffix(')').and_then(|r| r.split_once('(')).ok_or_else(bad)?;
        match name {
            "fixed_inner" => {
                let m: u64 = args.trim().parse().map_err(|_| bad())?;
                if m == 0 {
                    return Err(NmcError::ParameterDomain("fixed inner count must be >= 1".into()));
                }
                Ok(Strategy::FixedInner(m))
            }
            "alpha" => {
                let alphas = args
                    .split(',')
                    .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Strategy::Alpha(alphas))
            }
            _ => Err(bad()),
        }
    }
}

/// `lo, lo r, lo r^2, ...` up to `hi`, rounded half-to-even and deduplicated.
pub fn geometric_ladder(lo: f64, hi: f64, ratio: f64) -> Result<Vec<u64>> {
    if !(lo >= 1.0 && hi >= lo && ratio > 1.0 && hi.is_finite()) {
        return Err(NmcError::ParameterDomain(format!("bad ladder {lo}:{hi}:{ratio}")));
    }
    let mut ladder: Vec<u64> = Vec::new();
    for i in 0.. {
        let t = lo * ratio.powi(i);
        if t > hi * (1.0 + 1e-9) {
            break;
        }
        let t = t.round_ties_even() as u64;
        if ladder.last() != Some(&t) {
            ladder.push(t);
        }
    }
    Ok(ladder)
}

/// Parse `lo:hi:ratio`; the ratio may be the literal `sqrt10`.
pub fn parse_ladder(s: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| NmcError::Parse(format!("bad ladder value '{p}'")));
    match parts.as_slice() {
        [lo, hi, ratio] => {
            let ratio = if *ratio == "sqrt10" { 10f64.sqrt() } else { num(ratio)? };
            geometric_ladder(num(lo)?, num(hi)?, ratio)
        }
        [lo, hi] => geometric_ladder(num(lo)?, num(hi)?, 10f64.sqrt()),
        _ => Err(NmcError::Parse(format!("ladder must be lo:hi:ratio, got '{s}'"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    pub ladder: Vec<u64>,
    pub replicates: u64,
    pub base_seed: u64,
    pub window: f64,
    pub execution: Execution,
}

impl SweepConfig {
    pub fn new(strategies: Vec<Strategy>, ladder: Vec<u64>, replicates: u64, base_seed: u64) -> Result<Self> {
        let config = Self { strategies, ladder, replicates, base_seed, window: DEFAULT_WINDOW, execution: Execution::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(NmcError::ParameterDomain("at least one strategy is required".into()));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NmcError::ParameterDomain("budget ladder must be strictly increasing".into()));
        }
        if self.ladder.len() < 3 {
            return Err(NmcError::InsufficientData { needed: 3, got: self.ladder.len() });
        }
        if self.replicates < 2 {
            return Err(NmcError::InsufficientData { needed: 2, got: self.replicates as usize });
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(NmcError::ParameterDomain(format!("window must be in (0, 1], got {}", self.window)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub strategy: String,
    pub t: u64,
    pub counts: Vec<u64>,
    pub effective_budget: u64,
    pub replicates: u64,
    pub failures: u64,
    pub stats: MseStats,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub model: String,
    pub truth: Truth,
    pub rows: Vec<SweepRow>,
    /// One entry per strategy, in configuration order; `None` when the MSE
    /// is not positive over the fit window.
    pub slopes: Vec<(String, Option<SlopeFit>)>,
}

impl SweepReport {
    pub fn rows_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.strategy == strategy)
    }

    pub fn slope(&self, strategy: &str) -> Option<SlopeFit> {
        self.slopes.iter().find(|(s, _)| s == strategy).and_then(|(_, f)| *f)
    }

    pub fn row(&self, strategy: &str, t: u64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.t == t)
    }
}

/// Least squares of `log10(mse)` on `log10(T)` over the largest-`T` points.
///
/// The window keeps `ceil(window * n)` points but never fewer than 3.
pub fn fit_power_law(points: &[(u64, f64)], window: f64) -> Result<SlopeFit> {
    let n = points.len();
    if n < 3 {
        return Err(NmcError::InsufficientData { needed: 3, got: n });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by_key(|p| p.0);
    let keep = ((window * n as f64 - 1e-9).ceil() as usize).clamp(3, n);
    let fit = &sorted[n - keep..];
    if let Some(p) = fit.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(NmcError::ParameterDomain(format!("cannot fit log of mse {} at T={}", p.1, p.0)));
    }
    let xs: Vec<f64> = fit.iter().map(|p| (p.0 as f64).log10()).collect();
    let ys: Vec<f64> = fit.iter().map(|p| p.1.log10()).collect();
    let k = keep as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let stderr = if keep > 2 { (ssr / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(SlopeFit { slope, stderr, points: keep })
}

/// Slope of one strategy's rows.
pub fn fit_slope(rows: &[&SweepRow], window: f64) -> Result<SlopeFit> {
    let points: Vec<(u64, f64)> = rows.iter().map(|r| (r.t, r.stats.mse)).collect();
    fit_power_law(&points, window)
}

/// Replicated error statistics for every strategy and ladder budget.
pub fn convergence_sweep(model: &str, estimator: &dyn Estimator, truth: Truth, config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for strategy in &config.strategies {
        let start = rows.len();
        for &t in &config.ladder {
            let plan = strategy.plan(t, estimator.depth())?;
            let run = run_replicates(estimator, &plan, config.replicates, config.base_seed, config.execution)?;
            let stats = empirical_mse(&run.values(), truth.value)?;
            rows.push(SweepRow {
                strategy: strategy.label(),
                t,
                counts: plan.counts().to_vec(),
                effective_budget: plan.effective_budget()?,
                replicates: config.replicates,
                failures: run.failures.len() as u64,
                stats,
            });
        }
        let own: Vec<&SweepRow> = rows[start..].iter().collect();
        slopes.push((strategy.label(), fit_slope(&own, config.window).ok()));
    }
    Ok(SweepReport { model: model.to_string(), truth, rows, slopes })
}

/// Evenly spaced values `lo, lo + step, ..., hi`, cleaned of float drift.
pub fn alpha_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo) {
        return Err(NmcError::ParameterDomain(format!("bad grid {lo}..{hi} step {step}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect())
}

/// Cartesian product of two axes, first axis outermost.
pub fn grid_2d(a: &[f64], b: &[f64]) -> Vec<Vec<f64>> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaRow {
    pub alphas: Vec<f64>,
    pub counts: Vec<u64>,
    pub failures: u64,
    pub stats: MseStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaReport {
    pub t: u64,
    pub replicates: u64,
    pub truth: Truth,
    pub rows: Vec<AlphaRow>,
    /// Index of the row with the smallest MSE.
    pub argmin: usize,
}

impl AlphaReport {
    pub fn best(&self) -> &AlphaRow {
        &self.rows[self.argmin]
    }
}

/// One error row per grid point, each using `alpha_allocation(t, alphas)`.
pub fn alpha_sweep(
    estimator: &dyn Estimator,
    truth: Truth,
    t: u64,
    grid: &[Vec<f64>],
    replicates: u64,
    base_seed: u64,
    exec: Execution,
) -> Result<AlphaReport> {
    if grid.is_empty() {
        return Err(NmcError::InsufficientData { needed: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(grid.len());
    for alphas in grid {
        let plan = Strategy::Alpha(alphas.clone()).plan(t, estimator.depth())?;
        let run = run_replicates(estimator, &plan, replicates, base_seed, exec)?;
        rows.push(AlphaRow {
            alphas: alphas.clone(),
            counts: plan.counts().to_vec(),
            failures: run.failures.len() as u64,
            stats: empirical_mse(&run.values(), truth.value)?,
        });
    }
    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.stats.mse.total_cmp(&b.1.stats.mse))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(AlphaReport { t, replicates, truth, rows, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fn_estimator;
    use crate::problem::EstimateRecord;

    #[test]
    fn strategy_text_round_trips() {
        for s in ["equal", "squared", "fixed_inner(5)", "alpha(0.5,0.25)"] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert!("fixed_inner(0)".parse::<Strategy>().is_err());
        assert!("nope".parse::<Strategy>().is_err());
        assert!("alpha(x)".parse::<Strategy>().is_err());
    }

    #[test]
    fn strategy_plans() {
        assert_eq!(Strategy::Equal.plan(1_000_000, 1).unwrap().counts(), &[1000, 1000]);
        assert_eq!(Strategy::Squared.plan(1_000_000, 1).unwrap().counts(), &[10_000, 100]);
        assert_eq!(Strategy::FixedInner(5).plan(100_000, 1).unwrap().counts(), &[20_000, 5]);
        assert_eq!(Strategy::FixedInner(5).plan(5000, 2).unwrap().counts(), &[100, 10, 5]);
        assert_eq!(Strategy::Squared.plan(1_000_000, 2).unwrap().counts(), &[1000, 32, 32]);
        assert_eq!(Strategy::Equal.plan(777, 0).unwrap().counts(), &[777]);
        assert!(Strategy::Alpha(vec![0.5]).plan(1000, 2).is_err());
        assert!(Strategy::FixedInner(10).plan(5, 1).is_err());
        assert_eq!(Strategy::Equal.plan(1000, 1).unwrap().strategy_label, "equal");
    }

    #[test]
    fn ladders() {
        assert_eq!(
            parse_ladder("1e2:1e6:sqrt10").unwrap(),
            vec![100, 316, 1000, 3162, 10_000, 31_623, 100_000, 316_228, 1_000_000]
        );
        assert_eq!(parse_ladder("10:1000:10").unwrap(), vec![10, 100, 1000]);
        assert!(parse_ladder("100:10:2").is_err());
        assert!(parse_ladder("1:2:3:4").is_err());
    }

    fn points(f: impl Fn(f64) -> f64) -> Vec<(u64, f64)> {
        parse_ladder("1e2:1e6:sqrt10").unwrap().into_iter().map(|t| (t, f(t as f64))).collect()
    }

    #[test]
    fn power_law_slopes_are_recovered() {
        for (f, slope) in [
            (Box::new(|t: f64| 1.0 / t) as Box<dyn Fn(f64) -> f64>, -1.0),
            (Box::new(|t: f64| t.powf(-0.5)), -0.5),
            (Box::new(|_| 3.0), 0.0),
        ] {
            let fit = fit_power_law(&points(f), DEFAULT_WINDOW).unwrap();
            assert!((fit.slope - slope).abs() < 1e-9);
            assert_eq!(fit.points, 6);
        }
        assert!(fit_power_law(&points(|_| 1.0)[..2], 1.0).is_err());
        assert!(fit_power_law(&points(|_| 0.0), 1.0).is_err());
    }

    #[test]
    fn sweep_config_checks() {
        assert!(SweepConfig::new(vec![Strategy::Equal], vec![100, 1000, 10_000], 2, 0).is_ok());
        assert!(SweepConfig::new(vec![Strategy::Equal], vec![100], 2, 0).is_err());
        assert!(SweepConfig::new(vec![Strategy::Equal], vec![100, 100, 1000], 2, 0).is_err());
        assert!(SweepConfig::new(vec![Strategy::Equal], vec![100, 1000, 10_000], 1, 0).is_err());
    }

    fn constant(v: f64) -> impl Estimator {
        fn_estimator(1, move |plan, stream| EstimateRecord::new(v, plan.clone(), stream, 0.0))
    }

    #[test]
    fn degenerate_alpha_sweep() {
        let grid: Vec<Vec<f64>> = alpha_grid(0.3, 0.8, 0.05).unwrap().into_iter().map(|a| vec![a]).collect();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[10], vec![0.8]);
        let r = alpha_sweep(&constant(5.0), Truth::analytic(5.0), 10_000, &grid, 3, 1, Execution::Serial).unwrap();
        assert!(r.rows.iter().all(|row| row.stats.mse == 0.0));
        assert_eq!(grid_2d(&[0.1, 0.2], &[0.3, 0.4, 0.5]).len(), 6);
    }

    #[test]
    fn constant_sweep_has_no_slope() {
        let config = SweepConfig::new(vec![Strategy::Equal, Strategy::Squared], vec![100, 1000, 10_000], 3, 0).unwrap();
        let r = convergence_sweep("const", &constant(5.0), Truth::analytic(5.0), &config).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert_eq!(r.slope("equal"), None);
        assert!(r.rows.iter().all(|row| row.stats.mse == 0.0));
    }
}
