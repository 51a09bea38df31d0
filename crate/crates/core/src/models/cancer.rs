//! Tumour growth under treatment, with a threshold decision on the fraction
//! of patients whose tumour ends below a size limit.
//!
//! Cell count `c` and carrying capacity `K` follow
//! `dc/dt = -lambda c ln(c/K) - xi c` and `dK/dt = phi c - psi K c^(2/3)`,
//! integrated with fixed-step classical Runge-Kutta.

use crate::dist::DistributionSpec;
use crate::error::{NmcError, Result};
use crate::problem::{Draw, NestedProblem};
use crate::rng::RandomStream;

#[derive(Clone, Debug, PartialEq)]
pub struct CancerParams {
    pub k0: f64,
    pub phi_rate: f64,
    pub psi: f64,
    pub lambda: f64,
    pub xi_dist: DistributionSpec,
    pub c0_dist: DistributionSpec,
    /// Initial cell counts are `c0_multiplier * c0_dist` draws.
    pub c0_multiplier: f64,
    pub t_opp: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub t_treat: f64,
}

impl Default for CancerParams {
    fn default() -> Self {
        Self {
            k0: 1e8,
            phi_rate: 0.001,
            psi: 0.05,
            lambda: 0.5,
            xi_dist: DistributionSpec::beta(5.0, 2.0).expect("valid beta"),
            c0_dist: DistributionSpec::rayleigh(10.0).expect("valid rayleigh"),
            c0_multiplier: 1000.0,
            t_opp: 2000.0,
            t_max: 250.0,
            t_step: 0.01,
            t_treat: 0.35,
        }
    }
}

impl CancerParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("K0", self.k0),
            ("phi_rate", self.phi_rate),
            ("psi", self.psi),
            ("lambda", self.lambda),
            ("c0 multiplier", self.c0_multiplier),
            ("T_opp", self.t_opp),
            ("t_max", self.t_max),
            ("t_step", self.t_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(NmcError::ParameterDomain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.t_treat) {
            return Err(NmcError::ParameterDomain(format!("T_treat must be in [0, 1], got {}", self.t_treat)));
        }
        Ok(())
    }

    pub fn with_t_treat(mut self, t_treat: f64) -> Self {
        self.t_treat = t_treat;
        self
    }

    fn deriv(&self, xi: f64, c: f64, k: f64) -> (f64, f64) {
        let dc = -self.lambda * c * (c / k).ln() - xi * c;
        let dk = self.phi_rate * c - self.psi * k * c.cbrt().powi(2);
        (dc, dk)
    }

    /// Side of a square `(0, a]^2` in the `(c, K)` plane that no exact
    /// trajectory leaves: on `c = a` we have `K <= a`, so `dc/dt <= 0`, and on
    /// `K = a` we need `phi c^(1/3) <= psi a` for all `c <= a`.
    fn trap_side(&self) -> Option<f64> {
        let a = self.t_opp / 2.0;
        (self.phi_rate * a.cbrt() <= self.psi * a).then_some(a)
    }
}

/// Final state of one integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TumorState {
    pub c: f64,
    pub k: f64,
    /// Time at which integration stopped.
    pub t: f64,
    /// 1 if the tumour ends below `T_opp`.
    pub outcome: f64,
}

/// Integrate from `K(0) = K0` with step `step`. With `early_exit`, stop as
/// soon as the state enters a region it provably never leaves, which fixes
/// the outcome at 1.
pub fn integrate_tumor(c0: f64, xi: f64, params: &CancerParams, step: f64, early_exit: bool) -> Result<TumorState> {
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(NmcError::ParameterDomain(format!("c0 must be positive, got {c0}")));
    }
    let steps = (params.t_max / step).round() as u64;
    let trap = if early_exit { params.trap_side() } else { None };
    let (mut c, mut k) = (c0, params.k0);
    for i in 0..steps {
        if let Some(a) = trap {
            if c <= a && k <= a {
                return Ok(TumorState { c, k, t: i as f64 * step, outcome: 1.0 });
            }
        }
        let (c1, k1) = params.deriv(xi, c, k);
        let (c2, k2) = params.deriv(xi, c + 0.5 * step * c1, k + 0.5 * step * k1);
        let (c3, k3) = params.deriv(xi, c + 0.5 * step * c2, k + 0.5 * step * k2);
        let (c4, k4) = params.deriv(xi, c + step * c3, k + step * k3);
        c += step / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4);
        k += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(c.is_finite() && k.is_finite() && c > 0.0 && k > 0.0) {
            return Err(NmcError::Integration { t: (i + 1) as f64 * step });
        }
    }
    let outcome = if c < params.t_opp { 1.0 } else { 0.0 };
    Ok(TumorState { c, k, t: steps as f64 * step, outcome })
}

/// 1 if the tumour ends below `T_opp` at `t_max`, else 0.
pub fn simulate_tumor(c0: f64, xi: f64, params: &CancerParams) -> Result<f64> {
    integrate_tumor(c0, xi, params, params.t_step, true).map(|s| s.outcome)
}

/// `I(T_treat) = E[ 1(E[outcome | c0] > T_treat) ]` with `c0` outer and `xi` inner.
#[derive(Clone, Debug)]
pub struct CancerModel {
    params: CancerParams,
}

impl CancerModel {
    pub fn new(params: CancerParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &CancerParams {
        &self.params
    }
}

impl NestedProblem for CancerModel {
    fn depth(&self) -> usize {
        1
    }

    fn sample(&self, level: usize, _prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        if level == 0 {
            Draw::scalar(self.params.c0_multiplier * self.params.c0_dist.sample(stream))
        } else {
            Draw::scalar(self.params.xi_dist.sample(stream))
        }
    }

    // Integration failures surface as NaN so the estimator reports them.
    fn leaf(&self, path: &[Draw]) -> f64 {
        simulate_tumor(path[0][0], path[1][0], &self.params).unwrap_or(f64::NAN)
    }

    fn combine(&self, _level: usize, _path: &[Draw], inner: f64) -> f64 {
        if inner.is_nan() {
            f64::NAN
        } else if inner > self.params.t_treat {
            1.0
        } else {
            0.0
        }
    }
}
