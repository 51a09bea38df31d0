//! Single nesting with a closed-form answer: `y ~ U(-1, 1)`, `z ~ N(0, 1)`,
//! `phi(y, z) = sqrt(2/pi) exp(-2 (y - z)^2)` and `f(y, gamma) = ln gamma`.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::problem::{Draw, NestedProblem};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticModel;

impl AnalyticModel {
    /// `(1/2) ln(2 / (5 pi)) - 2/15`.
    pub fn truth() -> f64 {
        0.5 * (2.0 / (5.0 * PI)).ln() - 2.0 / 15.0
    }

    pub fn phi(y: f64, z: f64) -> f64 {
        let d = y - z;
        (2.0 / PI).sqrt() * (-2.0 * d * d).exp()
    }

    /// Exact inner expectation `E[phi(y, z)]`.
    pub fn gamma(y: f64) -> f64 {
        (2.0 / (5.0 * PI)).sqrt() * (-0.4 * y * y).exp()
    }
}

impl NestedProblem for AnalyticModel {
    fn depth(&self) -> usize {
        1
    }

    fn sample(&self, level: usize, _prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        if level == 0 {
            Draw::scalar(2.0 * stream.next_f64() - 1.0)
        } else {
            Draw::scalar(StandardNormal.sample(stream))
        }
    }

    fn leaf(&self, path: &[Draw]) -> f64 {
        Self::phi(path[0][0], path[1][0])
    }

    fn combine(&self, _level: usize, _path: &[Draw], inner: f64) -> f64 {
        inner.ln()
    }

    fn ground_truth(&self) -> Option<f64> {
        Some(Self::truth())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_value() {
        // the closed form evaluates to -1.1638436..., not -1.163850
        assert!((AnalyticModel::truth() + 1.1638436).abs() < 1e-6);
    }

    #[test]
    fn phi_at_origin() {
        assert!((AnalyticModel::phi(0.0, 0.0) - 0.7978846).abs() < 1e-7);
    }

    #[test]
    fn gamma_matches_quadrature() {
        // trapezoid rule over z in [-12, 12]
        for y in [-1.0, -0.3, 0.0, 0.8] {
            let h = 1e-3;
            let mut s = 0.0;
            let mut z = -12.0;
            while z <= 12.0 {
                s += AnalyticModel::phi(y, z) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt() * h;
                z += h;
            }
            assert!((s - AnalyticModel::gamma(y)).abs() < 1e-9, "y={y}");
            assert!(AnalyticModel::gamma(y) > 0.0);
        }
    }

    #[test]
    fn truth_matches_outer_quadrature() {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let s: f64 = (0..n).map(|i| AnalyticModel::gamma(-1.0 + (i as f64 + 0.5) * h).ln() * h / 2.0).sum();
        assert!((s - AnalyticModel::truth()).abs() < 1e-9);
    }
}
