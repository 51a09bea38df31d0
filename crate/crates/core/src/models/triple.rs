//! Double nesting with a closed-form answer.
//!
//! `y0 ~ U(0, 1)`, `y1, y2 ~ N(0, 1)`, `f2 = exp(y2 - (y0 + y1)/2)`,
//! `f1 = exp(-(y0 - y1 - ln gamma2)/2)` and `f0 = ln gamma1`. The modified
//! variant uses `y0/10` in place of `y0` inside the functions.

use rand_distr::{Distribution, StandardNormal};

use crate::problem::{Draw, NestedProblem};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, Default)]
pub struct TripleModel {
    pub modified: bool,
}

impl TripleModel {
    pub fn new(modified: bool) -> Self {
        Self { modified }
    }

    pub fn truth(modified: bool) -> f64 {
        if modified {
            39.0 / 160.0
        } else {
            -3.0 / 32.0
        }
    }

    fn y0(&self, path: &[Draw]) -> f64 {
        if self.modified {
            path[0][0] / 10.0
        } else {
            path[0][0]
        }
    }
}

impl NestedProblem for TripleModel {
    fn depth(&self) -> usize {
        2
    }

    fn sample(&self, level: usize, _prefix: &[Draw], stream: &mut RandomStream) -> Draw {
        if level == 0 {
            Draw::scalar(stream.next_f64())
        } else {
            Draw::scalar(StandardNormal.sample(stream))
        }
    }

    fn leaf(&self, path: &[Draw]) -> f64 {
        (path[2][0] - (self.y0(path) + path[1][0]) / 2.0).exp()
    }

    fn combine(&self, level: usize, path: &[Draw], inner: f64) -> f64 {
        match level {
            0 => inner.ln(),
            _ => (-0.5 * (self.y0(path) - path[1][0] - inner.ln())).exp(),
        }
    }

    fn ground_truth(&self) -> Option<f64> {
        Some(Self::truth(self.modified))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truths() {
        assert_eq!(TripleModel::truth(false), -0.09375);
        assert_eq!(TripleModel::truth(true), 0.24375);
    }

    #[test]
    fn leaf_at_origin() {
        let m = TripleModel::new(false);
        assert_eq!(m.leaf(&[Draw::scalar(0.0); 3]), 1.0);
    }

    // Exact conditional expectations of the lognormal terms, composed by hand.
    #[test]
    fn truth_from_exact_inner_layers() {
        for modified in [false, true] {
            let m = TripleModel::new(modified);
            let n = 100_000;
            let mut total = 0.0;
            for i in 0..n {
                let y0 = (i as f64 + 0.5) / n as f64;
                let s = if modified { y0 / 10.0 } else { y0 };
                // gamma2 = e^{1/2} e^{-(s + y1)/2}; f1 becomes exp(-3s/4 + y1/4 + 1/4)
                let gamma1 = (-0.75 * s + 0.25 + 1.0 / 32.0).exp();
                total += gamma1.ln() / n as f64;
                if i == 0 {
                    let y1 = 0.3;
                    let gamma2 = (0.5 - (s + y1) / 2.0).exp();
                    let path = [Draw::scalar(y0), Draw::scalar(y1)];
                    let f1 = m.combine(1, &path, gamma2);
                    assert!((f1 - (-0.75 * s + y1 / 4.0 + 0.25).exp()).abs() < 1e-14);
                }
            }
            assert!((total - TripleModel::truth(modified)).abs() < 1e-9);
        }
    }
}
