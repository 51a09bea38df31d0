//! Primitive distributions with exact samplers and log-densities.
//!
//! A [`DistributionSpec`] can only be built with parameters inside its legal
//! domain, so sampling and density evaluation never fail. The canonical text
//! form is `kind(p1,p2,...)`, e.g. `normal(0,1)` or `categorical(0.2,0.8)`.
//!
//! Gamma uses the shape/rate parameterization throughout.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{NmcError, Result};
use crate::rng::RandomStream;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Uniform { a: f64, b: f64 },
    Normal { mean: f64, std: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Rayleigh { scale: f64 },
    Bernoulli { p: f64 },
    Categorical { probs: Vec<f64>, cumulative: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec {
    kind: Kind,
}

fn domain(msg: impl Into<String>) -> NmcError {
    NmcError::ParameterDomain(msg.into())
}

fn finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(domain(format!("{what}: parameters must be finite")))
    }
}

impl DistributionSpec {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        finite(&[a, b], "uniform")?;
        if a >= b {
            return Err(domain(format!("uniform requires a < b, got ({a}, {b})")));
        }
        Ok(Self { kind: Kind::Uniform { a, b } })
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        finite(&[mean, std], "normal")?;
        if std <= 0.0 {
            return Err(domain(format!("normal requires std > 0, got {std}")));
        }
        Ok(Self { kind: Kind::Normal { mean, std } })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        finite(&[shape, rate], "gamma")?;
        if shape <= 0.0 || rate <= 0.0 {
            return Err(domain(format!(
                "gamma requires shape > 0 and rate > 0, got ({shape}, {rate})"
            )));
        }
        Ok(Self { kind: Kind::Gamma { shape, rate } })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        finite(&[a, b], "beta")?;
        if a <= 0.0 || b <= 0.0 {
            return Err(domain(format!("beta requires a > 0 and b > 0, got ({a}, {b})")));
        }
        Ok(Self { kind: Kind::Beta { a, b } })
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        finite(&[scale], "rayleigh")?;
        if scale <= 0.0 {
            return Err(domain(format!("rayleigh requires scale > 0, got {scale}")));
        }
        Ok(Self { kind: Kind::Rayleigh { scale } })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(domain(format!("bernoulli requires 0 <= p <= 1, got {p}")));
        }
        Ok(Self { kind: Kind::Bernoulli { p } })
    }

    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("categorical requires at least one category"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain("categorical probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("categorical probabilities sum to {total}, not 1")));
        }
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { kind: Kind::Categorical { probs, cumulative } })
    }

    /// Draw one value. Bernoulli and categorical kinds return the outcome
    /// index (`0.0`, `1.0`, ...).
    pub fn sample(&self, stream: &mut RandomStream) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => a + (b - a) * stream.next_f64(),
            Kind::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(stream);
                mean + std * z
            }
            Kind::Gamma { shape, rate } => sample_gamma(*shape, *rate, stream),
            Kind::Beta { a, b } => {
                let x = sample_gamma(*a, 1.0, stream);
                let y = sample_gamma(*b, 1.0, stream);
                x / (x + y)
            }
            Kind::Rayleigh { scale } => scale * (-2.0 * stream.next_open_f64().ln()).sqrt(),
            Kind::Bernoulli { p } => {
                if stream.next_f64() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::Categorical { probs, cumulative } => {
                let u = stream.next_f64();
                let idx = cumulative.partition_point(|&c| c <= u);
                // rounding can leave u above the last cumulative value
                let idx = if idx >= probs.len() {
                    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
                } else {
                    idx
                };
                idx as f64
            }
        }
    }

    /// Natural log of the density (continuous kinds) or mass (discrete kinds).
    /// Points outside the support map to `-inf`.
    pub fn log_density(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    -(b - a).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Normal { mean, std } => {
                let z = (x - mean) / std;
                -LN_SQRT_2PI - std.ln() - 0.5 * z * z
            }
            Kind::Gamma { shape, rate } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if x == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => rate.ln(),
                        _ => f64::NEG_INFINITY,
                    };
                }
                shape * rate.ln() - libm::lgamma(*shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Kind::Beta { a, b } => {
                if !(0.0..=1.0).contains(&x) {
                    return f64::NEG_INFINITY;
                }
                let ln_beta = libm::lgamma(*a) + libm::lgamma(*b) - libm::lgamma(a + b);
                xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x) - ln_beta
            }
            Kind::Rayleigh { scale } => {
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                let s2 = scale * scale;
                x.ln() - s2.ln() - x * x / (2.0 * s2)
            }
            Kind::Bernoulli { p } => {
                if x == 1.0 {
                    p.ln()
                } else if x == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Kind::Categorical { probs, .. } => {
                if x >= 0.0 && x.fract() == 0.0 && (x as usize) < probs.len() {
                    probs[x as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Exact support for the discrete kinds as `(value, probability)` pairs.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            Kind::Bernoulli { p } => Some(vec![(0.0, 1.0 - p), (1.0, *p)]),
            Kind::Categorical { probs, .. } => {
                Some(probs.iter().enumerate().map(|(i, p)| (i as f64, *p)).collect())
            }
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => 0.5 * (a + b),
            Kind::Normal { mean, .. } => *mean,
            Kind::Gamma { shape, rate } => shape / rate,
            Kind::Beta { a, b } => a / (a + b),
            Kind::Rayleigh { scale } => scale * (PI / 2.0).sqrt(),
            Kind::Bernoulli { p } => *p,
            Kind::Categorical { probs, .. } => {
                probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            Kind::Uniform { a, b } => (b - a).powi(2) / 12.0,
            Kind::Normal { std, .. } => std * std,
            Kind::Gamma { shape, rate } => shape / (rate * rate),
            Kind::Beta { a, b } => a * b / ((a + b).powi(2) * (a + b + 1.0)),
            Kind::Rayleigh { scale } => (4.0 - PI) / 2.0 * scale * scale,
            Kind::Bernoulli { p } => p * (1.0 - p),
            Kind::Categorical { probs, .. } => {
                let m = self.mean();
                probs.iter().enumerate().map(|(i, p)| p * (i as f64 - m).powi(2)).sum()
            }
        }
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

#[inline]
pub(crate) fn sample_gamma(shape: f64, rate: f64, stream: &mut RandomStream) -> f64 {
    // Marsaglia-Tsang with the shape < 1 boost; exact for every shape > 0.
    Gamma::new(shape, 1.0 / rate)
        .expect("validated gamma parameters")
        .sample(stream)
}

/// Standard normal CDF, accurate to about 1e-15 absolute.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, params): (&str, Vec<f64>) = match &self.kind {
            Kind::Uniform { a, b } => ("uniform", vec![*a, *b]),
            Kind::Normal { mean, std } => ("normal", vec![*mean, *std]),
            Kind::Gamma { shape, rate } => ("gamma", vec![*shape, *rate]),
            Kind::Beta { a, b } => ("beta", vec![*a, *b]),
            Kind::Rayleigh { scale } => ("rayleigh", vec![*scale]),
            Kind::Bernoulli { p } => ("bernoulli", vec![*p]),
            Kind::Categorical { probs, .. } => ("categorical", probs.clone()),
        };
        let joined: Vec<String> = params.iter().map(|p| p.to_string()).collect();
        write!(f, "{name}({})", joined.join(","))
    }
}

impl FromStr for DistributionSpec {
    type Err = NmcError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s
            .find('(')
            .ok_or_else(|| NmcError::Parse(format!("expected kind(p1,...), got {s:?}")))?;
        if !s.ends_with(')') {
            return Err(NmcError::Parse(format!("missing closing parenthesis in {s:?}")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let inner = &s[open + 1..s.len() - 1];
        let params = inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| NmcError::Parse(format!("bad parameter {p:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let arity = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(NmcError::Parse(format!(
                    "{name} takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match name.as_str() {
            "uniform" => arity(2).and_then(|_| Self::uniform(params[0], params[1])),
            "normal" => arity(2).and_then(|_| Self::normal(params[0], params[1])),
            "gamma" => arity(2).and_then(|_| Self::gamma(params[0], params[1])),
            "beta" => arity(2).and_then(|_| Self::beta(params[0], params[1])),
            "rayleigh" => arity(1).and_then(|_| Self::rayleigh(params[0])),
            "bernoulli" => arity(1).and_then(|_| Self::bernoulli(params[0])),
            "categorical" => Self::categorical(params),
            other => Err(NmcError::Parse(format!("unknown distribution kind {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::make_stream;

    #[test]
    fn uniform_support() {
        let d = DistributionSpec::uniform(-1.0, 1.0).unwrap();
        let mut s = make_stream(1, &[0]);
        for _ in 0..10_000 {
            let x = d.sample(&mut s);
            assert!((-1.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn gamma_mean_matches_shape_over_rate() {
        let d = DistributionSpec::gamma(2.0, 2.0).unwrap();
        let mut s = make_stream(11, &[]);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut s)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn degenerate_bernoulli() {
        let zero = DistributionSpec::bernoulli(0.0).unwrap();
        let one = DistributionSpec::bernoulli(1.0).unwrap();
        let mut s = make_stream(5, &[]);
        for _ in 0..1000 {
            assert_eq!(zero.sample(&mut s), 0.0);
            assert_eq!(one.sample(&mut s), 1.0);
        }
    }

    #[test]
    fn log_density_examples() {
        let n = DistributionSpec::normal(0.0, 1.0).unwrap();
        assert!((n.log_density(0.0) + 0.918_938_5).abs() < 1e-7);
        let b = DistributionSpec::bernoulli(0.3).unwrap();
        assert_eq!(b.log_density(1.0), 0.3f64.ln());
        let u = DistributionSpec::uniform(0.0, 2.0).unwrap();
        assert_eq!(u.log_density(3.0), f64::NEG_INFINITY);
    }

    #[test]
    fn log_density_matches_closed_forms() {
        let g = DistributionSpec::gamma(2.0, 2.0).unwrap();
        // 4 x e^{-2x} at x = 0.5
        assert!((g.log_density(0.5) - (4.0 * 0.5 * (-1.0f64).exp()).ln()).abs() < 1e-12);
        let b = DistributionSpec::beta(5.0, 2.0).unwrap();
        // 30 x^4 (1-x) at x = 0.5
        assert!((b.log_density(0.5) - (30.0 * 0.0625 * 0.5f64).ln()).abs() < 1e-12);
        let r = DistributionSpec::rayleigh(10.0).unwrap();
        let x = 7.0;
        let expected = (x / 100.0 * (-x * x / 200.0f64).exp()).ln();
        assert!((r.log_density(x) - expected).abs() < 1e-12);
        assert_eq!(r.log_density(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DistributionSpec::uniform(1.0, 1.0).is_err());
        assert!(DistributionSpec::normal(0.0, 0.0).is_err());
        assert!(DistributionSpec::gamma(0.0, 1.0).is_err());
        assert!(DistributionSpec::gamma(1.0, -1.0).is_err());
        assert!(DistributionSpec::beta(1.0, 0.0).is_err());
        assert!(DistributionSpec::rayleigh(0.0).is_err());
        assert!(DistributionSpec::bernoulli(1.5).is_err());
        assert!(DistributionSpec::categorical(vec![0.5, 0.4]).is_err());
        assert!(DistributionSpec::categorical(vec![-0.1, 1.1]).is_err());
        assert!(matches!(
            DistributionSpec::normal(f64::NAN, 1.0),
            Err(NmcError::ParameterDomain(_))
        ));
    }

    #[test]
    fn text_form_round_trips() {
        for text in ["normal(0,1)", "gamma(2,2)", "categorical(0.25,0.75)", "rayleigh(10)"] {
            let d: DistributionSpec = text.parse().unwrap();
            assert_eq!(d.to_string(), text);
        }
        assert!("normal(0)".parse::<DistributionSpec>().is_err());
        assert!("weibull(1,2)".parse::<DistributionSpec>().is_err());
        assert!("normal 0,1".parse::<DistributionSpec>().is_err());
    }

    #[test]
    fn categorical_hits_every_category_in_proportion() {
        let d = DistributionSpec::categorical(vec![0.2, 0.0, 0.8]).unwrap();
        let mut s = make_stream(9, &[]);
        let mut counts = [0usize; 3];
        for _ in 0..100_000 {
            counts[d.sample(&mut s) as usize] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 1e5 - 0.2).abs() < 0.01);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        for i in 0..100 {
            let x = i as f64 * 0.08;
            assert!((normal_cdf(-x) - (1.0 - normal_cdf(x))).abs() < 1e-12);
        }
    }
}
