//! Symmetric entry laws for Wigner matrices.
//!
//! Each law is a symmetric base distribution rescaled to a requested variance.
//! Off-diagonal real and imaginary parts use variance `1/8`, the real
//! diagonal uses `1/4`, and the imaginary diagonal part vanishes.

use std::fmt;
use std::str::FromStr;

use num::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{int, rat, Rational};

/// Variance of `X_ij` and `Y_ij` for `i < j`.
pub fn offdiag_variance() -> Rational {
    rat(1, 8)
}

/// Variance of `X_ii`.
pub fn diag_variance() -> Rational {
    rat(1, 4)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EntryLaw {
    Gaussian,
    /// `±σ` with equal probability.
    Rademacher,
    /// `0` with probability `1-p`, `±σ/√p` otherwise.
    ThreePoint { p: Rational },
}

impl EntryLaw {
    /// Default sparse law. `V₄ = 1/16` off the diagonal, above the Gaussian `3/64`.
    pub fn three_point_default() -> Self {
        EntryLaw::ThreePoint { p: rat(1, 4) }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// `E X^order` for the law scaled to `variance`.
    pub fn moment(&self, variance: &Rational, order: u32) -> Rational {
        if order % 2 == 1 {
            return Rational::zero();
        }
        let k = order / 2;
        if k == 0 {
            return Rational::one();
        }
        let vk = num::pow(variance.clone(), k as usize);
        match self {
            EntryLaw::Gaussian => {
                let double_fact: i64 = (1..=k as i64).map(|j| 2 * j - 1).product();
                vk * int(double_fact)
            }
            EntryLaw::Rademacher => vk,
            EntryLaw::ThreePoint { p } => vk / num::pow(p.clone(), (k - 1) as usize),
        }
    }

    /// `V₄ = E X_ij⁴` for `i < j`.
    pub fn v4_offdiag(&self) -> Rational {
        self.moment(&offdiag_variance(), 4)
    }

    pub fn v4_diag(&self) -> Rational {
        self.moment(&diag_variance(), 4)
    }

    /// A constant `c` with `V_{2k} ≤ (ck)^k` for every `k ≥ 1`.
    pub fn subgaussian_constant(&self) -> Rational {
        match self {
            EntryLaw::Gaussian => rat(1, 4),
            EntryLaw::Rademacher => rat(1, 8),
            EntryLaw::ThreePoint { p } => rat(1, 8) / p,
        }
    }

    /// One draw with standard deviation `sigma`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, sigma: f64) -> f64 {
        match self {
            EntryLaw::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z
            }
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            EntryLaw::ThreePoint { p } => {
                let p = crate::series::to_f64(p);
                let u: f64 = rng.random();
                if u >= p {
                    0.0
                } else if u < 0.5 * p {
                    sigma / p.sqrt()
                } else {
                    -sigma / p.sqrt()
                }
            }
        }
    }

    fn validate(self) -> Result<Self> {
        if let EntryLaw::ThreePoint { p } = &self {
            if *p <= Rational::zero() || *p > Rational::one() {
                return Err(Error::Domain(format!("three-point law needs 0 < p <= 1, got {p}")));
            }
        }
        Ok(self)
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryLaw::Gaussian => f.write_str("gaussian"),
            EntryLaw::Rademacher => f.write_str("rademacher"),
            EntryLaw::ThreePoint { p } => write!(f, "three-point:{p}"),
        }
    }
}

impl FromStr for EntryLaw {
    type Err = Error;

    /// Accepts `gaussian`, `rademacher`, `three-point` and `three-point:p/q`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim().to_ascii_lowercase();
        let law = match text.as_str() {
            "gaussian" | "gue" | "normal" => EntryLaw::Gaussian,
            "rademacher" | "bernoulli" => EntryLaw::Rademacher,
            "three-point" | "threepoint" => Self::three_point_default(),
            other => match other.strip_prefix("three-point:") {
                Some(p) => EntryLaw::ThreePoint {
                    p: crate::series::parse_rational(p)?,
                },
                None => return Err(Error::Domain(format!("unknown entry law `{other}`"))),
            },
        };
        law.validate()
    }
}

impl From<EntryLaw> for String {
    fn from(law: EntryLaw) -> String {
        law.to_string()
    }
}

impl TryFrom<String> for EntryLaw {
    type Error = Error;

    fn try_from(text: String) -> Result<Self> {
        text.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn second_moments_match_the_variance_profile() {
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::three_point_default()] {
            assert_eq!(law.moment(&offdiag_variance(), 2), rat(1, 8));
            assert_eq!(law.moment(&diag_variance(), 2), rat(1, 4));
            assert_eq!(law.moment(&diag_variance(), 3), Rational::zero());
        }
    }

    #[test]
    fn fourth_moments() {
        assert_eq!(EntryLaw::Gaussian.v4_offdiag(), rat(3, 64));
        assert_eq!(EntryLaw::Gaussian.v4_diag(), rat(3, 16));
        assert_eq!(EntryLaw::Rademacher.v4_offdiag(), rat(1, 64));
        assert_eq!(EntryLaw::Rademacher.v4_diag(), rat(1, 16));
        assert_eq!(EntryLaw::three_point_default().v4_offdiag(), rat(1, 16));
    }

    #[test]
    fn subgaussian_bound_holds() {
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::three_point_default()] {
            let c = law.subgaussian_constant();
            for k in 1..=12u32 {
                let bound = num::pow(c.clone() * int(k as i64), k as usize);
                assert!(law.moment(&offdiag_variance(), 2 * k) <= bound, "{law} k={k}");
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for text in ["gaussian", "rademacher", "three-point:1/4", "three-point:1/6"] {
            let law: EntryLaw = text.parse().unwrap();
            assert_eq!(law.to_string(), text);
        }
        assert!("three-point:3/2".parse::<EntryLaw>().is_err());
        assert!("cauchy".parse::<EntryLaw>().is_err());
    }

    #[test]
    fn empirical_variance_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::three_point_default()] {
            let n = 200_000;
            let mean_sq: f64 = (0..n).map(|_| law.sample(&mut rng, 0.5).powi(2)).sum::<f64>() / n as f64;
            assert!((mean_sq - 0.25).abs() < 0.005, "{law}: {mean_sq}");
        }
    }
}
