//! Exact coefficient arithmetic for the generating functions used throughout
//! the crate: semicircle moments, `φ(τ)`, and the closed-form coefficients of
//! `τ^a (1-τ)^{-p}` for integer and half-integer `p`.
//!
//! Everything here is exact. Floating point only appears in
//! [`semicircle_asymptotic`].

use std::ops::Index;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

/// Exact rational number, always in lowest terms with positive denominator.
pub type Rational = BigRational;

/// Builds `num / den` as a reduced rational.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer as a rational.
pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `p/q` rendering used in reports and CSV.
pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Parses `p/q`, an integer, or a plain decimal such as `0.05` exactly.
pub fn parse_rational(text: &str) -> crate::Result<Rational> {
    let bad = || crate::Error::Domain(format!("cannot parse `{text}` as a rational"));
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
    let value = Rational::new(digits, num::pow(BigInt::from(10), frac.len()));
    Ok(if negative { -value } else { value })
}

/// Lossy conversion for asymptotic comparisons and plotting.
pub fn to_f64(value: &Rational) -> f64 {
    if let Some(v) = value.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Huge numerators/denominators: scale through the bit lengths.
    let shift = value.numer().bits() as i64 - value.denom().bits() as i64;
    let num = value.numer().abs();
    let den = value.denom().clone();
    let (num, den) = if shift > 0 {
        (num, den << (shift as usize))
    } else {
        (num << ((-shift) as usize), den)
    };
    let ratio = Rational::new(num, den).to_f64().unwrap_or(f64::NAN);
    let mag = ratio * 2f64.powi(shift as i32);
    if value.is_negative() {
        -mag
    } else {
        mag
    }
}

fn factorial_range(lo: u64, hi: u64) -> BigInt {
    // product of lo+1 ..= hi
    let mut acc = BigInt::one();
    for k in (lo + 1)..=hi {
        acc *= k;
    }
    acc
}

/// `binomial(n, k)` as an exact integer.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Finite sequence of exact coefficients; index `s` holds `[f(τ)]_s`.
///
/// The length is fixed by the caller. No operation here extends a sequence
/// past the range both inputs define.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffSeq {
    coeffs: Vec<Rational>,
}

impl CoeffSeq {
    /// Panics on an empty vector.
    pub fn new(coeffs: Vec<Rational>) -> Self {
        assert!(!coeffs.is_empty(), "coefficient sequence must be nonempty");
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![Rational::zero(); len])
    }

    /// The series `1` truncated to `len` terms.
    pub fn delta(len: usize) -> Self {
        let mut seq = Self::zeros(len);
        seq.coeffs[0] = Rational::one();
        seq
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> Rational) -> Self {
        Self::new((0..len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<Rational> {
        self.coeffs
    }

    /// Multiplication by `τ^a`, keeping the length.
    pub fn shift(&self, a: usize) -> Self {
        Self::from_fn(self.len(), |s| {
            if s >= a {
                self.coeffs[s - a].clone()
            } else {
                Rational::zero()
            }
        })
    }

    pub fn scale(&self, factor: &Rational) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    /// Termwise sum over the common range.
    pub fn add(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        Self::from_fn(len, |s| &self.coeffs[s] + &other.coeffs[s])
    }

    pub fn sub(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        Self::from_fn(len, |s| &self.coeffs[s] - &other.coeffs[s])
    }
}

impl Index<usize> for CoeffSeq {
    type Output = Rational;

    fn index(&self, s: usize) -> &Rational {
        &self.coeffs[s]
    }
}

/// Cauchy product `(a*b)_s = Σ_{j≤s} a_j b_{s-j}` over the range both
/// sequences define.
pub fn convolve(a: &CoeffSeq, b: &CoeffSeq) -> CoeffSeq {
    let len = a.len().min(b.len());
    CoeffSeq::from_fn(len, |s| {
        let mut acc = Rational::zero();
        for j in 0..=s {
            if a[j].is_zero() || b[s - j].is_zero() {
                continue;
            }
            acc += &a[j] * &b[s - j];
        }
        acc
    })
}

/// Semicircle moment `m_s = 4^{-s} (2s)! / (s! (s+1)!)`.
pub fn catalan_moment(s: u64) -> Rational {
    let catalan = binomial(2 * s, s) / BigInt::from(s + 1);
    Rational::new(catalan, BigInt::one() << (2 * s as usize))
}

/// `m_0, …, m_S` computed by the ratio `m_{s+1} = m_s (2s+1) / (2(s+2))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemicircleMoments {
    values: Vec<Rational>,
}

impl SemicircleMoments {
    pub fn new(max_s: usize) -> Self {
        let mut values = Vec::with_capacity(max_s + 1);
        let mut m = Rational::one();
        values.push(m.clone());
        for s in 0..max_s as i64 {
            m = m * rat(2 * s + 1, 2 * (s + 2));
            values.push(m.clone());
        }
        Self { values }
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, s: usize) -> &Rational {
        &self.values[s]
    }

    pub fn max_s(&self) -> usize {
        self.values.len() - 1
    }
}

/// Coefficients of `φ(τ) = Σ m_s τ^s` for `s = 0..=max_s`.
pub fn phi_coeffs(max_s: usize) -> CoeffSeq {
    CoeffSeq::new(SemicircleMoments::new(max_s).values)
}

/// `[(1-τ)^{-(r+1/2)}]_s = (2r+2s)! r! / (4^s s! (r+s)! (2r)!)`.
pub fn half_power_coeff(r: u64, s: u64) -> Rational {
    // (2r+2s)!/(2r)! and (r+s)!/r! share the factor structure; keep them apart
    // so the result stays an exact ratio of small products.
    let num = factorial_range(2 * r, 2 * r + 2 * s);
    let den = factorial_range(r, r + s) * factorial_range(0, s) * (BigInt::one() << (2 * s as usize));
    Rational::new(num, den)
}

/// `[(1-τ)^{-(k+1)}]_s = binomial(s+k, k)`.
pub fn integer_power_coeff(k: u64, s: u64) -> Rational {
    Rational::from_integer(binomial(s + k, k))
}

/// An inverse power `(1-τ)^{-p}` with `p = twice / 2 ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InversePower {
    pub twice: u32,
}

impl InversePower {
    pub fn integer(p: u32) -> Self {
        Self { twice: 2 * p }
    }

    /// `(1-τ)^{-(r+1/2)}`.
    pub fn half(r: u32) -> Self {
        Self { twice: 2 * r + 1 }
    }

    /// Coefficient of `τ^s`.
    pub fn coeff(self, s: u64) -> Rational {
        match self.twice {
            0 => {
                if s == 0 {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            t if t % 2 == 0 => integer_power_coeff(u64::from(t / 2 - 1), s),
            t => half_power_coeff(u64::from(t / 2), s),
        }
    }

    /// Coefficient of `τ^s` in `τ^shift (1-τ)^{-p}`.
    pub fn shifted_coeff(self, shift: u64, s: u64) -> Rational {
        if s < shift {
            Rational::zero()
        } else {
            self.coeff(s - shift)
        }
    }

    pub fn series(self, len: usize) -> CoeffSeq {
        CoeffSeq::from_fn(len, |s| self.coeff(s as u64))
    }
}

/// `(π s³)^{-1/2}`, the large-`s` behaviour of `m_s`.
pub fn semicircle_asymptotic(s: u64) -> f64 {
    assert!(s >= 1, "asymptotic form needs s >= 1");
    let s = s as f64;
    (std::f64::consts::PI * s * s * s).powf(-0.5)
}

/// Generalized binomial `[(1-τ)^{1/2}]_s`, computed from the falling product.
/// Used only as an independent route to `τφ(τ)/2 = 1 - √(1-τ)`.
pub fn sqrt_one_minus_coeff(s: u64) -> Rational {
    // binomial(1/2, s) (-1)^s
    let mut acc = Rational::one();
    for j in 0..s as i64 {
        // (1/2 - j)/(j+1) * (-1)
        acc = acc * rat(2 * j - 1, 2 * (j + 1));
    }
    acc
}

/// One exact identity check in an [`IdentityReport`].
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub points: usize,
    pub pass: bool,
    /// First failing `(s, r)` if any.
    pub first_failure: Option<(u64, u64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub max_s: u64,
    pub max_r: u64,
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn run_check(
    name: &str,
    grid: impl Iterator<Item = (u64, u64)>,
    mut holds: impl FnMut(u64, u64) -> bool,
) -> IdentityCheck {
    let mut points = 0;
    let mut first_failure = None;
    for (s, r) in grid {
        points += 1;
        if first_failure.is_none() && !holds(s, r) {
            first_failure = Some((s, r));
        }
    }
    IdentityCheck {
        name: name.to_string(),
        points,
        pass: first_failure.is_none(),
        first_failure,
    }
}

/// Runs every exact coefficient identity the bound machinery relies on, for
/// `s ≤ max_s` and `r ≤ max_r` (with `r ≥ 1` where the identity needs it).
pub fn identity_report(max_s: u64, max_r: u64) -> IdentityReport {
    let len = max_s as usize + 1;
    let moments = SemicircleMoments::new(max_s as usize);
    let m = |s: u64| moments.get(s as usize).clone();
    let phi = CoeffSeq::new(moments.values().to_vec());
    let phi_sq = convolve(&phi, &phi);
    let s_only = || (0..=max_s).map(|s| (s, 0));
    let s_pos = || (1..=max_s).map(|s| (s, 0));
    let grid = |r_lo: u64| (1..=max_s).flat_map(move |s| (r_lo..=max_r).map(move |r| (s, r)));

    let mut checks = Vec::new();
    checks.push(run_check("catalan_closed_form", s_only(), |s, _| catalan_moment(s) == m(s)));
    checks.push(run_check("catalan_recursion", s_pos(), |s, _| {
        phi_sq[s as usize - 1].clone() * rat(1, 4) == m(s)
    }));
    checks.push(run_check("quadratic_phi", s_only(), |s, _| {
        let rhs = if s == 0 { Rational::one() } else { phi_sq[s as usize - 1].clone() * rat(1, 4) };
        phi[s as usize] == rhs
    }));
    checks.push(run_check("sqrt_form_phi", s_pos(), |s, _| {
        m(s - 1) * rat(1, 2) == -sqrt_one_minus_coeff(s)
    }));
    checks.push(run_check(
        "half_power_binomial_form",
        (0..=max_s).flat_map(|s| (1..=max_r).map(move |r| (s, r))),
        |s, r| {
            // r * binomial(2r+2s, 2s) / binomial(r+s, s+1) * m_s
            let lhs = half_power_coeff(r, s);
            let num = BigInt::from(r) * binomial(2 * r + 2 * s, 2 * s);
            let den = binomial(r + s, s + 1);
            lhs == Rational::new(num, den) * m(s)
        },
    ));
    checks.push(run_check("three_halves_moment", s_only(), |s, _| {
        let si = s as i64;
        half_power_coeff(1, s) == m(s) * int((2 * si + 1) * (2 * si + 2) / 2)
    }));
    checks.push(run_check("five_halves_moment", s_only(), |s, _| {
        let si = s as i64;
        half_power_coeff(2, s) == m(s) * rat((2 * si + 1) * (2 * si + 2) * (2 * si + 3), 6)
    }));
    checks.push(run_check("three_halves_alt_form", s_only(), |s, _| {
        let si = s as i64;
        half_power_coeff(1, s) == m(s) * int((si + 1) * (2 * si + 1))
    }));
    // Integer powers against repeated convolution with the geometric series.
    let geometric = CoeffSeq::from_fn(len, |_| Rational::one());
    let mut power = geometric.clone();
    let mut conv_ok = true;
    let mut conv_points = 0;
    let mut conv_fail = None;
    for k in 0..=max_r {
        for s in 0..=max_s {
            conv_points += 1;
            if conv_ok && integer_power_coeff(k, s) != power[s as usize] {
                conv_ok = false;
                conv_fail = Some((s, k));
            }
        }
        power = convolve(&power, &geometric);
    }
    checks.push(IdentityCheck {
        name: "integer_power_binomial".into(),
        points: conv_points,
        pass: conv_ok,
        first_failure: conv_fail,
    });
    checks.push(run_check("ratio_2r_plus_1", grid(1), |s, r| {
        // [τ(1-τ)^{-(2r+1)}]_s (s+2r) = (2r+1) [τ(1-τ)^{-(2r+2)}]_s
        let lhs = InversePower::integer((2 * r + 1) as u32).shifted_coeff(1, s) * int((s + 2 * r) as i64);
        let rhs = InversePower::integer((2 * r + 2) as u32).shifted_coeff(1, s) * int((2 * r + 1) as i64);
        lhs == rhs
    }));
    checks.push(run_check("ratio_2r", grid(1), |s, r| {
        let lhs = InversePower::integer((2 * r) as u32).shifted_coeff(1, s)
            * int(((s + 2 * r - 1) * (s + 2 * r)) as i64);
        let rhs = InversePower::integer((2 * r + 2) as u32).shifted_coeff(1, s)
            * int((2 * r * (2 * r + 1)) as i64);
        lhs == rhs
    }));
    checks.push(run_check("ratio_half_step", grid(1), |s, r| {
        // [τ(1-τ)^{-(2r+1/2)}]_s (4r-1) = (2s+4r-3) [τ(1-τ)^{-(2r-1/2)}]_s
        let (s, r) = (s as i64, r as i64);
        let up = InversePower::half((2 * r) as u32).shifted_coeff(1, s as u64);
        let down = InversePower::half((2 * r - 1) as u32).shifted_coeff(1, s as u64);
        up * int(4 * r - 1) == down * int(2 * s + 4 * r - 3)
    }));
    checks.push(run_check("ratio_three_half_steps", grid(1), |s, r| {
        let (s, r) = (s as i64, r as i64);
        let up = InversePower::half((2 * r + 2) as u32).shifted_coeff(1, s as u64);
        let down = InversePower::half((2 * r - 1) as u32).shifted_coeff(1, s as u64);
        up * int((4 * r - 1) * (4 * r + 1) * (4 * r + 3))
            == down * int((2 * s + 4 * r - 3) * (2 * s + 4 * r - 1) * (2 * s + 4 * r + 1))
    }));
    checks.push(run_check("ratio_half_step_down", grid(1), |s, r| {
        // [τ(1-τ)^{-(2r-3/2)}]_s (2s+4r-5) = (4r-3) [τ(1-τ)^{-(2r-1/2)}]_s
        let (s, r) = (s as i64, r as i64);
        let low = InversePower::half((2 * r - 2) as u32).shifted_coeff(1, s as u64);
        let mid = InversePower::half((2 * r - 1) as u32).shifted_coeff(1, s as u64);
        low * int(2 * s + 4 * r - 5) == mid * int(4 * r - 3)
    }));
    checks.push(run_check("ratio_two_half_steps", grid(1), |s, r| {
        let (s, r) = (s as i64, r as i64);
        let low = InversePower::half((2 * r - 2) as u32).shifted_coeff(1, s as u64);
        let up = InversePower::half(2 * r as u32).shifted_coeff(1, s as u64);
        up * int((4 * r - 3) * (4 * r - 1)) == low * int((2 * s + 4 * r - 5) * (2 * s + 4 * r - 3))
    }));
    checks.push(run_check("shift_bound_quartic", grid(1), |s, r| {
        // [τ⁴(1-τ)^{-(2r+5)}]_s ≤ s³/((2r+2)(2r+3)(2r+4)) [τ(1-τ)^{-(2r+2)}]_s
        let lhs = InversePower::integer((2 * r + 5) as u32).shifted_coeff(4, s);
        let rhs = InversePower::integer((2 * r + 2) as u32).shifted_coeff(1, s)
            * rat((s * s * s) as i64, ((2 * r + 2) * (2 * r + 3) * (2 * r + 4)) as i64);
        lhs <= rhs
    }));
    checks.push(run_check("monotone_in_exponent", grid(1), |s, r| {
        // coefficients of (1-τ)^{-p} nondecreasing in p over half-integers
        let t = 2 * r as u32;
        InversePower { twice: t - 1 }.coeff(s) <= InversePower { twice: t }.coeff(s)
            && InversePower { twice: t }.coeff(s) <= InversePower { twice: t + 1 }.coeff(s)
    }));
    IdentityReport { max_s, max_r, checks }
}
