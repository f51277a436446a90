//! Majorant recursions for the GUE moment hierarchy and checks of the
//! closed-form generating-function bounds against them and against the
//! exact oracle.
//!
//! All majorants are scalar and indexed by the half-degree `s`: `𝒰_s`
//! bounds `U_{2s}(x,x)`, `𝒟^{(r)}_s` bounds `D^{(r)}_{2s}(x,y)`, and so on.
//! The recursions are read with equality, which yields the smallest sequence
//! satisfying the inequalities term by term.

use num::{BigInt, One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{catalan_moment, int, rat, to_f64, InversePower, Rational};
use crate::wick::{self, Endpoints, GueOracle, DEGREE_CAP};

/// Constants of the bound chain. See [`BoundParams::validate_majorant`] for the
/// accepted ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundParams {
    pub h: Rational,
    pub kappa: Rational,
    pub c: Rational,
    pub chi: Rational,
    pub s0: u32,
}

impl BoundParams {
    /// `h = 1/8`, `κ = 5`, `C = 1/12`, `χ = 1/128`.
    pub fn defaults(s0: u32) -> Self {
        Self { h: rat(1, 8), kappa: int(5), c: rat(1, 12), chi: rat(1, 128), s0 }
    }

    /// `12 - 3/(4h)`, the supremum of admissible `κ` for a given `h`.
    pub fn kappa_limit(h: &Rational) -> Rational {
        int(12) - rat(3, 4) / h
    }

    /// `h > 1/12`, `0 < κ < 12 - 3/(4h)`, `1/24 < C ≤ min{2h/3, 24}`,
    /// `s0 ≥ 1`. The upper end of `C` is closed so that the default pair
    /// `h = 1/8`, `C = 1/12` (where `2h/3 = C`) is admissible.
    pub fn validate_majorant(&self) -> Result<()> {
        if self.h <= rat(1, 12) {
            return Err(Error::Domain(format!("h = {} must exceed 1/12", self.h)));
        }
        if !self.kappa.is_positive() || self.kappa >= Self::kappa_limit(&self.h) {
            return Err(Error::Domain(format!(
                "kappa = {} must lie in (0, {})",
                self.kappa,
                Self::kappa_limit(&self.h)
            )));
        }
        let c_max = (rat(2, 3) * &self.h).min(int(24));
        if self.c <= rat(1, 24) || self.c > c_max {
            return Err(Error::Domain(format!("C = {} must lie in (1/24, {c_max}]", self.c)));
        }
        if self.s0 == 0 {
            return Err(Error::Domain("s0 must be positive".into()));
        }
        Ok(())
    }

    /// Majorant constraints plus `0 < χ < min{κ, 2^{-6}}`.
    pub fn validate_pqt(&self) -> Result<()> {
        self.validate_majorant()?;
        let limit = self.kappa.clone().min(rat(1, 64));
        if !self.chi.is_positive() || self.chi >= limit {
            return Err(Error::Domain(format!("chi = {} must lie in (0, {limit})", self.chi)));
        }
        Ok(())
    }

    /// `s0³ ≤ κ n²`.
    pub fn majorant_regime(&self, n: usize) -> bool {
        cube_le(self.s0, &self.kappa, n)
    }

    /// `s0³ ≤ χ n²`.
    pub fn pqt_regime(&self, n: usize) -> bool {
        cube_le(self.s0, &self.chi, n)
    }
}

fn cube_le(s: u32, factor: &Rational, n: usize) -> bool {
    let s = int(i64::from(s));
    &s * &s * &s <= factor * int((n * n) as i64)
}

fn factorial(k: u64) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

fn n_pow(n: usize, k: u32) -> Rational {
    Rational::from_integer(num::pow(BigInt::from(n), k as usize))
}

/// Scalar majorants `𝒰_s` and `𝒟^{(r)}_s` for `s ≤ s_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorantTable {
    pub n: usize,
    pub s_max: u32,
    u: Vec<Rational>,
    d: Vec<Vec<Rational>>,
}

impl MajorantTable {
    pub fn u(&self, s: u32) -> &Rational {
        &self.u[s as usize]
    }

    /// `𝒰'_s = (2s+2) 𝒰_s`.
    pub fn u_prime(&self, s: u32) -> Rational {
        int(2 * i64::from(s) + 2) * self.u(s)
    }

    /// `𝒰''_s = (2s+2)(2s+1)/2 · 𝒰_s`.
    pub fn u_second(&self, s: u32) -> Rational {
        let s = i64::from(s);
        int((s + 1) * (2 * s + 1)) * &self.u[s as usize]
    }

    /// `𝒟^{(r)}_s`, zero outside `Δ` except `𝒟^{(0)}_0 = 1`.
    pub fn d(&self, s: u32, r: u32) -> Rational {
        self.d[s as usize].get(r as usize).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn u_values(&self) -> &[Rational] {
        &self.u
    }
}

/// Modifications of the recursion used to probe its structure.
#[derive(Clone, Debug, Default)]
pub struct MajorantOptions {
    /// Drop the `𝒟^{(2)}` feed from the `𝒰` recursion.
    pub zero_d_feed: bool,
    /// Added to `𝒰_s` right after it is computed.
    pub u_bump: Option<(u32, Rational)>,
    /// Added to `𝒟^{(r)}_s` right after it is computed.
    pub d_bump: Option<(u32, u32, Rational)>,
}

fn conv(a: impl Fn(u32) -> Rational, b: impl Fn(u32) -> Rational, s: u32) -> Rational {
    (0..=s).map(|j| a(j) * b(s - j)).sum()
}

pub fn iterate_majorants(n: usize, s_max: u32) -> Result<MajorantTable> {
    iterate_majorants_with(n, s_max, &MajorantOptions::default())
}

pub fn iterate_majorants_with(n: usize, s_max: u32, options: &MajorantOptions) -> Result<MajorantTable> {
    if s_max == 0 {
        return Err(Error::Domain("s_max must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Domain("matrix size must be at least 1".into()));
    }
    let n2 = int((n * n) as i64);
    let quarter = rat(1, 4);
    let mut t = MajorantTable {
        n,
        s_max: 0,
        u: vec![Rational::one()],
        d: vec![vec![Rational::one()]],
    };
    for s in 1..=s_max {
        let p = s - 1;
        let mut u = &quarter * conv(|j| t.u(j).clone(), |j| t.u(j).clone(), p);
        if !options.zero_d_feed {
            u += &quarter * t.d(p, 2);
        }
        if let Some((bs, ref amount)) = options.u_bump {
            if bs == s {
                u += amount;
            }
        }
        let mut row = vec![Rational::zero(); 2 * s as usize + 1];
        for r in 2..=2 * s {
            let rr = i64::from(r);
            let mut v = rat(1, 2) * conv(|j| t.u(j).clone(), |j| t.d(j, r), p);
            v += &quarter * t.d(p, r + 1);
            v += &quarter * conv(|j| t.d(j, 2), |j| t.d(j, r - 1), p);
            if r >= 2 {
                v += Rational::new((rr - 1).into(), 4.into()) / &n2
                    * conv(|j| t.u_second(j), |j| t.d(j, r - 2), p);
            }
            v += int(i64::from(s) * i64::from(s) * rr) / (int(2) * &n2) * t.d(p, r - 1);
            if let Some((bs, br, ref amount)) = options.d_bump {
                if bs == s && br == r {
                    v += amount;
                }
            }
            row[r as usize] = v;
        }
        t.u.push(u);
        t.d.push(row);
        t.s_max = s;
    }
    Ok(t)
}

/// `[φ(τ) + h n^{-2} τ² (1-τ)^{-5/2}]_s`.
pub fn u_closed_form(n: usize, h: &Rational, s: u32) -> Rational {
    catalan_moment(u64::from(s)) + h / n_pow(n, 2) * InversePower::half(2).shifted_coeff(2, u64::from(s))
}

/// Closed-form bound for `𝒟^{(r)}_s`, `r ≥ 2`.
pub fn d_closed_form(n: usize, c: &Rational, s: u32, r: u32) -> Rational {
    let rp = r / 2;
    let (fact, npow, twice) = if r % 2 == 0 {
        (3 * rp, 2 * rp, 4 * rp)
    } else {
        (3 * rp + 3, 2 * rp + 2, 4 * rp + 5)
    };
    closed(n, c, fact, npow, twice, s)
}

/// Closed-form bound for the non-crossing term `P^{(r)}_{2s}`, `r ≥ 2`.
pub fn p_closed_form(n: usize, c: &Rational, s: u32, r: u32) -> Rational {
    let rp = r / 2;
    let (fact, npow, twice) = if r % 2 == 0 {
        (3 * rp + 1, 2 * rp, 4 * rp)
    } else {
        (3 * rp + 4, 2 * rp + 2, 4 * rp + 5)
    };
    closed(n, c, fact, npow, twice, s)
}

/// Closed-form bound shared by the crossing term `Q^{(r)}_{2s}` and the
/// diagonal term `T^{(r)}_{2s}`, `r ≥ 2`.
pub fn q_closed_form(n: usize, c: &Rational, s: u32, r: u32) -> Rational {
    let rp = r / 2;
    let (fact, npow, twice) = if r % 2 == 0 {
        (3 * rp, 2 * rp - 1, 4 * rp - 3)
    } else {
        (3 * rp + 3, 2 * rp + 1, 4 * rp + 2)
    };
    closed(n, c, fact, npow, twice, s)
}

fn closed(n: usize, c: &Rational, fact: u32, npow: u32, twice: u32, s: u32) -> Rational {
    c * Rational::from_integer(factorial(u64::from(fact))) / n_pow(n, npow)
        * InversePower { twice }.shifted_coeff(1, u64::from(s))
}

/// One comparison `value ≤ bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub check: String,
    pub s: u32,
    pub r: Option<u32>,
    pub value: Rational,
    pub bound: Rational,
    pub in_regime: bool,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(check: impl Into<String>, s: u32, r: Option<u32>, value: Rational, bound: Rational, in_regime: bool) -> Self {
        let pass = value <= bound;
        Self { check: check.into(), s, r, value, bound, in_regime, pass }
    }

    pub fn margin(&self) -> Rational {
        &self.bound - &self.value
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub name: String,
    pub n: usize,
    pub checks: Vec<BoundCheck>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(name: &str, n: usize) -> Self {
        Self { name: name.into(), n, ..Default::default() }
    }

    /// Every in-regime comparison holds.
    pub fn pass(&self) -> bool {
        self.checks.iter().filter(|c| c.in_regime).all(|c| c.pass)
    }

    pub fn first_violation(&self) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.in_regime && !c.pass)
    }

    pub fn count(&self, prefix: &str) -> usize {
        self.checks.iter().filter(|c| c.check.starts_with(prefix)).count()
    }
}

/// Compares the majorants with the closed forms on `s ≤ s0`, and, when
/// `oracle_s_max` is set, the exact `U` and `D` values with the
/// majorants for `s ≤ oracle_s_max`.
///
/// The `𝒟` closed form is asserted on `s + 2r + 5 ≤ s0` and on `r = 2` for
/// every `s ≤ s0`. Other points of `Δ` are recorded as out-of-regime.
pub fn check_majorant_closed_forms(n: usize, params: &BoundParams, oracle_s_max: Option<u32>) -> Result<CheckReport> {
    params.validate_majorant()?;
    if !params.majorant_regime(n) {
        return Err(Error::Regime(format!(
            "s0 = {} violates s0^3 <= kappa n^2 with kappa = {}, n = {n}",
            params.s0, params.kappa
        )));
    }
    let s_max = params.s0.max(oracle_s_max.unwrap_or(0));
    let table = iterate_majorants(n, s_max)?;
    let mut report = CheckReport::new("majorant-closed-forms", n);
    let s0 = params.s0;
    for s in 1..=s0 {
        report.checks.push(BoundCheck::new(
            "U<=closed",
            s,
            None,
            table.u(s).clone(),
            u_closed_form(n, &params.h, s),
            true,
        ));
        for r in 2..=2 * s {
            let in_regime = s + 2 * r + 5 <= s0 || r == 2;
            report.checks.push(BoundCheck::new(
                "D<=closed",
                s,
                Some(r),
                table.d(s, r),
                d_closed_form(n, &params.c, s, r),
                in_regime,
            ));
        }
    }
    if let Some(os) = oracle_s_max {
        check_degree(os)?;
        // the law is invariant under index permutations; two endpoint pairs
        // represent all of them once the full grid gets large
        let endpoints = if n <= 4 { Endpoints::All } else { Endpoints::Representative };
        let mut oracle = GueOracle::new(n)?;
        let u = wick::u_table(&mut oracle, os, endpoints)?;
        let d = wick::d_table(&mut oracle, os, 2 * os, endpoints)?;
        for (key, value) in u.iter() {
            let bound = if key.x == key.y { table.u(key.s).clone() } else { Rational::zero() };
            report.checks.push(BoundCheck::new("oracle U<=majorant", key.s, None, value.clone(), bound, true));
        }
        for s in 1..=os {
            for r in 2..=2 * s {
                let sup = d.sup(wick::Quantity::D, s, Some(r)).expect("computed");
                report.checks.push(BoundCheck::new("oracle D<=majorant", s, Some(r), sup, table.d(s, r), true));
            }
        }
    }
    Ok(report)
}

fn check_degree(s: u32) -> Result<()> {
    if 2 * s > DEGREE_CAP {
        return Err(Error::Capacity(format!("degree {} exceeds the oracle cap {DEGREE_CAP}", 2 * s)));
    }
    Ok(())
}

/// Result of comparing `sup_x U_{2s}(x)` with `(1 + h s(s²-1)/n²) m_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentBoundCheck {
    pub value: Rational,
    pub bound: Rational,
    pub pass: bool,
}

impl MomentBoundCheck {
    pub fn margin(&self) -> Rational {
        &self.bound - &self.value
    }
}

/// Requires `h > 1/16` and `s³/n² < 12 - 3/(4h)`.
pub fn check_moment_bound(oracle: &mut GueOracle, s: u32, h: &Rational) -> Result<MomentBoundCheck> {
    let n = oracle.n();
    if *h <= rat(1, 16) {
        return Err(Error::Domain(format!("h = {h} must exceed 1/16")));
    }
    if s == 0 {
        return Err(Error::Domain("s must be positive".into()));
    }
    let limit = BoundParams::kappa_limit(h);
    let si = int(i64::from(s));
    if &si * &si * &si >= limit * int((n * n) as i64) {
        return Err(Error::Regime(format!(
            "s^3/n^2 = {s}^3/{n}^2 is not below 12 - 3/(4h)"
        )));
    }
    check_degree(s)?;
    let mut value = Rational::zero();
    for x in 1..=n {
        value = value.max(oracle.u(2 * s, x, x)?);
    }
    let s3 = i64::from(s) * (i64::from(s) * i64::from(s) - 1);
    let bound = (int(1) + h * int(s3) / n_pow(n, 2)) * catalan_moment(u64::from(s));
    let pass = value <= bound;
    Ok(MomentBoundCheck { value, bound, pass })
}

/// Compares oracle suprema of `P`, `Q`, `T` with their closed forms for
/// `s ≤ oracle_s_max`. The proven regime `s + 2r + 5 ≤ s0`, `s0³ ≤ χn²`
/// is empty at oracle-sized `n`, so every point is evaluated and flagged
/// with `in_regime`.
pub fn check_pqt_oracle(n: usize, params: &BoundParams, oracle_s_max: u32) -> Result<CheckReport> {
    params.validate_pqt()?;
    if n < 2 {
        return Err(Error::Domain("off-diagonal terms need n >= 2".into()));
    }
    check_degree(oracle_s_max)?;
    let regime = params.pqt_regime(n);
    let mut oracle = GueOracle::new(n)?;
    let table = wick::pqt_table(&mut oracle, oracle_s_max, 2 * oracle_s_max, Endpoints::Representative)?;
    let mut report = CheckReport::new("pqt-oracle", n);
    if !regime {
        report.notes.push(format!(
            "s0 = {} violates s0^3 <= chi n^2 at n = {n}; no point is in the proven regime",
            params.s0
        ));
    }
    for s in 1..=oracle_s_max {
        for r in 2..=2 * s {
            let in_regime = regime && s + 2 * r + 5 <= params.s0;
            let p = table.sup(wick::Quantity::P, s, Some(r)).expect("computed");
            let q = table.sup(wick::Quantity::Q, s, Some(r)).expect("computed");
            let t = table.sup(wick::Quantity::T, s, Some(r)).expect("computed");
            report.checks.push(BoundCheck::new("P<=closed", s, Some(r), p, p_closed_form(n, &params.c, s, r), in_regime));
            report.checks.push(BoundCheck::new("Q<=closed", s, Some(r), q, q_closed_form(n, &params.c, s, r), in_regime));
            report.checks.push(BoundCheck::new("T<=closed", s, Some(r), t, q_closed_form(n, &params.c, s, r), in_regime));
        }
    }
    Ok(report)
}

/// Scalar majorants for the non-crossing, crossing and diagonal terms.
#[derive(Clone, Debug, PartialEq)]
pub struct PqtMajorants {
    pub n: usize,
    pub s_max: u32,
    p: Vec<Vec<Rational>>,
    q: Vec<Vec<Rational>>,
    t: Vec<Vec<Rational>>,
}

fn at(rows: &[Vec<Rational>], s: u32, r: u32) -> Rational {
    rows.get(s as usize)
        .and_then(|row| row.get(r as usize))
        .cloned()
        .unwrap_or_else(Rational::zero)
}

impl PqtMajorants {
    pub fn p(&self, s: u32, r: u32) -> Rational {
        at(&self.p, s, r)
    }

    pub fn q(&self, s: u32, r: u32) -> Rational {
        at(&self.q, s, r)
    }

    pub fn t(&self, s: u32, r: u32) -> Rational {
        at(&self.t, s, r)
    }
}

#[derive(Clone, Debug)]
pub struct PqtOptions {
    /// Keep the `(s/2n) 𝒫^{(r)}_{s-1}` feed in the `𝒬` recursion.
    pub p_feed_into_q: bool,
}

impl Default for PqtOptions {
    fn default() -> Self {
        Self { p_feed_into_q: true }
    }
}

/// Iterates the three recursions with `𝒰`, `𝒰'`, `𝒰''` and `𝒟` taken from
/// `base`, up to `base.s_max`.
pub fn iterate_pqt_majorants(base: &MajorantTable, options: &PqtOptions) -> PqtMajorants {
    let n = base.n;
    let nn = int(n as i64);
    let n2 = &nn * &nn;
    let quarter = rat(1, 4);
    let mut out = PqtMajorants { n, s_max: base.s_max, p: vec![vec![]], q: vec![vec![]], t: vec![vec![]] };
    let u = |j: u32| base.u(j).clone();
    let up = |j: u32| base.u_prime(j);
    let upp = |j: u32| base.u_second(j);
    let d = |j: u32, r: u32| base.d(j, r);
    let u_up = |j: u32| conv(up, u, j);
    for s in 1..=base.s_max {
        let p_ = s - 1;
        let sr = int(i64::from(s));
        let len = 2 * s as usize + 1;
        let (mut prow, mut qrow, mut trow) = (vec![Rational::zero(); len], vec![Rational::zero(); len], vec![Rational::zero(); len]);
        for r in 2..=2 * s {
            let rr = i64::from(r);
            let cross = int(rr - 2) / (int(4) * &n2);
            let big = int(rr - 2) * int((i64::from(s) + 1) * (2 * i64::from(s) + 1)) / (int(4) * &n2);
            let dm2 = |j: u32| if r >= 2 { d(j, r - 2) } else { Rational::zero() };
            let dm1 = |j: u32| d(j, r - 1);
            let udr = conv(u, |j| d(j, r), p_);
            let upp_dm2 = conv(upp, dm2, p_);
            let udm1 = conv(u, dm1, p_);

            let pr = |j: u32, rr: u32| at(&out.p, j, rr);
            let qr = |j: u32, rr: u32| at(&out.q, j, rr);
            let tr = |j: u32, rr: u32| at(&out.t, j, rr);

            let mut pv = &quarter * conv(u, |j| pr(j, r), p_);
            pv += &quarter * &udr;
            pv += &quarter * pr(p_, r + 1);
            pv += &quarter * conv(|j| pr(j, 2), dm1, p_);
            pv += &sr / (int(2) * &nn) * qr(p_, r);
            pv += &cross * &upp_dm2;
            pv += &big * pr(p_, r - 1);

            let mut qv = &quarter * conv(u, |j| qr(j, r), p_);
            qv += &quarter * qr(p_, r + 1);
            qv += &quarter * conv(|j| qr(j, 2), dm1, p_);
            qv += rat(1, 4) / &nn * conv(u_up, dm2, p_);
            qv += rat(1, 4) / &nn * conv(up, dm1, p_);
            qv += &sr / (int(2) * &nn) * &udm1;
            if options.p_feed_into_q {
                qv += &sr / (int(2) * &nn) * pr(p_, r);
            }
            qv += &big * qr(p_, r - 1);

            let mut tv = &quarter * conv(u, |j| tr(j, r), p_);
            tv += &quarter * &udr;
            tv += &quarter * tr(p_, r + 1);
            tv += &quarter * conv(|j| tr(j, 2), dm1, p_);
            tv += rat(1, 4) / &nn * conv(u_up, dm2, p_);
            tv += &sr / &nn * &udm1;
            tv += &sr / (int(2) * &nn) * tr(p_, r);
            tv += &cross * &upp_dm2;
            tv += &big * tr(p_, r - 1);

            prow[r as usize] = pv;
            qrow[r as usize] = qv;
            trow[r as usize] = tv;
        }
        out.p.push(prow);
        out.q.push(qrow);
        out.t.push(trow);
    }
    out
}

/// Closed forms against the iterated `𝒫`, `𝒬`, `𝒯` majorants on `s ≤ s0`.
pub fn check_pqt_closed_forms(pqt: &PqtMajorants, params: &BoundParams) -> Result<CheckReport> {
    params.validate_pqt()?;
    let n = pqt.n;
    let regime = params.pqt_regime(n);
    let mut report = CheckReport::new("pqt_majorants", n);
    for s in 1..=params.s0.min(pqt.s_max) {
        for r in 2..=2 * s {
            let in_regime = regime && s + 2 * r + 5 <= params.s0;
            let c = &params.c;
            report.checks.push(BoundCheck::new("P-majorant<=closed", s, Some(r), pqt.p(s, r), p_closed_form(n, c, s, r), in_regime));
            report.checks.push(BoundCheck::new("Q-majorant<=closed", s, Some(r), pqt.q(s, r), q_closed_form(n, c, s, r), in_regime));
            report.checks.push(BoundCheck::new("T-majorant<=closed", s, Some(r), pqt.t(s, r), q_closed_form(n, c, s, r), in_regime));
        }
    }
    Ok(report)
}

/// Exact `P`, `Q`, `T` against the iterated majorants for `s ≤ oracle_s_max`.
pub fn check_pqt_domination(n: usize, oracle_s_max: u32) -> Result<CheckReport> {
    if n < 2 {
        return Err(Error::Domain("off-diagonal terms need n >= 2".into()));
    }
    check_degree(oracle_s_max)?;
    let base = iterate_majorants(n, oracle_s_max)?;
    let pqt = iterate_pqt_majorants(&base, &PqtOptions::default());
    let mut oracle = GueOracle::new(n)?;
    let table = wick::pqt_table(&mut oracle, oracle_s_max, 2 * oracle_s_max, Endpoints::Representative)?;
    let mut report = CheckReport::new("pqt_domination", n);
    for s in 1..=oracle_s_max {
        for r in 2..=2 * s {
            let sup = |q| table.sup(q, s, Some(r)).expect("computed");
            report.checks.push(BoundCheck::new("oracle P<=majorant", s, Some(r), sup(wick::Quantity::P), pqt.p(s, r), true));
            report.checks.push(BoundCheck::new("oracle Q<=majorant", s, Some(r), sup(wick::Quantity::Q), pqt.q(s, r), true));
            report.checks.push(BoundCheck::new("oracle T<=majorant", s, Some(r), sup(wick::Quantity::T), pqt.t(s, r), true));
        }
    }
    Ok(report)
}

/// `16 (1+hχ')(1+hχ'') / (π √(χ'χ''))`, the limiting bound for `R^{(1)}`.
pub fn r1_limit_bound(h: f64, chi1: f64, chi2: f64) -> f64 {
    16.0 * (1.0 + h * chi1) * (1.0 + h * chi2) / (std::f64::consts::PI * (chi1 * chi2).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RSource {
    Oracle,
    MonteCarlo,
}

/// `R^{(1)}, …, R^{(4)}` for one `(n, s', s'')`, exact or estimated.
#[derive(Clone, Debug)]
pub struct RDecomposition {
    pub n: usize,
    pub s1: u32,
    pub s2: u32,
    pub source: RSource,
    pub terms: [f64; 4],
    /// Standard errors of the estimated terms.
    pub std_errors: Option<[f64; 4]>,
    pub exact_terms: Option<[Rational; 4]>,
    /// `Σ_{u,v} Σ_{x,y} E{A^{2s'-u}_{xx} A^u_{yy}} E{A^{2s''-v}_{xx} A^v_{yy}}`.
    pub direct: Option<Rational>,
    pub recomposes: Option<bool>,
    pub v4: Rational,
    /// `(V₄/n²) Σ_k R^{(k)}`.
    pub r_n: f64,
    pub s4: Option<f64>,
    pub s4_std_error: Option<f64>,
    pub chi: (f64, f64),
    pub r1_bound: f64,
    pub warnings: Vec<String>,
}

impl RDecomposition {
    /// Wraps Monte Carlo estimates of the four terms.
    #[allow(clippy::too_many_arguments)]
    pub fn from_estimates(
        n: usize,
        s1: u32,
        s2: u32,
        terms: [f64; 4],
        std_errors: [f64; 4],
        v4: Rational,
        h: f64,
        chi: Option<(f64, f64)>,
    ) -> Self {
        let mut out = Self::skeleton(n, s1, s2, RSource::MonteCarlo, terms, v4, h, chi);
        out.std_errors = Some(std_errors);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn skeleton(
        n: usize,
        s1: u32,
        s2: u32,
        source: RSource,
        terms: [f64; 4],
        v4: Rational,
        h: f64,
        chi: Option<(f64, f64)>,
    ) -> Self {
        let eff = |s: u32| f64::from(s).powi(3) / (n * n) as f64;
        let chi = chi.unwrap_or((eff(s1), eff(s2)));
        let mut warnings = Vec::new();
        for (s, c) in [(s1, chi.0), (s2, chi.1)] {
            if c > 1.0 / 64.0 {
                warnings.push(format!("chi = {c} for s = {s} lies above 2^-6"));
            }
        }
        let r_n = to_f64(&v4) / (n * n) as f64 * terms.iter().sum::<f64>();
        Self {
            n,
            s1,
            s2,
            source,
            terms,
            std_errors: None,
            exact_terms: None,
            direct: None,
            recomposes: None,
            v4,
            r_n,
            s4: None,
            s4_std_error: None,
            chi,
            r1_bound: r1_limit_bound(h, chi.0, chi.1),
            warnings,
        }
    }
}

/// Exact four-way split from the oracle, with the direct double sum and
/// `S^{(4)}`. `v4` is the fourth moment entering the `V₄/n²` prefactor.
pub fn assemble_r_oracle(n: usize, s1: u32, s2: u32, v4: Rational, h: f64) -> Result<RDecomposition> {
    if s1 == 0 || s2 == 0 {
        return Err(Error::Domain("s', s'' must be positive".into()));
    }
    check_degree(s1.max(s2))?;
    let mut o = GueOracle::new(n)?;
    type Grid = Vec<Vec<Rational>>;
    // per (x,y): Σ U U, Σ E{°°} on the diagonals, Σ E{°°} on the (x,y) entry
    let mut sums = |s: u32| -> Result<(Grid, Grid, Grid, Grid)> {
        let zero = vec![vec![Rational::zero(); n + 1]; n + 1];
        let (mut c, mut g, mut joint, mut off) = (zero.clone(), zero.clone(), zero.clone(), zero);
        for x in 1..=n {
            for y in 1..=n {
                for a in 0..=2 * s {
                    let b = 2 * s - a;
                    c[x][y] += o.u(a, x, x)? * o.u(b, y, y)?;
                    g[x][y] += o.expectation(&[
                        wick::Factor::centered_entry(a, x, x),
                        wick::Factor::centered_entry(b, y, y),
                    ])?;
                    joint[x][y] += o.expectation(&[wick::Factor::entry(a, x, x), wick::Factor::entry(b, y, y)])?;
                    off[x][y] += o.expectation(&[
                        wick::Factor::centered_entry(a, x, y),
                        wick::Factor::centered_entry(b, x, y),
                    ])?;
                }
            }
        }
        Ok((c, g, joint, off))
    };
    let (c1, g1, j1, o1) = sums(s1)?;
    let (c2, g2, j2, o2) = sums(s2)?;
    let mut exact: [Rational; 4] = Default::default();
    let mut direct = Rational::zero();
    let mut s4 = Rational::zero();
    for x in 1..=n {
        for y in 1..=n {
            exact[0] += &c1[x][y] * &c2[x][y];
            exact[1] += &c1[x][y] * &g2[x][y];
            exact[2] += &g1[x][y] * &c2[x][y];
            exact[3] += &g1[x][y] * &g2[x][y];
            direct += &j1[x][y] * &j2[x][y];
            s4 += &o1[x][y] * &o2[x][y];
        }
    }
    let terms = [to_f64(&exact[0]), to_f64(&exact[1]), to_f64(&exact[2]), to_f64(&exact[3])];
    let mut out = RDecomposition::skeleton(n, s1, s2, RSource::Oracle, terms, v4, h, None);
    let total: Rational = exact.iter().cloned().sum();
    out.recomposes = Some(total == direct);
    out.direct = Some(direct);
    out.exact_terms = Some(exact);
    out.s4 = Some(to_f64(&s4));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::SemicircleMoments;

    #[test]
    fn first_values() {
        for n in [1, 2, 3, 10] {
            let t = iterate_majorants(n, 6).unwrap();
            assert_eq!(*t.u(0), int(1));
            assert_eq!(*t.u(1), rat(1, 4));
            assert_eq!(t.d(1, 2), rat(1, 4 * (n * n) as i64));
            assert_eq!(t.d(0, 0), int(1));
            assert!(t.d(2, 1).is_zero() && t.d(2, 5).is_zero());
            assert_eq!(t.u_prime(1), rat(1, 1));
            assert_eq!(t.u_second(1), rat(3, 2));
        }
    }

    #[test]
    fn zero_feed_gives_catalan() {
        let t = iterate_majorants_with(7, 30, &MajorantOptions { zero_d_feed: true, ..Default::default() }).unwrap();
        let m = SemicircleMoments::new(30);
        for s in 0..=30u32 {
            assert_eq!(t.u(s), m.get(s as usize));
        }
    }

    #[test]
    fn rejects_empty_range() {
        assert!(matches!(iterate_majorants(3, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn parameter_validation() {
        let p = BoundParams::defaults(4);
        p.validate_majorant().unwrap();
        p.validate_pqt().unwrap();
        assert!(BoundParams { h: rat(1, 16), ..p.clone() }.validate_majorant().is_err());
        assert!(BoundParams { kappa: int(6), ..p.clone() }.validate_majorant().is_err());
        assert!(BoundParams { c: rat(1, 24), ..p.clone() }.validate_majorant().is_err());
        assert!(BoundParams { c: rat(1, 11), ..p.clone() }.validate_majorant().is_err());
        assert!(BoundParams { chi: rat(1, 64), ..p.clone() }.validate_pqt().is_err());
        assert!(p.majorant_regime(10));
        assert!(!p.pqt_regime(10));
    }

    #[test]
    fn closed_form_spot_values() {
        let c = rat(1, 12);
        // 𝒟^{(2)}: C 3! n^{-2} [τ(1-τ)^{-2}]_s = 6C s / n²
        assert_eq!(d_closed_form(10, &c, 3, 2), c.clone() * int(18) / int(100));
        // Q^{(2)}: C 3! n^{-1} [τ(1-τ)^{-1/2}]_1 = 6C/n
        assert_eq!(q_closed_form(5, &c, 1, 2), c.clone() * int(6) / int(5));
        // P^{(2)}: 24 C s / n²
        assert_eq!(p_closed_form(4, &c, 3, 2), c.clone() * int(72) / int(16));
        assert_eq!(u_closed_form(10, &rat(1, 8), 1), rat(1, 4));
        assert_eq!(u_closed_form(10, &rat(1, 8), 2), rat(1, 8) + rat(1, 800));
    }

    #[test]
    fn pqt_initial_values() {
        let base = iterate_majorants(3, 4).unwrap();
        let pqt = iterate_pqt_majorants(&base, &PqtOptions::default());
        assert!(pqt.p(1, 2).is_zero());
        assert_eq!(pqt.q(1, 2), rat(1, 6));
        assert_eq!(pqt.t(1, 2), rat(1, 6));
    }

    #[test]
    fn r1_bound_value() {
        let b = r1_limit_bound(0.125, 0.1, 0.1);
        assert!((b - 52.21).abs() < 0.005, "{b}");
    }

    #[test]
    fn majorant_checks_pass_at_small_n() {
        for n in 2..=3 {
            let report = check_majorant_closed_forms(n, &BoundParams::defaults(2), Some(4)).unwrap();
            assert!(report.pass(), "{:?}", report.first_violation());
            assert!(report.count("oracle D") > 0);
        }
        let n10 = check_majorant_closed_forms(10, &BoundParams::defaults(4), None).unwrap();
        assert!(n10.pass());
        assert!(matches!(check_majorant_closed_forms(2, &BoundParams::defaults(3), None), Err(Error::Regime(_))));
    }

    #[test]
    fn majorants_are_monotone_in_their_inputs() {
        let n = 5;
        let base = iterate_majorants(n, 8).unwrap();
        let bump = rat(1, 1000);
        for options in [
            MajorantOptions { u_bump: Some((2, bump.clone())), ..Default::default() },
            MajorantOptions { d_bump: Some((2, 3, bump.clone())), ..Default::default() },
        ] {
            let bumped = iterate_majorants_with(n, 8, &options).unwrap();
            for s in 0..=8 {
                assert!(bumped.u(s) >= base.u(s));
                for r in 0..=2 * s {
                    assert!(bumped.d(s, r) >= base.d(s, r));
                }
            }
            assert!(bumped.u(8) > base.u(8));
        }
    }

    #[test]
    fn moment_bound_examples() {
        let mut o = GueOracle::new(4).unwrap();
        let one = check_moment_bound(&mut o, 1, &rat(1, 8)).unwrap();
        assert_eq!(one.value, rat(1, 4));
        assert!(one.margin().is_zero());
        let two = check_moment_bound(&mut o, 2, &rat(1, 8)).unwrap();
        assert_eq!(two.value, rat(1, 8) * (int(1) + rat(1, 32)));
        assert_eq!(two.bound, rat(1, 8) * (int(1) + rat(3, 64)));
        assert!(two.pass);
        assert!(!check_moment_bound(&mut o, 2, &rat(1, 13)).unwrap().pass);
        assert!(matches!(check_moment_bound(&mut o, 2, &rat(1, 16)), Err(Error::Domain(_))));
        assert!(matches!(check_moment_bound(&mut o, 5, &rat(1, 8)), Err(Error::Regime(_))));
    }

    #[test]
    fn pqt_oracle_degree_two_points() {
        for n in [2, 3, 10] {
            let report = check_pqt_oracle(n, &BoundParams::defaults(1), 1).unwrap();
            assert!(report.checks.iter().all(|c| c.pass), "n={n}");
        }
    }

    #[test]
    fn crossing_bound_fails_at_degree_four_inside_the_regime() {
        // n Q^{(2)}_4 = 5/16 while the closed form gives 6C/(2n) = 1/(4n)
        let params = BoundParams { s0: 11, ..BoundParams::defaults(11) };
        let report = check_pqt_oracle(10_000, &params, 2).unwrap();
        let q = report
            .checks
            .iter()
            .find(|c| c.check == "Q<=closed" && c.s == 2 && c.r == Some(2))
            .unwrap();
        assert!(q.in_regime);
        assert!(!q.pass);
        assert_eq!(q.value, rat(5, 16 * 10_000));
    }

    #[test]
    fn pqt_majorants_dominate_the_oracle() {
        for n in [2, 3] {
            let report = check_pqt_domination(n, 3).unwrap();
            assert!(report.pass(), "{:?}", report.first_violation());
        }
    }

    #[test]
    fn removing_the_p_feed_lowers_q() {
        let base = iterate_majorants(3, 6).unwrap();
        let full = iterate_pqt_majorants(&base, &PqtOptions::default());
        let cut = iterate_pqt_majorants(&base, &PqtOptions { p_feed_into_q: false });
        assert!((1..=6).all(|s| (2..=2 * s).all(|r| cut.q(s, r) <= full.q(s, r))));
        assert!(cut.q(4, 2) < full.q(4, 2));
    }

    #[test]
    fn r_split_recomposes() {
        for n in 1..=3 {
            for s1 in 1..=2 {
                for s2 in 1..=2 {
                    let r = assemble_r_oracle(n, s1, s2, rat(3, 64), 0.125).unwrap();
                    assert_eq!(r.recomposes, Some(true));
                }
            }
        }
        let single = assemble_r_oracle(1, 1, 1, rat(3, 64), 0.125).unwrap();
        assert_eq!(single.direct, Some(rat(9, 16)));
    }
}
