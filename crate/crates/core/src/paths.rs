//! Path-pair representation of the trace covariance at tiny sizes.
//!
//! A pair of closed walks `(I¹, I²)` of lengths `2s'` and `2s''` stands for
//! one term of `E{Tr W^{2s'} Tr W^{2s''}}`. Its weight is the expectation of
//! the product of the entries `w_{ij}/√n` met along both walks. The entries
//! are grouped by undirected edge: off-diagonal edges `{a<b}` contribute
//! `E[w^k w̄^l]` with `w = X + iY`, diagonal edges `E X^c`.

use std::collections::BTreeMap;
use std::fmt;

use num::{BigInt, One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{diag_variance, offdiag_variance, EntryLaw};
use crate::series::{binomial, int, Rational};

/// Largest `n` the brute-force enumerator accepts.
pub const MAX_N: usize = 3;
/// Largest `s' + s''` the brute-force enumerator accepts.
pub const MAX_HALF_LENGTH: u32 = 4;

/// Closed walk `i_0, …, i_{L-1}`, returning to `i_0`. Vertices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClosedPath {
    vertices: Vec<usize>,
}

impl ClosedPath {
    pub fn new(vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::Domain("a closed path needs at least one vertex".into()));
        }
        if vertices.contains(&0) {
            return Err(Error::Domain("path vertices are 1-based".into()));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    /// Number of steps, equal to the number of vertices.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Step `t` goes from `i_t` to `i_{t+1}`, indices taken cyclically.
    pub fn step(&self, t: usize) -> (usize, usize) {
        let l = self.vertices.len();
        (self.vertices[t % l], self.vertices[(t + 1) % l])
    }

    pub fn steps(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |t| self.step(t))
    }

    /// Every undirected edge is passed an even number of times.
    pub fn is_even(&self) -> bool {
        let mut counts: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for (a, b) in self.steps() {
            *counts.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        counts.values().all(|c| c % 2 == 0)
    }
}

impl fmt::Display for ClosedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathPair {
    pub first: ClosedPath,
    pub second: ClosedPath,
}

/// How often one undirected edge `{a ≤ b}` is traversed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeCount {
    /// Traversals `a → b`, i.e. factors `w_{ab}`.
    pub forward: u32,
    /// Traversals `b → a`, i.e. factors `w_{ba} = w̄_{ab}`.
    pub backward: u32,
    pub in_first: u32,
    pub in_second: u32,
}

impl EdgeCount {
    pub fn multiplicity(&self) -> u32 {
        self.in_first + self.in_second
    }

    pub fn is_common(&self) -> bool {
        self.in_first > 0 && self.in_second > 0
    }
}

fn tally(counts: &mut BTreeMap<(usize, usize), EdgeCount>, path: &ClosedPath, first: bool) {
    for (a, b) in path.steps() {
        let e = counts.entry((a.min(b), a.max(b))).or_default();
        if a <= b {
            e.forward += 1;
        } else {
            e.backward += 1;
        }
        if first {
            e.in_first += 1;
        } else {
            e.in_second += 1;
        }
    }
}

impl PathPair {
    pub fn new(first: ClosedPath, second: ClosedPath) -> Self {
        Self { first, second }
    }

    pub fn edge_counts(&self) -> BTreeMap<(usize, usize), EdgeCount> {
        let mut counts = BTreeMap::new();
        tally(&mut counts, &self.first, true);
        tally(&mut counts, &self.second, false);
        counts
    }

    /// Minimal `(t', t'')` such that step `t'` of the first walk is passed
    /// by the second walk at `t''`, in either orientation.
    pub fn first_common_instants(&self) -> Option<(usize, usize)> {
        for t1 in 0..self.first.len() {
            let (a, b) = self.first.step(t1);
            for t2 in 0..self.second.len() {
                let (c, d) = self.second.step(t2);
                if (a == c && b == d) || (a == d && b == c) {
                    return Some((t1, t2));
                }
            }
        }
        None
    }
}

impl fmt::Display for PathPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.first, self.second)
    }
}

/// `E[w^k w̄^l]` for `w = X + iY` with `X`, `Y` independent copies of the
/// law at the off-diagonal variance. The result is real.
fn offdiag_moment(law: &EntryLaw, k: u32, l: u32) -> Rational {
    let v = offdiag_variance();
    let mut acc = Rational::zero();
    for a in 0..=k {
        for b in 0..=l {
            // X^{a+b} (iY)^{k-a} (-iY)^{l-b}
            let x_pow = a + b;
            let y_pow = (k - a) + (l - b);
            if x_pow % 2 == 1 || y_pow % 2 == 1 {
                continue;
            }
            let negative = (y_pow / 2 + (l - b)) % 2 == 1;
            let coeff = binomial(u64::from(k), u64::from(a)) * binomial(u64::from(l), u64::from(b));
            let term = Rational::from_integer(coeff) * law.moment(&v, x_pow) * law.moment(&v, y_pow);
            if negative {
                acc -= term;
            } else {
                acc += term;
            }
        }
    }
    acc
}

fn edges_weight(counts: impl Iterator<Item = ((usize, usize), EdgeCount)>, law: &EntryLaw) -> Rational {
    let mut w = Rational::one();
    for ((a, b), c) in counts {
        let factor = if a == b {
            law.moment(&diag_variance(), c.forward + c.backward)
        } else {
            offdiag_moment(law, c.forward, c.backward)
        };
        if factor.is_zero() {
            return factor;
        }
        w *= factor;
    }
    w
}

fn scale(total_steps: usize, n: usize) -> Rational {
    // total_steps is even whenever the weight is nonzero
    Rational::new(BigInt::one(), num::pow(BigInt::from(n), total_steps / 2))
}

/// Weight of a single closed walk, `E Π w_{i_t i_{t+1}} / √n`.
pub fn path_weight(path: &ClosedPath, law: &EntryLaw, n: usize) -> Rational {
    if path.len() % 2 == 1 {
        return Rational::zero();
    }
    let mut counts = BTreeMap::new();
    tally(&mut counts, path, true);
    edges_weight(counts.into_iter(), law) * scale(path.len(), n)
}

/// Weight `Π_n` of a pair: expectation of the product over both walks.
pub fn weight(pair: &PathPair, law: &EntryLaw, n: usize) -> Rational {
    let total = pair.first.len() + pair.second.len();
    if total % 2 == 1 {
        return Rational::zero();
    }
    edges_weight(pair.edge_counts().into_iter(), law) * scale(total, n)
}

/// Covariance contribution `Π_n(pair) - Π_n(I¹) Π_n(I²)`.
pub fn covariance_contribution(pair: &PathPair, law: &EntryLaw, n: usize) -> Rational {
    weight(pair, law, n) - path_weight(&pair.first, law, n) * path_weight(&pair.second, law, n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathClass {
    /// The walks share no undirected edge.
    NoCommonStep,
    /// Some common edge has total multiplicity 2.
    SimplyCorrelated,
    /// Not simply correlated, exactly one common edge, of multiplicity ≥ 4.
    MultiplicityFourPlus,
    /// At least two common edges, none of multiplicity 2.
    Other,
}

impl PathClass {
    pub const ALL: [PathClass; 4] = [
        PathClass::NoCommonStep,
        PathClass::SimplyCorrelated,
        PathClass::MultiplicityFourPlus,
        PathClass::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PathClass::NoCommonStep => "no-common-step",
            PathClass::SimplyCorrelated => "simply-correlated",
            PathClass::MultiplicityFourPlus => "multiplicity-4+",
            PathClass::Other => "other",
        }
    }
}

impl fmt::Display for PathClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub class: PathClass,
    /// First common instants `(t', t'')`.
    pub first_common: Option<(usize, usize)>,
    /// Exactly one common edge, of multiplicity exactly 4.
    pub single_quartic: bool,
}

pub fn classify(pair: &PathPair) -> Classification {
    let counts = pair.edge_counts();
    let common: Vec<&EdgeCount> = counts.values().filter(|c| c.is_common()).collect();
    let class = if common.is_empty() {
        PathClass::NoCommonStep
    } else if common.iter().any(|c| c.multiplicity() == 2) {
        PathClass::SimplyCorrelated
    } else if common.len() == 1 {
        PathClass::MultiplicityFourPlus
    } else {
        PathClass::Other
    };
    let single_quartic = common.len() == 1 && common[0].multiplicity() == 4;
    let first_common = if class == PathClass::SimplyCorrelated {
        first_simple_instants(pair, &counts)
    } else {
        pair.first_common_instants()
    };
    Classification { class, first_common, single_quartic }
}

fn undirected((a, b): (usize, usize)) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Minimal `(t', t'')` over the common steps of multiplicity 2.
fn first_simple_instants(pair: &PathPair, counts: &BTreeMap<(usize, usize), EdgeCount>) -> Option<(usize, usize)> {
    let t1 = (0..pair.first.len()).find(|&t| {
        let c = counts[&undirected(pair.first.step(t))];
        c.is_common() && c.multiplicity() == 2
    })?;
    let edge = undirected(pair.first.step(t1));
    let t2 = (0..pair.second.len()).find(|&t| undirected(pair.second.step(t)) == edge)?;
    Some((t1, t2))
}

/// Glues a simply correlated pair into one closed walk of length
/// `2s' + 2s'' - 2` by removing the first multiplicity-2 common step and its
/// inverse partner: walk the first path up to `i_{t'}`, go around the second
/// path from `i_{t''+1} = i_{t'}` to `i_{t''} = i_{t'+1}`, then finish the
/// first path.
///
/// The chosen step must be passed by the second walk in the inverse
/// orientation; a loop counts as inverse.
pub fn reduce_two_steps(pair: &PathPair) -> Result<ClosedPath> {
    let counts = pair.edge_counts();
    let (l1, l2) = (pair.first.len(), pair.second.len());
    let Some((t1, t2)) = first_simple_instants(pair, &counts) else {
        return Err(Error::Domain("pair is not simply correlated".into()));
    };
    let (a, b) = pair.first.step(t1);
    if pair.second.step(t2) != (b, a) {
        return Err(Error::Domain("the multiplicity-2 common step is passed in the direct orientation".into()));
    }
    let v1 = pair.first.vertices();
    let v2 = pair.second.vertices();
    let mut out: Vec<usize> = v1[..=t1].to_vec();
    // i2_{t''+2}, …, i2_{t''} cyclically; i2_{t''+1} equals i1_{t'} already listed
    for k in 2..=l2 {
        out.push(v2[(t2 + k) % l2]);
    }
    // i1_{t'+2}, …, i1_{L1-1}; closing back to i1_0 is implicit
    for &v in &v1[(t1 + 2).min(l1)..] {
        out.push(v);
    }
    if t1 + 1 == l1 {
        // the removed step closed the first walk, so the detour through
        // the second walk already ends at i1_0
        out.pop();
    }
    ClosedPath::new(out)
}

fn check_guard(n: usize, s1: u32, s2: u32) -> Result<()> {
    if n == 0 || s1 == 0 || s2 == 0 {
        return Err(Error::Domain("n, s', s'' must be positive".into()));
    }
    if n > MAX_N || s1 + s2 > MAX_HALF_LENGTH {
        return Err(Error::Capacity(format!(
            "enumeration needs n <= {MAX_N} and s'+s'' <= {MAX_HALF_LENGTH}, got n = {n}, s'+s'' = {}",
            s1 + s2
        )));
    }
    Ok(())
}

/// All closed walks of length `len` on `1..=n`, in lexicographic order.
pub fn all_paths(n: usize, len: usize) -> Vec<ClosedPath> {
    let total = n.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let mut v = vec![0; len];
            for slot in v.iter_mut().rev() {
                *slot = code % n + 1;
                code /= n;
            }
            ClosedPath { vertices: v }
        })
        .collect()
}

/// Exact per-class sums of the covariance contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSums {
    pub n: usize,
    pub s1: u32,
    pub s2: u32,
    pub law: EntryLaw,
    pub by_class: BTreeMap<PathClass, Rational>,
    pub pair_counts: BTreeMap<PathClass, u64>,
    /// Sub-sum over pairs with exactly one common edge, of multiplicity 4.
    pub single_quartic: Rational,
    /// Sub-sum over pairs whose edges all have multiplicity at most 2.
    pub second_order: Rational,
    pub total: Rational,
}

#[derive(Default)]
struct Accum {
    by_class: BTreeMap<PathClass, Rational>,
    counts: BTreeMap<PathClass, u64>,
    single_quartic: Rational,
    second_order: Rational,
    joint: Rational,
}

impl Accum {
    fn merge(mut self, other: Accum) -> Accum {
        for (k, v) in other.by_class {
            *self.by_class.entry(k).or_insert_with(Rational::zero) += v;
        }
        for (k, v) in other.counts {
            *self.counts.entry(k).or_default() += v;
        }
        self.single_quartic += other.single_quartic;
        self.second_order += other.second_order;
        self.joint += other.joint;
        self
    }
}

fn enumerate(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> (Accum, Rational, Rational) {
    let firsts = all_paths(n, 2 * s1 as usize);
    let seconds = all_paths(n, 2 * s2 as usize);
    let w1: Vec<Rational> = firsts.iter().map(|p| path_weight(p, law, n)).collect();
    let w2: Vec<Rational> = seconds.iter().map(|p| path_weight(p, law, n)).collect();
    let acc = firsts
        .par_iter()
        .enumerate()
        .map(|(i, first)| {
            let mut acc = Accum::default();
            for (j, second) in seconds.iter().enumerate() {
                let pair = PathPair { first: first.clone(), second: second.clone() };
                let joint = weight(&pair, law, n);
                let contribution = &joint - &w1[i] * &w2[j];
                acc.joint += &joint;
                let class = classify(&pair);
                *acc.counts.entry(class.class).or_default() += 1;
                if contribution.is_zero() {
                    continue;
                }
                if class.single_quartic {
                    acc.single_quartic += &contribution;
                }
                if pair.edge_counts().values().all(|c| c.multiplicity() <= 2) {
                    acc.second_order += &contribution;
                }
                *acc.by_class.entry(class.class).or_insert_with(Rational::zero) += contribution;
            }
            acc
        })
        .reduce(Accum::default, Accum::merge);
    let m1: Rational = w1.into_iter().sum();
    let m2: Rational = w2.into_iter().sum();
    (acc, m1, m2)
}

pub fn sum_by_class(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> Result<ClassSums> {
    check_guard(n, s1, s2)?;
    let (acc, _, _) = enumerate(n, s1, s2, law);
    let mut by_class = acc.by_class;
    for class in PathClass::ALL {
        by_class.entry(class).or_insert_with(Rational::zero);
    }
    let total = by_class.values().cloned().sum();
    Ok(ClassSums {
        n,
        s1,
        s2,
        law: law.clone(),
        by_class,
        pair_counts: acc.counts,
        single_quartic: acc.single_quartic,
        second_order: acc.second_order,
        total,
    })
}

/// `K_n(s', s'')` by two routes over the same enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceCheck {
    /// `Σ_pairs Π_n - (Σ Π_n(I¹)) (Σ Π_n(I²))`.
    pub full_expansion: Rational,
    /// `Σ` over pairs sharing a step of the covariance contributions.
    pub restricted: Rational,
    pub agree: bool,
}

pub fn covariance_bruteforce(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> Result<CovarianceCheck> {
    check_guard(n, s1, s2)?;
    let (acc, m1, m2) = enumerate(n, s1, s2, law);
    let full_expansion = acc.joint - m1 * m2;
    let restricted: Rational = acc
        .by_class
        .iter()
        .filter(|(k, _)| **k != PathClass::NoCommonStep)
        .map(|(_, v)| v.clone())
        .sum();
    let agree = full_expansion == restricted;
    Ok(CovarianceCheck { full_expansion, restricted, agree })
}

/// Sparse polynomial in the real entry variables with Gaussian-rational
/// coefficients `(re, im)`.
type Poly = BTreeMap<Vec<u8>, (Rational, Rational)>;

fn poly_add(into: &mut Poly, key: Vec<u8>, re: Rational, im: Rational) {
    let e = into.entry(key).or_insert_with(|| (Rational::zero(), Rational::zero()));
    e.0 += re;
    e.1 += im;
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ka, (ra, ia)) in a {
        for (kb, (rb, ib)) in b {
            let key: Vec<u8> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            poly_add(&mut out, key, ra * rb - ia * ib, ra * ib + ia * rb);
        }
    }
    out.retain(|_, (r, i)| !(r.is_zero() && i.is_zero()));
    out
}

/// `K_n(s', s'') = E{Tr W^{2s'} Tr W^{2s''}} - E Tr W^{2s'} E Tr W^{2s''}`
/// by expanding both traces as polynomials in the independent real parts
/// and integrating monomial by monomial. Independent of the path machinery.
pub fn covariance_direct(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> Result<Rational> {
    check_guard(n, s1, s2)?;
    // variables: X_ij for i <= j, then Y_ij for i < j
    let mut var_x = vec![vec![0usize; n]; n];
    let mut var_y = vec![vec![usize::MAX; n]; n];
    let mut variances = Vec::new();
    for i in 0..n {
        for j in i..n {
            var_x[i][j] = variances.len();
            variances.push(if i == j { diag_variance() } else { offdiag_variance() });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            var_y[i][j] = variances.len();
            variances.push(offdiag_variance());
        }
    }
    let nv = variances.len();
    let mono = |v: usize| {
        let mut k = vec![0u8; nv];
        k[v] = 1;
        k
    };
    let one = || -> Poly {
        let mut p = Poly::new();
        p.insert(vec![0u8; nv], (Rational::one(), Rational::zero()));
        p
    };
    let mut entry = vec![vec![Poly::new(); n]; n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (i.min(j), i.max(j));
            let mut p = Poly::new();
            p.insert(mono(var_x[a][b]), (Rational::one(), Rational::zero()));
            if a != b {
                let sign = if i < j { int(1) } else { int(-1) };
                p.insert(mono(var_y[a][b]), (Rational::zero(), sign));
            }
            entry[i][j] = p;
        }
    }
    let trace_power = |power: u32| -> Poly {
        let mut m: Vec<Vec<Poly>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { one() } else { Poly::new() }).collect())
            .collect();
        for _ in 0..power {
            let mut next = vec![vec![Poly::new(); n]; n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Poly::new();
                    for k in 0..n {
                        for (key, (r, im)) in poly_mul(&m[i][k], &entry[k][j]) {
                            poly_add(&mut acc, key, r, im);
                        }
                    }
                    acc.retain(|_, (r, i)| !(r.is_zero() && i.is_zero()));
                    next[i][j] = acc;
                }
            }
            m = next;
        }
        let mut tr = Poly::new();
        for (i, row) in m.into_iter().enumerate() {
            for (key, (r, im)) in row.into_iter().nth(i).expect("square") {
                poly_add(&mut tr, key, r, im);
            }
        }
        tr
    };
    let expect = |p: &Poly| -> Rational {
        let mut acc = Rational::zero();
        for (key, (re, _)) in p {
            let mut m = re.clone();
            for (v, &e) in key.iter().enumerate() {
                if e > 0 {
                    m *= law.moment(&variances[v], u32::from(e));
                }
            }
            acc += m;
        }
        acc
    };
    let t1 = trace_power(2 * s1);
    let t2 = trace_power(2 * s2);
    let joint = expect(&poly_mul(&t1, &t2));
    let cov = joint - expect(&t1) * expect(&t2);
    Ok(cov * scale(2 * (s1 + s2) as usize, n))
}

/// CSV of every pair with a nonzero covariance contribution.
pub fn nonzero_pairs_csv(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> Result<String> {
    check_guard(n, s1, s2)?;
    let mut out = String::from("first,second,class,single_quartic,weight,contribution\n");
    for first in all_paths(n, 2 * s1 as usize) {
        for second in all_paths(n, 2 * s2 as usize) {
            let pair = PathPair { first: first.clone(), second };
            let c = covariance_contribution(&pair, law, n);
            if c.is_zero() {
                continue;
            }
            let class = classify(&pair);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                pair.first,
                pair.second,
                class.class,
                class.single_quartic,
                weight(&pair, law, n),
                c
            ));
        }
    }
    Ok(out)
}

/// Checks `4n Π(pair) = Π(reduced)` over every simply correlated pair that
/// admits the reduction. Returns `(checked, failures)`.
pub fn reduction_survey(n: usize, s1: u32, s2: u32, law: &EntryLaw) -> Result<(usize, Vec<PathPair>)> {
    check_guard(n, s1, s2)?;
    let scale = int(4 * n as i64);
    let mut checked = 0;
    let mut failures = Vec::new();
    for first in all_paths(n, 2 * s1 as usize) {
        for second in all_paths(n, 2 * s2 as usize) {
            let pair = PathPair { first: first.clone(), second };
            if classify(&pair).class != PathClass::SimplyCorrelated {
                continue;
            }
            let Ok(reduced) = reduce_two_steps(&pair) else { continue };
            checked += 1;
            if weight(&pair, law, n) * &scale != path_weight(&reduced, law, n) {
                failures.push(pair);
            }
        }
    }
    Ok((checked, failures))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::rat;

    fn path(v: &[usize]) -> ClosedPath {
        ClosedPath::new(v.to_vec()).unwrap()
    }

    fn laws() -> Vec<EntryLaw> {
        vec![EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::three_point_default()]
    }

    #[test]
    fn single_edge_weight() {
        let pair = PathPair::new(path(&[1, 1]), path(&[1, 1]));
        assert_eq!(weight(&pair, &EntryLaw::Gaussian, 1), rat(3, 16));
        assert_eq!(weight(&pair, &EntryLaw::Rademacher, 1), rat(1, 16));
    }

    #[test]
    fn offdiagonal_moments() {
        // E|w|^2 = 1/4, E w^2 = 0, E|w|^4 = 2 V4 + 2/64
        for law in laws() {
            assert_eq!(offdiag_moment(&law, 1, 1), rat(1, 4));
            assert!(offdiag_moment(&law, 2, 0).is_zero());
            assert_eq!(offdiag_moment(&law, 2, 2), int(2) * law.v4_offdiag() + rat(2, 64));
            assert!(offdiag_moment(&law, 3, 1).is_zero());
        }
        assert_eq!(offdiag_moment(&EntryLaw::Gaussian, 2, 2), rat(1, 8));
    }

    #[test]
    fn odd_multiplicity_vanishes() {
        let pair = PathPair::new(path(&[1, 2, 2]), path(&[1, 1]));
        assert!(weight(&pair, &EntryLaw::Gaussian, 2).is_zero());
    }

    #[test]
    fn small_covariances() {
        for law in laws() {
            let expected = law.v4_diag() - rat(1, 16);
            let k = covariance_bruteforce(1, 1, 1, &law).unwrap();
            assert!(k.agree);
            assert_eq!(k.full_expansion, expected);
        }
        let k = covariance_bruteforce(2, 1, 1, &EntryLaw::Gaussian).unwrap();
        assert_eq!(k.full_expansion, rat(1, 8));
        assert_eq!(covariance_direct(2, 1, 1, &EntryLaw::Gaussian).unwrap(), rat(1, 8));
        assert_eq!(covariance_direct(3, 1, 1, &EntryLaw::Gaussian).unwrap(), rat(1, 8));
    }

    #[test]
    fn guard_is_a_hard_error() {
        assert!(matches!(covariance_bruteforce(4, 1, 1, &EntryLaw::Gaussian), Err(Error::Capacity(_))));
        assert!(matches!(sum_by_class(2, 3, 2, &EntryLaw::Gaussian), Err(Error::Capacity(_))));
    }

    #[test]
    fn classification_examples() {
        let disjoint = PathPair::new(path(&[1, 1]), path(&[2, 2]));
        assert_eq!(classify(&disjoint).class, PathClass::NoCommonStep);
        let quartic = PathPair::new(path(&[1, 2]), path(&[1, 2]));
        let c = classify(&quartic);
        assert_eq!(c.class, PathClass::MultiplicityFourPlus);
        assert!(c.single_quartic);
        assert_eq!(c.first_common, Some((0, 0)));
        let simple = PathPair::new(path(&[1, 2, 3, 3]), path(&[2, 1, 3, 3]));
        assert_eq!(classify(&simple).class, PathClass::SimplyCorrelated);
        let loops = PathPair::new(path(&[1, 1, 2, 2]), path(&[1, 1, 2, 2]));
        assert_eq!(classify(&loops).class, PathClass::SimplyCorrelated);
    }

    #[test]
    fn reduction_examples() {
        // {1,2} once in each walk, inverse orientation, all other edges paired
        let pair = PathPair::new(path(&[1, 2, 3, 3]), path(&[2, 1, 3, 3]));
        let reduced = reduce_two_steps(&pair).unwrap();
        assert_eq!(reduced.vertices(), &[1, 3, 3, 2, 3, 3]);
        assert!(reduced.is_even());
        for law in laws() {
            let w = weight(&pair, &law, 3);
            assert!(!w.is_zero());
            assert_eq!(w * int(12), path_weight(&reduced, &law, 3));
        }
        // shared loop at n = 2
        let loops = PathPair::new(path(&[1, 1, 2, 2]), path(&[1, 1, 2, 2]));
        let reduced = reduce_two_steps(&loops).unwrap();
        assert_eq!(reduced.vertices(), &[1, 2, 2, 1, 2, 2]);
        let direct = PathPair::new(path(&[1, 2, 3]), path(&[1, 2, 3]));
        assert!(matches!(reduce_two_steps(&direct), Err(Error::Domain(_))));
        assert!(weight(&direct, &EntryLaw::Gaussian, 3).is_zero());
        let disjoint = PathPair::new(path(&[1, 1]), path(&[2, 2]));
        assert!(matches!(reduce_two_steps(&disjoint), Err(Error::Domain(_))));
    }

    #[test]
    fn reduction_when_the_removed_step_closes_the_first_walk() {
        let pair = PathPair::new(path(&[2, 3, 3, 1]), path(&[2, 1, 3, 1, 3, 2, 3, 2]));
        assert_eq!(classify(&pair).class, PathClass::SimplyCorrelated);
        let reduced = reduce_two_steps(&pair).unwrap();
        assert_eq!(reduced.vertices(), &[2, 3, 3, 1, 3, 1, 3, 2, 3, 2]);
        let mut original: Vec<(usize, usize)> = pair.first.steps().chain(pair.second.steps()).collect();
        original.retain(|&st| st != (1, 2) && st != (2, 1));
        let mut glued: Vec<(usize, usize)> = reduced.steps().collect();
        original.sort_unstable();
        glued.sort_unstable();
        assert_eq!(original, glued);
    }

    #[test]
    fn partition_and_direct_route_agree() {
        for law in laws() {
            for (n, s1, s2) in [(1, 1, 1), (2, 1, 1), (2, 1, 2), (3, 1, 1)] {
                let sums = sum_by_class(n, s1, s2, &law).unwrap();
                let brute = covariance_bruteforce(n, s1, s2, &law).unwrap();
                assert!(brute.agree);
                assert_eq!(sums.total, brute.full_expansion);
                assert!(sums.by_class[&PathClass::NoCommonStep].is_zero());
                assert_eq!(covariance_direct(n, s1, s2, &law).unwrap(), brute.full_expansion, "{law} {n} {s1} {s2}");
            }
        }
        let one = sum_by_class(1, 1, 1, &EntryLaw::Gaussian).unwrap();
        assert_eq!(one.by_class[&PathClass::MultiplicityFourPlus], one.total);
    }

    #[test]
    fn csv_lists_nonzero_pairs() {
        let csv = nonzero_pairs_csv(1, 1, 1, &EntryLaw::Gaussian).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.contains("multiplicity-4+"));
    }
}
