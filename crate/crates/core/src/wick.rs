//! Exact GUE expectations by Wick pairing.
//!
//! Every matrix-power entry `(A^α)_{xy}` expands into a chain of `α` entries
//! joined by summed interior indices, and every normalized trace
//! `L_γ = n^{-1} Tr A^γ` into a cycle of `γ` entries. A perfect matching of
//! the entries contributes `(4n)^{-#pairs}` times the number of index
//! assignments compatible with `E A_{ab} A_{cd} = δ_{ad} δ_{bc} / (4n)`.
//! That count is a product over the connected components of the identified
//! indices: a component holding a fixed endpoint contributes `1` (or `0` when
//! it holds two different endpoints), a free component contributes `n`.
//! The work is therefore independent of `n`, and exponential only in the
//! total degree, which is capped at [`DEGREE_CAP`].
//!
//! Centered factors `X° = X - E X` are handled by inclusion–exclusion over
//! the centered subset. A suffix group can additionally be centered as a
//! whole, `E{P [G]°} = E{PG} - E{P} E{G}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num::{BigInt, One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{format_rational, int, rat, Rational};

/// Largest total entry degree the pairing enumerator accepts.
/// `13!! = 135135` matchings at the cap.
pub const DEGREE_CAP: u32 = 14;

/// Pair covariance of GUE entries with the `exp{-2n Tr A²}` normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GueCovariance {
    pub n: usize,
}

impl GueCovariance {
    /// `E A_{ab} A_{cd}`.
    pub fn pair(&self, a: usize, b: usize, c: usize, d: usize) -> Rational {
        if a == d && b == c {
            rat(1, 4 * self.n as i64)
        } else {
            Rational::zero()
        }
    }
}

/// One factor of a monomial. Indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    /// `(A^power)_{row,col}`, optionally centered.
    Entry {
        power: u32,
        row: usize,
        col: usize,
        centered: bool,
    },
    /// `L_power = n^{-1} Tr A^power`, optionally centered.
    Trace { power: u32, centered: bool },
}

impl Factor {
    pub fn entry(power: u32, row: usize, col: usize) -> Self {
        Factor::Entry { power, row, col, centered: false }
    }

    pub fn centered_entry(power: u32, row: usize, col: usize) -> Self {
        Factor::Entry { power, row, col, centered: true }
    }

    pub fn trace(power: u32) -> Self {
        Factor::Trace { power, centered: false }
    }

    pub fn centered_trace(power: u32) -> Self {
        Factor::Trace { power, centered: true }
    }

    pub fn degree(&self) -> u32 {
        match *self {
            Factor::Entry { power, .. } | Factor::Trace { power, .. } => power,
        }
    }

    pub fn is_centered(&self) -> bool {
        match *self {
            Factor::Entry { centered, .. } | Factor::Trace { centered, .. } => centered,
        }
    }

    fn raw(&self) -> Raw {
        match *self {
            Factor::Entry { power, row, col, .. } => Raw::Entry { power, row, col },
            Factor::Trace { power, .. } => Raw::Trace { power },
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Factor::Entry { power, row, col, centered } => {
                write!(f, "A{power}({row},{col}){}", if centered { "o" } else { "" })
            }
            Factor::Trace { power, centered } => write!(f, "L{power}{}", if centered { "o" } else { "" }),
        }
    }
}

/// Uncentered factor, the unit of the pairing enumerator and of the cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Raw {
    Entry { power: u32, row: usize, col: usize },
    Trace { power: u32 },
}

/// Product of factors whose GUE expectation is requested. `outer_group`
/// wraps `factors[start..]` in one more centering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub n: usize,
    pub factors: Vec<Factor>,
    pub outer_group: Option<usize>,
}

impl MonomialSpec {
    pub fn new(n: usize, factors: Vec<Factor>) -> Self {
        Self { n, factors, outer_group: None }
    }

    pub fn with_outer_group(mut self, start: usize) -> Self {
        self.outer_group = Some(start);
        self
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(Factor::degree).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("matrix size must be at least 1".into()));
        }
        for factor in &self.factors {
            if let Factor::Entry { row, col, .. } = *factor {
                if row == 0 || col == 0 || row > self.n || col > self.n {
                    return Err(Error::Domain(format!(
                        "index ({row},{col}) outside 1..={}",
                        self.n
                    )));
                }
            }
        }
        if let Some(start) = self.outer_group {
            if start >= self.factors.len() {
                return Err(Error::Domain("outer centering group is empty".into()));
            }
        }
        let degree = self.degree();
        if degree > DEGREE_CAP {
            return Err(Error::Capacity(format!(
                "total degree {degree} exceeds the pairing cap {DEGREE_CAP}"
            )));
        }
        Ok(())
    }

    /// Parses the textual form used by the CLI. `n` is supplied separately.
    ///
    /// `A2(1,3)` is `(A²)_{13}`, `L4` is `L_4`, a trailing `o` (or `°`)
    /// centers a factor, and a final `[ … ]o` group is centered as a whole.
    pub fn parse(n: usize, text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Domain(format!("cannot parse monomial `{text}`: {msg}"));
        let mut factors = Vec::new();
        let mut outer_group = None;
        let normalized = text.replace('°', "o").replace('*', " ");
        let mut rest = normalized.trim();
        while !rest.is_empty() {
            if let Some(inner) = rest.strip_prefix('[') {
                let close = inner.find(']').ok_or_else(|| bad("unclosed group"))?;
                let tail = inner[close + 1..].trim_start();
                let tail = tail.strip_prefix('o').ok_or_else(|| bad("group must be centered with `]o`"))?;
                if !tail.trim().is_empty() || outer_group.is_some() {
                    return Err(bad("the centered group must be the final suffix"));
                }
                outer_group = Some(factors.len());
                for token in inner[..close].split_whitespace() {
                    factors.push(parse_factor(token).ok_or_else(|| bad(token))?);
                }
                if outer_group == Some(factors.len()) {
                    return Err(bad("empty group"));
                }
                break;
            }
            let end = rest.find(|c: char| c.is_whitespace() || c == '[').unwrap_or(rest.len());
            let token = &rest[..end];
            factors.push(parse_factor(token).ok_or_else(|| bad(token))?);
            rest = rest[end..].trim_start();
        }
        let spec = MonomialSpec { n, factors, outer_group };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_factor(token: &str) -> Option<Factor> {
    let (body, centered) = match token.strip_suffix('o') {
        Some(body) => (body, true),
        None => (token, false),
    };
    if let Some(power) = body.strip_prefix('L') {
        return Some(Factor::Trace { power: power.parse().ok()?, centered });
    }
    let body = body.strip_prefix('A')?;
    let open = body.find('(')?;
    let power = body[..open].parse().ok()?;
    let args = body[open + 1..].strip_suffix(')')?;
    let (row, col) = args.split_once(',')?;
    Some(Factor::Entry {
        power,
        row: row.trim().parse().ok()?,
        col: col.trim().parse().ok()?,
        centered,
    })
}

impl fmt::Display for MonomialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let split = self.outer_group.unwrap_or(self.factors.len());
        let head: Vec<String> = self.factors[..split].iter().map(ToString::to_string).collect();
        f.write_str(&head.join(" "))?;
        if split < self.factors.len() {
            let group: Vec<String> = self.factors[split..].iter().map(ToString::to_string).collect();
            if !head.is_empty() {
                f.write_str(" ")?;
            }
            write!(f, "[{}]o", group.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        parse_factor(&text.replace('°', "o")).ok_or_else(|| Error::Domain(format!("bad factor `{text}`")))
    }
}

/// Union–find over index variables with endpoint labels on the roots.
#[derive(Clone)]
struct Labels {
    parent: Vec<u16>,
    label: Vec<u32>,
}

const FREE: u32 = u32::MAX;

impl Labels {
    fn find(&self, mut v: usize) -> usize {
        while self.parent[v] as usize != v {
            v = self.parent[v] as usize;
        }
        v
    }

    /// Returns false when two different endpoints get identified.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        let (la, lb) = (self.label[ra], self.label[rb]);
        if la != FREE && lb != FREE && la != lb {
            return false;
        }
        self.parent[rb] = ra as u16;
        if la == FREE {
            self.label[ra] = lb;
        }
        true
    }

    fn free_components(&self) -> usize {
        (0..self.parent.len())
            .filter(|&v| self.parent[v] as usize == v && self.label[v] == FREE)
            .count()
    }
}

/// Counts matchings by number of free components: `counts[k]` matchings
/// leave `k` free index classes.
fn enumerate_matchings(
    edges: &[(usize, usize)],
    remaining: &mut Vec<usize>,
    labels: &Labels,
    counts: &mut Vec<u64>,
) {
    if remaining.is_empty() {
        let k = labels.free_components();
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
        return;
    }
    let first = remaining.pop().expect("nonempty");
    for i in 0..remaining.len() {
        let other = remaining.swap_remove(i);
        let (a, b) = edges[first];
        let (c, d) = edges[other];
        // E A_ab A_cd = δ_ad δ_bc / 4n
        let mut next = labels.clone();
        if next.union(a, d) && next.union(b, c) {
            enumerate_matchings(edges, remaining, &next, counts);
        }
        remaining.push(other);
        let last = remaining.len() - 1;
        remaining.swap(i, last);
    }
    remaining.push(first);
}

/// Exact evaluator with a cache of uncentered moments. One instance per
/// matrix size; evaluations are deterministic and single-threaded.
#[derive(Debug)]
pub struct GueOracle {
    n: usize,
    cache: HashMap<Vec<Raw>, Rational>,
}

impl GueOracle {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("matrix size must be at least 1".into()));
        }
        Ok(Self { n, cache: HashMap::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(Error::Domain(format!("index {i} outside 1..={}", self.n)));
        }
        Ok(())
    }

    /// Expectation of an uncentered product.
    fn raw_moment(&mut self, factors: &[Raw]) -> Result<Rational> {
        let mut key: Vec<Raw> = Vec::with_capacity(factors.len());
        for f in factors {
            match *f {
                Raw::Entry { power: 0, row, col } => {
                    if row != col {
                        return Ok(Rational::zero());
                    }
                }
                Raw::Trace { power: 0 } => {}
                other => key.push(other),
            }
        }
        let degree: u32 = key
            .iter()
            .map(|f| match *f {
                Raw::Entry { power, .. } | Raw::Trace { power } => power,
            })
            .sum();
        if degree > DEGREE_CAP {
            return Err(Error::Capacity(format!(
                "total degree {degree} exceeds the pairing cap {DEGREE_CAP}"
            )));
        }
        if degree % 2 == 1 {
            return Ok(Rational::zero());
        }
        if key.is_empty() {
            return Ok(Rational::one());
        }
        key.sort_unstable();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let value = self.pairing_sum(&key);
        self.cache.insert(key, value.clone());
        Ok(value)
    }

    fn pairing_sum(&self, factors: &[Raw]) -> Rational {
        let mut label: Vec<u32> = Vec::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut traces = 0u32;
        let new_node = |label: &mut Vec<u32>, value: u32| {
            label.push(value);
            label.len() - 1
        };
        for f in factors {
            match *f {
                Raw::Entry { power, row, col } => {
                    let start = new_node(&mut label, row as u32);
                    let mut prev = start;
                    for _ in 1..power {
                        let next = new_node(&mut label, FREE);
                        edges.push((prev, next));
                        prev = next;
                    }
                    let end = new_node(&mut label, col as u32);
                    edges.push((prev, end));
                }
                Raw::Trace { power } => {
                    traces += 1;
                    let first = new_node(&mut label, FREE);
                    let mut prev = first;
                    for _ in 1..power {
                        let next = new_node(&mut label, FREE);
                        edges.push((prev, next));
                        prev = next;
                    }
                    edges.push((prev, first));
                }
            }
        }
        let labels = Labels {
            parent: (0..label.len() as u16).collect(),
            label,
        };
        let mut counts = Vec::new();
        let mut remaining: Vec<usize> = (0..edges.len()).collect();
        enumerate_matchings(&edges, &mut remaining, &labels, &mut counts);
        let n = BigInt::from(self.n);
        let mut total = BigInt::zero();
        let mut n_pow = BigInt::one();
        for count in counts {
            total += &n_pow * count;
            n_pow *= &n;
        }
        let pairs = edges.len() / 2;
        let den = num::pow(BigInt::from(4 * self.n), pairs) * num::pow(n, traces as usize);
        Rational::new(total, den)
    }

    /// `E Π F_i` with per-factor centering.
    pub fn expectation(&mut self, factors: &[Factor]) -> Result<Rational> {
        for f in factors {
            if let Factor::Entry { row, col, .. } = *f {
                self.check_index(row)?;
                self.check_index(col)?;
            }
        }
        let total: u32 = factors.iter().map(Factor::degree).sum();
        if total > DEGREE_CAP {
            return Err(Error::Capacity(format!(
                "total degree {total} exceeds the pairing cap {DEGREE_CAP}"
            )));
        }
        let mut centered = Vec::new();
        let mut plain = Vec::new();
        for f in factors {
            if f.is_centered() {
                // a centered constant vanishes identically
                match *f {
                    Factor::Entry { power: 0, .. } | Factor::Trace { power: 0, .. } => {
                        return Ok(Rational::zero())
                    }
                    _ => centered.push(f.raw()),
                }
            } else {
                plain.push(f.raw());
            }
        }
        let means: Vec<Rational> = centered
            .iter()
            .map(|f| self.raw_moment(std::slice::from_ref(f)))
            .collect::<Result<_>>()?;
        let mut acc = Rational::zero();
        let mut kept = Vec::with_capacity(factors.len());
        for mask in 0u32..(1 << centered.len()) {
            let mut coeff = Rational::one();
            kept.clear();
            kept.extend_from_slice(&plain);
            for (i, f) in centered.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    coeff = -coeff * &means[i];
                } else {
                    kept.push(*f);
                }
            }
            if coeff.is_zero() {
                continue;
            }
            acc += coeff * self.raw_moment(&kept)?;
        }
        Ok(acc)
    }

    pub fn evaluate(&mut self, spec: &MonomialSpec) -> Result<Rational> {
        if spec.n != self.n {
            return Err(Error::Domain(format!("spec is for n = {}, oracle for n = {}", spec.n, self.n)));
        }
        spec.validate()?;
        match spec.outer_group {
            None => self.expectation(&spec.factors),
            Some(start) => {
                let joint = self.expectation(&spec.factors)?;
                let head = self.expectation(&spec.factors[..start])?;
                let group = self.expectation(&spec.factors[start..])?;
                Ok(joint - head * group)
            }
        }
    }

    /// `U_p(x,y) = E (A^p)_{xy}`.
    pub fn u(&mut self, power: u32, x: usize, y: usize) -> Result<Rational> {
        self.expectation(&[Factor::entry(power, x, y)])
    }

    /// `M_p = E L_p`.
    pub fn m(&mut self, power: u32) -> Result<Rational> {
        self.expectation(&[Factor::trace(power)])
    }

    pub fn cached_moments(&self) -> usize {
        self.cache.len()
    }
}

/// One-shot evaluation with a fresh oracle.
pub fn mixed_moment(spec: &MonomialSpec) -> Result<Rational> {
    GueOracle::new(spec.n)?.evaluate(spec)
}

/// `M_{2k} = E n^{-1} Tr A^{2k}` for `k = 0..=max_k`, from the three-term
/// recursion for Gaussian trace moments. Independent of the pairing route.
pub fn gue_even_moments(n: usize, max_k: usize) -> Vec<Rational> {
    // C_k = E Tr H^{2k} with E|H_ij|^2 = 1:
    // (k+2) C_{k+1} = (4k+2) n C_k + k (4k^2-1) C_{k-1}
    let nb = BigInt::from(n);
    let mut c: Vec<BigInt> = vec![nb.clone(), &nb * &nb];
    for k in 1..max_k {
        let kb = BigInt::from(k);
        let next = (BigInt::from(4 * k + 2) * &nb * &c[k] + &kb * BigInt::from(4 * k * k - 1) * &c[k - 1])
            / BigInt::from(k + 2);
        c.push(next);
    }
    c.truncate(max_k + 1);
    c.into_iter()
        .enumerate()
        .map(|(k, ck)| Rational::new(ck, &nb * num::pow(BigInt::from(4 * n), k)))
        .collect()
}

/// All compositions of `total` into `parts` positive integers.
pub fn compositions(total: u32, parts: u32) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if total < parts {
            return;
        }
        for first in 1..=(total - (parts - 1)) {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    U,
    D,
    DAvg,
    P,
    Q,
    T,
}

impl Quantity {
    pub fn label(self) -> &'static str {
        match self {
            Quantity::U => "U",
            Quantity::D => "D",
            Quantity::DAvg => "Dbar",
            Quantity::P => "P",
            Quantity::Q => "Q",
            Quantity::T => "T",
        }
    }
}

/// Table key. `s` is the half-degree: `U` at `s` means `U_{2s}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentKey {
    pub quantity: Quantity,
    pub s: u32,
    pub r: Option<u32>,
    pub x: Option<usize>,
    pub y: Option<usize>,
}

/// Which endpoints to evaluate. The GUE law is invariant under index
/// permutations, so `(1,1)` and `(1,2)` represent every diagonal and
/// off-diagonal pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoints {
    All,
    Representative,
}

impl Endpoints {
    fn pairs(self, n: usize) -> Vec<(usize, usize)> {
        match self {
            Endpoints::All => (1..=n).flat_map(|x| (1..=n).map(move |y| (x, y))).collect(),
            Endpoints::Representative => {
                let mut v = vec![(1, 1)];
                if n >= 2 {
                    v.push((1, 2));
                }
                v
            }
        }
    }

    fn diagonal(self, n: usize) -> Vec<usize> {
        match self {
            Endpoints::All => (1..=n).collect(),
            Endpoints::Representative => vec![1],
        }
    }
}

/// Exact values of `U`, `D`, `P`, `Q`, `T` on a grid. Missing `D` values at
/// `r > 2s`, `r = 1` and `r = 0` follow the boundary conventions
/// `D^{(r)}_{2s} = 0`, `D^{(1)} = 0`, `D^{(0)}_{2s} = δ_{s0}`.
#[derive(Clone, Debug, Default)]
pub struct MomentTable {
    pub n: usize,
    pub s_max: u32,
    pub r_max: u32,
    entries: BTreeMap<MomentKey, Rational>,
}

impl MomentTable {
    fn new(n: usize, s_max: u32, r_max: u32) -> Self {
        Self { n, s_max, r_max, entries: BTreeMap::new() }
    }

    fn insert(&mut self, key: MomentKey, value: Rational) {
        self.entries.insert(key, value);
    }

    pub fn get(&self, key: &MomentKey) -> Option<&Rational> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MomentKey, &Rational)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(&mut self, other: MomentTable) {
        self.s_max = self.s_max.max(other.s_max);
        self.r_max = self.r_max.max(other.r_max);
        self.entries.extend(other.entries);
    }

    pub fn u(&self, s: u32, x: usize, y: usize) -> Option<&Rational> {
        self.get(&MomentKey { quantity: Quantity::U, s, r: None, x: Some(x), y: Some(y) })
    }

    pub fn d(&self, s: u32, r: u32, x: usize, y: usize) -> Option<Rational> {
        if let Some(v) = d_convention(s, r, x == y) {
            return Some(v);
        }
        self.get(&MomentKey { quantity: Quantity::D, s, r: Some(r), x: Some(x), y: Some(y) })
            .cloned()
    }

    /// `D^{(r)}_{2s} = n^{-1} Σ_x D^{(r)}_{2s}(x,x)`.
    pub fn d_avg(&self, s: u32, r: u32) -> Option<Rational> {
        if let Some(v) = d_convention(s, r, true) {
            return Some(v);
        }
        self.get(&MomentKey { quantity: Quantity::DAvg, s, r: Some(r), x: None, y: None })
            .cloned()
    }

    pub fn p(&self, s: u32, r: u32, x: usize, y: usize) -> Option<&Rational> {
        self.get(&MomentKey { quantity: Quantity::P, s, r: Some(r), x: Some(x), y: Some(y) })
    }

    pub fn q(&self, s: u32, r: u32, x: usize, y: usize) -> Option<&Rational> {
        self.get(&MomentKey { quantity: Quantity::Q, s, r: Some(r), x: Some(x), y: Some(y) })
    }

    pub fn t(&self, s: u32, r: u32, x: usize) -> Option<&Rational> {
        self.get(&MomentKey { quantity: Quantity::T, s, r: Some(r), x: Some(x), y: None })
    }

    /// Largest stored value of a quantity at `(s, r)` over all endpoints.
    pub fn sup(&self, quantity: Quantity, s: u32, r: Option<u32>) -> Option<Rational> {
        self.entries
            .iter()
            .filter(|(k, _)| k.quantity == quantity && k.s == s && k.r == r)
            .map(|(_, v)| v.clone())
            .max()
    }

    /// CSV with columns `quantity,s,r,x,y,numerator,denominator`; `s` is
    /// the half-degree.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,s,r,x,y,numerator,denominator\n");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for (k, v) in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                k.quantity.label(),
                k.s,
                opt(k.r.map(|r| r.to_string())),
                opt(k.x.map(|x| x.to_string())),
                opt(k.y.map(|y| y.to_string())),
                v.numer(),
                v.denom()
            ));
        }
        out
    }
}

fn d_convention(s: u32, r: u32, diagonal: bool) -> Option<Rational> {
    match r {
        0 => Some(if s == 0 && diagonal { Rational::one() } else { Rational::zero() }),
        1 => Some(Rational::zero()),
        r if r > 2 * s => Some(Rational::zero()),
        _ => None,
    }
}

fn check_degree(degree: u32) -> Result<()> {
    if degree > DEGREE_CAP {
        return Err(Error::Capacity(format!(
            "degree {degree} exceeds the pairing cap {DEGREE_CAP}"
        )));
    }
    Ok(())
}

/// `U_{2s}(x,y)` for `s = 0..=s_max`.
pub fn u_table(oracle: &mut GueOracle, s_max: u32, endpoints: Endpoints) -> Result<MomentTable> {
    check_degree(2 * s_max)?;
    let n = oracle.n();
    let mut table = MomentTable::new(n, s_max, 0);
    for s in 0..=s_max {
        for (x, y) in endpoints.pairs(n) {
            let v = oracle.u(2 * s, x, y)?;
            table.insert(MomentKey { quantity: Quantity::U, s, r: None, x: Some(x), y: Some(y) }, v);
        }
    }
    Ok(table)
}

/// `D^{(r)}_{2s}(x,y) = Σ_{α_1+…+α_r=2s} |E{(A^{α_1})°_{xy} L°_{α_2}⋯L°_{α_r}}|`.
pub fn d_value(oracle: &mut GueOracle, s: u32, r: u32, x: usize, y: usize) -> Result<Rational> {
    if let Some(v) = d_convention(s, r, x == y) {
        return Ok(v);
    }
    check_degree(2 * s)?;
    let mut acc = Rational::zero();
    for comp in compositions(2 * s, r) {
        let mut factors = vec![Factor::centered_entry(comp[0], x, y)];
        factors.extend(comp[1..].iter().map(|&g| Factor::centered_trace(g)));
        acc += oracle.expectation(&factors)?.abs();
    }
    Ok(acc)
}

/// `D` on `Δ` for `s ≤ s_max`, `r ≤ r_max`, plus the diagonal averages.
pub fn d_table(oracle: &mut GueOracle, s_max: u32, r_max: u32, endpoints: Endpoints) -> Result<MomentTable> {
    check_degree(2 * s_max)?;
    let n = oracle.n();
    let mut table = MomentTable::new(n, s_max, r_max);
    for s in 1..=s_max {
        for r in 2..=r_max.min(2 * s) {
            for (x, y) in endpoints.pairs(n) {
                let v = d_value(oracle, s, r, x, y)?;
                table.insert(MomentKey { quantity: Quantity::D, s, r: Some(r), x: Some(x), y: Some(y) }, v);
            }
            let diag = endpoints.diagonal(n);
            let mut sum = Rational::zero();
            for &x in &diag {
                sum += d_value(oracle, s, r, x, x)?;
            }
            let avg = sum / int(diag.len() as i64);
            table.insert(MomentKey { quantity: Quantity::DAvg, s, r: Some(r), x: None, y: None }, avg);
        }
    }
    Ok(table)
}

/// Which pair of centered entries heads a `P`, `Q` or `T` term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairShape {
    /// `(A^α)°_{xx} (A^β)°_{yy}`, `x ≠ y`.
    NonCrossing,
    /// `(A^α)°_{xy} (A^β)°_{yx}`, `x ≠ y`.
    Crossing,
    /// `(A^α)°_{xx} (A^β)°_{xx}`.
    Diagonal,
}

/// `Σ_{α+β+γ_1+…+γ_{r-2}=2s} |E{(A^α)° (A^β)° L°_{γ_1}⋯L°_{γ_{r-2}}}|`.
pub fn pair_term(oracle: &mut GueOracle, shape: PairShape, s: u32, r: u32, x: usize, y: usize) -> Result<Rational> {
    if r < 2 {
        return Err(Error::Domain(format!("pair terms need r >= 2, got {r}")));
    }
    if shape != PairShape::Diagonal && x == y {
        return Err(Error::Domain("non-crossing and crossing terms need x != y".into()));
    }
    check_degree(2 * s)?;
    let mut acc = Rational::zero();
    for comp in compositions(2 * s, r) {
        let (a, b) = (comp[0], comp[1]);
        let mut factors = match shape {
            PairShape::NonCrossing => vec![Factor::centered_entry(a, x, x), Factor::centered_entry(b, y, y)],
            PairShape::Crossing => vec![Factor::centered_entry(a, x, y), Factor::centered_entry(b, y, x)],
            PairShape::Diagonal => vec![Factor::centered_entry(a, x, x), Factor::centered_entry(b, x, x)],
        };
        factors.extend(comp[2..].iter().map(|&g| Factor::centered_trace(g)));
        acc += oracle.expectation(&factors)?.abs();
    }
    Ok(acc)
}

/// `P`, `Q` for all `x ≠ y` and `T` for all `x`, on `2 ≤ r ≤ min(2s, r_max)`.
pub fn pqt_table(oracle: &mut GueOracle, s_max: u32, r_max: u32, endpoints: Endpoints) -> Result<MomentTable> {
    check_degree(2 * s_max)?;
    let n = oracle.n();
    let mut table = MomentTable::new(n, s_max, r_max);
    for s in 1..=s_max {
        for r in 2..=r_max.min(2 * s) {
            for (x, y) in endpoints.pairs(n) {
                if x == y {
                    continue;
                }
                let p = pair_term(oracle, PairShape::NonCrossing, s, r, x, y)?;
                let q = pair_term(oracle, PairShape::Crossing, s, r, x, y)?;
                table.insert(MomentKey { quantity: Quantity::P, s, r: Some(r), x: Some(x), y: Some(y) }, p);
                table.insert(MomentKey { quantity: Quantity::Q, s, r: Some(r), x: Some(x), y: Some(y) }, q);
            }
            for x in endpoints.diagonal(n) {
                let t = pair_term(oracle, PairShape::Diagonal, s, r, x, x)?;
                table.insert(MomentKey { quantity: Quantity::T, s, r: Some(r), x: Some(x), y: None }, t);
            }
        }
    }
    Ok(table)
}

/// Both sides of an exact identity, plus named intermediate pieces.
#[derive(Clone, Debug)]
pub struct EqualityReport {
    pub name: String,
    pub lhs: Rational,
    pub rhs: Rational,
    pub equal: bool,
    pub parts: Vec<(String, Rational)>,
}

impl EqualityReport {
    fn new(name: impl Into<String>, lhs: Rational, rhs: Rational, parts: Vec<(String, Rational)>) -> Self {
        let equal = lhs == rhs;
        Self { name: name.into(), lhs, rhs, equal, parts }
    }

    pub fn parts_display(&self) -> Vec<(String, String)> {
        self.parts.iter().map(|(k, v)| (k.clone(), format_rational(v))).collect()
    }
}

/// The two integration-by-parts identities checked against direct evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IbpSpec {
    /// `E A_{xy} (A^k)_{uv} = (4n)^{-1} Σ_{j<k} E{(A^j)_{uy} (A^{k-1-j})_{xv}}`.
    EntryPower { k: u32, x: usize, y: usize, u: usize, v: usize },
    /// `U_{2s}(x,y)` against its split into the `M * U` convolution and the
    /// centered `(A^{α_1})°_{xy} L°_{α_2}` remainder.
    MomentRecursion { s: u32, x: usize, y: usize },
}

pub fn verify_ibp(oracle: &mut GueOracle, spec: IbpSpec) -> Result<EqualityReport> {
    match spec {
        IbpSpec::EntryPower { k, x, y, u, v } => {
            check_degree(k + 1)?;
            let lhs = oracle.expectation(&[Factor::entry(1, x, y), Factor::entry(k, u, v)])?;
            let mut sum = Rational::zero();
            for j in 0..k {
                sum += oracle.expectation(&[Factor::entry(j, u, y), Factor::entry(k - 1 - j, x, v)])?;
            }
            let rhs = sum * rat(1, 4 * oracle.n() as i64);
            Ok(EqualityReport::new(format!("ibp_entry k={k} ({x},{y},{u},{v})"), lhs, rhs, vec![]))
        }
        IbpSpec::MomentRecursion { s, x, y } => {
            if s == 0 {
                return Err(Error::Domain("moment recursion needs s >= 1".into()));
            }
            check_degree(2 * s)?;
            let n = oracle.n();
            let lhs = oracle.u(2 * s, x, y)?;
            let mut trace_form = Rational::zero();
            for t in 1..=n {
                for j in 0..=(2 * s - 2) {
                    trace_form += oracle.expectation(&[Factor::entry(j, t, t), Factor::entry(2 * s - 2 - j, x, y)])?;
                }
            }
            trace_form *= rat(1, 4 * n as i64);
            let mut mu_part = Rational::zero();
            for j in 0..s {
                mu_part += oracle.m(2 * j)? * oracle.u(2 * s - 2 - 2 * j, x, y)?;
            }
            mu_part *= rat(1, 4);
            let mut d_part = Rational::zero();
            for a1 in 0..=(2 * s - 2) {
                d_part += oracle.expectation(&[
                    Factor::centered_entry(a1, x, y),
                    Factor::centered_trace(2 * s - 2 - a1),
                ])?;
            }
            d_part *= rat(1, 4);
            let rhs = &mu_part + &d_part;
            let mut report = EqualityReport::new(
                format!("ibp_moment s={s} ({x},{y})"),
                lhs.clone(),
                rhs,
                vec![
                    ("trace_form".into(), trace_form.clone()),
                    ("mu_part".into(), mu_part),
                    ("d_part".into(), d_part),
                ],
            );
            report.equal = report.equal && lhs == trace_form;
            Ok(report)
        }
    }
}

/// Endpoints `(a,b,c,d)` of `H(α, β, Γ) = E{(A^α)°_{ab} (A^β)°_{cd} L°_{γ_1}⋯}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TenTermSpec {
    pub alpha: u32,
    pub beta: u32,
    pub gammas: Vec<u32>,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub d: usize,
}

#[derive(Clone, Debug)]
pub struct TenTermReport {
    pub spec: TenTermSpec,
    pub direct: Rational,
    pub terms: Vec<Rational>,
    pub sum: Rational,
    pub equal: bool,
}

/// Evaluates `H` directly and as the sum of the ten terms obtained from one
/// integration by parts followed by the centering identity
/// `E(XYZ°) = EX E(Y°Z) + EY E(X°Z) + E(X°Y°Z) - E(X°Y°) EZ`.
pub fn verify_ten_term(oracle: &mut GueOracle, spec: &TenTermSpec) -> Result<TenTermReport> {
    let TenTermSpec { alpha, beta, ref gammas, a, b, c, d } = *spec;
    if alpha < 2 {
        return Err(Error::Domain(format!("ten-term split needs alpha >= 2, got {alpha}")));
    }
    check_degree(alpha + beta + gammas.iter().sum::<u32>())?;
    let n = oracle.n() as i64;
    let traces = |skip: Option<usize>| -> Vec<Factor> {
        gammas
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, &g)| Factor::centered_trace(g))
            .collect()
    };
    let with = |mut head: Vec<Factor>, tail: Vec<Factor>| {
        head.extend(tail);
        head
    };
    let ce = Factor::centered_entry;

    let direct = oracle.expectation(&with(vec![ce(alpha, a, b), ce(beta, c, d)], traces(None)))?;
    let mut terms = vec![Rational::zero(); 10];
    for j in 0..=(alpha - 2) {
        let rest = alpha - 2 - j;
        let mj = oracle.m(j)?;
        let uab = oracle.u(rest, a, b)?;
        terms[0] += mj * oracle.expectation(&with(vec![ce(rest, a, b), ce(beta, c, d)], traces(None)))?;
        terms[1] += uab
            * oracle.expectation(&with(vec![ce(beta, c, d), Factor::centered_trace(j)], traces(None)))?;
        terms[2] += oracle.expectation(&with(
            vec![ce(rest, a, b), ce(beta, c, d), Factor::centered_trace(j)],
            traces(None),
        ))?;
        terms[3] -= oracle.expectation(&[ce(rest, a, b), Factor::centered_trace(j)])?
            * oracle.expectation(&with(vec![ce(beta, c, d)], traces(None)))?;
    }
    for t in &mut terms[..4] {
        *t *= rat(1, 4);
    }
    let bare = oracle.expectation(&traces(None))?;
    for j in 0..beta {
        let other = alpha + beta - 2 - j;
        let uad = oracle.u(j, a, d)?;
        let ucb = oracle.u(other, c, b)?;
        terms[4] += &uad * &ucb * &bare;
        terms[5] += &ucb * oracle.expectation(&with(vec![ce(j, a, d)], traces(None)))?;
        terms[6] += &uad * oracle.expectation(&with(vec![ce(other, c, b)], traces(None)))?;
        terms[7] += oracle.expectation(&with(vec![ce(j, a, d), ce(other, c, b)], traces(None)))?;
    }
    for t in &mut terms[4..8] {
        *t *= rat(1, 4 * n);
    }
    for (l, &g) in gammas.iter().enumerate() {
        let p = alpha + g - 2;
        let weight = int(g as i64);
        terms[8] += &weight * oracle.u(p, a, b)? * oracle.expectation(&with(vec![ce(beta, c, d)], traces(Some(l))))?;
        terms[9] += &weight * oracle.expectation(&with(vec![ce(p, a, b), ce(beta, c, d)], traces(Some(l))))?;
    }
    for t in &mut terms[8..] {
        *t *= rat(1, 4 * n * n);
    }
    let sum: Rational = terms.iter().cloned().sum();
    Ok(TenTermReport { spec: spec.clone(), equal: sum == direct, direct, terms, sum })
}

/// Outcome of one family of exact identity checks at one `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteEntry {
    pub family: String,
    pub n: usize,
    pub cases: usize,
    /// Descriptions of the failing cases.
    pub failures: Vec<String>,
}

impl SuiteEntry {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Restricted growth strings of length `len` with at most `blocks` values:
/// one index tuple per equality pattern, 1-based.
pub fn index_patterns(len: usize, blocks: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, len: usize, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == len {
            out.push(prefix.iter().map(|v| v + 1).collect());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1).min(blocks - 1);
        for v in 0..=next {
            prefix.push(v);
            rec(prefix, len, blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if blocks > 0 {
        rec(&mut Vec::new(), len, blocks, &mut out);
    }
    out
}

/// Integration-by-parts checks at size `n`: the entry-power identity for
/// every `k ≤ k_max` and every endpoint tuple, and the moment recursion for
/// every `2s ≤ k_max + 1` and every endpoint pair.
pub fn ibp_suite(n: usize, k_max: u32) -> Result<Vec<SuiteEntry>> {
    let mut oracle = GueOracle::new(n)?;
    let mut entry = SuiteEntry { family: "ibp_entry_power".into(), n, cases: 0, failures: vec![] };
    for k in 1..=k_max {
        for x in 1..=n {
            for y in 1..=n {
                for u in 1..=n {
                    for v in 1..=n {
                        let r = verify_ibp(&mut oracle, IbpSpec::EntryPower { k, x, y, u, v })?;
                        entry.cases += 1;
                        if !r.equal {
                            entry.failures.push(r.name);
                        }
                    }
                }
            }
        }
    }
    let mut moment = SuiteEntry { family: "ibp_moment_recursion".into(), n, cases: 0, failures: vec![] };
    for s in 1..=(k_max + 1) / 2 {
        for x in 1..=n {
            for y in 1..=n {
                let r = verify_ibp(&mut oracle, IbpSpec::MomentRecursion { s, x, y })?;
                moment.cases += 1;
                if !r.equal {
                    moment.failures.push(r.name);
                }
            }
        }
    }
    Ok(vec![entry, moment])
}

/// Ten-term split for every `α ≥ 2`, `β ≥ 1`, ordered trace degrees
/// `γ_i ≥ 1` with total degree at most `max_degree`, and one endpoint tuple
/// per equality pattern of `(a, b, c, d)`.
pub fn ten_term_suite(n: usize, max_degree: u32) -> Result<SuiteEntry> {
    let mut oracle = GueOracle::new(n)?;
    let patterns = index_patterns(4, n);
    let mut entry = SuiteEntry { family: "ten_term".into(), n, cases: 0, failures: vec![] };
    for alpha in 2..=max_degree {
        for beta in 1..=max_degree.saturating_sub(alpha) {
            let rest = max_degree - alpha - beta;
            let mut shapes = vec![vec![]];
            for total in 1..=rest {
                for parts in 1..=total {
                    shapes.extend(compositions(total, parts));
                }
            }
            for gammas in shapes {
                for p in &patterns {
                    let spec = TenTermSpec { alpha, beta, gammas: gammas.clone(), a: p[0], b: p[1], c: p[2], d: p[3] };
                    let r = verify_ten_term(&mut oracle, &spec)?;
                    entry.cases += 1;
                    if !r.equal {
                        entry.failures.push(format!("{spec:?}"));
                    }
                }
            }
        }
    }
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(n: usize) -> GueOracle {
        GueOracle::new(n).unwrap()
    }

    #[test]
    fn single_pairing_examples() {
        for n in 1..=4 {
            let mut o = oracle(n);
            for x in 1..=n {
                assert_eq!(o.u(2, x, x).unwrap(), rat(1, 4));
            }
            assert_eq!(o.u(1, 1, n).unwrap(), Rational::zero());
            let m4 = rat(1, 8) + rat(1, 16 * (n * n) as i64);
            assert_eq!(o.m(4).unwrap(), m4);
            assert_eq!(o.m(2).unwrap(), rat(1, 4));
            assert_eq!(o.u(4, 1, 1).unwrap(), rat(1, 8) * (int(1) + rat(1, 2 * (n * n) as i64)));
        }
    }

    #[test]
    fn covariance_matches_pair_rule() {
        let n = 3;
        let cov = GueCovariance { n };
        let mut o = oracle(n);
        for a in 1..=n {
            for b in 1..=n {
                for c in 1..=n {
                    for d in 1..=n {
                        let v = o.expectation(&[Factor::entry(1, a, b), Factor::entry(1, c, d)]).unwrap();
                        assert_eq!(v, cov.pair(a, b, c, d));
                    }
                }
            }
        }
    }

    #[test]
    fn odd_degree_vanishes_and_cap_is_enforced() {
        let mut o = oracle(2);
        assert!(o.expectation(&[Factor::entry(3, 1, 2), Factor::trace(2)]).unwrap().is_zero());
        let err = o.expectation(&[Factor::trace(8), Factor::trace(8)]).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
        // odd but over the cap is still a capacity error
        assert!(matches!(o.m(DEGREE_CAP + 1), Err(Error::Capacity(_))));
        assert!(matches!(o.u(2, 0, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn harer_zagier_agrees_with_pairings() {
        for n in 1..=4 {
            let exact = gue_even_moments(n, 6);
            let mut o = oracle(n);
            for k in 0..=6u32 {
                assert_eq!(o.m(2 * k).unwrap(), exact[k as usize], "n={n} k={k}");
                assert_eq!(o.u(2 * k, 1, 1).unwrap(), exact[k as usize]);
            }
        }
    }

    #[test]
    fn offdiagonal_moments_vanish() {
        for n in 2..=4 {
            let mut o = oracle(n);
            let table = u_table(&mut o, 5, Endpoints::All).unwrap();
            for (key, value) in table.iter() {
                if key.x != key.y {
                    assert!(value.is_zero(), "{key:?}");
                }
            }
        }
    }

    #[test]
    fn centering_of_a_single_factor_is_zero_mean() {
        let mut o = oracle(3);
        assert!(o.expectation(&[Factor::centered_entry(4, 2, 2)]).unwrap().is_zero());
        assert!(o.expectation(&[Factor::centered_trace(6)]).unwrap().is_zero());
        assert!(o.expectation(&[Factor::centered_trace(0), Factor::trace(2)]).unwrap().is_zero());
    }

    #[test]
    fn covariance_bilinearity() {
        for n in 1..=3 {
            let mut o = oracle(n);
            for a in 0..=4u32 {
                for b in 0..=4u32 {
                    for y in 1..=n {
                        let joint = o.expectation(&[Factor::entry(a, 1, 1), Factor::entry(b, y, y)]).unwrap();
                        let split = o.u(a, 1, 1).unwrap() * o.u(b, y, y).unwrap()
                            + o.expectation(&[Factor::centered_entry(a, 1, 1), Factor::centered_entry(b, y, y)])
                                .unwrap();
                        assert_eq!(joint, split);
                    }
                }
            }
        }
    }

    #[test]
    fn nested_centering_obeys_the_four_term_identity() {
        // E(XYZ°) = EX E(Y°Z) + EY E(X°Z) + E(X°Y°Z) - E(X°Y°) EZ
        let mut o = oracle(2);
        let x = Factor::entry(2, 1, 1);
        let y = Factor::trace(2);
        let z = [Factor::centered_trace(1), Factor::centered_trace(3)];
        let spec = MonomialSpec::new(2, vec![x, y, z[0], z[1]]).with_outer_group(2);
        let lhs = o.evaluate(&spec).unwrap();
        let yc = Factor::centered_trace(2);
        let xc = Factor::centered_entry(2, 1, 1);
        let rhs = o.u(2, 1, 1).unwrap() * o.expectation(&[yc, z[0], z[1]]).unwrap()
            + o.m(2).unwrap() * o.expectation(&[xc, z[0], z[1]]).unwrap()
            + o.expectation(&[xc, yc, z[0], z[1]]).unwrap()
            - o.expectation(&[xc, yc]).unwrap() * o.expectation(&z).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn d_examples() {
        for n in 1..=3 {
            let mut o = oracle(n);
            for x in 1..=n {
                for y in 1..=n {
                    let expected = if x == y { rat(1, 4 * (n * n) as i64) } else { Rational::zero() };
                    assert_eq!(d_value(&mut o, 1, 2, x, y).unwrap(), expected);
                }
            }
            assert!(d_value(&mut o, 2, 5, 1, 1).unwrap().is_zero());
        }
        let mut o = oracle(2);
        let table = d_table(&mut o, 3, 6, Endpoints::All).unwrap();
        assert!(table.iter().all(|(_, v)| !v.is_negative()));
        assert_eq!(table.d(2, 1, 1, 1), Some(Rational::zero()));
        assert_eq!(table.d_avg(0, 0), Some(Rational::one()));
        // D^{(2)}_4(x,x) at n=2 from the definition, evaluated term by term
        let direct: Rational = (1..=3)
            .map(|a| {
                o.expectation(&[Factor::centered_entry(a, 1, 1), Factor::centered_trace(4 - a)])
                    .unwrap()
                    .abs()
            })
            .sum();
        assert_eq!(table.d(2, 2, 1, 1).unwrap(), direct);
        assert!(direct > Rational::zero());
    }

    #[test]
    fn pqt_examples() {
        for n in 2..=4 {
            let mut o = oracle(n);
            assert!(pair_term(&mut o, PairShape::NonCrossing, 1, 2, 1, 2).unwrap().is_zero());
            assert_eq!(pair_term(&mut o, PairShape::Crossing, 1, 2, 1, 2).unwrap(), rat(1, 4 * n as i64));
            assert_eq!(pair_term(&mut o, PairShape::Diagonal, 1, 2, 1, 1).unwrap(), rat(1, 4 * n as i64));
            assert!(matches!(pair_term(&mut o, PairShape::Crossing, 1, 2, 2, 2), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn tables_are_permutation_invariant() {
        let n = 3;
        let mut o = oracle(n);
        let relabel = |i: usize| [0, 3, 1, 2][i];
        let d = d_table(&mut o, 2, 4, Endpoints::All).unwrap();
        let pqt = pqt_table(&mut o, 2, 4, Endpoints::All).unwrap();
        let mut fresh = oracle(n);
        for (key, value) in d.iter().chain(pqt.iter()) {
            let (x, y) = (key.x.map(relabel), key.y.map(relabel));
            let r = key.r.unwrap();
            let other = match key.quantity {
                Quantity::D => d_value(&mut fresh, key.s, r, x.unwrap(), y.unwrap()).unwrap(),
                Quantity::P => pair_term(&mut fresh, PairShape::NonCrossing, key.s, r, x.unwrap(), y.unwrap()).unwrap(),
                Quantity::Q => pair_term(&mut fresh, PairShape::Crossing, key.s, r, x.unwrap(), y.unwrap()).unwrap(),
                Quantity::T => pair_term(&mut fresh, PairShape::Diagonal, key.s, r, x.unwrap(), x.unwrap()).unwrap(),
                _ => continue,
            };
            assert_eq!(*value, other, "{key:?}");
        }
        // x-independence of U and T
        for s in 1..=2 {
            for r in 2..=2 * s {
                let t1 = pqt.t(s, r, 1).unwrap();
                assert!((2..=n).all(|x| pqt.t(s, r, x).unwrap() == t1));
            }
        }
    }

    #[test]
    fn ibp_entry_examples() {
        let mut o = oracle(2);
        for x in 1..=2 {
            for y in 1..=2 {
                for u in 1..=2 {
                    for v in 1..=2 {
                        for k in [1, 3] {
                            let report = verify_ibp(&mut o, IbpSpec::EntryPower { k, x, y, u, v }).unwrap();
                            assert!(report.equal, "{report:?}");
                        }
                        let k1 = verify_ibp(&mut o, IbpSpec::EntryPower { k: 1, x, y, u, v }).unwrap();
                        let expected = if x == v && y == u { rat(1, 8) } else { Rational::zero() };
                        assert_eq!(k1.lhs, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn ibp_moment_recursion_example() {
        let mut o = oracle(3);
        for (x, y) in [(1, 1), (1, 2), (3, 3)] {
            let report = verify_ibp(&mut o, IbpSpec::MomentRecursion { s: 2, x, y }).unwrap();
            assert!(report.equal, "{report:?}");
        }
        let report = verify_ibp(&mut o, IbpSpec::MomentRecursion { s: 2, x: 1, y: 1 }).unwrap();
        assert_eq!(report.parts[1].1, rat(1, 8));
        assert_eq!(report.parts[2].1, rat(1, 144));
    }

    #[test]
    fn ten_term_examples() {
        let mut o2 = oracle(2);
        let spec = TenTermSpec { alpha: 2, beta: 2, gammas: vec![], a: 1, b: 1, c: 2, d: 2 };
        assert!(verify_ten_term(&mut o2, &spec).unwrap().equal);
        let odd = TenTermSpec { alpha: 3, beta: 2, gammas: vec![2], a: 1, b: 1, c: 2, d: 2 };
        let report = verify_ten_term(&mut o2, &odd).unwrap();
        assert!(report.direct.is_zero() && report.sum.is_zero());
        let mut o3 = oracle(3);
        let spec = TenTermSpec { alpha: 2, beta: 2, gammas: vec![2], a: 1, b: 2, c: 2, d: 1 };
        assert!(verify_ten_term(&mut o3, &spec).unwrap().equal);
        let spec = TenTermSpec { alpha: 3, beta: 1, gammas: vec![2, 2], a: 1, b: 1, c: 3, d: 3 };
        assert!(verify_ten_term(&mut o3, &spec).unwrap().equal);
        assert!(matches!(
            verify_ten_term(&mut o3, &TenTermSpec { alpha: 1, ..spec }),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fourth_term_pairs_the_trace_with_the_first_entry() {
        // Grouping E{(A^{α-2-j})°(A^β)°} E{L_j° L°…} instead of
        // E{(A^{α-2-j})° L_j°} E{(A^β)° L°…} breaks the identity.
        let mut o = oracle(2);
        let spec = TenTermSpec { alpha: 4, beta: 1, gammas: vec![1], a: 1, b: 1, c: 1, d: 1 };
        let report = verify_ten_term(&mut o, &spec).unwrap();
        assert!(report.equal);
        let ce = Factor::centered_entry;
        let mut swapped = Rational::zero();
        for j in 0..=2u32 {
            swapped -= o.expectation(&[ce(2 - j, 1, 1), ce(1, 1, 1)]).unwrap()
                * o.expectation(&[Factor::centered_trace(j), Factor::centered_trace(1)]).unwrap();
        }
        swapped *= rat(1, 4);
        let alt_sum = &report.sum - &report.terms[3] + swapped;
        assert_ne!(alt_sum, report.direct);
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = MonomialSpec::parse(3, "A2(1,3)o L4 [L2o L1o]o").unwrap();
        assert_eq!(spec.factors.len(), 4);
        assert_eq!(spec.outer_group, Some(2));
        assert_eq!(spec.to_string(), "A2(1,3)o L4 [L2o L1o]o");
        assert_eq!(MonomialSpec::parse(3, &spec.to_string()).unwrap(), spec);
        assert!(MonomialSpec::parse(3, "A2(1,4)").is_err());
        assert!(MonomialSpec::parse(3, "B2").is_err());
        assert!(matches!(MonomialSpec::parse(2, "L8 L8"), Err(Error::Capacity(_))));
        let star = MonomialSpec::parse(2, "A1(1,2)*A1(2,1)").unwrap();
        assert_eq!(mixed_moment(&star).unwrap(), rat(1, 8));
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 2).len(), 3);
        assert_eq!(compositions(8, 3).len(), 21);
        assert!(compositions(2, 3).is_empty());
    }
}
