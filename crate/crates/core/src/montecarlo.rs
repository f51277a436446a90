//! Monte Carlo for Wigner and GUE matrices in the edge regime.
//!
//! Every sample `i` draws from its own ChaCha8 stream `(seed, i)`, samples
//! are evaluated on a dedicated rayon pool and collected in index order, and
//! all reductions go through the fixed-shape sums of [`crate::stats`]. The
//! worker count therefore never changes a result bit.

use num::complex::Complex64;
use num::{BigInt, Signed, ToPrimitive};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::eigen::{self, EigenDecomposition, HermitianMatrix};
use crate::error::{Error, Result};
use crate::law::EntryLaw;
use crate::majorant::RDecomposition;
use crate::series::{format_rational, rat, to_f64, Rational};
use crate::stats::{self, jackknife, neumaier_sum, Jackknife};

/// Fraction of excluded samples above which an estimate is flagged invalid.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;
/// Smallest sample count accepted by the covariance estimators.
pub const MIN_SAMPLES: usize = 100;

/// Default `χ₀`; regime points above it get a warning, not an error.
pub fn default_chi0() -> Rational {
    rat(1, 64)
}

/// `⌊(χ n²)^{1/3}⌋` in integer arithmetic.
pub fn regime_s(n: usize, chi: &Rational) -> Result<u32> {
    if !chi.is_positive() {
        return Err(Error::Domain(format!("chi must be positive, got {}", format_rational(chi))));
    }
    let scaled = chi.numer() * BigInt::from(n) * BigInt::from(n) / chi.denom();
    scaled
        .cbrt()
        .to_u32()
        .ok_or_else(|| Error::Capacity("s does not fit in 32 bits".into()))
}

/// `(n, χ', χ'')` with the derived half-degrees `s'`, `s''`.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimePoint {
    pub n: usize,
    pub chi1: Rational,
    pub chi2: Rational,
    pub s1: u32,
    pub s2: u32,
}

impl RegimePoint {
    pub fn from_chi(n: usize, chi1: Rational, chi2: Rational) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be positive".into()));
        }
        let s1 = regime_s(n, &chi1)?;
        let s2 = regime_s(n, &chi2)?;
        if s1 == 0 || s2 == 0 {
            return Err(Error::Domain(format!(
                "s' = {s1}, s'' = {s2} at n = {n}: (chi n^2)^(1/3) floors to 0; pass explicit s values"
            )));
        }
        Ok(Self { n, chi1, chi2, s1, s2 })
    }

    /// Fixed half-degrees; `χ` is reported as `s³/n²`.
    pub fn explicit(n: usize, s1: u32, s2: u32) -> Result<Self> {
        if n == 0 || s1 == 0 || s2 == 0 {
            return Err(Error::Domain("n, s', s'' must be positive".into()));
        }
        let chi = |s: u32| Rational::new(BigInt::from(s).pow(3), BigInt::from(n) * BigInt::from(n));
        Ok(Self { n, chi1: chi(s1), chi2: chi(s2), s1, s2 })
    }

    pub fn warnings(&self, chi0: &Rational) -> Vec<String> {
        [(&self.chi1, "chi'"), (&self.chi2, "chi''")]
            .into_iter()
            .filter(|(c, _)| *c > chi0)
            .map(|(c, name)| format!("{name} = {} exceeds chi0 = {}", format_rational(c), format_rational(chi0)))
            .collect()
    }
}

impl Serialize for RegimePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("RegimePoint", 5)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("chi1", &format_rational(&self.chi1))?;
        st.serialize_field("chi2", &format_rational(&self.chi2))?;
        st.serialize_field("s1", &self.s1)?;
        st.serialize_field("s2", &self.s2)?;
        st.end()
    }
}

/// Sampling configuration shared by all estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Threads in the pool; never affects results.
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64, workers: usize) -> Self {
        Self { samples, seed, workers }
    }

    fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Generator of sample `index` under master `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Wigner matrix `W = (X + iY)/√n`.
#[derive(Clone, Debug)]
pub struct HermitianSample {
    pub law: EntryLaw,
    pub seed: u64,
    pub index: u64,
    pub matrix: HermitianMatrix,
}

impl HermitianSample {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Draws sample `index`: off-diagonal parts with variance `1/8`, diagonal
/// with variance `1/4`, all scaled by `1/√n`. Entries are drawn column by
/// column over the lower triangle, real part before imaginary part.
pub fn sample_wigner(n: usize, law: &EntryLaw, seed: u64, index: u64) -> Result<HermitianSample> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let mut rng = sample_rng(seed, index);
    let scale = 1.0 / (n as f64).sqrt();
    let off = (1.0f64 / 8.0).sqrt();
    let matrix = HermitianMatrix::from_lower(n, |i, j| {
        if i == j {
            Complex64::new(scale * law.sample(&mut rng, 0.5), 0.0)
        } else {
            let re = law.sample(&mut rng, off);
            let im = law.sample(&mut rng, off);
            Complex64::new(scale * re, scale * im)
        }
    });
    Ok(HermitianSample { law: law.clone(), seed, index, matrix })
}

/// Ascending real spectrum of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn of(sample: &HermitianSample) -> Result<Self> {
        let values = eigen::eigenvalues(&sample.matrix)?;
        check_sum_rule(&values, &sample.matrix)?;
        Ok(Self { values })
    }

    /// `Σ λ^p`, compensated. Non-finite when a power overflows.
    pub fn trace_power(&self, power: u32) -> f64 {
        let p = power as i32;
        neumaier_sum(self.values.iter().map(|&x| x.powi(p)))
    }

    /// `Σ λ^p` for `p = 0..=max_power`.
    pub fn trace_powers(&self, max_power: u32) -> Vec<f64> {
        power_sums(&self.values, max_power)
    }
}

fn power_sums(values: &[f64], max_power: u32) -> Vec<f64> {
    let len = max_power as usize + 1;
    let mut sum = vec![0.0f64; len];
    let mut comp = vec![0.0f64; len];
    for &x in values {
        let mut power = 1.0f64;
        for p in 0..len {
            let t = sum[p] + power;
            if sum[p].abs() >= power.abs() {
                comp[p] += (sum[p] - t) + power;
            } else {
                comp[p] += (power - t) + sum[p];
            }
            sum[p] = t;
            power *= x;
        }
    }
    sum.iter().zip(&comp).map(|(s, c)| s + c).collect()
}

fn check_sum_rule(values: &[f64], m: &HermitianMatrix) -> Result<()> {
    let sum = neumaier_sum(values.iter().copied());
    let scale = values.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    if (sum - m.trace()).abs() > 1e-9 * scale {
        return Err(Error::Numerical(format!("eigenvalue sum {sum} differs from trace {}", m.trace())));
    }
    Ok(())
}

/// Runs `f` for every sample index on a pool of `workers` threads and
/// returns the outputs in index order.
pub fn run_samples<T, F>(config: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..config.samples as u64).into_par_iter().map(&f).collect())
}

/// Mean and standard error of one scalar statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl From<Jackknife> for Estimate {
    fn from(j: Jackknife) -> Self {
        Self { mean: j.estimate, stderr: j.std_error }
    }
}

impl Estimate {
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

/// `(1/n) E Tr W^p` estimates.
#[derive(Clone, Debug, Serialize)]
pub struct MomentEstimate {
    pub power: u32,
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub excluded: usize,
}

pub fn estimate_moments(n: usize, law: &EntryLaw, powers: &[u32], config: &McConfig) -> Result<Vec<MomentEstimate>> {
    if config.samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let max = powers.iter().copied().max().unwrap_or(0);
    let rows = run_samples(config, |i| {
        let sample = sample_wigner(n, law, config.seed, i)?;
        let traces = Spectrum::of(&sample)?.trace_powers(max);
        Ok(powers.iter().map(|&p| traces[p as usize] / n as f64).collect::<Vec<f64>>())
    })?;
    let (rows, excluded) = finite_rows(rows);
    if rows.len() < 2 {
        return Err(Error::Numerical("fewer than two finite samples".into()));
    }
    Ok(powers
        .iter()
        .enumerate()
        .map(|(k, &power)| {
            let j = jackknife(&rows, powers.len(), |m, _| m[k]);
            MomentEstimate { power, mean: j.estimate, stderr: j.std_error, n_samples: rows.len(), excluded }
        })
        .collect())
}

fn finite_rows(rows: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, usize) {
    let total = rows.len();
    let kept: Vec<Vec<f64>> = rows.into_iter().filter(|r| r.iter().all(|x| x.is_finite())).collect();
    let excluded = total - kept.len();
    (kept, excluded)
}

/// Estimate of `K_n(s', s'') = Cov(Tr W^{2s'}, Tr W^{2s''})`.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceEstimate {
    pub law: String,
    pub regime: RegimePoint,
    pub mean: f64,
    pub stderr: f64,
    /// Samples entering the estimate.
    pub n_samples: usize,
    pub excluded: usize,
    pub valid: bool,
    pub seed: u64,
}

#[allow(non_snake_case)]
pub fn estimate_K(regime: &RegimePoint, law: &EntryLaw, config: &McConfig) -> Result<CovarianceEstimate> {
    if config.samples < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {}", config.samples)));
    }
    let (p1, p2) = (2 * regime.s1, 2 * regime.s2);
    let rows = run_samples(config, |i| {
        let sample = sample_wigner(regime.n, law, config.seed, i)?;
        let spectrum = Spectrum::of(&sample)?;
        Ok(vec![spectrum.trace_power(p1), spectrum.trace_power(p2)])
    })?;
    let (rows, excluded) = finite_rows(rows);
    let valid = (excluded as f64) <= MAX_EXCLUDED_FRACTION * config.samples as f64 && rows.len() >= 2;
    let (mean, stderr) = if rows.len() >= 2 {
        // covariance is shift invariant; centring on the first row keeps the
        // product column free of cancellation
        let (a0, b0) = (rows[0][0], rows[0][1]);
        let shifted: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let (a, b) = (r[0] - a0, r[1] - b0);
                vec![a, b, a * b]
            })
            .collect();
        let j = jackknife(&shifted, 3, |m, k| (m[2] - m[0] * m[1]) * k as f64 / (k - 1) as f64);
        (j.estimate, j.std_error)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CovarianceEstimate {
        law: law.name(),
        regime: regime.clone(),
        mean,
        stderr,
        n_samples: rows.len(),
        excluded,
        valid,
        seed: config.seed,
    })
}

/// Seed used for the `k`-th law of a multi-law run.
pub fn law_seed(master: u64, k: usize) -> u64 {
    master.wrapping_add(k as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct LawEstimate {
    pub law: String,
    #[serde(rename = "K_mean")]
    pub k_mean: f64,
    #[serde(rename = "K_stderr")]
    pub k_stderr: f64,
    pub excluded: usize,
    pub valid: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub law_a: String,
    pub law_b: String,
    pub delta: f64,
    pub se_combined: f64,
    pub pass: bool,
    /// Set when either estimate is invalid; `pass` is then false.
    pub inconclusive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniversalityReport {
    pub regime: RegimePoint,
    pub n_samples: usize,
    pub seed: u64,
    pub per_law: Vec<LawEstimate>,
    pub comparisons: Vec<Comparison>,
    pub warnings: Vec<String>,
}

impl UniversalityReport {
    pub fn pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }
}

/// `K_n(s, s)` for every law and all pairwise differences at 3 combined SE.
pub fn universality_test(regime: &RegimePoint, laws: &[EntryLaw], config: &McConfig) -> Result<UniversalityReport> {
    if laws.is_empty() {
        return Err(Error::Domain("need at least one law".into()));
    }
    let mut per_law = Vec::with_capacity(laws.len());
    for (k, law) in laws.iter().enumerate() {
        let seed = law_seed(config.seed, k);
        let est = estimate_K(regime, law, &config.with_seed(seed))?;
        per_law.push(LawEstimate {
            law: law.name(),
            k_mean: est.mean,
            k_stderr: est.stderr,
            excluded: est.excluded,
            valid: est.valid,
            seed,
        });
    }
    let mut comparisons = Vec::new();
    for a in 0..per_law.len() {
        for b in a + 1..per_law.len() {
            let (x, y) = (&per_law[a], &per_law[b]);
            let delta = x.k_mean - y.k_mean;
            let se_combined = x.k_stderr.hypot(y.k_stderr);
            let inconclusive = !(x.valid && y.valid);
            comparisons.push(Comparison {
                law_a: x.law.clone(),
                law_b: y.law.clone(),
                delta,
                se_combined,
                pass: !inconclusive && stats::within_se(x.k_mean, y.k_mean, x.k_stderr, y.k_stderr, 3.0),
                inconclusive,
            });
        }
    }
    Ok(UniversalityReport {
        regime: regime.clone(),
        n_samples: config.samples,
        seed: config.seed,
        per_law,
        comparisons,
        warnings: regime.warnings(&default_chi0()),
    })
}

/// `(A^p)_{xy} = Σ_k v_k(x) conj(v_k(y)) λ_k^p` from an eigendecomposition.
pub fn power_entry(eig: &EigenDecomposition, p: u32, x: usize, y: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &lambda) in eig.values.iter().enumerate() {
        let v = eig.vector(k);
        acc += v[x] * v[y].conj() * lambda.powi(p as i32);
    }
    acc
}

/// `E Re Π (A^{p})_{xy}` over GUE samples, indices 1-based.
pub fn estimate_entry_product(n: usize, factors: &[(u32, usize, usize)], config: &McConfig) -> Result<Estimate> {
    if factors.iter().any(|&(_, x, y)| x == 0 || y == 0 || x > n || y > n) {
        return Err(Error::Domain(format!("entry index outside 1..={n}")));
    }
    if config.samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let rows = run_samples(config, |i| {
        let sample = sample_wigner(n, &EntryLaw::Gaussian, config.seed, i)?;
        let eig = eigen::eigen_decomposition(&sample.matrix)?;
        let product = factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, &(p, x, y)| acc * power_entry(&eig, p, x - 1, y - 1));
        Ok(vec![product.re])
    })?;
    Ok(jackknife(&rows, 1, |m, _| m[0]).into())
}

/// Column layout of the per-sample vector used by [`estimate_r_terms`].
struct RLayout {
    p1: usize,
    p2: usize,
    max: usize,
}

impl RLayout {
    // [L_0..L_max | X1 X2 | D1 D2 | Q1 Q2]
    fn trace(&self, a: usize) -> usize {
        a
    }
    fn cross(&self, k: usize) -> usize {
        self.max + 1 + k
    }
    fn diag(&self, k: usize) -> usize {
        self.max + 3 + k
    }
    fn offdiag(&self, k: usize) -> usize {
        self.max + 5 + k
    }
    fn dim(&self) -> usize {
        self.max + 7
    }
    fn power(&self, k: usize) -> usize {
        [self.p1, self.p2][k]
    }
}

/// Monte Carlo version of the four-way split of the GUE double sum, with
/// jackknife errors, plus the `S^{(4)}` analogue when `with_s4` is set.
///
/// By permutation invariance `E(A^a)_{xx} = M_a` for every `x`, so the first
/// factor of each term depends only on trace moments, and the centred
/// correlations take one value on the diagonal and one off it. The sample
/// vector therefore holds the normalised traces, the trace products
/// `Σ_a Tr A^a Tr A^{p-a}`, the diagonal products `Σ_a Σ_x (A^a)_{xx}(A^{p-a})_{xx}`
/// and, for `S^{(4)}`, the off-diagonal products `Σ_a Σ_{x≠y} (A^a)_{xy}(A^{p-a})_{xy}`.
pub fn estimate_r_terms(regime: &RegimePoint, config: &McConfig, v4: Rational, h: f64, with_s4: bool) -> Result<RDecomposition> {
    if config.samples < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {}", config.samples)));
    }
    let n = regime.n;
    let (p1, p2) = (2 * regime.s1 as usize, 2 * regime.s2 as usize);
    let layout = RLayout { p1, p2, max: p1.max(p2) };
    let rows = run_samples(config, |i| {
        let sample = sample_wigner(n, &EntryLaw::Gaussian, config.seed, i)?;
        let eig = eigen::eigen_decomposition(&sample.matrix)?;
        check_sum_rule(&eig.values, &sample.matrix)?;
        Ok(r_sample_row(&eig, n, &layout, with_s4))
    })?;
    let (rows, excluded) = finite_rows(rows);
    let valid = (excluded as f64) <= MAX_EXCLUDED_FRACTION * config.samples as f64;
    if rows.len() < 2 {
        return Err(Error::Numerical("fewer than two finite samples".into()));
    }
    let nf = n as f64;
    let moments_product = |m: &[f64], p: usize| -> f64 { (0..=p).map(|a| m[layout.trace(a)] * m[layout.trace(p - a)]).sum() };
    // (Σ_x g(x,x), Σ_{x,y} g(x,y)) for half-degree slot k
    let g_sums = |m: &[f64], k: usize| -> (f64, f64) {
        let c = moments_product(m, layout.power(k));
        (m[layout.diag(k)] - nf * c, m[layout.cross(k)] - nf * nf * c)
    };
    let r4 = |m: &[f64]| -> f64 {
        let (d1, t1) = g_sums(m, 0);
        let (d2, t2) = g_sums(m, 1);
        let mut out = d1 * d2 / nf;
        if n > 1 {
            out += (t1 - d1) * (t2 - d2) / (nf * (nf - 1.0));
        }
        out
    };
    let dim = layout.dim();
    let terms: [Jackknife; 4] = [
        jackknife(&rows, dim, |m, _| nf * nf * moments_product(m, p1) * moments_product(m, p2)),
        jackknife(&rows, dim, |m, _| moments_product(m, p1) * g_sums(m, 1).1),
        jackknife(&rows, dim, |m, _| g_sums(m, 0).1 * moments_product(m, p2)),
        jackknife(&rows, dim, |m, _| r4(m)),
    ];
    let mut out = RDecomposition::from_estimates(
        n,
        regime.s1,
        regime.s2,
        terms.map(|j| j.estimate),
        terms.map(|j| j.std_error),
        v4,
        h,
        Some((to_f64(&regime.chi1), to_f64(&regime.chi2))),
    );
    if with_s4 {
        let s4 = jackknife(&rows, dim, |m, _| {
            let (d1, _) = g_sums(m, 0);
            let (d2, _) = g_sums(m, 1);
            let mut out = d1 * d2 / nf;
            if n > 1 {
                out += m[layout.offdiag(0)] * m[layout.offdiag(1)] / (nf * (nf - 1.0));
            }
            out
        });
        out.s4 = Some(s4.estimate);
        out.s4_std_error = Some(s4.std_error);
    }
    if !valid {
        out.warnings.push(format!("{excluded} of {} samples excluded", config.samples));
    }
    Ok(out)
}

fn r_sample_row(eig: &EigenDecomposition, n: usize, layout: &RLayout, with_s4: bool) -> Vec<f64> {
    let max = layout.max;
    let mut row = vec![0.0; layout.dim()];
    let traces = power_sums(&eig.values, max as u32);
    for a in 0..=max {
        row[layout.trace(a)] = traces[a] / n as f64;
    }
    // powers[k][a] = λ_k^a
    let powers: Vec<Vec<f64>> = eig
        .values
        .iter()
        .map(|&x| {
            let mut out = Vec::with_capacity(max + 1);
            let mut acc = 1.0;
            for _ in 0..=max {
                out.push(acc);
                acc *= x;
            }
            out
        })
        .collect();
    // diagonal[x][a] = (A^a)_{xx}
    let mut diagonal = vec![vec![0.0; max + 1]; n];
    for (k, pw) in powers.iter().enumerate() {
        for (x, v) in eig.vector(k).iter().enumerate() {
            let w = v.norm_sqr();
            for (d, p) in diagonal[x].iter_mut().zip(pw) {
                *d += w * p;
            }
        }
    }
    for k in 0..2 {
        let p = layout.power(k);
        row[layout.cross(k)] = (0..=p).map(|a| traces[a] * traces[p - a]).sum();
        row[layout.diag(k)] = neumaier_sum(diagonal.iter().map(|d| (0..=p).map(|a| d[a] * d[p - a]).sum::<f64>()));
    }
    if with_s4 {
        // Σ_{x,y} (A^a)_{xy}(A^b)_{xy} = Σ_{k,j} λ_k^a λ_j^b |Σ_x v_k(x) v_j(x)|²
        let mut overlap = vec![0.0; n * n];
        for k in 0..n {
            for j in k..n {
                let s: Complex64 = eig.vector(k).iter().zip(eig.vector(j)).map(|(a, b)| a * b).sum();
                overlap[k * n + j] = s.norm_sqr();
                overlap[j * n + k] = s.norm_sqr();
            }
        }
        for slot in 0..2 {
            let p = layout.power(slot);
            let mut full = 0.0;
            for k in 0..n {
                for j in 0..n {
                    let o = overlap[k * n + j];
                    if o == 0.0 {
                        continue;
                    }
                    full += o * (0..=p).map(|a| powers[k][a] * powers[j][p - a]).sum::<f64>();
                }
            }
            row[layout.offdiag(slot)] = full - row[layout.diag(slot)];
        }
    }
    row
}

/// Mean of `(1/n) Tr W^{2s}` per sample, for checks against `m_s`.
pub fn normalized_trace_power(spectrum: &Spectrum, s: u32) -> f64 {
    spectrum.trace_power(2 * s) / spectrum.values.len() as f64
}
