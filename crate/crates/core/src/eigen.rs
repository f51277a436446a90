//! Dense Hermitian eigensolver.
//!
//! The matrix is reduced to a real symmetric tridiagonal one by Householder
//! reflectors acting on the lower triangle, then diagonalised by implicit
//! QL with Wilkinson-type shifts. Eigenvectors, when requested, come from
//! accumulating the plane rotations and applying the reflectors afterwards.

use num::complex::Complex64;

use crate::error::{Error, Result};

/// Sweeps allowed per eigenvalue before the iteration is declared stuck.
pub const QL_ITERATION_CAP: usize = 60;

/// Dense Hermitian matrix, column-major. Only the lower triangle is read by
/// the solver; the upper triangle is kept consistent for convenience.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    /// Builds from a closure giving the entries on and below the diagonal.
    pub fn from_lower(n: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in j..n {
                let z = entry(i, j);
                let z = if i == j { Complex64::new(z.re, 0.0) } else { z };
                m.set(i, j, z);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i + j * self.n]
    }

    /// Sets `(i, j)` and its mirror `(j, i)` to the conjugate.
    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.data[i + j * self.n] = z;
        self.data[j + i * self.n] = z.conj();
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    /// `Tr W² = Σ |W_ij|²`.
    pub fn frobenius_sq(&self) -> f64 {
        crate::stats::neumaier_sum(self.data.iter().map(|z| z.norm_sqr()))
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `W v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for (j, &vj) in v.iter().enumerate() {
            let col = &self.data[j * self.n..(j + 1) * self.n];
            for (o, &a) in out.iter_mut().zip(col) {
                *o += a * vj;
            }
        }
        out
    }
}

/// Eigenvalues in ascending order with unit eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    n: usize,
    vectors: Vec<Complex64>,
}

impl EigenDecomposition {
    /// Eigenvector belonging to `values[k]`.
    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    /// `‖W v_k − λ_k v_k‖₂`.
    pub fn residual(&self, m: &HermitianMatrix, k: usize) -> f64 {
        let v = self.vector(k);
        let wv = m.apply(v);
        wv.iter().zip(v).map(|(a, b)| (a - b * self.values[k]).norm_sqr()).sum::<f64>().sqrt()
    }
}

struct Tridiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
    /// Reflector vectors below the first unit entry, stored in the columns.
    reflectors: Vec<Complex64>,
    taus: Vec<Complex64>,
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn tridiagonalize(m: &HermitianMatrix) -> Tridiagonal {
    let n = m.n;
    let mut a = m.data.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut taus = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let zero = Complex64::new(0.0, 0.0);
    let mut p = vec![zero; n];
    for k in 0..n.saturating_sub(1) {
        let size = n - k - 1;
        let base = k * n + k + 1;
        // generate the reflector that annihilates a[k+2.., k]
        let alpha = a[base];
        let xnorm = a[base + 1..base + size].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let tau = if xnorm == 0.0 && alpha.im == 0.0 {
            e[k] = alpha.re;
            zero
        } else {
            let beta = -(alpha.re.hypot(alpha.im).hypot(xnorm)).copysign(alpha.re);
            let tau = Complex64::new((beta - alpha.re) / beta, -alpha.im / beta);
            let scale = Complex64::new(1.0, 0.0) / (alpha - beta);
            for z in &mut a[base + 1..base + size] {
                *z *= scale;
            }
            e[k] = beta;
            tau
        };
        taus[k] = tau;
        if tau != zero {
            a[base] = Complex64::new(1.0, 0.0);
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let v = &head[base..base + size];
            // p = tau · A22 v, reading the lower triangle of the trailing block
            let p = &mut p[..size];
            p.iter_mut().for_each(|z| *z = zero);
            for j in 0..size {
                let col = &tail[j * n + k + 1 + j..(j + 1) * n];
                let vj = v[j];
                p[j] += col[0] * vj;
                let mut acc = zero;
                for (i, &aij) in col.iter().enumerate().skip(1) {
                    p[j + i] += aij * vj;
                    acc += aij.conj() * v[j + i];
                }
                p[j] += acc;
            }
            for z in p.iter_mut() {
                *z *= tau;
            }
            let shift = -0.5 * tau * dotc(p, v);
            for (w, &vi) in p.iter_mut().zip(v) {
                *w += shift * vi;
            }
            // A22 -= v wᴴ + w vᴴ on the lower triangle
            for j in 0..size {
                let (vj, wj) = (v[j].conj(), p[j].conj());
                let col = &mut tail[j * n + k + 1 + j..(j + 1) * n];
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= v[j + i] * wj + p[j + i] * vj;
                }
            }
        }
        d[k] = a[k * n + k].re;
    }
    if n > 0 {
        d[n - 1] = a[n * n - 1].re;
    }
    Tridiagonal { d, e, reflectors: a, taus }
}

/// Implicit QL on a real symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[k]` couples `k` and `k+1`). On success `d` holds the
/// eigenvalues, unsorted. If `z` is given (column-major `n × n`) the rotations
/// are accumulated into its columns.
pub fn tridiagonal_ql(d: &mut [f64], e: &[f64], mut z: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    let mut e: Vec<f64> = e.iter().copied().chain(std::iter::once(0.0)).collect();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > QL_ITERATION_CAP {
                return Err(Error::Numerical(format!(
                    "QL iteration did not converge for eigenvalue {l} after {QL_ITERATION_CAP} sweeps"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_deref_mut() {
                    let (left, right) = z.split_at_mut((i + 1) * n);
                    let zi = &mut left[i * n..];
                    let zi1 = &mut right[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let f = *b;
                        *b = s * *a + c * f;
                        *a = c * *a - s * f;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// All eigenvalues, ascending.
pub fn eigenvalues(m: &HermitianMatrix) -> Result<Vec<f64>> {
    let mut t = tridiagonalize(m);
    tridiagonal_ql(&mut t.d, &t.e, None)?;
    t.d.sort_by(f64::total_cmp);
    Ok(t.d)
}

/// Eigenvalues, ascending, with eigenvectors.
pub fn eigen_decomposition(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = m.n;
    let mut t = tridiagonalize(m);
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(&mut t.d, &t.e, Some(&mut z))?;
    let mut vectors: Vec<Complex64> = z.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    // V = H(0) H(1) ⋯ H(n-2) Z
    for k in (0..n.saturating_sub(1)).rev() {
        let tau = t.taus[k];
        if tau == Complex64::new(0.0, 0.0) {
            continue;
        }
        let size = n - k - 1;
        let mut v = t.reflectors[k * n + k + 1..(k + 1) * n].to_vec();
        v[0] = Complex64::new(1.0, 0.0);
        debug_assert_eq!(v.len(), size);
        for col in vectors.chunks_exact_mut(n) {
            let seg = &mut col[k + 1..];
            let s = tau * dotc(&v, seg);
            for (x, &vi) in seg.iter_mut().zip(&v) {
                *x -= s * vi;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| t.d[a].total_cmp(&t.d[b]));
    let values = order.iter().map(|&k| t.d[k]).collect();
    let mut sorted = Vec::with_capacity(n * n);
    for &k in &order {
        sorted.extend_from_slice(&vectors[k * n..(k + 1) * n]);
    }
    Ok(EigenDecomposition { values, n, vectors: sorted })
}
