//! Dense complex Hermitian linear algebra for small matrices.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenvalues below this are treated as rounding noise and clamped to zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// Allowed deviation of a density operator's trace from one.
pub const TRACE_TOL: f64 = 1e-8;

/// Square complex matrix stored row-major. The type does not enforce
/// Hermiticity on construction; [`HermitianMatrix::max_asymmetry`] reports it
/// and every consumer that needs it checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, C64::new(d, 0.0));
        }
        m
    }

    /// Build from row-major data; fails when the length is not a square.
    pub fn from_row_major(dim: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(data.len(), dim * dim));
        }
        Ok(HermitianMatrix { dim, data })
    }

    /// Build from rows and verify Hermiticity to 1e-12.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch(r.len(), dim));
            }
            data.extend_from_slice(r);
        }
        let m = HermitianMatrix { dim, data };
        let asym = m.max_asymmetry();
        if asym > 1e-12 {
            return Err(Error::NotHermitian(asym));
        }
        Ok(m)
    }

    /// Rank-one operator `w · |v⟩⟨v|`.
    pub fn outer(v: &[C64], w: f64) -> Self {
        let dim = v.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = v[i] * v[j].conj() * w;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> Self {
        HermitianMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add_scaled(&mut self, other: &HermitianMatrix, s: f64) {
        assert_eq!(self.dim, other.dim, "dimension mismatch in add_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Replace the matrix by `(H + H†)/2`.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self.get(i, i);
            self.set(i, i, C64::new(d.re, 0.0));
            for j in (i + 1)..n {
                let avg = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                self.set(i, j, avg);
                self.set(j, i, avg.conj());
            }
        }
    }

    /// Principal submatrix on the given index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let d = idx.len();
        let mut m = Self::zeros(d);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m.set(a, b, self.get(i, j));
            }
        }
        m
    }

    /// Expectation value `⟨v|H|v⟩` (real part).
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            let mut row = ZERO;
            for j in 0..n {
                row += self.get(i, j) * v[j];
            }
            acc += v[i].conj() * row;
        }
        acc.re
    }

    /// Matrix product `self · other` (not necessarily Hermitian).
    pub fn matmul(&self, other: &HermitianMatrix) -> HermitianMatrix {
        let n = self.dim;
        assert_eq!(n, other.dim, "dimension mismatch in matmul");
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// Check the density-operator invariants: Hermitian, PSD and unit trace.
    pub fn validate_density(&self, trace_target: f64) -> Result<()> {
        let asym = self.max_asymmetry();
        if asym > 1e-12 * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian(asym));
        }
        let tr = self.trace();
        if (tr - trace_target).abs() > TRACE_TOL {
            return Err(Error::Trace { found: tr, expected: trace_target });
        }
        Ok(())
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V · diag(f(λ)) · V†`.
    pub fn reconstruct_with<F: Fn(f64) -> f64>(&self, f: F) -> HermitianMatrix {
        let n = self.dim();
        let mut m = HermitianMatrix::zeros(n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            let v = &self.vectors[k];
            for i in 0..n {
                let vi = v[i] * w;
                for j in 0..n {
                    m.data[i * n + j] += vi * v[j].conj();
                }
            }
        }
        m
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.reconstruct_with(|x| x)
    }

    /// Pairs sorted by descending eigenvalue.
    pub fn descending(&self) -> Vec<(f64, Vec<C64>)> {
        self.values
            .iter()
            .zip(&self.vectors)
            .rev()
            .map(|(&l, v)| (l, v.clone()))
            .collect()
    }
}

/// Index of the first component whose modulus is at least half the largest.
pub fn leading_component(v: &[C64]) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter().position(|z| z.norm() >= 0.5 * max).unwrap_or(0)
}

/// Rotate `v` so that its leading component is real and positive.
pub fn fix_gauge(v: &mut [C64]) {
    let k = leading_component(v);
    let z = v[k];
    if z.norm() == 0.0 {
        return;
    }
    let phase = z.conj() / z.norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
}

fn first_significant(v: &[C64]) -> usize {
    v.iter().position(|z| z.norm() > 1e-8).unwrap_or(v.len())
}

/// Cyclic complex Jacobi eigendecomposition.
pub fn hermitian_eigen(h: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let scale = h.max_abs().max(1.0);
    let asym = h.max_asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotHermitian(asym));
    }
    let mut a = h.clone();
    a.hermitize();
    let mut v = HermitianMatrix::identity(n);
    let frob: f64 = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).norm_sqr();
            }
        }
        if off.sqrt() <= 1e-17 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let r = apq.norm();
                if r <= 1e-300 || r <= 1e-18 * frob {
                    a.set(p, q, ZERO);
                    a.set(q, p, ZERO);
                    continue;
                }
                let phase = apq / r;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let pc = phase.conj();
                let u_pp = C64::new(c, 0.0);
                let u_pq = C64::new(s, 0.0);
                let u_qp = -pc * s;
                let u_qq = pc * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * u_pp + akq * u_qp);
                    a.set(k, q, akp * u_pq + akq * u_qq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, u_pp.conj() * apk + u_qp.conj() * aqk);
                    a.set(q, k, u_pq.conj() * apk + u_qq.conj() * aqk);
                }
                a.set(p, q, ZERO);
                a.set(q, p, ZERO);
                let dp = a.get(p, p).re;
                let dq = a.get(q, q).re;
                a.set(p, p, C64::new(dp, 0.0));
                a.set(q, q, C64::new(dq, 0.0));
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * u_pp + vkq * u_qp);
                    v.set(k, q, vkp * u_pq + vkq * u_qq);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<C64>)> = (0..n)
        .map(|k| {
            let mut col: Vec<C64> = (0..n).map(|i| v.get(i, k)).collect();
            fix_gauge(&mut col);
            (a.get(k, k).re, col)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Near-degenerate groups are ordered by the first significant component.
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (pairs[end].0 - pairs[end - 1].0).abs() <= tie {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by_key(|p| first_significant(&p.1));
        }
        start = end;
    }
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(EigenDecomposition { values, vectors })
}

/// Positive semidefinite square root; eigenvalues in `[-1e-10, 0)` are clamped.
pub fn psd_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = hermitian_eigen(h)?;
    if let Some(&bad) = eig.values.iter().find(|&&l| l < -PSD_CLAMP) {
        return Err(Error::NotPsd(bad));
    }
    let floor = noise_floor(&eig.values);
    let mut s = eig.reconstruct_with(|l| if l > floor { l.sqrt() } else { 0.0 });
    s.hermitize();
    Ok(s)
}

/// Eigenvalues at or below this level are rounding noise of a zero.
fn noise_floor(values: &[f64]) -> f64 {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    values.len() as f64 * f64::EPSILON * top
}

fn check_state(rho: &HermitianMatrix) -> Result<()> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::Trace { found: tr, expected: 1.0 });
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²` via the eigenvalues of `√ρ σ √ρ`.
pub fn fidelity(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    check_state(rho)?;
    check_state(sigma)?;
    let sr = psd_sqrt(rho)?;
    let mut m = sr.matmul(sigma).matmul(&sr);
    m.hermitize();
    let eig = hermitian_eigen(&m)?;
    let floor = noise_floor(&eig.values);
    let root_sum: f64 = eig.values.iter().filter(|&&l| l > floor).map(|l| l.sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

/// Bures distance `√(2(1 − √F))`.
pub fn bures_distance(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok(bures_from_fidelity(f))
}

pub fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 * (1.0 - f.clamp(0.0, 1.0).sqrt())).max(0.0).sqrt()
}

/// Inner product `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalized(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    v.iter().map(|z| z / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let mut m = HermitianMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, C64::new(rng.gen_range(-1.0..1.0), 0.0));
            for j in (i + 1)..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    fn random_density(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let mut m = HermitianMatrix::zeros(n);
        for _ in 0..rank {
            let v: Vec<C64> =
                (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            m.add_scaled(&HermitianMatrix::outer(&v, 1.0), rng.gen_range(0.1..1.0));
        }
        let tr = m.trace();
        m.scaled(1.0 / tr)
    }

    #[test]
    fn identity_and_pauli_x() {
        let e = hermitian_eigen(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let x = HermitianMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]).unwrap();
        let e = hermitian_eigen(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected_with_asymmetry() {
        let m = HermitianMatrix::from_row_major(2, vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        match hermitian_eigen(&m) {
            Err(Error::NotHermitian(a)) => assert!((a - 1.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Eigenvalues checked against the roots of the characteristic polynomial
    /// located by bisection on Sturm-free sign changes of det(H − λI).
    #[test]
    fn random_6x6_matches_characteristic_polynomial_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(6, &mut rng);
        let e = hermitian_eigen(&h).unwrap();
        let det = |lam: f64| -> f64 {
            // Complex Gaussian elimination with partial pivoting.
            let n = 6;
            let mut a: Vec<Vec<C64>> = (0..n)
                .map(|i| (0..n).map(|j| h.get(i, j) - if i == j { C64::new(lam, 0.0) } else { ZERO }).collect())
                .collect();
            let mut d = ONE;
            for c in 0..n {
                let p = (c..n).max_by(|&x, &y| a[x][c].norm().total_cmp(&a[y][c].norm())).unwrap();
                if p != c {
                    a.swap(p, c);
                    d = -d;
                }
                let piv = a[c][c];
                d *= piv;
                for r in (c + 1)..n {
                    let f = a[r][c] / piv;
                    for k in c..n {
                        let t = a[c][k];
                        a[r][k] -= f * t;
                    }
                }
            }
            d.re
        };
        // Scan a fine grid for sign changes, then bisect.
        let mut roots = Vec::new();
        let (lo, hi) = (-10.0, 10.0);
        let steps = 200_000;
        let mut prev = det(lo);
        for s in 1..=steps {
            let x = lo + (hi - lo) * s as f64 / steps as f64;
            let cur = det(x);
            if prev == 0.0 || prev.signum() != cur.signum() {
                let (mut a, mut b) = (x - (hi - lo) / steps as f64, x);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if det(a).signum() == det(m).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = cur;
        }
        assert_eq!(roots.len(), 6);
        for (r, l) in roots.iter().zip(&e.values) {
            assert!((r - l).abs() < 1e-9, "{r} vs {l}");
        }
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 17, 35] {
            let h = random_hermitian(n, &mut rng);
            let e = hermitian_eigen(&h).unwrap();
            let err = e.reconstruct().max_abs_diff(&h);
            assert!(err <= 1e-10 * h.max_abs().max(1.0), "n={n} err={err}");
            for i in 0..n {
                for j in 0..n {
                    let ip = inner(&e.vectors[i], &e.vectors[j]);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - C64::new(target, 0.0)).norm() < 1e-10);
                }
            }
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn psd_sqrt_cases() {
        let s = psd_sqrt(&HermitianMatrix::identity(2)).unwrap();
        assert!(s.max_abs_diff(&HermitianMatrix::identity(2)) < 1e-14);
        let s = psd_sqrt(&HermitianMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        assert!(s.max_abs_diff(&HermitianMatrix::from_real_diagonal(&[2.0, 3.0])) < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_density(5, 5, &mut rng);
        let s = psd_sqrt(&h).unwrap();
        assert!(s.matmul(&s).max_abs_diff(&h) < 1e-9);
        let q = psd_sqrt(&s).unwrap();
        assert!(q.matmul(&q).max_abs_diff(&s) < 1e-8);
        let neg = HermitianMatrix::from_real_diagonal(&[1.0, -1e-6]);
        assert_eq!(psd_sqrt(&neg), Err(Error::NotPsd(-1e-6)));
    }

    #[test]
    fn fidelity_cases() {
        let zero = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]);
        let plus = HermitianMatrix::outer(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)], 0.5);
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-12);
        assert!((bures_distance(&zero, &HermitianMatrix::from_real_diagonal(&[0.0, 1.0])).unwrap()
            - 2f64.sqrt())
        .abs()
            < 1e-12);
        let bad = HermitianMatrix::from_real_diagonal(&[0.5, 0.4]);
        assert!(matches!(fidelity(&bad, &zero), Err(Error::Trace { .. })));
    }

    /// For commuting (simultaneously diagonal) states the fidelity is the
    /// squared Bhattacharyya coefficient of the spectra; conjugating both by
    /// the same random unitary must leave it unchanged.
    #[test]
    fn fidelity_matches_classical_oracle_under_common_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        };
        let q: Vec<f64> = {
            let raw: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        };
        let bc: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
        let expected = bc * bc;
        let u = hermitian_eigen(&random_hermitian(4, &mut rng)).unwrap().vectors;
        let rot = |d: &[f64]| {
            let mut m = HermitianMatrix::zeros(4);
            for (k, &w) in d.iter().enumerate() {
                m.add_scaled(&HermitianMatrix::outer(&u[k], 1.0), w);
            }
            m
        };
        let (r, s) = (rot(&p), rot(&q));
        let f = fidelity(&r, &s).unwrap();
        assert!((f - expected).abs() < 1e-8, "{f} vs {expected}");
        assert!((fidelity(&s, &r).unwrap() - f).abs() < 1e-8);
    }

    #[test]
    fn projection_fidelity_equals_captured_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(6, 3, &mut rng);
        let keep = [0usize, 1, 3];
        let mut proj = HermitianMatrix::zeros(6);
        for &i in &keep {
            for &j in &keep {
                proj.set(i, j, rho.get(i, j));
            }
        }
        let p = proj.trace();
        let f = fidelity(&rho, &proj.scaled(1.0 / p)).unwrap();
        assert!((f - p).abs() < 1e-8);
    }

    #[test]
    fn bures_triangle_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = random_density(4, 2, &mut rng);
            let b = random_density(4, 3, &mut rng);
            let c = random_density(4, 4, &mut rng);
            let ac = bures_distance(&a, &c).unwrap();
            let ab = bures_distance(&a, &b).unwrap();
            let bc = bures_distance(&b, &c).unwrap();
            assert!(ac <= ab + bc + 1e-10);
            assert!(bures_distance(&a, &a).unwrap() < 1e-6);
        }
    }
}
