//! Dense complex matrices and a Hermitian eigensolver.
//!
//! Matrices here are small (at most a few hundred rows), so everything is a
//! row-major `Vec<C64>` and products are plain triple loops.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Square complex matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major entries; `entries.len()` must be a
    /// perfect square.
    pub fn from_row_major(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, data: entries })
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// `|row⟩⟨col|` in a space of dimension `dim`.
    pub fn outer_basis(dim: usize, row: usize, col: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(row, col)] = C64::new(1.0, 0.0);
        m
    }

    /// `|a⟩⟨b|` for arbitrary vectors.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |r, c| a[r] * b[c].conj())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.dim).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            let out_row = &mut out.data[r * n..(r + 1) * n];
            for k in 0..n {
                let a = self.data[r * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.dim, v.len(), "matrix-vector dimension mismatch");
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (m, n) = (self.dim, rhs.dim);
        Self::from_fn(m * n, |r, c| self[(r / n, c / n)] * rhs[(r % n, c % n)])
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + A†) / 2`.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for r in 0..n {
            self.data[r * n + r].im = 0.0;
            for c in r + 1..n {
                let avg = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
                self.data[r * n + c] = avg;
                self.data[c * n + r] = avg.conj();
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v.norm_sqr()).sum())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

/// Eigendecomposition `A = V diag(λ) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Real eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: CMatrix,
}

const MAX_SWEEPS: usize = 64;

impl HermitianEigen {
    /// Cyclic complex Jacobi iteration. The caller is responsible for
    /// passing a Hermitian matrix; only the upper triangle drives the
    /// rotations but both triangles are updated.
    pub fn new(a: &CMatrix) -> Self {
        let n = a.dim();
        let mut m = a.clone();
        m.hermitize();
        let mut v = CMatrix::identity(n);
        let scale = m.frobenius_norm();

        if scale > 0.0 {
            for _ in 0..MAX_SWEEPS {
                let off: f64 = (0..n)
                    .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
                    .map(|(p, q)| m[(p, q)].norm_sqr())
                    .sum();
                if libm::sqrt(off) <= 1e-17 * scale {
                    break;
                }
                for p in 0..n {
                    for q in p + 1..n {
                        rotate(&mut m, &mut v, p, q);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
        let values = order.iter().map(|&i| m[(i, i)].re).collect();
        let vectors = CMatrix::from_fn(n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    /// `V diag(f(λ)) V†`.
    pub fn map_spectrum(&self, mut f: impl FnMut(f64) -> C64) -> CMatrix {
        let n = self.vectors.dim();
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self.vectors[(r, k)] * weights[k] * self.vectors[(c, k)].conj();
                }
                out[(r, c)] = acc;
            }
        }
        out
    }
}

/// Zeroes `m[p][q]` with the unitary `G = diag(1, e^{-iθ}) · R(c, s)` where
/// `m[p][q] = |m[p][q]| e^{iθ}`; applies `m ← G† m G` and `v ← v G`.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let b = apq.norm();
    if b < 1e-300 {
        return;
    }
    let n = m.dim();
    let phase = apq / b;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * b);
    let t = if theta >= 0.0 {
        1.0 / (theta + libm::sqrt(1.0 + theta * theta))
    } else {
        -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
    };
    let c = 1.0 / libm::sqrt(1.0 + t * t);
    let s = t * c;
    // G = [[c, s], [-s ē, c ē]] in the (p, q) block.
    let g_qp = -phase.conj() * s;
    let g_qq = phase.conj() * c;

    for k in 0..n {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = mp * c + mq * g_qp;
        m[(k, q)] = mp * s + mq * g_qq;
    }
    for k in 0..n {
        let mp = m[(p, k)];
        let mq = m[(q, k)];
        m[(p, k)] = mp * c + mq * g_qp.conj();
        m[(q, k)] = mp * s + mq * g_qq.conj();
    }
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;

    for k in 0..n {
        let vp = v[(k, p)];
        let vq = v[(k, q)];
        v[(k, p)] = vp * c + vq * g_qp;
        v[(k, q)] = vp * s + vq * g_qq;
    }
}

/// Euclidean norm of a complex vector.
pub fn vec_norm(v: &[C64]) -> f64 {
    libm::sqrt(v.iter().map(|a| a.norm_sqr()).sum())
}

/// `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, seed: &[f64]) -> CMatrix {
        let mut k = 0;
        let mut next = || {
            let v = seed[k % seed.len()] * (1.0 + k as f64 * 0.37).sin();
            k += 1;
            v
        };
        let mut m = CMatrix::zeros(n);
        for r in 0..n {
            m[(r, r)] = C64::new(next(), 0.0);
            for c in r + 1..n {
                let z = C64::new(next(), next());
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let k = CMatrix::identity(3).kron(&CMatrix::identity(4));
        assert_eq!(k, CMatrix::identity(12));
    }

    #[test]
    fn eigen_of_pauli_y() {
        let mut y = CMatrix::zeros(2);
        y[(0, 1)] = C64::new(0.0, -1.0);
        y[(1, 0)] = C64::new(0.0, 1.0);
        let eig = HermitianEigen::new(&y);
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        let back = eig.map_spectrum(|l| C64::new(l, 0.0));
        assert!(back.max_abs_diff(&y) < 1e-15);
    }

    #[test]
    fn eigen_handles_degenerate_and_zero_matrices() {
        let z = CMatrix::zeros(5);
        let eig = HermitianEigen::new(&z);
        assert!(eig.values.iter().all(|&v| v == 0.0));
        assert_eq!(eig.vectors, CMatrix::identity(5));

        let d = CMatrix::diagonal(&[C64::new(2.0, 0.0); 4]);
        let eig = HermitianEigen::new(&d);
        assert!(eig.values.iter().all(|&v| (v - 2.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn eigen_reconstructs_random_hermitian(
            n in 1usize..24,
            seed in proptest::collection::vec(-3.0f64..3.0, 8),
        ) {
            let a = random_hermitian(n, &seed);
            let eig = HermitianEigen::new(&a);
            let back = eig.map_spectrum(|l| C64::new(l, 0.0));
            prop_assert!(back.max_abs_diff(&a) < 1e-12 * (1.0 + a.max_abs()));
            let vv = eig.vectors.adjoint().matmul(&eig.vectors);
            prop_assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-13);
            prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
