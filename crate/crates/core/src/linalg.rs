//! Dense complex matrices for the small Hermitian operators used throughout
//! the crate: 7x7 site-basis density operators, 4x4 pair states and 2x2
//! Pauli matrices.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for the Hermiticity check, scaled by `max|A|`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from a row-major slice of length `dim * dim`.
    pub fn from_row_slice(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self {
            dim,
            data: entries.to_vec(),
        })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Ok(Self { dim, data })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    /// `|i><j|` in a `dim`-dimensional basis (0-based indices).
    pub fn basis_projector(dim: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(dim);
        m[(i, j)] = ONE;
        m
    }

    /// `|v><v|` for a column vector `v`.
    pub fn outer(v: &[Complex64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A[i][j] - conj(A[j][i])|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Checks Hermiticity relative to `max|A|`.
    pub fn ensure_hermitian(&self) -> Result<()> {
        let tolerance = HERMITIAN_TOL * self.max_abs();
        let defect = self.hermiticity_defect();
        if defect > tolerance {
            return Err(Error::NotHermitian { defect, tolerance });
        }
        Ok(())
    }

    pub fn is_hermitian(&self) -> bool {
        self.ensure_hermitian().is_ok()
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * other[(i % b, j % b)])
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }

    fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
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

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(self.matmul(other))
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

// The operator impls panic on dimension mismatch; `try_mul`, `commutator`
// and friends are the checked entry points.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix addition");
        ComplexMatrix {
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

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.dim, rhs.dim,
            "dimension mismatch in matrix subtraction"
        );
        ComplexMatrix {
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

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// `AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same_dim(b)?;
    Ok(&a.matmul(b) - &b.matmul(a))
}

/// `AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.check_same_dim(b)?;
    Ok(&a.matmul(b) + &b.matmul(a))
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`, phase-fixed so that its
    /// largest-magnitude component is real and positive.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.vectors.column(i)
    }

    /// `V diag(f(lambda)) V^dagger`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    a.ensure_hermitian()?;
    let eig = SymmetricEigen::new(a.hermitian_part().to_nalgebra());
    let n = a.dim();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        let v: Vec<Complex64> = (0..n).map(|i| eig.eigenvectors[(i, src)]).collect();
        let phase = phase_to_largest_positive(&v);
        for (i, z) in v.iter().enumerate() {
            vectors[(i, col)] = z * phase;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Unit phase that rotates the largest-magnitude component onto the positive
/// real axis. Near-ties resolve to the lowest index.
fn phase_to_largest_positive(v: &[Complex64]) -> Complex64 {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return ONE;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .unwrap_or(0);
    let z = v[pivot];
    z.conj() / z.norm()
}

/// `(1/2) sum |eigenvalues(A - B)|`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    a.check_same_dim(b)?;
    a.ensure_hermitian()?;
    b.ensure_hermitian()?;
    let diff = a - b;
    let eig = hermitian_eigen(&diff.hermitian_part())?;
    Ok(0.5 * eig.values.iter().map(|l| l.abs()).sum::<f64>())
}

/// Singular values of an arbitrary square matrix, descending.
pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    let svd = a.to_nalgebra().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Eigenvalues of a real symmetric 3x3 matrix, descending.
pub fn symmetric3_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let mat = Matrix3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]));
    let eig = SymmetricEigen::new(mat);
    let mut v = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// The three Pauli matrices.
#[derive(Debug, Clone)]
pub struct PauliVector {
    pub sigma: [ComplexMatrix; 3],
}

impl PauliVector {
    pub fn new() -> Self {
        let s1 = ComplexMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let s2 = ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => -I,
            (1, 0) => I,
            _ => ZERO,
        });
        let s3 = ComplexMatrix::diagonal(&[1.0, -1.0]);
        Self {
            sigma: [s1, s2, s3],
        }
    }
}

impl Default for PauliVector {
    fn default() -> Self {
        Self::new()
    }
}

impl Index<usize> for PauliVector {
    type Output = ComplexMatrix;

    fn index(&self, alpha: usize) -> &ComplexMatrix {
        &self.sigma[alpha]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn hermitian_from(dim: usize, seed: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim);
        let mut it = seed.iter().cycle();
        for i in 0..dim {
            m[(i, i)] = c(*it.next().unwrap(), 0.0);
            for j in (i + 1)..dim {
                let z = c(*it.next().unwrap(), *it.next().unwrap());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn eigen_of_identity() {
        let eig = hermitian_eigen(&ComplexMatrix::identity(3)).unwrap();
        for v in eig.values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigen_of_diagonal_is_sorted() {
        let eig = hermitian_eigen(&ComplexMatrix::diagonal(&[2.0, -1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(eig.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[2], 2.0, epsilon = 1e-14);
        // largest component real positive
        assert_abs_diff_eq!(eig.vectors[(1, 0)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            hermitian_eigen(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn trace_distance_examples() {
        let rho = ComplexMatrix::diagonal(&[0.3, 0.7]);
        assert_abs_diff_eq!(trace_distance(&rho, &rho).unwrap(), 0.0, epsilon = 1e-15);

        let zero = ComplexMatrix::basis_projector(2, 0, 0);
        let one = ComplexMatrix::basis_projector(2, 1, 1);
        assert_abs_diff_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-14);

        // difference diag(0.5, -0.5)
        let mixed = ComplexMatrix::diagonal(&[0.5, 0.5]);
        assert_abs_diff_eq!(
            trace_distance(&ComplexMatrix::diagonal(&[1.0, 0.0]), &mixed).unwrap(),
            0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn trace_distance_rejects_dimension_mismatch() {
        let err = trace_distance(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(
            err.unwrap_err(),
            Error::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn commutator_examples() {
        let a = hermitian_from(3, &[0.1, 0.7, -0.3, 0.2, 0.9]);
        assert!(commutator(&a, &a).unwrap().max_abs() < 1e-15);

        let anti = anticommutator(&ComplexMatrix::identity(3), &a).unwrap();
        assert!(anti.max_abs_diff(&a.scale_real(2.0)) < 1e-15);

        let p = PauliVector::new();
        let comm = commutator(&p[0], &p[1]).unwrap();
        assert!(comm.max_abs_diff(&p[2].scale(c(0.0, 2.0))) < 1e-15);

        assert!(commutator(&a, &ComplexMatrix::identity(2)).is_err());
        assert!(anticommutator(&a, &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let p = PauliVector::new();
        let id = ComplexMatrix::identity(2);
        for alpha in 0..3 {
            let s = &p[alpha];
            assert!(s.is_hermitian());
            assert_abs_diff_eq!(s.trace().norm(), 0.0);
            assert_eq!((s * s).max_abs_diff(&id), 0.0);
        }
    }

    #[test]
    fn fmo_like_phase_rule_gives_positive_pivot() {
        let m = ComplexMatrix::from_real_rows(&[vec![1.0, -2.0], vec![-2.0, 0.5]]).unwrap();
        let eig = hermitian_eigen(&m).unwrap();
        for k in 0..2 {
            let v = eig.vector(k);
            let pivot = v
                .iter()
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            assert!(pivot.re > 0.0 && pivot.im.abs() < 1e-15);
        }
    }

    fn arb_hermitian() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..=8).prop_flat_map(|dim| {
            proptest::collection::vec(-1.0f64..1.0, dim * dim)
                .prop_map(move |seed| hermitian_from(dim, &seed))
        })
    }

    fn arb_density(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
        proptest::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |seed| {
            let g = ComplexMatrix::from_fn(dim, |i, j| {
                c(seed[2 * (i * dim + j)], seed[2 * (i * dim + j) + 1])
            });
            let p = &g * &g.adjoint();
            let tr = p.trace().re.max(1e-12);
            p.scale_real(1.0 / tr).hermitian_part()
        })
    }

    proptest! {
        #[test]
        fn eigen_reconstructs(a in arb_hermitian()) {
            let eig = hermitian_eigen(&a).unwrap();
            let scale = a.max_abs().max(1e-300);
            prop_assert!(eig.reconstruct().max_abs_diff(&a) <= 1e-10 * scale.max(1.0));
            let v = &eig.vectors;
            let gram = &v.adjoint() * v;
            prop_assert!(gram.max_abs_diff(&ComplexMatrix::identity(a.dim())) <= 1e-10);
            for k in 0..a.dim() {
                let vk = eig.vector(k);
                for i in 0..a.dim() {
                    let av: Complex64 = (0..a.dim()).map(|j| a[(i, j)] * vk[j]).sum();
                    prop_assert!((av - vk[i] * eig.values[k]).norm() <= 1e-10 * scale.max(1.0));
                }
            }
            prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn trace_distance_is_a_metric(
            a in arb_density(4),
            b in arb_density(4),
            c3 in arb_density(4),
        ) {
            let ab = trace_distance(&a, &b).unwrap();
            let ba = trace_distance(&b, &a).unwrap();
            let ac = trace_distance(&a, &c3).unwrap();
            let cb = trace_distance(&c3, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn i_commutator_of_hermitians_is_hermitian(a in arb_hermitian(), seed in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let b = hermitian_from(a.dim(), &seed);
            let k = commutator(&a, &b).unwrap().scale(I);
            prop_assert!(k.hermiticity_defect() <= 1e-12);
            let anti = anticommutator(&a, &b).unwrap();
            prop_assert!(anti.hermiticity_defect() <= 1e-12);
        }
    }
}
