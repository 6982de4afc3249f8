//! Two-chromophore reduced states and their correlation measures.
//!
//! A pair `(m, n)` of the single-excitation site space reduces to a
//! two-qubit state on the basis
//!
//! | index | ket          | meaning        |
//! |-------|--------------|----------------|
//! | 0     | `|S0m S0n>`  | ground-ground  |
//! | 1     | `|S0m S1n>`  | `n` excited    |
//! | 2     | `|S1m S0n>`  | `m` excited    |
//! | 3     | `|S1m S1n>`  | doubly excited |
//!
//! with qubit `m` as the more significant factor and `|S0> = |0>`. The
//! reduced state keeps the trace of the source operator, so it carries any
//! population lost to trapping in its ground-ground entry.
//!
//! Measures are available both through the general two-qubit formulas
//! (Horodecki correlation matrix, Wootters spin flip) and through closed
//! forms valid for single-excitation pair states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, singular_values, symmetric3_eigenvalues, ComplexMatrix, PauliVector,
};
use crate::model::check_site;

/// Tolerance on negative populations and eigenvalues of physical states.
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedPairState {
    /// 1-based, `m < n`.
    pub m: usize,
    pub n: usize,
    pub pop_m: f64,
    pub pop_n: f64,
    /// `rho_mn = <m|rho|n>`.
    pub coherence: Complex64,
    pub source_trace: f64,
}

impl ReducedPairState {
    /// Builds a pair state directly from its defining numbers.
    pub fn new(
        m: usize,
        n: usize,
        pop_m: f64,
        pop_n: f64,
        coherence: Complex64,
        source_trace: f64,
    ) -> Result<Self> {
        if m == n {
            return Err(Error::DegeneratePair { m, n });
        }
        let ground = source_trace - pop_m - pop_n;
        if ground < -POSITIVITY_TOL {
            return Err(Error::NegativeGroundPopulation {
                m,
                n,
                value: ground,
            });
        }
        let (m, n, coherence, pop_m, pop_n) = if m < n {
            (m, n, coherence, pop_m, pop_n)
        } else {
            (n, m, coherence.conj(), pop_n, pop_m)
        };
        Ok(Self {
            m,
            n,
            pop_m,
            pop_n,
            coherence,
            source_trace,
        })
    }

    pub fn ground_population(&self) -> f64 {
        self.source_trace - self.pop_m - self.pop_n
    }

    /// The 4x4 matrix in the documented basis order.
    pub fn matrix(&self) -> ComplexMatrix {
        let mut rho = ComplexMatrix::zeros(4);
        rho[(0, 0)] = Complex64::new(self.ground_population(), 0.0);
        rho[(1, 1)] = Complex64::new(self.pop_n, 0.0);
        rho[(2, 2)] = Complex64::new(self.pop_m, 0.0);
        rho[(2, 1)] = self.coherence;
        rho[(1, 2)] = self.coherence.conj();
        rho
    }
}

/// Partial trace of a single-excitation site-basis operator onto sites
/// `m` and `n` (1-based).
pub fn reduce_pair(rho: &ComplexMatrix, m: usize, n: usize) -> Result<ReducedPairState> {
    let dim = rho.dim();
    check_site(m, dim)?;
    check_site(n, dim)?;
    if m == n {
        return Err(Error::DegeneratePair { m, n });
    }
    rho.ensure_hermitian()?;
    let trace = rho.trace().re;
    if trace > 1.0 + POSITIVITY_TOL {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("trace {trace} exceeds 1"),
        });
    }
    ReducedPairState::new(
        m,
        n,
        rho[(m - 1, m - 1)].re,
        rho[(n - 1, n - 1)].re,
        rho[(m - 1, n - 1)],
        trace,
    )
}

/// `T_ab = Tr(rho sigma_a ⊗ sigma_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationMatrix3 {
    pub t: [[f64; 3]; 3],
}

impl CorrelationMatrix3 {
    pub fn from_state(rho: &ComplexMatrix) -> Result<Self> {
        if rho.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                found: rho.dim(),
            });
        }
        rho.ensure_hermitian()?;
        let pauli = PauliVector::new();
        let mut t = [[0.0; 3]; 3];
        for (a, row) in t.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                *entry = rho.trace_product(&pauli[a].kron(&pauli[b])).re;
            }
        }
        Ok(Self { t })
    }

    /// `T^T T`.
    pub fn gram(&self) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        for (i, row) in g.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..3).map(|k| self.t[k][i] * self.t[k][j]).sum();
            }
        }
        g
    }
}

/// Sum of the two largest eigenvalues of `T^T T`.
pub fn horodecki_m(rho: &ComplexMatrix) -> Result<f64> {
    let t = CorrelationMatrix3::from_state(rho)?;
    let mu = symmetric3_eigenvalues(&t.gram());
    Ok(mu[0] + mu[1])
}

/// `sqrt(max(M - 1, 0))`.
pub fn nonlocality_from_m(m: f64) -> f64 {
    (m - 1.0).max(0.0).sqrt()
}

/// Bell-CHSH nonlocality `B` through the Horodecki criterion.
pub fn nonlocality_b(rho: &ComplexMatrix) -> Result<f64> {
    Ok(nonlocality_from_m(horodecki_m(rho)?))
}

/// Wootters concurrence `max(l1 - l2 - l3 - l4, 0)`, where `l_i` are the
/// eigenvalues of `R = sqrt(sqrt(rho) rho~ sqrt(rho))` with
/// `rho~ = (sigma_y ⊗ sigma_y) rho* (sigma_y ⊗ sigma_y)`.
///
/// The `l_i` are evaluated as the singular values of
/// `sqrt(rho) sqrt(rho~)`, which equal the eigenvalues of `R` but avoid
/// taking square roots of round-off sized eigenvalues.
pub fn wootters_concurrence(rho: &ComplexMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let eig = hermitian_eigen(rho)?;
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(&low) = eig.values.first() {
        if low < -POSITIVITY_TOL * scale.max(1.0) {
            return Err(Error::NotPositive { value: low });
        }
    }
    // eigenvalues at round-off level are zero
    let cutoff = 1e-13 * scale;
    let sqrt_rho = eig.reconstruct_with(|l| if l > cutoff { l.sqrt() } else { 0.0 });

    let pauli = PauliVector::new();
    let flip = pauli[1].kron(&pauli[1]);
    let sqrt_tilde = &(&flip * &sqrt_rho.conj()) * &flip;
    let l = singular_values(&(&sqrt_rho * &sqrt_tilde));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Closed-form measures of a single-excitation pair state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMeasures {
    pub b: f64,
    pub c: f64,
    pub l1: f64,
    /// Degenerate eigenvalue `4|rho_mn|^2` of `T^T T`.
    pub mu1: f64,
    /// `(Tr rho - 2(rho_mm + rho_nn))^2`.
    pub mu3: f64,
}

impl PairMeasures {
    pub fn m(&self) -> f64 {
        (2.0 * self.mu1).max(self.mu1 + self.mu3)
    }
}

pub fn closed_form_measures(r: &ReducedPairState) -> PairMeasures {
    let abs = r.coherence.norm();
    let mu1 = 4.0 * abs * abs;
    let mu3 = (r.source_trace - 2.0 * (r.pop_m + r.pop_n)).powi(2);
    let m = (2.0 * mu1).max(mu1 + mu3);
    PairMeasures {
        b: nonlocality_from_m(m),
        c: 2.0 * abs,
        l1: 2.0 * abs,
        mu1,
        mu3,
    }
}

/// `|rho_mn| <= sqrt(rho_mm rho_nn)` within [`POSITIVITY_TOL`].
pub fn positivity_bound_check(r: &ReducedPairState) -> bool {
    r.coherence.norm() <= (r.pop_m.max(0.0) * r.pop_n.max(0.0)).sqrt() + POSITIVITY_TOL
}

/// l1 norm of coherence: sum of moduli of the off-diagonal entries.
pub fn l1_coherence(rho: &ComplexMatrix) -> f64 {
    let n = rho.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += rho[(i, j)].norm();
            }
        }
    }
    s
}

/// All pairs `(m, n)` with `1 <= m < n <= n_sites`.
pub fn all_pairs(n_sites: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for m in 1..=n_sites {
        for n in (m + 1)..=n_sites {
            out.push((m, n));
        }
    }
    out
}
