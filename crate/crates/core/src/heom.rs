//! Hierarchical equations of motion for the site-local overdamped
//! Brownian-oscillator bath, with anticommutator trapping.
//!
//! For every node `n` of the truncated hierarchy:
//!
//! ```text
//! d/dt zeta(n) = -i [H_e + sum_k lambda_k V_k, zeta(n)] - (sum_k n_k gamma_k) zeta(n)
//!              + sum_k Phi_k zeta(n_k+) + sum_k n_k Theta_k zeta(n_k-)
//!              - r_trap sum_{s in trap} {V_s, zeta(n)}
//!
//! Phi_k g   = i [V_k, g]
//! Theta_k g = i (2 lambda_k / beta) [V_k, g] + lambda_k gamma_k {V_k, g}
//! ```
//!
//! with `V_k = |k><k|`. At the truncation depth the `Phi` coupling is dropped.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{HierarchyIndexSpace, NO_NEIGHBOR};
use crate::linalg::{anticommutator, commutator, ComplexMatrix};
use crate::model::{build_hamiltonian, check_site, thermal_prefactors, SystemParams, UnitSystem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn projector(dim: usize, site: usize) -> Result<ComplexMatrix> {
    check_site(site, dim)?;
    Ok(ComplexMatrix::basis_projector(dim, site - 1, site - 1))
}

/// `[H_e + sum_k lambda_k |k><k|, g]`.
pub fn apply_liouvillian(
    g: &ComplexMatrix,
    hamiltonian: &ComplexMatrix,
    lambdas: &[f64],
) -> Result<ComplexMatrix> {
    if lambdas.len() != hamiltonian.dim() {
        return Err(Error::DimensionMismatch {
            expected: hamiltonian.dim(),
            found: lambdas.len(),
        });
    }
    commutator(&shifted_hamiltonian(hamiltonian, lambdas), g)
}

fn shifted_hamiltonian(hamiltonian: &ComplexMatrix, lambdas: &[f64]) -> ComplexMatrix {
    let mut h = hamiltonian.clone();
    for (k, l) in lambdas.iter().enumerate() {
        h[(k, k)] += Complex64::new(*l, 0.0);
    }
    h
}

/// `i [V_k, g]` for 1-based site `k`.
pub fn apply_phi(site: usize, g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let v = projector(g.dim(), site)?;
    Ok(commutator(&v, g)?.scale(I))
}

/// `i (2 lambda_k / beta) [V_k, g] + lambda_k gamma_k {V_k, g}`.
pub fn apply_theta(
    site: usize,
    g: &ComplexMatrix,
    two_lambda_over_beta: f64,
    lambda_gamma: f64,
) -> Result<ComplexMatrix> {
    let v = projector(g.dim(), site)?;
    let comm = commutator(&v, g)?.scale(I * two_lambda_over_beta);
    let anti = anticommutator(&v, g)?.scale_real(lambda_gamma);
    Ok(&comm + &anti)
}

/// `-r_trap sum_s {|s><s|, g}`.
pub fn apply_trapping(g: &ComplexMatrix, trap_sites: &[usize], rate: f64) -> Result<ComplexMatrix> {
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::InvalidParameter {
            name: "trap_rate",
            reason: format!("must be nonnegative, got {rate}"),
        });
    }
    let mut out = ComplexMatrix::zeros(g.dim());
    for &s in trap_sites {
        let v = projector(g.dim(), s)?;
        out = &out - &anticommutator(&v, g)?.scale_real(rate);
    }
    Ok(out)
}

/// Everything the right-hand side needs, precomputed in rad/fs units.
#[derive(Debug, Clone)]
pub struct HeomModel {
    space: Arc<HierarchyIndexSpace>,
    dim: usize,
    /// `H_e + sum_k lambda_k V_k`, real symmetric, row-major.
    h_eff: Vec<f64>,
    gamma: Vec<f64>,
    two_lambda_over_beta: Vec<f64>,
    lambda_gamma: Vec<f64>,
    /// Per site: trapping rate if trapped, else 0.
    trap: Vec<f64>,
    /// `sum_k n_k gamma_k` per node.
    damping: Vec<f64>,
}

impl HeomModel {
    pub fn new(params: &SystemParams, units: &UnitSystem) -> Result<Self> {
        let h = build_hamiltonian(params, units)?;
        let pre = thermal_prefactors(params, units)?;
        let space = Arc::new(HierarchyIndexSpace::new(
            params.n_sites(),
            params.truncation,
        )?);
        let rate = params.trap_rate_per_fs();
        let mut trap = vec![0.0; params.n_sites()];
        for &s in &params.trap_sites {
            trap[s - 1] = rate;
        }
        Self::from_parts(
            space,
            &h,
            &pre.lambda,
            pre.gamma,
            pre.two_lambda_over_beta,
            pre.lambda_gamma,
            trap,
        )
    }

    fn from_parts(
        space: Arc<HierarchyIndexSpace>,
        hamiltonian: &ComplexMatrix,
        lambda: &[f64],
        gamma: Vec<f64>,
        two_lambda_over_beta: Vec<f64>,
        lambda_gamma: Vec<f64>,
        trap: Vec<f64>,
    ) -> Result<Self> {
        let dim = hamiltonian.dim();
        if space.n_sites() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: space.n_sites(),
            });
        }
        hamiltonian.ensure_hermitian()?;
        let shifted = shifted_hamiltonian(hamiltonian, lambda);
        if shifted.as_slice().iter().any(|z| z.im != 0.0) {
            return Err(Error::InvalidParameter {
                name: "hamiltonian",
                reason: "site Hamiltonian must be real".into(),
            });
        }
        let h_eff = shifted.as_slice().iter().map(|z| z.re).collect();
        let damping = (0..space.count())
            .map(|node| {
                space
                    .index_slice(node)
                    .iter()
                    .zip(&gamma)
                    .map(|(&n, g)| n as f64 * g)
                    .sum()
            })
            .collect();
        Ok(Self {
            space,
            dim,
            h_eff,
            gamma,
            two_lambda_over_beta,
            lambda_gamma,
            trap,
            damping,
        })
    }

    pub fn space(&self) -> &HierarchyIndexSpace {
        &self.space
    }

    pub fn n_sites(&self) -> usize {
        self.dim
    }

    /// Length of the flat state vector.
    pub fn state_len(&self) -> usize {
        self.space.count() * self.dim * self.dim
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// Hierarchy state with `zeta(0) = rho` and every auxiliary zero.
    pub fn initial_state(&self, rho: &ComplexMatrix) -> Result<HierarchyState> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let mut data = vec![ZERO; self.state_len()];
        data[..self.dim * self.dim].copy_from_slice(rho.as_slice());
        Ok(HierarchyState {
            n_sites: self.dim,
            data,
            time_fs: 0.0,
        })
    }

    /// Derivative of a whole hierarchy state.
    pub fn rhs(&self, state: &HierarchyState) -> Result<HierarchyState> {
        if state.data.len() != self.state_len() || state.n_sites != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.state_len(),
                found: state.data.len(),
            });
        }
        let mut out = vec![ZERO; self.state_len()];
        self.rhs_into(&state.data, &mut out);
        Ok(HierarchyState {
            n_sites: self.dim,
            data: out,
            time_fs: state.time_fs,
        })
    }

    /// Flat-buffer derivative. Each node reads its own block and its
    /// neighbours and writes only its own block, so the parallel loop is
    /// free of reductions and bit-identical to a serial evaluation.
    pub fn rhs_into(&self, y: &[Complex64], dy: &mut [Complex64]) {
        let block = self.dim * self.dim;
        assert_eq!(y.len(), self.state_len());
        assert_eq!(dy.len(), self.state_len());
        dy.par_chunks_mut(block)
            .enumerate()
            .with_min_len(64)
            .for_each(|(node, out)| match self.dim {
                // fixed size lets the compiler unroll the commutator
                7 => self.node_rhs::<7>(node, y, out),
                _ => self.node_rhs::<0>(node, y, out),
            });
    }

    /// `D` is the compile-time dimension, or 0 to use `self.dim`.
    fn node_rhs<const D: usize>(&self, node: usize, y: &[Complex64], out: &mut [Complex64]) {
        let d = if D == 0 { self.dim } else { D };
        let block = d * d;
        let own = &y[node * block..(node + 1) * block];
        let h = &self.h_eff[..block];
        let damp = self.damping[node];

        // -i [H, g] - damp g
        for i in 0..d {
            for j in 0..d {
                let (mut re, mut im) = (0.0, 0.0);
                for k in 0..d {
                    let (a, b) = (own[k * d + j], own[i * d + k]);
                    re += h[i * d + k] * a.re - b.re * h[k * d + j];
                    im += h[i * d + k] * a.im - b.im * h[k * d + j];
                }
                out[i * d + j] = Complex64::new(im, -re) - own[i * d + j] * damp;
            }
        }

        // trapping: -r {V_s, g} touches row s and column s
        for (s, &r) in self.trap.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for j in 0..d {
                out[s * d + j] -= own[s * d + j] * r;
                out[j * d + s] -= own[j * d + s] * r;
            }
        }

        let plus = self.space.plus_row(node);
        let minus = self.space.minus_row(node);
        let n = self.space.index_slice(node);
        for k in 0..d {
            // Phi_k g = i [V_k, g]: row k gets +i g_kj, column k gets -i g_ik
            if plus[k] != NO_NEIGHBOR {
                let g = &y[plus[k] as usize * block..][..block];
                for j in 0..d {
                    out[k * d + j] += I * g[k * d + j];
                    out[j * d + k] -= I * g[j * d + k];
                }
            }
            // n_k Theta_k g: row k gets (i a + b) g_kj, column k gets (-i a + b) g_ik
            if minus[k] != NO_NEIGHBOR {
                let g = &y[minus[k] as usize * block..][..block];
                let nk = n[k] as f64;
                let row = Complex64::new(self.lambda_gamma[k], self.two_lambda_over_beta[k]) * nk;
                let col = Complex64::new(self.lambda_gamma[k], -self.two_lambda_over_beta[k]) * nk;
                for j in 0..d {
                    out[k * d + j] += row * g[k * d + j];
                    out[j * d + k] += col * g[j * d + k];
                }
            }
        }
    }
}

/// All auxiliary operators at one instant, node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    n_sites: usize,
    data: Vec<Complex64>,
    pub time_fs: f64,
}

impl HierarchyState {
    pub fn from_flat(n_sites: usize, data: Vec<Complex64>, time_fs: f64) -> Result<Self> {
        let block = n_sites * n_sites;
        if block == 0 || !data.len().is_multiple_of(block) {
            return Err(Error::DimensionMismatch {
                expected: block,
                found: data.len(),
            });
        }
        Ok(Self {
            n_sites,
            data,
            time_fs,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.data.len() / (self.n_sites * self.n_sites)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn node(&self, node: usize) -> ComplexMatrix {
        let block = self.n_sites * self.n_sites;
        ComplexMatrix::from_row_slice(self.n_sites, &self.data[node * block..(node + 1) * block])
            .expect("block has the right length")
    }

    /// `zeta(0)`, the reduced density operator.
    pub fn density(&self) -> ComplexMatrix {
        self.node(0)
    }

    /// Largest `max|zeta - zeta^dagger|` over all nodes.
    pub fn hermiticity_defect(&self) -> f64 {
        (0..self.n_nodes())
            .map(|i| self.node(i).hermiticity_defect())
            .fold(0.0, f64::max)
    }

    /// `a * self + b * other`.
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        Self {
            n_sites: self.n_sites,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            time_fs: self.time_fs,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn into_flat(self) -> Vec<Complex64> {
        self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
}
