//! The FMO monomer: site Hamiltonian, bath parameters, unit conversion,
//! exciton basis and the two families of initial states.
//!
//! Energies are given in cm^-1 and converted to angular frequency (rad/fs)
//! with hbar = 1, so femtoseconds are the native time unit of the engine.
//! Site indices are 1-based in every public signature.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, ComplexMatrix};

/// Number of chromophores in one FMO monomer.
pub const FMO_SITES: usize = 7;

/// Site Hamiltonian of one monomer in cm^-1, relative to a common offset
/// of 12 210 cm^-1 which only contributes a global phase and is omitted.
pub const FMO_HAMILTONIAN_CM: [[f64; 7]; 7] = [
    [200.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9],
    [-87.7, 320.0, 30.8, 8.2, 0.7, 11.8, 4.3],
    [5.5, 30.8, 0.0, -53.5, -2.2, -9.6, 6.0],
    [-5.9, 8.2, -53.5, 110.0, -70.7, -17.0, -63.3],
    [6.7, 0.7, -2.2, -70.7, 270.0, 81.1, -1.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 420.0, 39.7],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 230.0],
];

/// Speed of light in cm/fs.
pub const SPEED_OF_LIGHT_CM_PER_FS: f64 = 2.997_924_58e-5;

/// Boltzmann constant in cm^-1/K.
pub const BOLTZMANN_CM_PER_K: f64 = 0.695_03;

/// Conversion constants between spectroscopic and dynamical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Multiply a wavenumber in cm^-1 by this to get rad/fs (2 pi c).
    pub cm_to_radfs: f64,
    pub kb_cm_per_k: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self {
            cm_to_radfs: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_PER_FS,
            kb_cm_per_k: BOLTZMANN_CM_PER_K,
        }
    }
}

/// Physical parameters of the chromophore-bath model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub hamiltonian_cm: Vec<Vec<f64>>,
    /// Reorganization energy per site, cm^-1.
    pub lambda_cm: Vec<f64>,
    /// Bath relaxation time per site (1/gamma), fs.
    pub gamma_inv_fs: Vec<f64>,
    pub temperature_k: f64,
    /// Trapping time 1/r_trap in ps; `f64::INFINITY` disables trapping.
    pub trap_time_ps: f64,
    /// 1-based.
    pub trap_sites: Vec<usize>,
    pub truncation: usize,
    pub t_end_fs: f64,
    pub dt_out_fs: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::fmo()
    }
}

impl SystemParams {
    /// Reference parameter set: 35 cm^-1 reorganization energy, 50 fs bath
    /// relaxation time, 300 K, 1 ps trapping at sites 3 and 4, depth 12,
    /// 0 to 1000 fs on a 1 fs grid.
    pub fn fmo() -> Self {
        Self {
            hamiltonian_cm: FMO_HAMILTONIAN_CM.iter().map(|r| r.to_vec()).collect(),
            lambda_cm: vec![35.0; FMO_SITES],
            gamma_inv_fs: vec![50.0; FMO_SITES],
            temperature_k: 300.0,
            trap_time_ps: 1.0,
            trap_sites: vec![3, 4],
            truncation: 12,
            t_end_fs: 1000.0,
            dt_out_fs: 1.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.hamiltonian_cm.len()
    }

    /// Trapping rate in fs^-1.
    pub fn trap_rate_per_fs(&self) -> f64 {
        if self.trap_sites.is_empty() || self.trap_time_ps.is_infinite() {
            0.0
        } else {
            1.0 / (self.trap_time_ps * 1000.0)
        }
    }

    pub fn without_trapping(mut self) -> Self {
        self.trap_time_ps = f64::INFINITY;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        if n == 0 {
            return Err(invalid("hamiltonian_cm", "empty matrix".into()));
        }
        for row in &self.hamiltonian_cm {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let scale = self
            .hamiltonian_cm
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (self.hamiltonian_cm[i][j], self.hamiltonian_cm[j][i]);
                if !a.is_finite() {
                    return Err(invalid(
                        "hamiltonian_cm",
                        format!("entry ({}, {}) is not finite", i + 1, j + 1),
                    ));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(invalid(
                        "hamiltonian_cm",
                        format!("not symmetric at ({}, {}): {a} vs {b}", i + 1, j + 1),
                    ));
                }
            }
        }
        check_per_site("lambda_cm", &self.lambda_cm, n, |x| x > 0.0)?;
        check_per_site("gamma_inv_fs", &self.gamma_inv_fs, n, |x| x > 0.0)?;
        if !(self.temperature_k > 0.0 && self.temperature_k.is_finite()) {
            return Err(invalid(
                "temperature_k",
                format!("must be positive, got {}", self.temperature_k),
            ));
        }
        if self.trap_time_ps.is_nan() || self.trap_time_ps <= 0.0 {
            return Err(invalid(
                "trap_time_ps",
                format!("must be positive, got {}", self.trap_time_ps),
            ));
        }
        for &s in &self.trap_sites {
            check_site(s, n)?;
        }
        if !(self.t_end_fs > 0.0 && self.t_end_fs.is_finite()) {
            return Err(invalid(
                "t_end_fs",
                format!("must be positive, got {}", self.t_end_fs),
            ));
        }
        if !(self.dt_out_fs > 0.0 && self.dt_out_fs <= self.t_end_fs) {
            return Err(invalid(
                "dt_out_fs",
                format!("must lie in (0, t_end_fs], got {}", self.dt_out_fs),
            ));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParameter { name, reason }
}

fn check_per_site(name: &'static str, v: &[f64], n: usize, ok: impl Fn(f64) -> bool) -> Result<()> {
    if v.len() != n {
        return Err(invalid(
            name,
            format!("expected {n} entries, got {}", v.len()),
        ));
    }
    if let Some((k, x)) = v
        .iter()
        .enumerate()
        .find(|(_, &x)| !(ok(x) && x.is_finite()))
    {
        return Err(invalid(
            name,
            format!("site {} has invalid value {x}", k + 1),
        ));
    }
    Ok(())
}

pub(crate) fn check_site(site: usize, n_sites: usize) -> Result<()> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(())
}

/// Site Hamiltonian converted to rad/fs.
pub fn build_hamiltonian(params: &SystemParams, units: &UnitSystem) -> Result<ComplexMatrix> {
    params.validate()?;
    let rows: Vec<Vec<f64>> = params
        .hamiltonian_cm
        .iter()
        .map(|r| r.iter().map(|x| x * units.cm_to_radfs).collect())
        .collect();
    ComplexMatrix::from_real_rows(&rows)
}

/// `|x><x|`.
pub fn localized_state(site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    check_site(site, n_sites)?;
    Ok(ComplexMatrix::basis_projector(n_sites, site - 1, site - 1))
}

/// Eigenstates of the site Hamiltonian, ordered by increasing energy.
#[derive(Debug, Clone)]
pub struct ExcitonBasis {
    pub energies_cm: Vec<f64>,
    /// `coeffs[r][k] = <k|e_r>` (0-based `r`, `k`), real.
    pub coeffs: Vec<Vec<f64>>,
}

impl ExcitonBasis {
    /// Diagonalizes the cm^-1 Hamiltonian. Fails if two levels lie within
    /// 1 cm^-1, since the energy ordering would then be ill defined.
    pub fn from_params(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let h = ComplexMatrix::from_real_rows(&params.hamiltonian_cm)?;
        let eig = hermitian_eigen(&h)?;
        for (level, w) in eig.values.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= 1.0 {
                return Err(Error::DegenerateSpectrum {
                    level: level + 1,
                    gap_cm: gap,
                });
            }
        }
        let n = h.dim();
        // Real symmetric input: after the phase fix the vectors are real.
        let coeffs = (0..n)
            .map(|r| (0..n).map(|k| eig.vectors[(k, r)].re).collect())
            .collect();
        Ok(Self {
            energies_cm: eig.values,
            coeffs,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.energies_cm.len()
    }

    /// `c_rk` with 1-based exciton and site labels.
    pub fn coeff(&self, r: usize, k: usize) -> f64 {
        self.coeffs[r - 1][k - 1]
    }

    /// `|<x|e_r>|^2` for every exciton `r`, 1-based site `x`.
    pub fn site_weights(&self, site: usize) -> Result<Vec<f64>> {
        check_site(site, self.n_sites())?;
        Ok(self.coeffs.iter().map(|c| c[site - 1].powi(2)).collect())
    }
}

/// Incoherent mixture of exciton states weighted by their overlap with
/// `site`: `sum_r |<x|e_r>|^2 |e_r><e_r|`.
pub fn fret_state(site: usize, basis: &ExcitonBasis) -> Result<ComplexMatrix> {
    let weights = basis.site_weights(site)?;
    let n = basis.n_sites();
    let mut rho = ComplexMatrix::zeros(n);
    for (w, c) in weights.iter().zip(&basis.coeffs) {
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] += Complex64::new(w * c[i] * c[j], 0.0);
            }
        }
    }
    Ok(rho)
}

/// Per-site bath coefficients of the hierarchy in rad/fs units.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalPrefactors {
    /// Reorganization energy, rad/fs.
    pub lambda: Vec<f64>,
    /// Relaxation rate, fs^-1.
    pub gamma: Vec<f64>,
    /// `2 lambda / beta`, rad^2/fs^2.
    pub two_lambda_over_beta: Vec<f64>,
    /// `lambda * gamma`, rad/fs^2.
    pub lambda_gamma: Vec<f64>,
    /// `beta` in fs/rad.
    pub beta: f64,
}

pub fn thermal_prefactors(params: &SystemParams, units: &UnitSystem) -> Result<ThermalPrefactors> {
    params.validate()?;
    let kt = units.kb_cm_per_k * params.temperature_k * units.cm_to_radfs;
    let beta = 1.0 / kt;
    let lambda: Vec<f64> = params
        .lambda_cm
        .iter()
        .map(|l| l * units.cm_to_radfs)
        .collect();
    let gamma: Vec<f64> = params.gamma_inv_fs.iter().map(|g| 1.0 / g).collect();
    Ok(ThermalPrefactors {
        two_lambda_over_beta: lambda.iter().map(|l| 2.0 * l / beta).collect(),
        lambda_gamma: lambda.iter().zip(&gamma).map(|(l, g)| l * g).collect(),
        lambda,
        gamma,
        beta,
    })
}
