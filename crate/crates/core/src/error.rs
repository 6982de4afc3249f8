use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: defect {defect:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site index {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("pair ({m}, {n}) must name two distinct sites")]
    DegeneratePair { m: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("hierarchy with {count} nodes exceeds the supported maximum of {max}")]
    HierarchyTooLarge { count: u128, max: usize },

    #[error("negative ground-ground population {value:e} in reduced pair state ({m}, {n})")]
    NegativeGroundPopulation { m: usize, n: usize, value: f64 },

    #[error("state is not positive semidefinite: eigenvalue {value:e}")]
    NotPositive { value: f64 },

    #[error("step size underflow at t = {t_fs} fs (h = {step:e} fs)")]
    StepSizeUnderflow { t_fs: f64, step: f64 },

    #[error("tolerance not met at t = {t_fs} fs after {rejections} consecutive rejected steps")]
    ToleranceNotMet { t_fs: f64, rejections: usize },

    #[error("non-finite value in state at t = {t_fs} fs")]
    NonFinite { t_fs: f64 },

    #[error("empty time series")]
    EmptySeries,

    #[error("fit window [{start_fs}, {end_fs}] fs not covered by trajectory ending at {available_fs} fs")]
    WindowOutOfRange {
        start_fs: f64,
        end_fs: f64,
        available_fs: f64,
    },

    #[error("exciton energies not separated: gap {gap_cm:e} cm^-1 between levels {level} and {}", level + 1)]
    DegenerateSpectrum { level: usize, gap_cm: f64 },
}
