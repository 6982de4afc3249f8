//! Post-processing specific to the FMO correlation study: leading-order
//! short-time predictions for localized excitations, the dominant-pair
//! inequality, the interference decomposition of the FRET initial state and
//! detection of nonlocality sudden death.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::measures::{all_pairs, closed_form_measures, ReducedPairState};
use crate::model::{check_site, ExcitonBasis};
use crate::series::CorrelationTimeSeries;

/// Sites that receive the initial excitation in the reference scenarios.
pub const ENTRY_SITES: [usize; 2] = [1, 6];

/// Default B threshold below which a pair counts as local.
pub const DEATH_THRESHOLD: f64 = 1e-6;

/// Leading-order behaviour of C and B for one pair after `|x><x|` evolves
/// under the site Hamiltonian for a short time `t`:
/// `C ~ slope_c t + quadratic_c t^2`, `B ~ slope_b t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimePrediction {
    pub pair: (usize, usize),
    /// rad/fs.
    pub slope_c: f64,
    /// rad/fs.
    pub slope_b: f64,
    /// (rad/fs)^2, nonzero only for pairs not containing `x`.
    pub quadratic_c: f64,
}

fn coupling(h: &ComplexMatrix, a: usize, b: usize) -> f64 {
    h[(a - 1, b - 1)].re
}

/// `sum_{l != x, n} J_xl^2`.
fn competing_couplings(h: &ComplexMatrix, x: usize, n: usize) -> f64 {
    (1..=h.dim())
        .filter(|&l| l != x && l != n)
        .map(|l| coupling(h, x, l).powi(2))
        .sum()
}

/// Short-time predictions for all pairs, from the rad/fs site Hamiltonian:
///
/// * `C(x, n) ~ 2 t |J_xn|`
/// * `C(m, n) ~ 2 t^2 |J_mx J_xn|` for `m, n != x`
/// * `B(x, n) ~ 2 t sqrt(max(J_xn^2 - sum_{l != n} J_xl^2, 0))`
/// * `B(m, n) = 0` for `m, n != x`
pub fn short_time_oracle(x: usize, h: &ComplexMatrix) -> Result<Vec<ShortTimePrediction>> {
    check_site(x, h.dim())?;
    Ok(all_pairs(h.dim())
        .into_iter()
        .map(|(m, n)| {
            if m == x || n == x {
                let other = if m == x { n } else { m };
                let j = coupling(h, x, other);
                ShortTimePrediction {
                    pair: (m, n),
                    slope_c: 2.0 * j.abs(),
                    slope_b: 2.0 * (j * j - competing_couplings(h, x, other)).max(0.0).sqrt(),
                    quadratic_c: 0.0,
                }
            } else {
                ShortTimePrediction {
                    pair: (m, n),
                    slope_c: 0.0,
                    slope_b: 0.0,
                    quadratic_c: 2.0 * (coupling(h, m, x) * coupling(h, x, n)).abs(),
                }
            }
        })
        .collect())
}

/// The pair `(x, n)` with `J_xn^2 > sum_{l != n} J_xl^2`, if any. At most
/// one `n` can satisfy this since its coupling must dominate all others.
pub fn dominant_pair(x: usize, h: &ComplexMatrix) -> Result<Option<(usize, usize)>> {
    check_site(x, h.dim())?;
    Ok((1..=h.dim())
        .filter(|&n| n != x)
        .find(|&n| coupling(h, x, n).powi(2) > competing_couplings(h, x, n))
        .map(|n| (x.min(n), x.max(n))))
}

/// Contribution of one exciton state to the FRET mixture on a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitonContribution {
    /// 1-based, ascending energy.
    pub exciton: usize,
    /// `c_rx^2`.
    pub weight: f64,
    pub coeff_m: f64,
    pub coeff_n: f64,
    /// `2 |c_rm c_rn|`, C of the pair reduced from `|e_r>`.
    pub pair_concurrence: f64,
    /// `2 |c_rm c_rn| / (c_rm^2 + c_rn^2)`: B = C of `|e_r>` projected onto
    /// the pair and renormalized, a pure two-qubit state.
    pub projected_pure_value: f64,
    /// `c_rx^2 c_rm c_rn`, signed contribution to `rho_mn`.
    pub signed_coherence: f64,
}

/// Populations, coherence and measures of a pair at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSnapshot {
    pub pop_m: f64,
    pub pop_n: f64,
    pub coherence: f64,
    pub c: f64,
    pub mu1: f64,
    pub mu3: f64,
    pub m: f64,
    pub b: f64,
}

impl PairSnapshot {
    fn new(
        pop_m: f64,
        pop_n: f64,
        coherence: f64,
        trace: f64,
        pair: (usize, usize),
    ) -> Result<Self> {
        let r = ReducedPairState::new(pair.0, pair.1, pop_m, pop_n, coherence.into(), trace)?;
        let cf = closed_form_measures(&r);
        Ok(Self {
            pop_m,
            pop_n,
            coherence,
            c: cf.c,
            mu1: cf.mu1,
            mu3: cf.mu3,
            m: cf.m(),
            b: cf.b,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FretInterferenceReport {
    pub site: usize,
    pub pair: (usize, usize),
    /// False for entry sites other than 1 and 6.
    pub reference_site: bool,
    /// Sorted by descending weight.
    pub contributions: Vec<ExcitonContribution>,
    /// Summed weight of the two dominant excitons.
    pub dominant_weight: f64,
    /// Keeping only the two dominant excitons.
    pub two_state: PairSnapshot,
    /// Full exciton sum.
    pub exact: PairSnapshot,
}

/// Decomposition of the FRET state for entry site `x` on the pair `(x, n)`
/// with the largest site coherence.
pub fn fret_interference_report(x: usize, basis: &ExcitonBasis) -> Result<FretInterferenceReport> {
    check_site(x, basis.n_sites())?;
    let weights = basis.site_weights(x)?;
    let partner = (1..=basis.n_sites())
        .filter(|&n| n != x)
        .max_by(|&a, &b| {
            let coh = |n: usize| -> f64 {
                weights
                    .iter()
                    .enumerate()
                    .map(|(r, w)| w * basis.coeffs[r][x - 1] * basis.coeffs[r][n - 1])
                    .sum::<f64>()
                    .abs()
            };
            coh(a).total_cmp(&coh(b))
        })
        .expect("at least two sites");
    fret_interference_report_for_pair(x, (x.min(partner), x.max(partner)), basis)
}

pub fn fret_interference_report_for_pair(
    x: usize,
    pair: (usize, usize),
    basis: &ExcitonBasis,
) -> Result<FretInterferenceReport> {
    let n_sites = basis.n_sites();
    check_site(x, n_sites)?;
    check_site(pair.0, n_sites)?;
    check_site(pair.1, n_sites)?;
    if pair.0 == pair.1 {
        return Err(Error::DegeneratePair {
            m: pair.0,
            n: pair.1,
        });
    }
    let (m, n) = (pair.0.min(pair.1), pair.0.max(pair.1));
    let weights = basis.site_weights(x)?;

    let mut contributions: Vec<ExcitonContribution> = weights
        .iter()
        .enumerate()
        .map(|(r, &w)| {
            let (cm, cn) = (basis.coeffs[r][m - 1], basis.coeffs[r][n - 1]);
            let norm = cm * cm + cn * cn;
            ExcitonContribution {
                exciton: r + 1,
                weight: w,
                coeff_m: cm,
                coeff_n: cn,
                pair_concurrence: 2.0 * (cm * cn).abs(),
                projected_pure_value: if norm > 0.0 {
                    2.0 * (cm * cn).abs() / norm
                } else {
                    0.0
                },
                signed_coherence: w * cm * cn,
            }
        })
        .collect();
    contributions.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.exciton.cmp(&b.exciton))
    });

    let snapshot = |terms: &[ExcitonContribution]| -> Result<PairSnapshot> {
        let pop_m = terms.iter().map(|t| t.weight * t.coeff_m * t.coeff_m).sum();
        let pop_n = terms.iter().map(|t| t.weight * t.coeff_n * t.coeff_n).sum();
        let coherence = terms.iter().map(|t| t.signed_coherence).sum();
        PairSnapshot::new(pop_m, pop_n, coherence, 1.0, (m, n))
    };
    let dominant = &contributions[..2.min(contributions.len())];
    Ok(FretInterferenceReport {
        site: x,
        pair: (m, n),
        reference_site: ENTRY_SITES.contains(&x),
        dominant_weight: dominant.iter().map(|t| t.weight).sum(),
        two_state: snapshot(dominant)?,
        exact: snapshot(&contributions)?,
        contributions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuddenDeathReport {
    pub pair: (usize, usize),
    /// Last downward threshold crossing after which B stays at or below
    /// threshold to the end of the grid; `None` if B never exceeds the
    /// threshold or is still above it at the end.
    pub death_time_fs: Option<f64>,
    pub peak_b: f64,
    pub peak_time_fs: f64,
    pub threshold: f64,
}

pub fn detect_sudden_death(
    series: &CorrelationTimeSeries,
    pair: (usize, usize),
    threshold: f64,
) -> Result<SuddenDeathReport> {
    let ps = series.pair(pair.0, pair.1).ok_or(Error::InvalidParameter {
        name: "pair",
        reason: format!("pair ({}, {}) not present in series", pair.0, pair.1),
    })?;
    detect_sudden_death_in(&series.times_fs, &ps.b(), ps.pair(), threshold)
}

/// Same as [`detect_sudden_death`] on raw samples.
pub fn detect_sudden_death_in(
    times: &[f64],
    b: &[f64],
    pair: (usize, usize),
    threshold: f64,
) -> Result<SuddenDeathReport> {
    if times.is_empty() || b.is_empty() {
        return Err(Error::EmptySeries);
    }
    if times.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: b.len(),
        });
    }
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("must be positive, got {threshold}"),
        });
    }
    let (peak_idx, &peak_b) = b
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("nonempty");
    let death_time_fs = match b.iter().rposition(|&v| v > threshold) {
        Some(last) if last + 1 < b.len() => {
            let (b0, b1) = (b[last], b[last + 1]);
            let frac = (b0 - threshold) / (b0 - b1);
            Some(times[last] + frac * (times[last + 1] - times[last]))
        }
        _ => None,
    };
    Ok(SuddenDeathReport {
        pair,
        death_time_fs,
        peak_b,
        peak_time_fs: times[peak_idx],
        threshold,
    })
}

/// Least-squares leading coefficients over a short window, compared with
/// the analytic predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimeFit {
    pub pair: (usize, usize),
    pub window_fs: f64,
    pub fitted_slope_c: f64,
    pub fitted_slope_b: f64,
    pub fitted_quadratic_c: f64,
    pub predicted: ShortTimePrediction,
}

impl ShortTimeFit {
    pub fn slope_c_rel_error(&self) -> f64 {
        rel_error(self.fitted_slope_c, self.predicted.slope_c)
    }

    pub fn slope_b_rel_error(&self) -> f64 {
        rel_error(self.fitted_slope_b, self.predicted.slope_b)
    }

    pub fn quadratic_c_rel_error(&self) -> f64 {
        rel_error(self.fitted_quadratic_c, self.predicted.quadratic_c)
    }
}

fn rel_error(fit: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        fit.abs()
    } else {
        ((fit - expected) / expected).abs()
    }
}

/// Fits `y(t) = sum_p a_p t^p` over `0 < t <= window` for the given powers
/// and returns the coefficients in the same order.
pub fn polynomial_fit(
    times: &[f64],
    values: &[f64],
    powers: &[i32],
    window_fs: f64,
) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] > 0.0 && times[i] <= window_fs + 1e-12)
        .collect();
    if rows.len() < powers.len() {
        return Err(Error::WindowOutOfRange {
            start_fs: 0.0,
            end_fs: window_fs,
            available_fs: times.last().copied().unwrap_or(0.0),
        });
    }
    // columns scaled by window^p for conditioning
    let design = DMatrix::from_fn(rows.len(), powers.len(), |r, c| {
        (times[rows[r]] / window_fs).powi(powers[c])
    });
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|&i| values[i]));
    let svd = design.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-14)
        .map_err(|reason| Error::InvalidParameter {
            name: "fit",
            reason: reason.to_string(),
        })?;
    Ok(powers
        .iter()
        .enumerate()
        .map(|(c, &p)| sol[c] / window_fs.powi(p))
        .collect())
}

/// Fits the early-time C and B of one pair. Linear coefficients come from a
/// `t, t^2, t^3` model and the quadratic one from `t^2, t^3, t^4`, so the
/// next-order corrections do not bias the leading term.
pub fn short_time_validation(
    series: &CorrelationTimeSeries,
    prediction: &ShortTimePrediction,
    window_fs: f64,
) -> Result<ShortTimeFit> {
    let available = series.times_fs.last().copied().unwrap_or(0.0);
    if window_fs.is_nan() || window_fs <= 0.0 || window_fs > available + 1e-12 {
        return Err(Error::WindowOutOfRange {
            start_fs: 0.0,
            end_fs: window_fs,
            available_fs: available,
        });
    }
    let (m, n) = prediction.pair;
    let ps = series.pair(m, n).ok_or(Error::InvalidParameter {
        name: "pair",
        reason: format!("pair ({m}, {n}) not present in series"),
    })?;
    let (c, b) = (ps.c(), ps.b());
    let linear = [1, 2, 3];
    let quadratic = [2, 3, 4];
    Ok(ShortTimeFit {
        pair: (m, n),
        window_fs,
        fitted_slope_c: polynomial_fit(&series.times_fs, &c, &linear, window_fs)?[0],
        fitted_slope_b: polynomial_fit(&series.times_fs, &b, &linear, window_fs)?[0],
        fitted_quadratic_c: polynomial_fit(&series.times_fs, &c, &quadratic, window_fs)?[0],
        predicted: *prediction,
    })
}
