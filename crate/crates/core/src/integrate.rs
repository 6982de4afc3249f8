//! Embedded Dormand-Prince 5(4) integration of the hierarchy with PI step
//! control. Grid points inside a step come from the fourth-order continuous
//! extension; the last step is clipped to land on the end of the grid.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heom::{HeomModel, HierarchyState};
use crate::linalg::{trace_distance, ComplexMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// Dormand & Prince (1980) tableau. The hierarchy is autonomous, so the
// stage abscissae are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension (Hairer, Norsett & Wanner, CONTD5)
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI controller (Hairer, Norsett & Wanner, DOPRI5 defaults).
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_CONSECUTIVE_REJECTS: usize = 100;

/// Chunk size for parallel stage arithmetic and error-norm partial sums.
/// Fixed so the reduction order does not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step_fs: f64,
    pub max_step_fs: f64,
    /// Abort once the proposed step drops below this.
    pub min_step_fs: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            initial_step_fs: 0.1,
            max_step_fs: 5.0,
            min_step_fs: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("abs_tol", self.abs_tol)?;
        positive("rel_tol", self.rel_tol)?;
        positive("initial_step_fs", self.initial_step_fs)?;
        positive("max_step_fs", self.max_step_fs)?;
        positive("min_step_fs", self.min_step_fs)?;
        Ok(())
    }
}

/// Uniform output grid `0, dt, 2 dt, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputGrid {
    pub t_end_fs: f64,
    pub dt_fs: f64,
}

impl OutputGrid {
    pub fn new(t_end_fs: f64, dt_fs: f64) -> Result<Self> {
        if !(dt_fs > 0.0 && t_end_fs >= 0.0 && t_end_fs.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt_out_fs",
                reason: format!("invalid output grid: t_end {t_end_fs} fs, dt {dt_fs} fs"),
            });
        }
        Ok(Self { t_end_fs, dt_fs })
    }

    pub fn len(&self) -> usize {
        (self.t_end_fs / self.dt_fs + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt_fs
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

/// Reduced density operators on the output grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_fs: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times_fs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_fs.is_empty()
    }
}

/// Runs the hierarchy from `rho0` with zero auxiliaries and returns
/// `zeta(0)` at every grid point.
pub fn integrate(
    model: &HeomModel,
    rho0: &ComplexMatrix,
    grid: OutputGrid,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let stats = integrate_with(model, rho0, grid, config, |state| {
        times.push(state.time_fs);
        states.push(state.density());
    })?;
    Ok(Trajectory {
        times_fs: times,
        states,
        stats,
    })
}

/// Like [`integrate`], but hands the full hierarchy state to `observe` at
/// every grid point.
pub fn integrate_with(
    model: &HeomModel,
    rho0: &ComplexMatrix,
    grid: OutputGrid,
    config: &IntegratorConfig,
    mut observe: impl FnMut(&HierarchyState),
) -> Result<IntegrationStats> {
    config.validate()?;
    rho0.ensure_hermitian()?;
    let initial = model.initial_state(rho0)?;
    let n_sites = model.n_sites();
    let mut solver = Dopri5::new(model, config, initial.into_flat());

    let mut snapshot = HierarchyState::from_flat(n_sites, solver.y.clone(), 0.0)?;
    observe(&snapshot);
    let t_end = grid.time(grid.len() - 1);
    let mut next = 1;
    while next < grid.len() {
        let t_new = solver.step(t_end)?;
        while next < grid.len() && grid.time(next) <= t_new * (1.0 + 1e-13) {
            let target = grid.time(next);
            solver.interpolate(target, t_new, snapshot.as_mut_slice());
            snapshot.time_fs = target;
            observe(&snapshot);
            next += 1;
        }
        solver.commit(t_new);
    }
    Ok(solver.stats)
}

struct Dopri5<'a> {
    model: &'a HeomModel,
    config: IntegratorConfig,
    t: f64,
    h: f64,
    /// Size of the accepted step awaiting [`Dopri5::commit`].
    h_done: f64,
    y: Vec<Complex64>,
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
    err_old: f64,
    fsal_valid: bool,
    stats: IntegrationStats,
}

impl<'a> Dopri5<'a> {
    fn new(model: &'a HeomModel, config: &IntegratorConfig, y: Vec<Complex64>) -> Self {
        let n = y.len();
        let buf = || vec![ZERO; n];
        Self {
            model,
            config: *config,
            t: 0.0,
            h: config.initial_step_fs.min(config.max_step_fs),
            h_done: 0.0,
            y,
            k: [buf(), buf(), buf(), buf(), buf(), buf(), buf()],
            stage: buf(),
            y_new: buf(),
            err_old: 1e-4,
            fsal_valid: false,
            stats: IntegrationStats::default(),
        }
    }

    fn eval(&mut self, from_stage: bool, into: usize) {
        let src = if from_stage { &self.stage } else { &self.y_new };
        self.model.rhs_into(src, &mut self.k[into]);
        self.stats.rhs_evaluations += 1;
    }

    /// `stage = y + h * sum_j coeffs[j] * k[j]`.
    fn combine(&mut self, h: f64, coeffs: &[(usize, f64)], into_new: bool) {
        let k = &self.k;
        let y = &self.y;
        let out = if into_new {
            &mut self.y_new
        } else {
            &mut self.stage
        };
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (i, o) in chunk.iter_mut().enumerate() {
                    let idx = base + i;
                    let mut acc = ZERO;
                    for &(j, a) in coeffs {
                        acc += k[j][idx] * a;
                    }
                    *o = y[idx] + acc * h;
                }
            });
    }

    fn error_norm(&self, h: f64) -> f64 {
        let (atol, rtol) = (self.config.abs_tol, self.config.rel_tol);
        let k = &self.k;
        let partial: Vec<f64> = self
            .y
            .par_chunks(CHUNK)
            .zip(self.y_new.par_chunks(CHUNK))
            .enumerate()
            .map(|(c, (y, yn))| {
                let base = c * CHUNK;
                let mut s = 0.0;
                for i in 0..y.len() {
                    let idx = base + i;
                    let e = (k[0][idx] * E1
                        + k[2][idx] * E3
                        + k[3][idx] * E4
                        + k[4][idx] * E5
                        + k[5][idx] * E6
                        + k[6][idx] * E7)
                        * h;
                    let sc = atol + rtol * y[i].norm().max(yn[i].norm());
                    s += e.norm_sqr() / (sc * sc);
                }
                s
            })
            .collect();
        let total: f64 = partial.iter().sum();
        (total / self.y.len() as f64).sqrt()
    }

    /// Attempts steps until one is accepted, never passing `t_max`. The
    /// result sits in `y_new` and `k` until [`Dopri5::commit`]; returns the
    /// time it reaches.
    fn step(&mut self, t_max: f64) -> Result<f64> {
        let mut rejects = 0;
        loop {
            let remaining = t_max - self.t;
            let mut h = self.h.min(self.config.max_step_fs);
            let clipped = h >= remaining * (1.0 - 1e-12);
            if clipped {
                h = remaining;
            }
            if h < self.config.min_step_fs {
                return Err(Error::StepSizeUnderflow {
                    t_fs: self.t,
                    step: h,
                });
            }

            if !self.fsal_valid {
                self.model.rhs_into(&self.y, &mut self.k[0]);
                self.stats.rhs_evaluations += 1;
                self.fsal_valid = true;
            }
            self.combine(h, &[(0, A21)], false);
            self.eval(true, 1);
            self.combine(h, &[(0, A31), (1, A32)], false);
            self.eval(true, 2);
            self.combine(h, &[(0, A41), (1, A42), (2, A43)], false);
            self.eval(true, 3);
            self.combine(h, &[(0, A51), (1, A52), (2, A53), (3, A54)], false);
            self.eval(true, 4);
            self.combine(
                h,
                &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
                false,
            );
            self.eval(true, 5);
            self.combine(h, &[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], true);
            self.eval(false, 6);

            let err = self.error_norm(h);
            if !err.is_finite() {
                return Err(Error::NonFinite { t_fs: self.t });
            }
            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac =
                    (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let h_next = h / fac;
                self.err_old = err.max(1e-4);
                self.stats.accepted_steps += 1;
                // a clipped step says nothing about the natural step size
                if !clipped || h_next > self.h {
                    self.h = h_next;
                }
                self.h_done = h;
                return Ok(if clipped { t_max } else { self.t + h });
            }
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
            self.stats.rejected_steps += 1;
            rejects += 1;
            if rejects >= MAX_CONSECUTIVE_REJECTS {
                return Err(Error::ToleranceNotMet {
                    t_fs: self.t,
                    rejections: rejects,
                });
            }
        }
    }

    /// State at `t` inside the pending step ending at `t_new`.
    fn interpolate(&self, t: f64, t_new: f64, out: &mut [Complex64]) {
        if t >= t_new {
            out.copy_from_slice(&self.y_new);
            return;
        }
        let h = self.h_done;
        let theta = ((t - self.t) / h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let (k, y0, y1) = (&self.k, &self.y, &self.y_new);
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (i, o) in chunk.iter_mut().enumerate() {
                    let idx = base + i;
                    let ydiff = y1[idx] - y0[idx];
                    let bspl = k[0][idx] * h - ydiff;
                    let r4 = ydiff - k[6][idx] * h - bspl;
                    let r5 = (k[0][idx] * D1
                        + k[2][idx] * D3
                        + k[3][idx] * D4
                        + k[4][idx] * D5
                        + k[5][idx] * D6
                        + k[6][idx] * D7)
                        * h;
                    *o = y0[idx] + (ydiff + (bspl + (r4 + r5 * theta1) * theta) * theta1) * theta;
                }
            });
    }

    fn commit(&mut self, t_new: f64) {
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.k.swap(0, 6);
        self.t = t_new;
    }
}

/// Largest trace distance between two trajectories over their common grid.
pub fn max_trace_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        worst = worst.max(trace_distance(&x.hermitian_part(), &y.hermitian_part())?);
    }
    Ok(worst)
}

/// One entry of a truncation-convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub truncation: usize,
    /// `max_t D(rho_N(t), rho_{N+1}(t))`.
    pub max_trace_distance: f64,
}

impl ConvergencePoint {
    pub fn log10(&self) -> f64 {
        self.max_trace_distance.log10()
    }
}

/// `D(N, N+1)` for every `N` in `truncations`. Each depth is integrated
/// once; neighbouring entries share trajectories.
pub fn convergence_study(
    rho0: &ComplexMatrix,
    params: &crate::model::SystemParams,
    units: &crate::model::UnitSystem,
    truncations: &[usize],
    config: &IntegratorConfig,
) -> Result<Vec<ConvergencePoint>> {
    if truncations.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "truncations",
            reason: "must be strictly ascending".into(),
        });
    }
    let grid = OutputGrid::new(params.t_end_fs, params.dt_out_fs)?;
    let mut cache: Vec<(usize, Trajectory)> = Vec::new();
    let mut run = |depth: usize| -> Result<Trajectory> {
        if let Some((_, t)) = cache.iter().find(|(d, _)| *d == depth) {
            return Ok(t.clone());
        }
        let mut p = params.clone();
        p.truncation = depth;
        let model = HeomModel::new(&p, units)?;
        let traj = integrate(&model, rho0, grid, config)?;
        cache.retain(|(d, _)| *d + 1 >= depth);
        cache.push((depth, traj.clone()));
        Ok(traj)
    };
    let mut out = Vec::with_capacity(truncations.len());
    for &n in truncations {
        let lo = run(n)?;
        let hi = run(n + 1)?;
        out.push(ConvergencePoint {
            truncation: n,
            max_trace_distance: max_trace_distance(&lo, &hi)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigen;
    use crate::model::{localized_state, SystemParams, UnitSystem};
    use approx::assert_abs_diff_eq;

    fn unitary_params() -> SystemParams {
        let mut p = SystemParams::fmo().without_trapping();
        p.truncation = 0;
        p.lambda_cm = vec![1e-300; 7];
        p
    }

    /// `exp(-iHt) rho exp(iHt)` from the spectral decomposition.
    fn exact_unitary(h: &ComplexMatrix, rho: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let eig = hermitian_eigen(h).unwrap();
        let n = h.dim();
        let u = ComplexMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| {
                    eig.vectors[(i, k)]
                        * Complex64::from_polar(1.0, -eig.values[k] * t)
                        * eig.vectors[(j, k)].conj()
                })
                .sum()
        });
        &(&u * rho) * &u.adjoint()
    }

    #[test]
    fn grid_points_are_hit_exactly() {
        let grid = OutputGrid::new(10.0, 0.5).unwrap();
        assert_eq!(grid.len(), 21);
        let p = unitary_params();
        let model = HeomModel::new(&p, &UnitSystem::default()).unwrap();
        let traj = integrate(
            &model,
            &localized_state(1, 7).unwrap(),
            grid,
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(traj.times_fs, grid.times());
    }

    #[test]
    fn unitary_limit_matches_exact_propagator() {
        let p = unitary_params();
        let u = UnitSystem::default();
        let model = HeomModel::new(&p, &u).unwrap();
        let rho0 = localized_state(1, 7).unwrap();
        let grid = OutputGrid::new(200.0, 1.0).unwrap();
        let traj = integrate(&model, &rho0, grid, &IntegratorConfig::default()).unwrap();
        let h = crate::model::build_hamiltonian(&p, &u).unwrap();
        for (t, rho) in traj.times_fs.iter().zip(&traj.states) {
            let exact = exact_unitary(&h, &rho0, *t);
            assert!(rho.max_abs_diff(&exact) < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn trapping_drains_trace_monotonically() {
        let mut p = SystemParams::fmo();
        p.truncation = 1;
        p.trap_time_ps = 0.1;
        let model = HeomModel::new(&p, &UnitSystem::default()).unwrap();
        let grid = OutputGrid::new(100.0, 1.0).unwrap();
        let traj = integrate(
            &model,
            &localized_state(3, 7).unwrap(),
            grid,
            &IntegratorConfig::default(),
        )
        .unwrap();
        let traces: Vec<f64> = traj.states.iter().map(|r| r.trace().re).collect();
        assert!(traces.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(traces.last().unwrap() < &0.9);
    }

    #[test]
    fn tiny_step_limit_aborts() {
        let p = unitary_params();
        let model = HeomModel::new(&p, &UnitSystem::default()).unwrap();
        let cfg = IntegratorConfig {
            abs_tol: 1e-30,
            rel_tol: 1e-30,
            min_step_fs: 1e-3,
            ..IntegratorConfig::default()
        };
        let err = integrate(
            &model,
            &localized_state(1, 7).unwrap(),
            OutputGrid::new(5.0, 1.0).unwrap(),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::StepSizeUnderflow { .. } | Error::ToleranceNotMet { .. }
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(OutputGrid::new(10.0, 0.0).is_err());
    }

    #[test]
    fn same_depth_twice_gives_zero_distance() {
        let mut p = SystemParams::fmo();
        p.truncation = 1;
        p.t_end_fs = 20.0;
        let model = HeomModel::new(&p, &UnitSystem::default()).unwrap();
        let grid = OutputGrid::new(20.0, 1.0).unwrap();
        let rho0 = localized_state(6, 7).unwrap();
        let a = integrate(&model, &rho0, grid, &IntegratorConfig::default()).unwrap();
        let b = integrate(&model, &rho0, grid, &IntegratorConfig::default()).unwrap();
        assert_abs_diff_eq!(max_trace_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn convergence_rejects_unsorted_depths() {
        let p = SystemParams::fmo();
        let rho0 = localized_state(1, 7).unwrap();
        assert!(convergence_study(
            &rho0,
            &p,
            &UnitSystem::default(),
            &[3, 2],
            &IntegratorConfig::default()
        )
        .is_err());
    }
}
