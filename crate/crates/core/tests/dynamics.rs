use fmo_heom::integrate::integrate_with;
use fmo_heom::linalg::hermitian_eigen;
use fmo_heom::model::{fret_state, localized_state};
use fmo_heom::*;

fn params(depth: usize, t_end: f64) -> SystemParams {
    let mut p = SystemParams::fmo();
    p.truncation = depth;
    p.t_end_fs = t_end;
    p
}

fn run(p: &SystemParams, rho: &ComplexMatrix, cfg: &IntegratorConfig) -> Trajectory {
    let model = HeomModel::new(p, &UnitSystem::default()).unwrap();
    integrate(
        &model,
        rho,
        OutputGrid::new(p.t_end_fs, p.dt_out_fs).unwrap(),
        cfg,
    )
    .unwrap()
}

#[test]
fn physical_state_along_desk_scale_run() {
    let p = params(4, 1000.0);
    let model = HeomModel::new(&p, &UnitSystem::default()).unwrap();
    let rho = localized_state(1, 7).unwrap();
    let mut worst_defect: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut traces = Vec::new();
    integrate_with(
        &model,
        &rho,
        OutputGrid::new(p.t_end_fs, 1.0).unwrap(),
        &IntegratorConfig::default(),
        |s| {
            worst_defect = worst_defect.max(s.hermiticity_defect());
            let d = s.density();
            min_eig = min_eig.min(hermitian_eigen(&d).unwrap().values[0]);
            traces.push(d.trace().re);
        },
    )
    .unwrap();
    assert_eq!(traces.len(), 1001);
    assert!(worst_defect <= 1e-9, "defect {worst_defect}");
    assert!(min_eig >= -1e-6, "min eigenvalue {min_eig}");
    assert!(traces.windows(2).all(|w| w[1] <= w[0]));
    assert!(traces[1000] < 0.9);
}

#[test]
fn trace_conserved_without_trapping() {
    let p = params(3, 300.0).without_trapping();
    let traj = run(
        &p,
        &localized_state(6, 7).unwrap(),
        &IntegratorConfig::default(),
    );
    for s in &traj.states {
        assert!((s.trace().re - 1.0).abs() <= 1e-7);
    }
}

#[test]
fn weak_coupling_matches_unitary_evolution() {
    let mut p = params(3, 200.0).without_trapping();
    p.lambda_cm = vec![1e-12; 7];
    let mut p0 = p.clone();
    p0.truncation = 0;
    let rho = localized_state(1, 7).unwrap();
    // step sequences differ between the two hierarchies, so compare well
    // below the default tolerance
    let cfg = IntegratorConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        ..IntegratorConfig::default()
    };
    let a = run(&p, &rho, &cfg);
    let b = run(&p0, &rho, &cfg);
    let worst = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "deviation {worst}");
}

#[test]
fn tighter_tolerances_change_little() {
    let p = params(3, 1000.0);
    let rho = localized_state(1, 7).unwrap();
    let coarse = IntegratorConfig::default();
    let fine = IntegratorConfig {
        abs_tol: coarse.abs_tol / 2.0,
        rel_tol: coarse.rel_tol / 2.0,
        ..coarse
    };
    let a = run(&p, &rho, &coarse);
    let b = run(&p, &rho, &fine);
    let diff = (a.states[1000][(0, 0)].re - b.states[1000][(0, 0)].re).abs();
    assert!(diff < coarse.rel_tol, "rho_11(1000 fs) moved by {diff}");
}

#[test]
fn thread_count_does_not_change_results() {
    let p = params(4, 60.0);
    let basis = ExcitonBasis::from_params(&p).unwrap();
    let rho = fret_state(1, &basis).unwrap();
    let cfg = IntegratorConfig::default();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let parallel = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let a = serial.install(|| run(&p, &rho, &cfg));
    let b = parallel.install(|| run(&p, &rho, &cfg));
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.as_slice(), y.as_slice());
    }
    assert_eq!(a.stats, b.stats);
}

#[test]
fn fret_pair_stays_local() {
    let p = params(3, 300.0);
    let basis = ExcitonBasis::from_params(&p).unwrap();
    let traj = run(
        &p,
        &fret_state(1, &basis).unwrap(),
        &IntegratorConfig::default(),
    );
    let series = CorrelationTimeSeries::from_trajectory(&traj, &[(1, 2)]).unwrap();
    let pair = series.pair(1, 2).unwrap();
    assert!(pair.b().iter().all(|&b| b == 0.0));
    assert!(pair.c().iter().cloned().fold(0.0, f64::max) > 0.1);
}
