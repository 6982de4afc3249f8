use std::path::Path;

use fmo_heom::analysis::{
    detect_sudden_death, dominant_pair, fret_interference_report, short_time_oracle, PairSnapshot,
};
use fmo_heom::hierarchy::hierarchy_count;
use fmo_heom::integrate::{convergence_study, IntegrationStats};
use fmo_heom::model::{build_hamiltonian, fret_state, localized_state};
use fmo_heom::{
    integrate, ComplexMatrix, CorrelationTimeSeries, ExcitonBasis, HeomModel, OutputGrid,
    UnitSystem,
};
use toml::{Table, Value};

use crate::config::{InitialKind, RunConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_f64, write_file, Csv};

pub fn initial_state(cfg: &RunConfig) -> Result<ComplexMatrix, CliError> {
    let params = cfg.system_params();
    Ok(match cfg.initial.kind {
        InitialKind::Localized => localized_state(cfg.initial.site, params.n_sites())?,
        InitialKind::Fret => fret_state(cfg.initial.site, &ExcitonBasis::from_params(&params)?)?,
    })
}

fn run(cfg: &RunConfig) -> Result<(CorrelationTimeSeries, IntegrationStats), CliError> {
    let params = cfg.system_params();
    let model = HeomModel::new(&params, &UnitSystem::default())?;
    let grid = OutputGrid::new(params.t_end_fs, params.dt_out_fs)?;
    let traj = integrate(&model, &initial_state(cfg)?, grid, &cfg.integrator_config())?;
    let series = CorrelationTimeSeries::from_trajectory(&traj, &cfg.pairs()?)?;
    Ok((series, traj.stats))
}

fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    stats: Option<IntegrationStats>,
) -> Result<(), CliError> {
    let mut run = Table::new();
    run.insert("command".into(), command.into());
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let count =
        hierarchy_count(cfg.system.hamiltonian_cm.len(), cfg.system.truncation).unwrap_or(0);
    run.insert(
        "hierarchy_count".into(),
        Value::Integer(i64::try_from(count).unwrap_or(i64::MAX)),
    );
    if let Some(s) = stats {
        run.insert(
            "accepted_steps".into(),
            Value::Integer(s.accepted_steps as i64),
        );
        run.insert(
            "rejected_steps".into(),
            Value::Integer(s.rejected_steps as i64),
        );
        run.insert(
            "rhs_evaluations".into(),
            Value::Integer(s.rhs_evaluations as i64),
        );
    }
    let mut doc = Table::new();
    doc.insert("run".into(), Value::Table(run));
    doc.insert(
        "config".into(),
        Value::try_from(cfg).map_err(|e| CliError::Config(e.to_string()))?,
    );
    let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&out.join("run_manifest.toml"), &text)
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let (series, stats) = run(cfg)?;
    let n_sites = cfg.system.hamiltonian_cm.len();

    let mut header = vec!["t_fs".to_string()];
    header.extend((1..=n_sites).map(|k| format!("rho_{k}{k}")));
    header.push("trace".into());
    let mut pops = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, &t) in series.times_fs.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        row.extend(series.populations[i].iter().map(|&p| fmt_f64(p)));
        row.push(fmt_f64(series.traces[i]));
        pops.row(&row);
    }
    pops.write(&out.join("populations.csv"))?;

    for pair in &series.pairs {
        let mut csv = Csv::new(&["t_fs", "B", "C", "l1", "mu1", "mu3"]);
        for (&t, m) in series.times_fs.iter().zip(&pair.measures) {
            csv.row(&[
                fmt_f64(t),
                fmt_f64(m.b),
                fmt_f64(m.c),
                fmt_f64(m.l1),
                fmt_f64(m.mu1),
                fmt_f64(m.mu3),
            ]);
        }
        csv.write(&out.join(format!("measures_{}_{}.csv", pair.m, pair.n)))?;
    }
    write_manifest(out, "simulate", cfg, Some(stats))
}

pub fn converge(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let depths: Vec<usize> = (cfg.converge.n_min..=cfg.converge.n_max).collect();
    let points = convergence_study(
        &initial_state(cfg)?,
        &cfg.system_params(),
        &UnitSystem::default(),
        &depths,
        &cfg.integrator_config(),
    )?;
    let mut csv = Csv::new(&["N", "log10_D"]);
    for p in points {
        csv.row(&[p.truncation.to_string(), fmt_f64(p.log10())]);
    }
    csv.write(&out.join("convergence.csv"))?;
    write_manifest(out, "converge", cfg, None)
}

pub fn sudden_death(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let (series, stats) = run(cfg)?;
    let mut csv = Csv::new(&[
        "m",
        "n",
        "death_time_fs",
        "peak_B",
        "peak_time_fs",
        "threshold",
    ]);
    for pair in &series.pairs {
        let r = detect_sudden_death(&series, pair.pair(), cfg.analysis.death_threshold)?;
        csv.row(&[
            r.pair.0.to_string(),
            r.pair.1.to_string(),
            r.death_time_fs.map_or_else(|| "none".to_string(), fmt_f64),
            fmt_f64(r.peak_b),
            fmt_f64(r.peak_time_fs),
            fmt_f64(r.threshold),
        ]);
    }
    csv.write(&out.join("sudden_death.csv"))?;
    write_manifest(out, "sudden-death", cfg, Some(stats))
}

/// Short-time predictions and dominant pairs for every entry site.
pub fn oracle(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let params = cfg.system_params();
    let h = build_hamiltonian(&params, &UnitSystem::default())?;
    let mut table = Csv::new(&["x", "m", "n", "slope_C", "slope_B", "quadratic_C"]);
    let mut dominant = Csv::new(&["x", "m", "n"]);
    for x in 1..=params.n_sites() {
        for p in short_time_oracle(x, &h)? {
            table.row(&[
                x.to_string(),
                p.pair.0.to_string(),
                p.pair.1.to_string(),
                fmt_f64(p.slope_c),
                fmt_f64(p.slope_b),
                fmt_f64(p.quadratic_c),
            ]);
        }
        let (m, n) = match dominant_pair(x, &h)? {
            Some((m, n)) => (m.to_string(), n.to_string()),
            None => ("none".into(), "none".into()),
        };
        dominant.row(&[x.to_string(), m, n]);
    }
    table.write(&out.join("oracle.csv"))?;
    dominant.write(&out.join("dominant_pair.csv"))?;
    write_manifest(out, "oracle", cfg, None)
}

pub fn fret_report(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_dir(out)?;
    let basis = ExcitonBasis::from_params(&cfg.system_params())?;
    let report = fret_interference_report(cfg.initial.site, &basis)?;
    let (m, n) = report.pair;

    let mut excitons = Csv::new(&[
        "x",
        "m",
        "n",
        "exciton",
        "weight",
        "c_m",
        "c_n",
        "pair_C",
        "projected_pure_value",
        "signed_coherence",
    ]);
    for c in &report.contributions {
        excitons.row(&[
            report.site.to_string(),
            m.to_string(),
            n.to_string(),
            c.exciton.to_string(),
            fmt_f64(c.weight),
            fmt_f64(c.coeff_m),
            fmt_f64(c.coeff_n),
            fmt_f64(c.pair_concurrence),
            fmt_f64(c.projected_pure_value),
            fmt_f64(c.signed_coherence),
        ]);
    }
    excitons.write(&out.join("fret_report.csv"))?;

    let mut summary = Csv::new(&[
        "variant",
        "rho_mm",
        "rho_nn",
        "rho_mn",
        "C",
        "mu1",
        "mu3",
        "M",
        "B",
        "reference_site",
    ]);
    let mut row = |name: &str, s: &PairSnapshot| {
        summary.row(&[
            name.to_string(),
            fmt_f64(s.pop_m),
            fmt_f64(s.pop_n),
            fmt_f64(s.coherence),
            fmt_f64(s.c),
            fmt_f64(s.mu1),
            fmt_f64(s.mu3),
            fmt_f64(s.m),
            fmt_f64(s.b),
            report.reference_site.to_string(),
        ]);
    };
    row("two_state", &report.two_state);
    row("exact", &report.exact);
    summary.write(&out.join("fret_summary.csv"))?;
    write_manifest(out, "fret-report", cfg, None)
}
