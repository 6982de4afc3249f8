use std::path::Path;
use std::process::{Command, Output};

fn fmo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmo-heom"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn simulate_writes_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = fmo(
        &[
            "simulate",
            "--set",
            "system.truncation=2",
            "--set",
            "system.t_end_fs=20",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (header, rows) = read_csv(&dir.path().join("populations.csv"));
    assert_eq!(
        header.join(","),
        "t_fs,rho_11,rho_22,rho_33,rho_44,rho_55,rho_66,rho_77,trace"
    );
    assert_eq!(rows.len(), 21);
    assert_eq!(num(&rows[0][1]), 1.0);
    assert!(rows[0][2..8].iter().all(|v| num(v) == 0.0));
    assert_eq!(rows[0][1], "1.00000000000e0");

    for m in 1..=7 {
        for n in m + 1..=7 {
            let (header, rows) = read_csv(&dir.path().join(format!("measures_{m}_{n}.csv")));
            assert_eq!(header.join(","), "t_fs,B,C,l1,mu1,mu3");
            assert_eq!(rows.len(), 21);
        }
    }
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("run_manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["run"]["hierarchy_count"].as_integer(), Some(36));
    assert_eq!(
        manifest["config"]["system"]["truncation"].as_integer(),
        Some(2)
    );
}

#[test]
fn manifest_records_full_hierarchy_count() {
    let dir = tempfile::tempdir().unwrap();
    assert!(fmo(&["oracle"], dir.path()).status.success());
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("run_manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(manifest["run"]["hierarchy_count"].as_integer(), Some(50388));

    let (header, rows) = read_csv(&dir.path().join("oracle.csv"));
    assert_eq!(header.join(","), "x,m,n,slope_C,slope_B,quadratic_C");
    assert_eq!(rows.len(), 7 * 21);
    let (_, dominant) = read_csv(&dir.path().join("dominant_pair.csv"));
    assert_eq!(dominant[0], ["1", "1", "2"]);
    assert_eq!(dominant[5], ["6", "5", "6"]);
}

#[test]
fn fret_run_is_local() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [
        "sudden-death",
        "--set",
        "initial.kind=fret",
        "--set",
        "system.truncation=2",
        "--set",
        "system.t_end_fs=150",
        "--set",
        "output.pairs=[[1, 2]]",
    ];
    assert!(fmo(&sets, dir.path()).status.success());
    let (header, rows) = read_csv(&dir.path().join("sudden_death.csv"));
    assert_eq!(
        header.join(","),
        "m,n,death_time_fs,peak_B,peak_time_fs,threshold"
    );
    assert_eq!(
        rows,
        vec![vec![
            "1",
            "2",
            "none",
            "0.00000000000e0",
            "0.00000000000e0",
            "1.00000000000e-6"
        ]]
    );

    let mut sim = sets.to_vec();
    sim[0] = "simulate";
    assert!(fmo(&sim, dir.path()).status.success());
    let (_, rows) = read_csv(&dir.path().join("measures_1_2.csv"));
    assert!(rows.iter().all(|r| num(&r[1]) == 0.0));
    assert!(rows.iter().any(|r| num(&r[2]) > 0.1));
}

#[test]
fn localized_run_reports_death() {
    let dir = tempfile::tempdir().unwrap();
    let out = fmo(
        &[
            "sudden-death",
            "--set",
            "system.truncation=3",
            "--set",
            "system.t_end_fs=200",
            "--set",
            "output.pairs=[[1, 2]]",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let (_, rows) = read_csv(&dir.path().join("sudden_death.csv"));
    let t = num(&rows[0][2]);
    assert!((60.0..=100.0).contains(&t), "death at {t}");
}

#[test]
fn converge_trend_and_fret_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = fmo(
        &[
            "converge",
            "--set",
            "converge.n_min=2",
            "--set",
            "converge.n_max=4",
            "--set",
            "system.t_end_fs=100",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let (header, rows) = read_csv(&dir.path().join("convergence.csv"));
    assert_eq!(header, ["N", "log10_D"]);
    let logs: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    assert_eq!(
        rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["2", "3", "4"]
    );
    assert!(logs.windows(2).all(|w| w[1] <= w[0]));

    assert!(fmo(&["fret-report"], dir.path()).status.success());
    let (_, excitons) = read_csv(&dir.path().join("fret_report.csv"));
    assert_eq!(excitons.len(), 7);
    assert_eq!(excitons[0][3], "3");
    let (_, summary) = read_csv(&dir.path().join("fret_summary.csv"));
    assert_eq!(summary[0][0], "two_state");
    assert_eq!(num(&summary[0][8]), 0.0);
    assert_eq!(num(&summary[1][8]), 0.0);
}

#[test]
fn errors_are_single_line_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = fmo(&["simulate", "--set", "system.bogus=3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        err,
        "error kind=config msg=\"unknown config key `system.bogus`\"\n"
    );

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema_version = 1\n[initial]\nkind = \"thermal\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fmo-heom"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);

    // output path is an existing file
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = fmo(&["oracle"], &blocker);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .starts_with("error kind=io"));
}
