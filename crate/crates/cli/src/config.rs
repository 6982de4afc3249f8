//! Run configuration: a versioned TOML document with dotted-path overrides.

use std::path::Path;

use fmo_heom::measures::all_pairs;
use fmo_heom::model::FMO_HAMILTONIAN_CM;
use fmo_heom::{IntegratorConfig, SystemParams};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Localized,
    Fret,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub hamiltonian_cm: Vec<Vec<f64>>,
    pub lambda_cm: f64,
    pub gamma_inv_fs: f64,
    pub temperature_k: f64,
    /// `inf` disables trapping.
    pub trap_time_ps: f64,
    pub trap_sites: Vec<usize>,
    pub truncation: usize,
    pub t_end_fs: f64,
    pub dt_out_fs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_step_fs: f64,
    pub max_step_fs: f64,
    pub min_step_fs: f64,
}

/// `"all"` or an explicit list of `[m, n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    Keyword(String),
    List(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub pairs: PairSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub death_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSection {
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub initial: InitialSection,
    pub system: SystemSection,
    pub integrator: IntegratorSection,
    pub output: OutputSection,
    pub analysis: AnalysisSection,
    pub converge: ConvergeSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SystemParams::fmo();
        let i = IntegratorConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            initial: InitialSection {
                kind: InitialKind::Localized,
                site: 1,
            },
            system: SystemSection {
                hamiltonian_cm: FMO_HAMILTONIAN_CM.iter().map(|r| r.to_vec()).collect(),
                lambda_cm: p.lambda_cm[0],
                gamma_inv_fs: p.gamma_inv_fs[0],
                temperature_k: p.temperature_k,
                trap_time_ps: p.trap_time_ps,
                trap_sites: p.trap_sites,
                truncation: p.truncation,
                t_end_fs: p.t_end_fs,
                dt_out_fs: p.dt_out_fs,
            },
            integrator: IntegratorSection {
                abs_tol: i.abs_tol,
                rel_tol: i.rel_tol,
                initial_step_fs: i.initial_step_fs,
                max_step_fs: i.max_step_fs,
                min_step_fs: i.min_step_fs,
            },
            output: OutputSection {
                pairs: PairSelection::Keyword("all".into()),
            },
            analysis: AnalysisSection {
                death_threshold: fmo_heom::analysis::DEATH_THRESHOLD,
            },
            converge: ConvergeSection { n_min: 2, n_max: 8 },
        }
    }
}

impl RunConfig {
    /// Defaults, then the optional file, then `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = Value::try_from(RunConfig::default())
            .map_err(|e| CliError::Config(e.to_string()))?
            .as_table()
            .cloned()
            .expect("config serializes to a table");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let user: Table = text
                .parse()
                .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
            merge(&mut table, user, "")?;
        }
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
            let mut nested = Table::new();
            let parts: Vec<&str> = key.trim().split('.').collect();
            insert_path(&mut nested, &parts, parse_scalar(raw.trim()));
            merge(&mut table, nested, "")?;
        }
        let config: RunConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.system_params().validate()?;
        let n = self.system.hamiltonian_cm.len();
        if self.initial.site == 0 || self.initial.site > n {
            return Err(CliError::KeyValue {
                key: "initial.site".into(),
                reason: format!("must be in 1..={n}"),
            });
        }
        self.pairs()?;
        if self.converge.n_min >= self.converge.n_max {
            return Err(CliError::KeyValue {
                key: "converge.n_min".into(),
                reason: "must be below converge.n_max".into(),
            });
        }
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        let s = &self.system;
        let n = s.hamiltonian_cm.len();
        SystemParams {
            hamiltonian_cm: s.hamiltonian_cm.clone(),
            lambda_cm: vec![s.lambda_cm; n],
            gamma_inv_fs: vec![s.gamma_inv_fs; n],
            temperature_k: s.temperature_k,
            trap_time_ps: s.trap_time_ps,
            trap_sites: s.trap_sites.clone(),
            truncation: s.truncation,
            t_end_fs: s.t_end_fs,
            dt_out_fs: s.dt_out_fs,
        }
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let i = &self.integrator;
        IntegratorConfig {
            abs_tol: i.abs_tol,
            rel_tol: i.rel_tol,
            initial_step_fs: i.initial_step_fs,
            max_step_fs: i.max_step_fs,
            min_step_fs: i.min_step_fs,
        }
    }

    /// Resolved pair list, each `(m, n)` with `m < n`.
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>, CliError> {
        let n_sites = self.system.hamiltonian_cm.len();
        match &self.output.pairs {
            PairSelection::Keyword(k) if k == "all" => Ok(all_pairs(n_sites)),
            PairSelection::Keyword(k) => Err(CliError::KeyValue {
                key: "output.pairs".into(),
                reason: format!("expected \"all\" or a list of [m, n], got \"{k}\""),
            }),
            PairSelection::List(list) => {
                let mut out = Vec::with_capacity(list.len());
                for &[a, b] in list {
                    if a == b || a == 0 || b == 0 || a > n_sites || b > n_sites {
                        return Err(CliError::KeyValue {
                            key: "output.pairs".into(),
                            reason: format!("invalid pair [{a}, {b}]"),
                        });
                    }
                    let p = (a.min(b), a.max(b));
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// `"3"` becomes an integer, `"[1, 2]"` an array, `"fret"` a string.
fn parse_scalar(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn insert_path(table: &mut Table, parts: &[&str], value: Value) {
    match parts {
        [] => {}
        [last] => {
            table.insert(last.to_string(), value);
        }
        [head, rest @ ..] => {
            let entry = table
                .entry(head.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = entry {
                insert_path(t, rest, value);
            }
        }
    }
}

/// Overlays `src` on `dst`; every key must already exist in `dst`.
fn merge(dst: &mut Table, src: Table, prefix: &str) -> Result<(), CliError> {
    for (key, value) in src {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let Some(slot) = dst.get_mut(&key) else {
            return Err(CliError::UnknownKey(path));
        };
        match (slot, value) {
            (Value::Table(d), Value::Table(s)) => merge(d, s, &path)?,
            (Value::Table(_), _) => {
                return Err(CliError::KeyValue {
                    key: path,
                    reason: "expected a table".into(),
                })
            }
            (slot, value) => {
                if value.is_table() {
                    return Err(CliError::UnknownKey(format!(
                        "{path}.{}",
                        first_key(&value)
                    )));
                }
                // integers are accepted where floats are expected
                *slot = match (&*slot, value) {
                    (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
                    (_, v) => v,
                };
            }
        }
    }
    Ok(())
}

fn first_key(v: &Value) -> String {
    v.as_table()
        .and_then(|t| t.keys().next().cloned())
        .unwrap_or_default()
}
