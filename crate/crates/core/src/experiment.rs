//! Resolved experiment configurations and the workflows behind each CLI
//! subcommand.
//!
//! A config is resolved from three layers: per-command defaults, an optional
//! JSON config file, then command-line flags. The resolved config is embedded
//! in every output, and [`load_config_file`] accepts such an output directly,
//! so any run can be replayed from its own artifact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acceptance::{self, CriterionResult, SuiteOptions};
use crate::asymptotics::{analyze, AsymptoticsRecord};
use crate::clt::{clt_moment_test, CltTestConfig};
use crate::io::{read_metadata, serialize_records, Format, Metadata, Record};
use crate::moments::moment_table;
use crate::montecarlo::{run_replicas, EnsembleSpec, DEFAULT_WORK_BUDGET};
use crate::parallel::with_threads;
use crate::sim::{run_trajectory, RecordPolicy};
use crate::{Error, ModelParams, Result, UniformSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Moments,
    Asymptotics,
    Clt,
    Verify,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Moments => "moments",
            Command::Asymptotics => "asymptotics",
            Command::Clt => "clt",
            Command::Verify => "verify",
        }
    }
}

/// Fully resolved configuration. Thread count and output path are not part
/// of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: usize,
    pub a: u64,
    pub b: u64,
    pub alpha: f64,
    pub horizon: u64,
    pub replicas: u64,
    pub seed: u64,
    pub format: Format,
    /// Recording stride for `simulate`.
    pub record_every: u64,
    /// `simulate` with one replica: also emit every urn's fraction.
    pub full: bool,
    /// `asymptotics`: alphas to analyse; empty means `[alpha]`.
    pub alphas: Vec<f64>,
    pub window_lo: u64,
    pub window_hi: u64,
    pub budget_override: bool,
    /// `verify`: run only the acceptance criteria, skipping extended checks.
    pub quick: bool,
}

/// One configuration layer. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub a: Option<u64>,
    pub b: Option<u64>,
    pub alpha: Option<f64>,
    pub horizon: Option<u64>,
    pub replicas: Option<u64>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub record_every: Option<u64>,
    pub full: Option<bool>,
    pub alphas: Option<Vec<f64>>,
    pub window_lo: Option<u64>,
    pub window_hi: Option<u64>,
    pub budget_override: Option<bool>,
    pub quick: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $layer:expr, [$($f:ident),*]) => {
        $(if let Some(v) = $layer.$f.clone() { $base.$f = v; })*
    };
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = Self {
            command,
            n: 5,
            a: 1,
            b: 1,
            alpha: 0.5,
            horizon: 1000,
            replicas: 1,
            seed: 0,
            format: Format::Csv,
            record_every: 1,
            full: false,
            alphas: Vec::new(),
            window_lo: 1000,
            window_hi: 1_000_000,
            budget_override: false,
            quick: false,
        };
        match command {
            Command::Moments => {
                c.n = 2;
                c.horizon = 100;
            }
            Command::Clt => {
                c.n = 2000;
                c.replicas = 2000;
                c.horizon = 20;
            }
            Command::Simulate | Command::Asymptotics | Command::Verify => {}
        }
        c
    }

    /// Defaults for the command, then each layer in order.
    pub fn resolve(command: Command, layers: &[&PartialConfig]) -> Result<Self> {
        let mut c = Self::defaults(command);
        for layer in layers {
            overlay!(
                c,
                layer,
                [
                    n,
                    a,
                    b,
                    alpha,
                    horizon,
                    replicas,
                    seed,
                    format,
                    record_every,
                    full,
                    alphas,
                    window_lo,
                    window_hi,
                    budget_override,
                    quick
                ]
            );
        }
        c.command = command;
        c.validate()?;
        Ok(c)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.n, self.a, self.b, self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        for &alpha in &self.alphas {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::InvalidParams("alpha must lie in [0,1]".into()));
            }
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParams("replicas must be ≥ 1".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParams("record_every must be ≥ 1".into()));
        }
        if self.command == Command::Asymptotics
            && (self.window_lo == 0 || self.window_lo >= self.window_hi)
        {
            return Err(Error::InvalidParams(format!(
                "invalid window [{}, {}]",
                self.window_lo, self.window_hi
            )));
        }
        let work = self.work();
        if !self.budget_override && work > DEFAULT_WORK_BUDGET {
            return Err(Error::BudgetExceeded {
                work,
                budget: DEFAULT_WORK_BUDGET,
            });
        }
        Ok(())
    }

    /// Elementary operations the command will perform, for the budget guard.
    pub fn work(&self) -> u128 {
        let (n, r, t) = (self.n as u128, self.replicas as u128, self.horizon as u128);
        match self.command {
            Command::Simulate | Command::Clt => n * r * t,
            Command::Moments => t,
            Command::Asymptotics => self.window_hi as u128 * self.alphas.len().max(1) as u128,
            Command::Verify => 0,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serializable")
    }

    fn metadata(&self, schema: &str) -> Metadata {
        Metadata::new(schema, self.to_json())
    }

    fn render<R: Record>(&self, records: &[R]) -> Result<Vec<u8>> {
        serialize_records(&self.metadata(R::SCHEMA), records, self.format)
    }
}

/// Read a config layer from a JSON file or from any output produced by this
/// tool (CSV or JSON lines), whose embedded config is used.
pub fn load_config_file(path: &Path) -> Result<PartialConfig> {
    let bytes = std::fs::read(path)?;
    parse_config_bytes(&bytes)
}

pub fn parse_config_bytes(bytes: &[u8]) -> Result<PartialConfig> {
    let first = bytes
        .iter()
        .position(|&c| c == b'\n')
        .map_or(bytes, |k| &bytes[..k]);
    let is_artifact = first.starts_with(b"# ") || first.starts_with(b"{\"meta\"");
    let value = if is_artifact {
        read_metadata(bytes)?.0.config
    } else {
        serde_json::from_slice(bytes)?
    };
    serde_json::from_value(value).map_err(|e| Error::InvalidParams(format!("config: {e}")))
}

/// A named secondary output, written next to the primary one.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: &'static str,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub primary: Vec<u8>,
    pub secondary: Vec<Artifact>,
    /// Human-readable lines for the terminal.
    pub messages: Vec<String>,
    /// Set by `verify` when a criterion fails.
    pub failed: bool,
}

impl RunOutput {
    fn single(primary: Vec<u8>) -> Self {
        Self {
            primary,
            secondary: Vec::new(),
            messages: Vec::new(),
            failed: false,
        }
    }
}

/// Execute the configured workflow on a pool of `threads` workers.
pub fn run(config: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    config.validate()?;
    with_threads(threads, || execute(config))?
}

fn execute(c: &ExperimentConfig) -> Result<RunOutput> {
    match c.command {
        Command::Simulate => simulate(c),
        Command::Moments => Ok(RunOutput::single(
            c.render(&moment_table(&c.params()?, c.horizon))?,
        )),
        Command::Asymptotics => {
            let alphas = if c.alphas.is_empty() {
                vec![c.alpha]
            } else {
                c.alphas.clone()
            };
            let params = c.params()?;
            let records = alphas
                .iter()
                .map(|&alpha| analyze(&params.with_alpha(alpha)?, (c.window_lo, c.window_hi)))
                .collect::<Result<Vec<AsymptoticsRecord>>>()?;
            Ok(RunOutput::single(c.render(&records)?))
        }
        Command::Clt => {
            let mut cfg = CltTestConfig::new(c.params()?, c.replicas, c.horizon, c.seed);
            cfg.require_large_n = false;
            let report = clt_moment_test(&cfg)?;
            let s = &report.summary;
            let messages = vec![format!(
                "clt: variance_ok={} gaussian={} increments_ok={} max|skew|={:.4} max|kurt|={:.4} corr_violations={}/{}",
                s.variance_ok,
                s.gaussian,
                s.increments_ok,
                s.max_abs_skewness,
                s.max_abs_excess_kurtosis,
                s.corr_violations,
                s.corr_pairs
            )];
            Ok(RunOutput {
                primary: c.render(&report.rows)?,
                secondary: vec![Artifact {
                    name: "summary",
                    bytes: c.render(std::slice::from_ref(&report.summary))?,
                }],
                messages,
                failed: false,
            })
        }
        Command::Verify => {
            let results = acceptance::run_suite(&SuiteOptions { extended: !c.quick });
            let failed = results.iter().any(|r| !r.passed);
            let messages = results.iter().map(CriterionResult::line).collect();
            Ok(RunOutput {
                primary: c.render(&results)?,
                secondary: Vec::new(),
                messages,
                failed,
            })
        }
    }
}

fn simulate(c: &ExperimentConfig) -> Result<RunOutput> {
    let params = c.params()?;
    let policy = RecordPolicy::Every(c.record_every);
    if c.replicas == 1 {
        let record = run_trajectory(
            &params,
            c.horizon,
            UniformSource::new(c.seed),
            0,
            &policy,
            c.full,
        )?;
        let mut out = RunOutput::single(c.render(&record.rows)?);
        if let Some(urns) = record.urns {
            out.secondary.push(Artifact {
                name: "urns",
                bytes: c.render(&urns)?,
            });
        }
        Ok(out)
    } else {
        let mut spec = EnsembleSpec::new(
            params,
            c.replicas,
            c.horizon,
            c.seed,
            policy.times(c.horizon),
        );
        spec.budget_override = c.budget_override;
        let estimates = run_replicas(&spec)?;
        Ok(RunOutput::single(c.render(&estimates.rows)?))
    }
}

/// `results.csv` + `summary` → `results.summary.csv`.
pub fn secondary_path(primary: &Path, name: &str, format: Format) -> std::path::PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    primary.with_file_name(format!("{stem}.{name}.{}", format.extension()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_records;
    use crate::moments::MomentRow;
    use crate::sim::TrajectoryRow;

    fn layer(json: serde_json::Value) -> PartialConfig {
        serde_json::from_value(json).unwrap()
    }

    #[test]
    fn precedence_defaults_file_flags() {
        let file = layer(serde_json::json!({"n": 7, "alpha": 0.25, "seed": 9}));
        let flags = layer(serde_json::json!({"alpha": 0.75}));
        let c = ExperimentConfig::resolve(Command::Simulate, &[&file, &flags]).unwrap();
        assert_eq!((c.n, c.alpha, c.seed, c.horizon), (7, 0.75, 9, 1000));
    }

    #[test]
    fn unknown_config_field_rejected() {
        assert!(parse_config_bytes(br#"{"n": 2, "bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_alpha_rejected() {
        let flags = layer(serde_json::json!({"alpha": 1.5}));
        let err = ExperimentConfig::resolve(Command::Simulate, &[&flags]).unwrap_err();
        assert_eq!(err.to_string(), "alpha must lie in [0,1]");
    }

    #[test]
    fn budget_guard_and_override() {
        let big = layer(serde_json::json!({"n": 100000, "replicas": 1000, "horizon": 1000}));
        assert!(matches!(
            ExperimentConfig::resolve(Command::Simulate, &[&big]),
            Err(Error::BudgetExceeded { .. })
        ));
        let ok = layer(serde_json::json!({"budget_override": true}));
        assert!(ExperimentConfig::resolve(Command::Simulate, &[&big, &ok]).is_ok());
    }

    #[test]
    fn moments_first_row() {
        let c = ExperimentConfig::resolve(Command::Moments, &[]).unwrap();
        let out = run(&c, Some(1)).unwrap();
        let (meta, rows) = parse_records::<MomentRow>(&out.primary).unwrap();
        assert_eq!(meta.config, c.to_json());
        assert_eq!(rows.len(), 101);
        assert!((rows[1].x_exact - 1.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn replay_from_output() {
        let flags =
            layer(serde_json::json!({"horizon": 50, "seed": 3, "full": true, "format": "jsonl"}));
        let c = ExperimentConfig::resolve(Command::Simulate, &[&flags]).unwrap();
        let out = run(&c, Some(2)).unwrap();
        assert_eq!(out.secondary.len(), 1);
        let replay = ExperimentConfig::resolve(
            Command::Simulate,
            &[&parse_config_bytes(&out.primary).unwrap()],
        )
        .unwrap();
        assert_eq!(replay, c);
        assert_eq!(run(&replay, Some(1)).unwrap(), out);
        let (_, rows) = parse_records::<TrajectoryRow>(&out.primary).unwrap();
        assert_eq!(rows.len(), 51);
    }

    #[test]
    fn secondary_naming() {
        assert_eq!(
            secondary_path(Path::new("/tmp/run.csv"), "summary", Format::Csv),
            Path::new("/tmp/run.summary.csv")
        );
    }
}
