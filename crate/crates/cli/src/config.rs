//! Resolved run configuration. Every default is filled in before the run, so
//! a serialized `RunConfig` reproduces the run on its own.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::ValueEnum;
use pdouglas_core::harmonic::{BALL_PRESETS, DISK_PRESETS, INTERVAL_PRESETS};
use pdouglas_core::{BoundaryFunction, DomainSpec, Exponent, FourierTable};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckDouglas,
    CheckHardyStein,
    CheckPvariance,
    CheckRemainder,
    CheckVanishing,
    CheckMinimizer,
    CheckQuasimin,
    CheckFpequiv,
    McValidate,
    Convergence,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::CheckDouglas => "check-douglas",
            Self::CheckHardyStein => "check-hardy-stein",
            Self::CheckPvariance => "check-pvariance",
            Self::CheckRemainder => "check-remainder",
            Self::CheckVanishing => "check-vanishing",
            Self::CheckMinimizer => "check-minimizer",
            Self::CheckQuasimin => "check-quasimin",
            Self::CheckFpequiv => "check-fpequiv",
            Self::McValidate => "mc-validate",
            Self::Convergence => "convergence",
            Self::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Disk,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StudyArg {
    Douglas,
    HardyStein,
}

/// Boundary data: a named preset or a Fourier coefficient table on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSpec {
    Preset(String),
    FourierCsv(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainSpec,
    pub data: DataSpec,
    /// Non-harmonic field for the remainder and vanishing checks.
    pub field: String,
    pub p: Vec<f64>,
    pub levels: Vec<u32>,
    pub tol: Option<f64>,
    pub order: Option<usize>,
    pub seed: u64,
    /// Interior point; `None` selects the checker's default.
    pub x: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
    pub rho: Vec<f64>,
    pub samples: usize,
    pub n: u64,
    pub wos_eps: f64,
    /// Seeds in the Monte Carlo envelope test; zero skips it.
    pub envelope: u64,
    pub study: StudyArg,
    pub output: PathBuf,
    pub format: OutputFormat,
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(pdouglas_core::Error::Config(msg.into()))
}

impl RunConfig {
    pub fn default_data(domain: &DomainSpec) -> &'static str {
        match domain {
            DomainSpec::Interval { .. } => "linear:1,0",
            DomainSpec::Disk => "cos",
            DomainSpec::Ball { .. } => "linear:0,0,1,0",
        }
    }

    pub fn build_domain(kind: DomainKind, a: f64, b: f64) -> anyhow::Result<DomainSpec> {
        Ok(match kind {
            DomainKind::Interval => DomainSpec::interval(a, b).map_err(|e| config_err(e.to_string()))?,
            DomainKind::Disk => DomainSpec::Disk,
            DomainKind::Ball => DomainSpec::ball(3).expect("d = 3 is valid"),
        })
    }

    /// Check every field that the run would otherwise reject half-way.
    pub fn validate(&self) -> anyhow::Result<()> {
        if let DomainSpec::Interval { a, b } = self.domain {
            DomainSpec::interval(a, b).map_err(|e| config_err(e.to_string()))?;
        }
        if let DomainSpec::Ball { d } = self.domain {
            DomainSpec::ball(d).map_err(|e| config_err(e.to_string()))?;
        }
        if self.p.is_empty() {
            bail!(config_err("at least one exponent is required"));
        }
        for &q in &self.p {
            Exponent::new(q).map_err(|e| config_err(e.to_string()))?;
        }
        if self.levels.is_empty() {
            bail!(config_err("at least one grid level is required"));
        }
        if let Some(&l) = self.levels.iter().find(|&&l| l > 8) {
            bail!(config_err(format!("grid level {l} is above the supported maximum 8")));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                bail!(config_err(format!("tolerance must be a non-negative number, got {t}")));
            }
        }
        if self.rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            bail!(config_err("subdisk radii must lie in (0, 1)"));
        }
        if self.n == 0 || self.samples == 0 {
            bail!(config_err("sample counts must be positive"));
        }
        if let Some(x) = &self.x {
            if !self.domain.is_interior(x) {
                bail!(config_err(format!("x = {x:?} is not an interior point of the {}", self.domain.name())));
            }
        }
        self.boundary_data()?;
        Ok(())
    }

    pub fn exponents(&self) -> Vec<Exponent> {
        self.p.iter().map(|&q| Exponent::new(q).expect("validated")).collect()
    }

    /// Boundary data for the configured domain; unknown names list the presets.
    pub fn boundary_data(&self) -> anyhow::Result<BoundaryFunction> {
        match &self.data {
            DataSpec::Preset(s) => BoundaryFunction::parse_for(&self.domain, s).map_err(|e| {
                let known = match self.domain {
                    DomainSpec::Interval { .. } => INTERVAL_PRESETS,
                    DomainSpec::Disk => DISK_PRESETS,
                    DomainSpec::Ball { .. } => BALL_PRESETS,
                };
                match e {
                    pdouglas_core::Error::Config(m) if m.contains("known presets") => config_err(m),
                    other => config_err(format!("{other}; known presets for the {}: {}", self.domain.name(), known.join(", "))),
                }
            }),
            DataSpec::FourierCsv(path) => {
                if self.domain != DomainSpec::Disk {
                    bail!(config_err("Fourier coefficient tables describe data on the circle"));
                }
                let table = FourierTable::from_csv_path(path)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))
                    .with_context(|| format!("reading {}", path.display()))?;
                BoundaryFunction::fourier(table).map_err(|e| config_err(e.to_string()))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> anyhow::Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| config_err(format!("config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
