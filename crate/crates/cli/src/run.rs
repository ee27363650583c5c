//! Dispatch of a resolved configuration to the checkers, and report output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use pdouglas_core::identities::{self, SMOOTH_FIELDS};
use pdouglas_core::{
    convergence, BoundaryFunction, CheckOptions, ConvergenceTable, DomainSpec, Error, Exponent, IdentityReport, McConfig,
    SmoothField, StudyKind,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, OutputFormat, RunConfig, StudyArg};

pub const REPORT_SCHEMA: &str = include_str!("../report.schema.json");
pub const SCHEMA_VERSION: u32 = 1;

/// Report CSV columns; kept stable across versions.
pub const REPORT_CSV_HEADER: [&str; 10] =
    ["identity", "domain", "p", "lhs", "rhs", "abs_diff", "rel_diff", "tolerance", "pass", "advisory"];

/// Fraction of envelope seeds that must land within 4σ.
const ENVELOPE_SHARE: f64 = 0.92;

#[derive(Debug, Clone, Serialize)]
pub struct TableEntry {
    pub monotone: bool,
    pub min_order: Option<f64>,
    pub table: ConvergenceTable,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<IdentityReport>,
    pub tables: Vec<TableEntry>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    /// Advisory reports are informative and do not affect the verdict.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass || r.is_advisory()) && self.tables.iter().all(|t| t.monotone)
    }

    pub fn summary(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .reports
            .iter()
            .map(|r| {
                let verdict = match (r.pass, r.is_advisory()) {
                    (true, _) => "PASS",
                    (false, true) => "ADVISORY",
                    (false, false) => "FAIL",
                };
                let p = r.p.map(|p| format!(" p={p}")).unwrap_or_default();
                format!(
                    "{verdict:<8} {} [{}{p}] lhs={:.12} rhs={:.12} rel={:.3e} tol={:.1e}",
                    r.identity, r.domain, r.lhs, r.rhs, r.rel_diff, r.tolerance
                )
            })
            .collect();
        for t in &self.tables {
            let last = t.table.rows.last().map_or(f64::NAN, |r| r.abs_error);
            out.push(format!(
                "{:<8} convergence-{:?} [{} p={}] reference={:.12} final_error={:.3e} levels={}",
                if t.monotone { "PASS" } else { "FAIL" },
                t.table.kind,
                t.table.domain,
                t.table.p,
                t.table.reference,
                last,
                t.table.rows.len()
            ));
        }
        out
    }
}

/// Errors that describe a bad request rather than a failed check.
fn is_request_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::InvalidArgument(_) | Error::Domain { .. } | Error::Unsupported(_) | Error::Precondition(_) | Error::NotAnchored(_)
    )
}

/// Request errors abort the run; anything else becomes a failed report so
/// that the remaining checks still run and the file is still written.
fn guard(identity: &str, domain: &DomainSpec, p: Option<Exponent>, r: pdouglas_core::Result<Vec<IdentityReport>>) -> anyhow::Result<Vec<IdentityReport>> {
    match r {
        Ok(v) => Ok(v),
        Err(e) if is_request_error(&e) => Err(e.into()),
        Err(e) => Ok(vec![IdentityReport::compare(identity, domain.name(), p, f64::NAN, f64::NAN, 0.0)
            .note(format!("check did not complete: {e}"))]),
    }
}

fn one(r: pdouglas_core::Result<IdentityReport>) -> pdouglas_core::Result<Vec<IdentityReport>> {
    r.map(|x| vec![x])
}

fn require_disk(cfg: &RunConfig, what: &str) -> anyhow::Result<()> {
    if cfg.domain != DomainSpec::Disk {
        return Err(Error::Unsupported(format!("{what} runs on the disk only")).into());
    }
    Ok(())
}

fn point2(x: &[f64]) -> anyhow::Result<[f64; 2]> {
    <[f64; 2]>::try_from(x).map_err(|_| Error::Config(format!("expected a point in the plane, got {x:?}")).into())
}

fn default_point(domain: &DomainSpec, cmd: Command) -> Vec<f64> {
    match *domain {
        DomainSpec::Interval { a, b } => vec![a + 0.3 * (b - a)],
        DomainSpec::Disk => match cmd {
            Command::CheckHardyStein => vec![0.0, 0.0],
            Command::CheckPvariance => vec![0.2, 0.1],
            _ => vec![0.3, 0.0],
        },
        DomainSpec::Ball { .. } => vec![0.1, -0.2, 0.3],
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    g: BoundaryFunction,
    ps: Vec<Exponent>,
}

impl Ctx<'_> {
    fn opts(&self, level: u32) -> CheckOptions {
        CheckOptions {
            order: self.cfg.order,
            tol: self.cfg.tol,
            ..CheckOptions::at_level(level)
        }
    }

    fn point(&self, cmd: Command) -> Vec<f64> {
        self.cfg.x.clone().unwrap_or_else(|| default_point(&self.cfg.domain, cmd))
    }

    fn field(&self) -> anyhow::Result<SmoothField> {
        self.cfg.field.parse().map_err(|e: Error| {
            Error::Config(format!("{e}; known fields: {}", SMOOTH_FIELDS.join(", "))).into()
        })
    }

    /// Runs `f` for every exponent and grid level.
    fn each<F>(&self, identity: &str, mut f: F) -> anyhow::Result<Vec<IdentityReport>>
    where
        F: FnMut(Exponent, &CheckOptions) -> pdouglas_core::Result<Vec<IdentityReport>>,
    {
        let mut out = Vec::new();
        for &p in &self.ps {
            for &l in &self.cfg.levels {
                out.extend(guard(identity, &self.cfg.domain, Some(p), f(p, &self.opts(l)))?);
            }
        }
        Ok(out)
    }

    fn douglas(&self) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("douglas", |p, o| one(identities::check_douglas(&self.g, p, &self.cfg.domain, o)))
    }

    fn hardy_stein(&self, x: [f64; 2]) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("hardy-stein", |p, o| one(identities::check_hardy_stein(&self.g, p, x, o)))
    }

    fn p_variance(&self, x: &[f64]) -> anyhow::Result<Vec<IdentityReport>> {
        let w = self.cfg.w.as_deref();
        self.each("p-variance", |p, o| identities::check_p_variance(&self.g, p, &self.cfg.domain, x, w, o))
    }

    fn remainder(&self, u: &SmoothField, skip_small_p: bool) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("remainder", |p, o| {
            if skip_small_p && p.get() < 2.0 {
                return Ok(vec![]);
            }
            one(identities::check_remainder(u, p, o))
        })
    }

    fn vanishing(&self, v: &SmoothField) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("vanishing", |p, o| one(identities::check_vanishing(v, p, o)))
    }

    fn minimizer(&self) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("minimizer", |p, o| one(identities::check_minimizer(&self.g, p, o)))
    }

    fn quasimin(&self) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("quasimin", |p, o| {
            self.cfg.rho.iter().map(|&rho| identities::check_quasimin(&self.g, p, rho, o)).collect()
        })
    }

    fn trace(&self) -> anyhow::Result<Vec<IdentityReport>> {
        self.each("trace-recovery", |p, o| identities::check_trace_roundtrip(&self.g, p, o))
    }

    fn fpequiv(&self) -> Vec<IdentityReport> {
        identities::check_fpequiv(&self.ps, self.cfg.samples, self.cfg.seed)
    }

    fn kernel_bounds(&self) -> anyhow::Result<Vec<IdentityReport>> {
        guard("kernel-bounds", &self.cfg.domain, None, identities::check_kernel_bounds(&self.cfg.domain, self.cfg.samples, self.cfg.seed))
    }

    fn mc(&self, x: Vec<f64>) -> anyhow::Result<Vec<IdentityReport>> {
        let mut mc = McConfig::new(self.cfg.domain, x, self.cfg.n, self.cfg.seed);
        mc.wos_eps = self.cfg.wos_eps;
        mc.validate()?;
        let mut out = Vec::new();
        for &p in &self.ps {
            out.extend(guard("mc-expectation", &self.cfg.domain, Some(p), one(identities::mc_validate(&mc, &self.g, p)))?);
            if self.cfg.envelope > 0 {
                let need = (ENVELOPE_SHARE * self.cfg.envelope as f64).ceil() as u64;
                out.extend(guard(
                    "mc-envelope",
                    &self.cfg.domain,
                    Some(p),
                    one(identities::mc_envelope(&mc, &self.g, p, self.cfg.envelope, need)),
                )?);
            }
        }
        Ok(out)
    }

    fn convergence(&self) -> anyhow::Result<Vec<TableEntry>> {
        let kind = match self.cfg.study {
            StudyArg::Douglas => StudyKind::Douglas,
            StudyArg::HardyStein => StudyKind::HardyStein,
        };
        // A single level L means the refinement sequence 1..=L.
        let levels: Vec<u32> = match self.cfg.levels.as_slice() {
            [l] => (1..=(*l).max(2)).collect(),
            ls => ls.to_vec(),
        };
        let x = match (kind, &self.cfg.x) {
            (StudyKind::HardyStein, Some(x)) => Some(point2(x)?),
            _ => None,
        };
        self.ps
            .iter()
            .map(|&p| {
                let table = convergence(kind, &self.cfg.domain, &self.g, p, x, &levels)?;
                Ok(TableEntry {
                    monotone: table.is_monotone(),
                    min_order: table.min_order(),
                    table,
                })
            })
            .collect()
    }

    /// Every applicable check, in a fixed order.
    fn suite(&self) -> anyhow::Result<Vec<IdentityReport>> {
        let d = &self.cfg.domain;
        let mut out = Vec::new();
        if *d == DomainSpec::Disk {
            if let Some(&top) = self.cfg.levels.iter().max() {
                out.extend(guard("anchors", d, None, identities::check_anchors(&self.opts(top)))?);
            }
        }
        out.extend(self.douglas()?);
        if *d == DomainSpec::Disk {
            out.extend(self.hardy_stein([0.0, 0.0])?);
            out.extend(self.hardy_stein([0.3, 0.0])?);
        }
        out.extend(self.p_variance(&default_point(d, Command::CheckPvariance))?);
        if *d == DomainSpec::Disk {
            out.extend(self.remainder(&"x1sq".parse()?, true)?);
            out.extend(self.vanishing(&SmoothField::Bubble)?);
            out.extend(self.minimizer()?);
            out.extend(self.quasimin()?);
            if self.g.band_limit().is_some() {
                out.extend(self.trace()?);
            }
        }
        out.extend(self.fpequiv());
        out.extend(self.kernel_bounds()?);
        out.extend(self.mc(default_point(d, Command::McValidate))?);
        Ok(out)
    }
}

/// Execute the configured command without writing anything.
pub fn execute(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        g: cfg.boundary_data()?,
        ps: cfg.exponents(),
    };
    let mut outcome = Outcome::default();
    match cfg.command {
        Command::CheckDouglas => outcome.reports = ctx.douglas()?,
        Command::CheckHardyStein => {
            require_disk(cfg, "check-hardy-stein")?;
            outcome.reports = ctx.hardy_stein(point2(&ctx.point(cfg.command))?)?;
        }
        Command::CheckPvariance => outcome.reports = ctx.p_variance(&ctx.point(cfg.command))?,
        Command::CheckRemainder => {
            require_disk(cfg, "check-remainder")?;
            outcome.reports = ctx.remainder(&ctx.field()?, false)?;
        }
        Command::CheckVanishing => {
            require_disk(cfg, "check-vanishing")?;
            outcome.reports = ctx.vanishing(&ctx.field()?)?;
        }
        Command::CheckMinimizer => {
            require_disk(cfg, "check-minimizer")?;
            outcome.reports = ctx.minimizer()?;
        }
        Command::CheckQuasimin => {
            require_disk(cfg, "check-quasimin")?;
            outcome.reports = ctx.quasimin()?;
        }
        Command::CheckFpequiv => outcome.reports = ctx.fpequiv(),
        Command::McValidate => outcome.reports = ctx.mc(ctx.point(cfg.command))?,
        Command::Convergence => outcome.tables = ctx.convergence()?,
        Command::Suite => outcome.reports = ctx.suite()?,
    }
    Ok(outcome)
}

/// Execute and write `<command>.json|csv` plus `<command>.meta.json`.
pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut outcome = execute(cfg)?;
    outcome.files = write(cfg, &outcome)?;
    Ok(outcome)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

fn reports_csv(reports: &[IdentityReport]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.identity.clone(),
            r.domain.clone(),
            r.p.map(|p| p.to_string()).unwrap_or_default(),
            fmt_f(r.lhs),
            fmt_f(r.rhs),
            fmt_f(r.abs_diff),
            fmt_f(r.rel_diff),
            fmt_f(r.tolerance),
            r.pass.to_string(),
            r.is_advisory().to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

fn put(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    files.push(path.to_path_buf());
    Ok(())
}

fn write(cfg: &RunConfig, outcome: &Outcome) -> anyhow::Result<Vec<PathBuf>> {
    let dir = &cfg.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = cfg.command.name();
    let mut files = Vec::new();

    for t in &outcome.tables {
        let file = if outcome.tables.len() == 1 { format!("{name}.csv") } else { format!("{name}-p{}.csv", t.table.p) };
        let mut buf = Vec::new();
        t.table.write_csv(&mut buf)?;
        put(&dir.join(file), &buf, &mut files)?;
    }
    match cfg.format {
        OutputFormat::Json => {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "command": name,
                "config": cfg,
                "pass": outcome.passed(),
                "reports": outcome.reports,
                "tables": outcome.tables,
            });
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            put(&dir.join(format!("{name}.json")), text.as_bytes(), &mut files)?;
        }
        OutputFormat::Csv if cfg.command != Command::Convergence => {
            put(&dir.join(format!("{name}.csv")), &reports_csv(&outcome.reports)?, &mut files)?;
        }
        OutputFormat::Csv => {}
    }

    // Everything run-specific that would break byte-identical reports lives here.
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let meta = json!({
        "command": name,
        "timestamp_unix": stamp,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    put(&dir.join(format!("{name}.meta.json")), text.as_bytes(), &mut files)?;
    Ok(files)
}
