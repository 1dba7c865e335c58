//! The `ammlab` command line: scenario files in, tables or canonical JSON
//! out.
//!
//! Exit codes: 0 success, 2 bad input, 3 mechanism error, 4 failed audit,
//! 5 a construction that did not verify.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::amm::{Curve, CurveKind, PoolState};
use crate::auditors::{
    check_local_efficiency, check_uniform_pricing, find_arbitrage_subset, ic_audit, AuditError,
    DeviationGrid, GridPreset, StrategyModel,
};
use crate::json::{format_number, to_canonical_string};
use crate::mechanisms::{Mechanism, MechanismError, MechanismId};
use crate::numerics::{ExtRate, Tolerances};
use crate::orders::{check_well_formed, BatchResult, Order};
use crate::preferences::IntrinsicType;
use crate::report::{AuditReport, Property};
use crate::scenarios::{arbitrage_from_full_fill, buyer_seller_conflict, trilemma_certificate, ScenarioError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_MECHANISM: i32 = 3;
pub const EXIT_AUDIT_FAILED: i32 = 4;
pub const EXIT_UNVERIFIED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ammlab", version, about = "Batch mechanisms for a constant-product AMM and their property audits")]
pub struct Cli {
    /// Emit canonical JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Override the absolute slack used by every property check.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_audit: Option<f64>,
    /// Deviation grid for the IC audit.
    #[arg(long, global = true, value_name = "PRESET")]
    pub grid_preset: Option<GridPreset>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario's mechanism and print the outcomes.
    Run { scenario: PathBuf },
    /// Run the mechanism and the scenario's audits; exit 4 if any fails.
    Audit { scenario: PathBuf },
    /// Build and verify one of the impossibility constructions.
    #[command(subcommand)]
    Counterexample(Counterexample),
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Counterexample {
    /// Local efficiency forces an arbitrage subset (so no IC).
    Thm31 {
        #[arg(long, default_value_t = 10.0)]
        q: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[command(flatten)]
        pool: PoolArgs,
    },
    /// Uniform pricing and local efficiency conflict on one buyer/seller pair.
    Thm32 {
        #[arg(long, default_value_t = 50.0)]
        qb: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 10.0)]
        qs: f64,
        #[command(flatten)]
        pool: PoolArgs,
    },
    /// Utility gap certificate for two unbounded buyers.
    Trilemma {
        #[arg(long, default_value_t = 2.0)]
        r2: f64,
        #[arg(long, default_value_t = 3.9)]
        r1: f64,
        #[command(flatten)]
        pool: PoolArgs,
    },
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct PoolArgs {
    /// Initial X reserve.
    #[arg(long, default_value_t = 100.0)]
    pub x0: f64,
    /// Initial Y reserve.
    #[arg(long, default_value_t = 100.0)]
    pub y0: f64,
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub pool: PoolState,
    pub curve: CurveSpec,
    pub orders: Vec<Order>,
    pub mechanism: MechanismId,
    #[serde(default)]
    pub audits: Vec<Property>,
    #[serde(default)]
    pub tolerances: Option<ToleranceOverrides>,
    #[serde(default)]
    pub strategic: Option<StrategicSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub kind: CurveKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub tol_root: Option<f64>,
    pub tol_audit: Option<f64>,
    pub max_iter: Option<usize>,
}

/// The strategic player of an IC audit; the scenario's orders are everyone
/// else's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategicSpec {
    #[serde(rename = "type")]
    pub player: IntrinsicType,
    #[serde(default = "default_model")]
    pub model: StrategyModel,
    #[serde(default)]
    pub grid: GridPreset,
}

fn default_model() -> StrategyModel {
    StrategyModel::WeakFairSequencing
}

/// A failure that maps onto an exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> Self {
        Self { code: EXIT_MECHANISM, message: format!("mechanism error: {e}") }
    }
}

impl From<AuditError> for CliError {
    fn from(e: AuditError) -> Self {
        match e {
            AuditError::Mechanism(m) => m.into(),
            other => Self::input(other.to_string()),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        Self::input(e.to_string())
    }
}

/// A parsed scenario with its curve and effective tolerances.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub curve: Curve,
    pub tol: Tolerances,
}

/// Parses and validates scenario JSON. `tol_audit` overrides the file's.
pub fn parse_scenario(text: &str, tol_audit: Option<f64>) -> Result<Loaded, CliError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| CliError::input(format!("scenario: {e}")))?;
    let pool = PoolState::new(file.pool.x_reserve, file.pool.y_reserve)
        .map_err(|e| CliError::input(format!("scenario field `pool`: {e}")))?;
    let curve = Curve::through(file.curve.kind, &pool);
    let mut tol = Tolerances::default();
    if let Some(o) = file.tolerances {
        tol.tol_root = o.tol_root.unwrap_or(tol.tol_root);
        tol.tol_audit = o.tol_audit.unwrap_or(tol.tol_audit);
        tol.max_iter = o.max_iter.unwrap_or(tol.max_iter);
    }
    if let Some(t) = tol_audit {
        tol.tol_audit = t;
    }
    tol.validate().map_err(|e| CliError::input(format!("tolerances: {e}")))?;
    if let Some(s) = &file.strategic {
        let p = s.player;
        IntrinsicType::new(p.otype, p.rate, p.qty)
            .and_then(|t| match p.aux {
                Some(a) => t.with_aux(a),
                None => Ok(t),
            })
            .map_err(|e| CliError::input(format!("scenario field `strategic.type`: {e}")))?;
    }
    if file.audits.contains(&Property::IncentiveCompatibility) && file.strategic.is_none() {
        return Err(CliError::input("the ic audit needs a `strategic` block"));
    }
    Ok(Loaded { file: ScenarioFile { pool, ..file }, curve, tol })
}

fn load(path: &Path, tol_audit: Option<f64>) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, tol_audit)
}

#[derive(Debug, Clone, Serialize)]
struct RunOutput<'a> {
    mechanism: MechanismId,
    pool: PoolState,
    #[serde(flatten)]
    result: &'a BatchResult,
}

#[derive(Debug, Clone, Serialize)]
struct AuditOutput<'a> {
    mechanism: MechanismId,
    pool: PoolState,
    result: &'a BatchResult,
    reports: &'a [AuditReport],
    passed: bool,
}

/// Runs the scenario's mechanism.
pub fn run_scenario(loaded: &Loaded) -> Result<BatchResult, MechanismError> {
    let f = &loaded.file;
    f.mechanism.run(&loaded.curve, &f.pool, &f.orders, &loaded.tol)
}

/// Runs every audit listed in the scenario against `result`, in file order.
pub fn audit_scenario(
    loaded: &Loaded,
    result: &BatchResult,
    grid_override: Option<GridPreset>,
) -> Result<Vec<AuditReport>, CliError> {
    let Loaded { file, curve, tol } = loaded;
    let (pool, batch) = (&file.pool, &file.orders);
    let mut reports = Vec::with_capacity(file.audits.len());
    for property in &file.audits {
        let report = match property {
            Property::WellFormed => check_well_formed(curve, pool, batch, result, tol).map_err(AuditError::from)?,
            Property::UniformPricing => check_uniform_pricing(batch, result, tol)?,
            Property::LocalEfficiency => check_local_efficiency(curve, pool, batch, result, false, tol)?,
            Property::WeakLocalEfficiency => check_local_efficiency(curve, pool, batch, result, true, tol)?,
            Property::ArbitrageResilience => find_arbitrage_subset(result, tol)?,
            Property::IncentiveCompatibility => {
                let s = file.strategic.as_ref().ok_or_else(|| CliError::input("missing `strategic` block"))?;
                let preset = grid_override.unwrap_or(s.grid);
                let grid = DeviationGrid::for_player(preset, curve, pool, &s.player, batch);
                ic_audit(&file.mechanism, curve, pool, batch, &s.player, s.model, &grid, tol)?
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Parses `args` (program name first) and executes the command, writing the
/// report to `out` and diagnostics to `err`. Returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = match &cli.command {
        Command::Run { scenario } => {
            let loaded = load(scenario, cli.tol_audit)?;
            let result = run_scenario(&loaded)?;
            let f = &loaded.file;
            if cli.json {
                canonical(&RunOutput { mechanism: f.mechanism, pool: f.pool, result: &result })?
            } else {
                outcome_table(f, &result)
            }
        }
        Command::Audit { scenario } => {
            let loaded = load(scenario, cli.tol_audit)?;
            let result = run_scenario(&loaded)?;
            let reports = audit_scenario(&loaded, &result, cli.grid_preset)?;
            let passed = reports.iter().all(|r| r.passed);
            let f = &loaded.file;
            let text = if cli.json {
                canonical(&AuditOutput { mechanism: f.mechanism, pool: f.pool, result: &result, reports: &reports, passed })?
            } else {
                let mut s = outcome_table(f, &result);
                for r in &reports {
                    let _ = writeln!(s, "{r}");
                    if let Some(w) = &r.witness {
                        s.push_str(&canonical(w)?);
                    }
                }
                s
            };
            write_out(out, &text)?;
            return Ok(if passed { EXIT_OK } else { EXIT_AUDIT_FAILED });
        }
        Command::Counterexample(which) => {
            let (text, verified) = counterexample(*which, cli.tol_audit)?;
            write_out(out, &text)?;
            return Ok(if verified { EXIT_OK } else { EXIT_UNVERIFIED });
        }
    };
    write_out(out, &text)?;
    Ok(EXIT_OK)
}

/// Builds a construction and returns its canonical JSON and whether it
/// verified.
pub fn counterexample(which: Counterexample, tol_audit: Option<f64>) -> Result<(String, bool), CliError> {
    let mut tol = Tolerances::default();
    if let Some(t) = tol_audit {
        tol = tol.with_tol_audit(t).map_err(|e| CliError::input(e.to_string()))?;
    }
    let setup = |p: PoolArgs| -> Result<(Curve, PoolState), CliError> {
        let pool = PoolState::new(p.x0, p.y0).map_err(|e| CliError::input(format!("pool: {e}")))?;
        Ok((Curve::through(CurveKind::ConstantProduct, &pool), pool))
    };
    Ok(match which {
        Counterexample::Thm31 { q, eps, pool } => {
            let (curve, pool) = setup(pool)?;
            let c = arbitrage_from_full_fill(&curve, &pool, q, eps, None, &tol)?;
            (canonical(&c)?, c.verified)
        }
        Counterexample::Thm32 { qb, eps, qs, pool } => {
            let (curve, pool) = setup(pool)?;
            let c = buyer_seller_conflict(&curve, &pool, qb, eps, qs, None, &tol)?;
            (canonical(&c)?, c.verified)
        }
        Counterexample::Trilemma { r2, r1, pool } => {
            let (curve, pool) = setup(pool)?;
            let c = trilemma_certificate(&curve, &pool, r2, r1, &tol)?;
            (canonical(&c)?, c.consistent)
        }
    })
}

fn canonical<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    to_canonical_string(value).map_err(|e| CliError { code: EXIT_MECHANISM, message: format!("serialization: {e}") })
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError { code: EXIT_INPUT, message: format!("write failed: {e}") })
}

fn rate_cell(r: ExtRate) -> String {
    match r {
        ExtRate::Infinity => "inf".into(),
        ExtRate::Finite(v) => format_number(v),
    }
}

/// Human-readable outcome table.
pub fn outcome_table(file: &ScenarioFile, result: &BatchResult) -> String {
    let mut rows: Vec<[String; 6]> = vec![["#", "type", "rate", "qty", "dx", "dy"].map(String::from)];
    for (i, (o, out)) in file.orders.iter().zip(&result.outcomes).enumerate() {
        rows.push([
            i.to_string(),
            o.otype.as_str().to_string(),
            rate_cell(o.rate),
            format_number(o.qty),
            format_number(out.dx),
            format_number(out.dy),
        ]);
    }
    let mut widths = [0usize; 6];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "mechanism: {}", file.mechanism);
    let (p, e) = (&file.pool, &result.end_pool);
    let _ = writeln!(
        s,
        "pool: ({}, {}) -> ({}, {})",
        format_number(p.x_reserve),
        format_number(p.y_reserve),
        format_number(e.x_reserve),
        format_number(e.y_reserve)
    );
    if let Some(price) = result.uniform_price {
        let _ = writeln!(s, "uniform price: {}", format_number(price));
    }
    if file.orders.is_empty() {
        let _ = writeln!(s, "(no orders)");
        return s;
    }
    for row in &rows {
        let line: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", line.join("  ").trim_end());
    }
    s
}
