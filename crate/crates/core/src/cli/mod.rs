//! `rabi-exact <command> [flags]`.
//!
//! Every command shares one flag set; a flag that means nothing to the
//! chosen command is rejected rather than ignored. A JSON config file
//! (`--config`) supplies the same keys, and explicit flags win over it.

mod commands;
pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{validate_params, ModelParams, ParitySector};
use crate::spectrum_solver::{SolveOptions, DEFAULT_ALPHA_TOL, DEFAULT_M_MAX, DEFAULT_M_START};

pub use output::{Cell, Report, Table};

#[derive(Debug, Parser)]
#[command(
    name = "rabi-exact",
    version,
    about = "Exact quantum Rabi spectrum from coherent-state polynomial roots"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandArgs,
}

#[derive(Debug, Subcommand)]
enum CommandArgs {
    /// Lowest levels of the merged spectrum.
    Solve(Flags),
    /// Ground-state energy over a range of couplings.
    Sweep(Flags),
    /// Sign and size of the boundary polynomial on an alpha grid, with its roots.
    Poly(Flags),
    /// Normalized coefficient profiles of the lowest levels.
    Coeffs(Flags),
    /// Bundled reference tables recomputed and compared.
    Tables(Flags),
    /// Fock-basis diagonalization.
    Ed(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Poly,
    Coeffs,
    Tables,
    Ed,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Poly => "poly",
            Command::Coeffs => "coeffs",
            Command::Tables => "tables",
            Command::Ed => "ed",
        }
    }

    /// Config keys meaningful to this command, besides the output keys.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Command::Solve => &[
                "g",
                "delta",
                "levels",
                "m-start",
                "m-max",
                "alpha-tol",
                "no-residual-check",
            ],
            Command::Sweep => &[
                "delta",
                "g-min",
                "g-max",
                "g-steps",
                "method",
                "m-start",
                "m-max",
                "alpha-tol",
                "rel-tol",
            ],
            Command::Poly => &[
                "g",
                "delta",
                "parity",
                "m",
                "alpha-min",
                "alpha-max",
                "samples",
            ],
            Command::Coeffs => &["g", "delta", "levels", "m-start", "m-max", "alpha-tol", "m"],
            Command::Tables => &[
                "table",
                "tol",
                "m-start",
                "m-max",
                "alpha-tol",
                "no-residual-check",
                "rel-tol",
            ],
            Command::Ed => &["g", "delta", "levels", "rel-tol"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Fod,
    Ed,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl From<Parity> for ParitySector {
    fn from(p: Parity) -> Self {
        match p {
            Parity::Even => ParitySector::Even,
            Parity::Odd => ParitySector::Odd,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// The flag set, also the shape of the JSON config file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct Flags {
    /// Coupling strength g (units of the cavity frequency).
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Qubit splitting Delta.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_start: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_residual_check: bool,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Significant digits of numeric output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<usize>,
    /// JSON file with any of these flags, keyed by flag name.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_steps: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity: Option<Parity>,
    /// Truncation M: of the boundary polynomial for `poly`; for `coeffs`,
    /// the truncation each level is re-solved at (odd sector uses M + 1
    /// when M is odd, even sector M + 1 when M is even).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Reference table: 1, 2, 3 or all.
    #[arg(long, value_parser = ["1", "2", "3", "all"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    /// Relative tolerance against the reference values.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Convergence tolerance of the diagonalization oracle.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

impl Flags {
    /// `self` with gaps filled from `base`.
    fn or(self, base: Flags) -> Flags {
        Flags {
            g: self.g.or(base.g),
            delta: self.delta.or(base.delta),
            levels: self.levels.or(base.levels),
            m_start: self.m_start.or(base.m_start),
            m_max: self.m_max.or(base.m_max),
            alpha_tol: self.alpha_tol.or(base.alpha_tol),
            no_residual_check: self.no_residual_check || base.no_residual_check,
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            precision: self.precision.or(base.precision),
            config: None,
            g_min: self.g_min.or(base.g_min),
            g_max: self.g_max.or(base.g_max),
            g_steps: self.g_steps.or(base.g_steps),
            method: self.method.or(base.method),
            parity: self.parity.or(base.parity),
            m: self.m.or(base.m),
            alpha_min: self.alpha_min.or(base.alpha_min),
            alpha_max: self.alpha_max.or(base.alpha_max),
            samples: self.samples.or(base.samples),
            table: self.table.or(base.table),
            tol: self.tol.or(base.tol),
            rel_tol: self.rel_tol.or(base.rel_tol),
        }
    }

    fn set_keys(&self) -> Vec<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

pub const DEFAULT_PRECISION: usize = 12;
pub const DEFAULT_SAMPLES: usize = 4000;
pub const DEFAULT_POLY_M: usize = 19;
pub const DEFAULT_TABLE_TOL: f64 = 1e-6;
pub const DEFAULT_ED_REL_TOL: f64 = 1e-12;
pub const DEFAULT_G_STEPS: usize = 10;

/// A fully resolved invocation: the command and its flags with every
/// default written in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub flags: Flags,
}

impl RunConfig {
    /// Merges explicit flags over the config file they name, rejects keys
    /// the command does not use, and fills defaults.
    pub fn resolve(command: Command, flags: Flags) -> Result<RunConfig> {
        let merged = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidArgument(format!("config {}: {e}", path.display()))
                })?;
                let file: Flags = serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidArgument(format!("config {}: {e}", path.display()))
                })?;
                flags.or(file)
            }
            None => flags.or(Flags::default()),
        };
        for key in merged.set_keys() {
            let output_key = matches!(key.as_str(), "format" | "out" | "precision");
            if !output_key && !command.keys().contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "--{key} does not apply to `{}`",
                    command.name()
                )));
            }
        }
        let mut f = merged;
        let uses = |k: &str| command.keys().contains(&k);
        f.format.get_or_insert(Format::Csv);
        f.precision.get_or_insert(DEFAULT_PRECISION);
        if uses("levels") {
            f.levels
                .get_or_insert(if command == Command::Coeffs { 6 } else { 9 });
        }
        if uses("m-start") {
            f.m_start.get_or_insert(DEFAULT_M_START);
            f.m_max.get_or_insert(DEFAULT_M_MAX);
        }
        if uses("alpha-tol") {
            f.alpha_tol.get_or_insert(DEFAULT_ALPHA_TOL);
        }
        if uses("rel-tol") {
            f.rel_tol.get_or_insert(DEFAULT_ED_REL_TOL);
        }
        match command {
            Command::Sweep => {
                f.g_steps.get_or_insert(DEFAULT_G_STEPS);
                f.method.get_or_insert(Method::Exact);
            }
            Command::Poly => {
                f.parity.get_or_insert(Parity::Even);
                f.m.get_or_insert(DEFAULT_POLY_M);
                f.samples.get_or_insert(DEFAULT_SAMPLES);
            }
            Command::Tables => {
                f.table.get_or_insert_with(|| "all".into());
                f.tol.get_or_insert(DEFAULT_TABLE_TOL);
            }
            _ => {}
        }
        let cfg = RunConfig { command, flags: f };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        let f = &self.flags;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(1..=17).contains(&self.precision()) {
            return bad(format!("--precision {} (need 1..=17)", self.precision()));
        }
        if f.levels == Some(0) {
            return bad("--levels must be at least 1".into());
        }
        if f.g_steps == Some(0) {
            return bad("--g-steps must be at least 1".into());
        }
        if f.samples.is_some_and(|s| s < 2) {
            return bad("--samples must be at least 2".into());
        }
        if f.m.is_some_and(|m| m < 2) {
            return bad("--m must be at least 2".into());
        }
        for (name, v) in [
            ("tol", f.tol),
            ("rel-tol", f.rel_tol),
            ("alpha-tol", f.alpha_tol),
        ] {
            if v.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
                return bad(format!("--{name} must be positive"));
            }
        }
        if let Some(t) = &f.table {
            if !matches!(t.as_str(), "1" | "2" | "3" | "all") {
                return bad(format!("--table {t} (need 1, 2, 3 or all)"));
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> usize {
        self.flags.precision.unwrap_or(DEFAULT_PRECISION)
    }

    pub fn format(&self) -> Format {
        self.flags.format.unwrap_or(Format::Csv)
    }

    /// Effective config in config-file form.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(&self.flags).expect("flags serialize")
    }

    pub(crate) fn params(&self) -> Result<ModelParams> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| {
                Error::InvalidArgument(format!("`{}` needs --{name}", self.command.name()))
            })
        };
        validate_params(need(self.flags.g, "g")?, need(self.flags.delta, "delta")?)
    }

    pub(crate) fn solve_options(&self, n_levels: usize) -> SolveOptions {
        let f = &self.flags;
        SolveOptions {
            n_levels,
            alpha_tol: f.alpha_tol.unwrap_or(DEFAULT_ALPHA_TOL),
            m_start: f.m_start.unwrap_or(DEFAULT_M_START),
            m_max: f.m_max.unwrap_or(DEFAULT_M_MAX),
            residual_check: !f.no_residual_check,
            ..SolveOptions::default()
        }
    }
}

/// What a command produced; `complete` is false for a partial result that
/// is still worth emitting.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub complete: bool,
}

/// Runs the command without writing anything.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let mut outcome = match cfg.command {
        Command::Solve => commands::solve(cfg),
        Command::Sweep => commands::sweep(cfg),
        Command::Poly => commands::poly(cfg),
        Command::Coeffs => commands::coeffs(cfg),
        Command::Tables => commands::tables(cfg),
        Command::Ed => commands::ed(cfg),
    }?;
    let meta = &mut outcome.report.meta;
    let mut head = serde_json::Map::new();
    head.insert("command".into(), cfg.command.name().into());
    head.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    head.insert("config".into(), cfg.to_json());
    head.insert("complete".into(), outcome.complete.into());
    head.append(meta);
    *meta = head;
    Ok(outcome)
}

fn emit(cfg: &RunConfig, report: &Report) -> Result<()> {
    let digits = cfg.precision();
    let mut sink: Box<dyn Write> = match &cfg.flags.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(output::io_err)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    match cfg.format() {
        Format::Csv => output::write_csv(report, digits, &mut sink)?,
        Format::Json => output::write_json(report, digits, &mut sink)?,
    }
    sink.flush().map_err(output::io_err)
}

/// Parses `args` (program name first), runs, writes, and returns the exit
/// status: 0 on success, 2 on a partial or failed-validation report, 1 on
/// any error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (command, flags) = match cli.command {
        CommandArgs::Solve(f) => (Command::Solve, f),
        CommandArgs::Sweep(f) => (Command::Sweep, f),
        CommandArgs::Poly(f) => (Command::Poly, f),
        CommandArgs::Coeffs(f) => (Command::Coeffs, f),
        CommandArgs::Tables(f) => (Command::Tables, f),
        CommandArgs::Ed(f) => (Command::Ed, f),
    };
    let result = RunConfig::resolve(command, flags).and_then(|cfg| {
        let outcome = execute(&cfg)?;
        emit(&cfg, &outcome.report)?;
        Ok(outcome.complete)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
