//! Convergence studies: configuration, error measurement and table output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{run, step_count, ArsScheme, Startup, DEFAULT_SUBSTEP_DIVISOR};
use crate::models::{initial_data, ModelName, ModelSpec};
use crate::oracle::{exact_evolve, fine_step_reference};
use crate::spectral::SpectralField;
use crate::system::parse_real;

pub const DEFAULT_MODES: usize = 100;
/// `c` in the advisory step bound `Δt ≤ c/κ_max²` (`c/N²` on a `2π` domain).
pub const CFL_CONSTANT: f64 = 1.0;

/// Reference solution used to measure errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    Exact,
    Fine(f64),
}

impl FromStr for ReferenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("exact") {
            return Ok(Self::Exact);
        }
        match s.split_once(':') {
            Some((kind, dt)) if kind.eq_ignore_ascii_case("fine") => {
                let dt = parse_real(dt)?;
                if !(dt > 0.0) {
                    return Err(Error::Config(format!(
                        "reference step must be positive, got {dt}"
                    )));
                }
                Ok(Self::Fine(dt))
            }
            _ => Err(Error::Config(format!("unknown reference {s:?}"))),
        }
    }
}

impl std::fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exact => f.write_str("exact"),
            Self::Fine(dt) => write!(f, "fine:{dt:e}"),
        }
    }
}

/// Parses `exact`, `ars`, `ars:DIV`, `ars222:DIV` or `ars443:DIV`.
pub fn parse_startup(s: &str) -> Result<Startup> {
    let s = s.trim().to_ascii_lowercase();
    if s == "exact" {
        return Ok(Startup::Exact);
    }
    let (head, divisor) = match s.split_once(':') {
        Some((h, d)) => (
            h,
            d.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad substep divisor {d:?}")))?,
        ),
        None => (s.as_str(), DEFAULT_SUBSTEP_DIVISOR),
    };
    let scheme = match head {
        "ars" => None,
        "ars222" => Some(ArsScheme::Ars222),
        "ars443" => Some(ArsScheme::Ars443),
        _ => return Err(Error::Config(format!("unknown startup {s:?}"))),
    };
    if divisor == 0 {
        return Err(Error::Config("substep divisor must be at least 1".into()));
    }
    Ok(Startup::Ars { divisor, scheme })
}

pub fn format_startup(startup: &Startup) -> String {
    match startup {
        Startup::Exact => "exact".into(),
        Startup::Ars {
            divisor,
            scheme: None,
        } => format!("ars:{divisor}"),
        Startup::Ars {
            divisor,
            scheme: Some(s),
        } => format!(
            "{}:{divisor}",
            s.name().to_ascii_lowercase().replace(['(', ')', ','], "")
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// One convergence experiment over a grid of `(ε, Δt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub overrides: BTreeMap<String, f64>,
    pub q: usize,
    pub epsilons: Vec<f64>,
    pub dts: Vec<f64>,
    pub modes: usize,
    pub t0: f64,
    pub t_final: f64,
    pub startup: Startup,
    pub reference: ReferenceKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: TableFormat,
}

impl ExperimentConfig {
    /// The published grid for `model` at order `q`, with the exact reference.
    pub fn reference_grid(model: &ModelSpec, q: usize, epsilons: Vec<f64>) -> Self {
        let exp = model.reference_experiment();
        Self {
            model: model.name,
            overrides: BTreeMap::new(),
            q,
            epsilons,
            dts: exp.dts,
            modes: DEFAULT_MODES,
            t0: 0.0,
            t_final: exp.t_final,
            startup: Startup::Ars {
                divisor: DEFAULT_SUBSTEP_DIVISOR,
                scheme: None,
            },
            reference: ReferenceKind::Exact,
            seed: 0,
            output: None,
            format: TableFormat::Csv,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        raw.into_config()
    }

    pub fn to_json(&self) -> String {
        let raw = RawConfig {
            model: ModelField::Full {
                name: self.model.to_string(),
                overrides: self.overrides.clone(),
            },
            q: self.q,
            epsilons: self
                .epsilons
                .iter()
                .map(|&v| RealField::Number(v))
                .collect(),
            dts: self.dts.iter().map(|&v| RealField::Number(v)).collect(),
            modes: Some(self.modes),
            t0: Some(RealField::Number(self.t0)),
            t_final: RealField::Number(self.t_final),
            startup: Some(format_startup(&self.startup)),
            reference: Some(self.reference.to_string()),
            seed: Some(self.seed),
            output: self.output.as_ref().map(|p| OutputField {
                path: Some(p.clone()),
                format: Some(match self.format {
                    TableFormat::Csv => "csv".into(),
                    TableFormat::Markdown => "md".into(),
                }),
            }),
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        ModelSpec::by_name(self.model, &self.overrides)
    }

    /// Checks the invariants of a configuration against its model.
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(1..=4).contains(&self.q) {
            return Err(Error::UnsupportedOrder(self.q));
        }
        if self.epsilons.is_empty() || self.dts.is_empty() {
            return Err(Error::Config(
                "epsilon and dt lists must be non-empty".into(),
            ));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("epsilon must be positive, got {e}")));
        }
        if self.dts.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("dt list must be strictly decreasing".into()));
        }
        if !(self.t_final > self.t0) {
            return Err(Error::Config(format!(
                "final time {} must exceed start time {}",
                self.t_final, self.t0
            )));
        }
        for &dt in &self.dts {
            step_count(self.t0, self.t_final, dt)?;
        }
        if let ReferenceKind::Fine(dt) = self.reference {
            step_count(self.t0, self.t_final, dt)?;
        }
        if self.modes < model.max_active_mode() {
            return Err(Error::Config(format!(
                "N = {} is below the highest mode {} of the initial data",
                self.modes,
                model.max_active_mode()
            )));
        }
        Ok(())
    }

    /// Startup with the model's preferred ARS scheme filled in.
    pub fn resolved_startup(&self, model: &ModelSpec) -> Startup {
        match self.startup {
            Startup::Ars {
                divisor,
                scheme: None,
            } => Startup::Ars {
                divisor,
                scheme: Some(model.startup_scheme(self.q)),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RealField {
    Number(f64),
    Text(String),
}

impl RealField {
    fn value(&self) -> Result<f64> {
        match self {
            Self::Number(v) => Ok(*v),
            Self::Text(s) => parse_real(s),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ModelField {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputField {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelField,
    q: usize,
    epsilons: Vec<RealField>,
    dts: Vec<RealField>,
    #[serde(default, rename = "N", alias = "modes")]
    modes: Option<usize>,
    #[serde(default, rename = "T0", alias = "t0")]
    t0: Option<RealField>,
    #[serde(rename = "T", alias = "t_final")]
    t_final: RealField,
    #[serde(default)]
    startup: Option<String>,
    #[serde(default)]
    reference: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<OutputField>,
}

impl RawConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let (name, overrides) = match self.model {
            ModelField::Name(n) => (n, BTreeMap::new()),
            ModelField::Full { name, overrides } => (name, overrides),
        };
        let reals = |v: &[RealField]| v.iter().map(RealField::value).collect::<Result<Vec<_>>>();
        let (output, format) = match self.output {
            Some(o) => (
                o.path,
                o.format
                    .as_deref()
                    .map(TableFormat::from_str)
                    .transpose()?
                    .unwrap_or_default(),
            ),
            None => (None, TableFormat::Csv),
        };
        Ok(ExperimentConfig {
            model: name.parse()?,
            overrides,
            q: self.q,
            epsilons: reals(&self.epsilons)?,
            dts: reals(&self.dts)?,
            modes: self.modes.unwrap_or(DEFAULT_MODES),
            t0: self.t0.map(|t| t.value()).transpose()?.unwrap_or(0.0),
            t_final: self.t_final.value()?,
            startup: self
                .startup
                .as_deref()
                .map(parse_startup)
                .transpose()?
                .unwrap_or(Startup::Ars {
                    divisor: DEFAULT_SUBSTEP_DIVISOR,
                    scheme: None,
                }),
            reference: self
                .reference
                .as_deref()
                .map(ReferenceKind::from_str)
                .transpose()?
                .unwrap_or(ReferenceKind::Exact),
            seed: self.seed.unwrap_or(0),
            output,
            format,
        })
    }
}

/// `‖u − ref‖` over one period.
pub fn compute_error(u: &SpectralField, reference: &SpectralField) -> Result<f64> {
    if !u.same_shape(reference) {
        return Err(Error::ShapeMismatch(format!(
            "(n, N, L) = ({}, {}, {}) vs ({}, {}, {})",
            u.components(),
            u.modes(),
            u.length(),
            reference.components(),
            reference.modes(),
            reference.length()
        )));
    }
    Ok(u.sub(reference)?.l2_norm())
}

/// One cell of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub epsilon: f64,
    pub dt: f64,
    /// `Err` holds the message of a failed cell.
    pub error: std::result::Result<f64, String>,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<TableRow>,
    pub warnings: Vec<String>,
}

impl ConvergenceTable {
    /// Builds rows in the given order and fills the order column within each
    /// run of equal `ε`.
    pub fn from_cells(cells: Vec<(f64, f64, std::result::Result<f64, String>)>) -> Self {
        let mut rows: Vec<TableRow> = Vec::with_capacity(cells.len());
        for (epsilon, dt, error) in cells {
            let order = match rows.last() {
                Some(prev) if prev.epsilon == epsilon => match (&prev.error, &error) {
                    (Ok(e0), Ok(e1)) => Some(observed_order(*e0, *e1, prev.dt, dt)),
                    _ => None,
                },
                _ => None,
            };
            rows.push(TableRow {
                epsilon,
                dt,
                error,
                order,
            });
        }
        Self {
            rows,
            warnings: Vec::new(),
        }
    }

    pub fn epsilons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.epsilon) {
                out.push(r.epsilon);
            }
        }
        out
    }

    pub fn block(&self, epsilon: f64) -> Vec<&TableRow> {
        self.rows.iter().filter(|r| r.epsilon == epsilon).collect()
    }

    pub fn has_failures(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_err())
    }
}

/// `log(e₀/e₁) / log(Δt₀/Δt₁)`.
pub fn observed_order(e0: f64, e1: f64, dt0: f64, dt1: f64) -> f64 {
    (e0 / e1).ln() / (dt0 / dt1).ln()
}

/// Runs every `(ε, Δt)` cell of `config`. Cells are computed concurrently;
/// a failing cell yields an error row instead of aborting the table.
pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    let model = config.build_model()?;
    config.validate(&model)?;
    let startup = config.resolved_startup(&model);
    let blocks: Vec<Vec<std::result::Result<f64, String>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .epsilons
            .iter()
            .map(|&eps| {
                let model = &model;
                scope.spawn(move || epsilon_block(model, config, startup, eps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| vec![Err("worker panicked".into()); config.dts.len()])
            })
            .collect()
    });

    let mut cells = Vec::new();
    for (&eps, block) in config.epsilons.iter().zip(blocks) {
        for (&dt, err) in config.dts.iter().zip(block) {
            cells.push((eps, dt, err));
        }
    }
    let mut table = ConvergenceTable::from_cells(cells);
    let kmax = std::f64::consts::TAU * config.modes as f64 / model.domain_length();
    let limit = CFL_CONSTANT / (kmax * kmax);
    for &dt in &config.dts {
        if dt > limit {
            table.warnings.push(format!(
                "dt = {dt:e} exceeds {CFL_CONSTANT}/kmax^2 = {limit:e} (N = {}); stability is not guaranteed",
                config.modes
            ));
        }
    }
    Ok(table)
}

fn epsilon_block(
    model: &ModelSpec,
    config: &ExperimentConfig,
    startup: Startup,
    eps: f64,
) -> Vec<std::result::Result<f64, String>> {
    let prepared = (|| -> Result<_> {
        let system = model.system_at(eps)?;
        let u0 = initial_data(model, config.q, config.modes, eps)?;
        let reference = match config.reference {
            ReferenceKind::Exact => exact_evolve(&u0, &system, config.t_final - config.t0)?,
            ReferenceKind::Fine(dt_ref) => fine_step_reference(
                &u0,
                &system,
                config.q,
                dt_ref,
                config.t0,
                config.t_final,
                startup,
            )?,
        };
        Ok((system, u0, reference))
    })();
    let (system, u0, reference) = match prepared {
        Ok(v) => v,
        Err(e) => return vec![Err(e.to_string()); config.dts.len()],
    };
    config
        .dts
        .iter()
        .map(|&dt| {
            run(
                &u0,
                &system,
                config.q,
                dt,
                config.t0,
                config.t_final,
                startup,
            )
            .and_then(|u| compute_error(&u, &reference))
            .map_err(|e| e.to_string())
        })
        .collect()
}

/// C-style `%.Ne`: two-digit signed exponent.
pub fn format_sci(value: f64, digits: usize) -> String {
    if !value.is_finite() {
        return format!("{value}");
    }
    let s = format!("{value:.digits$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub const CSV_HEADER: &str = "epsilon,dt,l2_error,order";
pub const ERROR_MARKER: &str = "ERROR";

pub fn emit_table(table: &ConvergenceTable, format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(table),
        TableFormat::Markdown => emit_markdown(table),
    }
}

fn emit_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        let err = match &r.error {
            Ok(e) => format_sci(*e, 2),
            Err(_) => ERROR_MARKER.to_string(),
        };
        let order = r.order.map(|o| format!("{o:.2}")).unwrap_or_default();
        let _ = writeln!(out, "{:e},{:e},{err},{order}", r.epsilon, r.dt);
    }
    out
}

fn emit_markdown(table: &ConvergenceTable) -> String {
    let eps = table.epsilons();
    let mut out = String::from("| Δt |");
    for e in &eps {
        let _ = write!(out, " ε = {} L²-error | order |", format_sci(*e, 0));
    }
    out.push_str("\n|---|");
    for _ in &eps {
        out.push_str("---|---|");
    }
    out.push('\n');
    let mut dts: Vec<f64> = Vec::new();
    for r in &table.rows {
        if !dts.contains(&r.dt) {
            dts.push(r.dt);
        }
    }
    for dt in dts {
        let _ = write!(out, "| {} |", format_sci(dt, 2));
        for &e in &eps {
            match table.rows.iter().find(|r| r.epsilon == e && r.dt == dt) {
                Some(r) => {
                    let err = match &r.error {
                        Ok(v) => format_sci(*v, 2),
                        Err(_) => ERROR_MARKER.to_string(),
                    };
                    let order = r
                        .order
                        .map(|o| format!("{o:.2}"))
                        .unwrap_or_else(|| "–".into());
                    let _ = write!(out, " {err} | {order} |");
                }
                None => out.push_str("  |  |"),
            }
        }
        out.push('\n');
    }
    out
}

/// Reads back a table written by [`emit_table`] in CSV form. Orders are taken
/// from the file, not recomputed.
pub fn parse_csv_table(text: &str) -> Result<ConvergenceTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header {CSV_HEADER:?}, got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", i + 2)));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", i + 2)))
        };
        rows.push(TableRow {
            epsilon: num(fields[0])?,
            dt: num(fields[1])?,
            error: if fields[2] == ERROR_MARKER {
                Err(ERROR_MARKER.into())
            } else {
                Ok(num(fields[2])?)
            },
            order: if fields[3].trim().is_empty() {
                None
            } else {
                Some(num(fields[3])?)
            },
        });
    }
    Ok(ConvergenceTable {
        rows,
        warnings: Vec::new(),
    })
}
