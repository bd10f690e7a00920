use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relaxbdf::harness::parse_startup;
use relaxbdf::system::parse_real;
use relaxbdf::theory::{
    fit_order, multiplier_data, truncation_residual, verify_multiplier_identity,
};
use relaxbdf::{
    bdf_coefficients, check_structural_stability, emit_table, exact_evolve, initial_data,
    run_convergence_study, Error, ExperimentConfig, ModelName, ModelSpec, ReferenceKind, Startup,
    TableFormat,
};

const IDENTITY_TOL: f64 = 1e-11;
const SLOPE_TOL: f64 = 0.2;

#[derive(Parser)]
#[command(
    name = "relaxbdf",
    version,
    about = "IMEX-BDF convergence studies for linear relaxation systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study and print the error table.
    Run(RunArgs),
    /// Print the structural stability certificate of a model.
    CheckStability {
        #[arg(long, value_parser = parse_model)]
        model: ModelName,
    },
    /// Check the multiplier identities and truncation residual slopes.
    VerifyTheory {
        #[arg(long, default_value_t = 2)]
        q: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelName>,
    #[arg(long)]
    order: Option<usize>,
    /// Comma-separated relaxation times; rationals like 1/1000 are accepted.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    eps: Option<Vec<f64>>,
    /// Comma-separated, strictly decreasing time steps. Defaults to the model's grid.
    #[arg(long, value_delimiter = ',', value_parser = parse_number)]
    dt: Option<Vec<f64>>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long, value_parser = parse_number)]
    t0: Option<f64>,
    #[arg(long, value_parser = parse_number)]
    tfinal: Option<f64>,
    /// `exact`, `ars:DIV`, `ars222:DIV` or `ars443:DIV`.
    #[arg(long, value_parser = parse_startup_arg)]
    startup: Option<Startup>,
    /// `exact` or `fine:DTREF`.
    #[arg(long = "ref", value_parser = parse_reference)]
    reference: Option<ReferenceKind>,
    #[arg(long, value_parser = parse_format)]
    format: Option<TableFormat>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_model(s: &str) -> Result<ModelName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_number(s: &str) -> Result<f64, String> {
    parse_real(s).map_err(|e| e.to_string())
}

fn parse_startup_arg(s: &str) -> Result<Startup, String> {
    parse_startup(s).map_err(|e| e.to_string())
}

fn parse_reference(s: &str) -> Result<ReferenceKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<TableFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Check(String),
    Error(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Error(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::CheckStability { model } => check_stability(model),
        Command::VerifyTheory { q, samples, seed } => verify_theory(q, samples, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let (Some(name), Some(q), Some(eps)) = (args.model, args.order, args.eps.clone())
            else {
                return Err(Failure::Error(
                    "--model, --order and --eps are required without --config".into(),
                ));
            };
            ExperimentConfig::reference_grid(
                &ModelSpec::by_name(name, &Default::default())?,
                q,
                eps,
            )
        }
    };
    if let Some(name) = args.model {
        if name != cfg.model {
            let exp = ModelSpec::by_name(name, &cfg.overrides)?.reference_experiment();
            cfg.model = name;
            cfg.dts = exp.dts;
            cfg.t_final = exp.t_final;
        }
    }
    if let Some(q) = args.order {
        cfg.q = q;
    }
    if let Some(eps) = &args.eps {
        cfg.epsilons = eps.clone();
    }
    if let Some(dts) = &args.dt {
        cfg.dts = dts.clone();
    }
    if let Some(n) = args.modes {
        cfg.modes = n;
    }
    if let Some(t0) = args.t0 {
        cfg.t0 = t0;
    }
    if let Some(t) = args.tfinal {
        cfg.t_final = t;
    }
    if let Some(s) = args.startup {
        cfg.startup = s;
    }
    if let Some(r) = args.reference {
        cfg.reference = r;
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = build_config(&args)?;
    let table = run_convergence_study(&cfg)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    let text = emit_table(&table, cfg.format);
    match &cfg.output {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    if table.has_failures() {
        return Err(Failure::Error("some cells of the study failed".into()));
    }
    Ok(())
}

fn check_stability(name: ModelName) -> Result<(), Failure> {
    let m = ModelSpec::by_name(name, &Default::default())?;
    let raw = check_structural_stability(
        &m.raw_convection,
        &m.raw_source,
        &m.raw_witness,
        m.certificate_tol,
    )?;
    let normal = check_structural_stability(
        m.system.convection(),
        m.system.source(),
        &m.witness,
        m.certificate_tol,
    )?;
    println!("{name}, original variables:\n{raw}");
    println!("{name}, normal form:\n{normal}");
    if raw.passed() && normal.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{name} is not certified")))
    }
}

fn verify_theory(q: usize, samples: usize, seed: u64) -> Result<(), Failure> {
    let coeffs = bdf_coefficients(q)?;
    let mut failed = vec![];

    match multiplier_data(q) {
        Ok(data) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = verify_multiplier_identity(&data, &coeffs, samples, &mut rng)?;
            let ok = report.max() <= IDENTITY_TOL;
            println!(
                "multiplier identities, {samples} samples: {report:?} {}",
                status(ok)
            );
            if !ok {
                failed.push("multiplier identities".to_string());
            }
        }
        Err(_) => println!("multiplier identities: no multiplier data for q = {q}, skipped"),
    }

    for (eps, dts, t_n) in [
        (1.0, [1e-2, 5e-3, 2.5e-3], 0.0),
        (1e-6, [4e-2, 2e-2, 1e-2], 0.5),
    ] {
        for name in ModelName::ALL {
            let m = ModelSpec::by_name(name, &Default::default())?;
            let sys = m.system_at(eps)?;
            let u0 = initial_data(&m, q.max(2), 16, eps)?;
            let res = dts
                .iter()
                .map(|&dt| {
                    truncation_residual(&sys, |t| exact_evolve(&u0, &sys, t), &coeffs, dt, t_n)
                })
                .collect::<relaxbdf::Result<Vec<f64>>>()?;
            let slope = fit_order(&dts, &res);
            let ok = (slope - (q + 1) as f64).abs() <= SLOPE_TOL;
            println!(
                "truncation residual slope, {name} eps={eps:e}: {slope:.3} (want {}) {}",
                q + 1,
                status(ok)
            );
            if !ok {
                failed.push(format!("{name} slope at eps={eps:e}"));
            }
        }
    }

    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}

fn status(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}
