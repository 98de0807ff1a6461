//! Command-line front end. `run` is the whole program; `main` only forwards
//! the process arguments and exit code.
//!
//! Exit codes: 0 success, 1 malformed input or I/O failure, 2 a strategy that
//! fails validation, 3 a numerical failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::game::{classical_value, Context, PentagramGame, Vertex};
use crate::optimizer::{format_float, perturb_ideal, scaling_study, write_csv, OptimizerError, PerturbationMode, PerturbationSpec, StudyConfig};
use crate::rigidity::{certify, RigidityError, BOUND_SLACK};
use crate::strategy::{
    ideal_strategy, losing_terms, projective_score, score, to_projective, to_reflection, validate, ProjectiveJson, ProjectiveStrategy,
    ReflectionStrategy, StrategyError, StrategyJson, DEFAULT_TOL,
};
use crate::tensor::LinalgError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const THREADS_ENV: &str = "PENTAGRAM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "pentagram", version, about = "Magic pentagram game: values, strategies and rigidity certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Reflection,
    Projective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    ContextUnitaries,
    BobUnitaries,
    StateNoise,
    Combined,
}

impl From<Mode> for PerturbationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::ContextUnitaries => PerturbationMode::ContextUnitaries,
            Mode::BobUnitaries => PerturbationMode::BobUnitaries,
            Mode::StateNoise => PerturbationMode::StateNoise,
            Mode::Combined => PerturbationMode::Combined,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classical and/or quantum value of the game.
    Value {
        #[arg(long)]
        classical: bool,
        #[arg(long)]
        quantum: bool,
        /// Game file; the standard pentagram when omitted (classical value only).
        #[arg(long)]
        game: Option<PathBuf>,
    },
    /// Winning probability of a strategy and its 20 losing terms.
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "reflection")]
        format: Format,
    },
    /// Check the reflection-strategy constraints; exits 2 on failure.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value = "reflection")]
        format: Format,
    },
    /// Rigidity certificate as JSON.
    Certify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "reflection")]
        format: Format,
    },
    /// Write the optimal three-EPR strategy.
    ExportIdeal {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "reflection")]
        format: Format,
    },
    /// Write the standard game description.
    ExportGame {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded perturbation of the ideal strategy.
    Perturb {
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "combined")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Residual-versus-epsilon sweep; rows as CSV, fit as JSON.
    ScalingStudy {
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "combined")]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: PathBuf,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
    fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }
    fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }
}

fn linalg_code(e: &LinalgError) -> i32 {
    match e {
        LinalgError::NoConvergence => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

impl From<StrategyError> for Failure {
    fn from(e: StrategyError) -> Self {
        let code = match &e {
            StrategyError::Linalg(l) => linalg_code(l),
            StrategyError::Invalid(_) | StrategyError::Measurement(_) => EXIT_VALIDATION,
            StrategyError::Shape(_) | StrategyError::Format(_) => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<RigidityError> for Failure {
    fn from(e: RigidityError) -> Self {
        match e {
            RigidityError::Strategy(s) => s.into(),
            RigidityError::Linalg(ref l) => Self { code: linalg_code(l), message: e.to_string() },
            RigidityError::NotReflection(_) => Self::validation(e.to_string()),
            RigidityError::EmptyWord | RigidityError::MixedWord => Self::input(e.to_string()),
        }
    }
}

impl From<OptimizerError> for Failure {
    fn from(e: OptimizerError) -> Self {
        match e {
            OptimizerError::Linalg(ref l) => Self { code: linalg_code(l), message: e.to_string() },
            OptimizerError::Strategy(s) => s.into(),
            OptimizerError::Rigidity(r) => r.into(),
            OptimizerError::BadSpec(_) => Self::input(e.to_string()),
            OptimizerError::Validation { .. } => Self::validation(e.to_string()),
            OptimizerError::Unreachable { .. } => Self::numerical(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn load_strategy(path: &Path, format: Format) -> Result<ReflectionStrategy, Failure> {
    match format {
        Format::Reflection => Ok(ReflectionStrategy::from_json(read_json::<StrategyJson>(path)?)?),
        Format::Projective => {
            let p = ProjectiveStrategy::from_json(read_json::<ProjectiveJson>(path)?)?;
            Ok(to_reflection(&p)?)
        }
    }
}

fn cmd_value(out: &mut dyn Write, classical: bool, quantum: bool, game: Option<&Path>) -> Result<(), Failure> {
    let (classical, quantum) = if classical || quantum { (classical, quantum) } else { (true, true) };
    let game = match game {
        Some(path) => PentagramGame::from_json(&read_json(path)?).map_err(|e| Failure::input(e.to_string()))?,
        None => PentagramGame::standard(),
    };
    if classical {
        let opt = classical_value(&game);
        let decimal = *opt.value.numer() as f64 / *opt.value.denom() as f64;
        w(out, format_args!("{} = {}\n", opt.value, decimal))?;
        for c in Context::ALL {
            let answers: Vec<String> = game
                .vertices(c)
                .iter()
                .enumerate()
                .map(|(k, v)| format!("{v}:{:+}", opt.witness.alice(c, k)))
                .collect();
            w(out, format_args!("alice {c} {}\n", answers.join(" ")))?;
        }
        let bob: Vec<String> = Vertex::all().map(|v| format!("{v}:{:+}", opt.witness.bob(v))).collect();
        w(out, format_args!("bob {}\n", bob.join(" ")))?;
    }
    if quantum {
        if game != PentagramGame::standard() {
            return Err(Failure::input("the quantum value is only available for the standard game"));
        }
        let s = score(&ideal_strategy())?;
        w(out, format_args!("quantum {s:.12}\n"))?;
    }
    Ok(())
}

fn w(out: &mut dyn Write, args: std::fmt::Arguments<'_>) -> Result<(), Failure> {
    out.write_fmt(args).map_err(|e| Failure::input(e.to_string()))
}

fn cmd_score(out: &mut dyn Write, input: &Path, format: Format) -> Result<(), Failure> {
    let r = load_strategy(input, format)?;
    let s = match format {
        Format::Reflection => score(&r)?,
        Format::Projective => projective_score(&ProjectiveStrategy::from_json(read_json(input)?)?)?,
    };
    w(out, format_args!("{s:.12}\n"))?;
    for (q, p) in losing_terms(&r) {
        w(out, format_args!("{q} {}\n", format_float(p)))?;
    }
    Ok(())
}

fn cmd_validate(out: &mut dyn Write, input: &Path, tol: f64, format: Format) -> Result<(), Failure> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Failure::input(format!("tolerance {tol} must be finite and non-negative")));
    }
    let r = load_strategy(input, format)?;
    let report = validate(&r, tol);
    w(out, format_args!("{report}\n"))?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::validation("strategy failed validation"))
    }
}

fn cmd_certify(out: &mut dyn Write, input: &Path, dest: &Path, format: Format) -> Result<(), Failure> {
    let r = load_strategy(input, format)?;
    let report = certify(&r)?;
    write_json(dest, &report)?;
    w(
        out,
        format_args!(
            "epsilon {} state_residual {} max_op_residual {}\n",
            format_float(report.epsilon),
            format_float(report.state_residual),
            format_float(report.max_op_residual())
        ),
    )?;
    if !report.consistency_bound_holds {
        return Err(Failure::numerical(format!(
            "consistency residual {} exceeds bound {} (+{BOUND_SLACK:e})",
            format_float(report.max_consistency_residual()),
            format_float(report.consistency_bound)
        )));
    }
    Ok(())
}

fn cmd_export_ideal(dest: &Path, format: Format) -> Result<(), Failure> {
    let r = ideal_strategy();
    match format {
        Format::Reflection => write_json(dest, &r.to_json()),
        Format::Projective => write_json(dest, &to_projective(&r)?.to_json()),
    }
}

fn cmd_perturb(out: &mut dyn Write, delta: f64, seed: u64, mode: Mode, dest: &Path) -> Result<(), Failure> {
    let spec = PerturbationSpec::new(delta, seed, mode.into())?;
    let r = perturb_ideal(&spec)?;
    let report = validate(&r, DEFAULT_TOL);
    if !report.pass {
        return Err(Failure::validation(format!("generated strategy failed validation: {report}")));
    }
    write_json(dest, &r.to_json())?;
    w(out, format_args!("score {}\n", format_float(score(&r)?)))
}

fn thread_count() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!("{THREADS_ENV}={s:?} is not a positive integer"))),
        },
    }
}

fn cmd_scaling_study(out: &mut dyn Write, config: StudyConfig, rows_path: &Path, summary_path: &Path) -> Result<(), Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::numerical(e.to_string()))?;
    let result = pool.install(|| scaling_study(&config))?;

    let file = fs::File::create(rows_path).map_err(|e| io_failure(rows_path, e))?;
    let mut writer = BufWriter::new(file);
    write_csv(&result.rows, &mut writer).map_err(|e| io_failure(rows_path, e))?;
    writer.flush().map_err(|e| io_failure(rows_path, e))?;
    write_json(summary_path, &result.summary)?;
    w(
        out,
        format_args!(
            "rows {} slope {} max_ratio_state {} max_ratio_op {}\n",
            result.summary.n_rows,
            format_float(result.summary.slope),
            format_float(result.summary.max_ratio_state),
            format_float(result.summary.max_ratio_op)
        ),
    )
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Value { classical, quantum, game } => cmd_value(out, classical, quantum, game.as_deref()),
        Command::Score { input, format } => cmd_score(out, &input, format),
        Command::Validate { input, tol, format } => cmd_validate(out, &input, tol, format),
        Command::Certify { input, out: dest, format } => cmd_certify(out, &input, &dest, format),
        Command::ExportIdeal { out: dest, format } => cmd_export_ideal(&dest, format),
        Command::ExportGame { out: dest } => write_json(&dest, &PentagramGame::standard().to_json()),
        Command::Perturb { delta, seed, mode, out: dest } => cmd_perturb(out, delta, seed, mode, &dest),
        Command::ScalingStudy { deltas, samples, seed, mode, out: rows, summary } => {
            if samples == 0 {
                return Err(Failure::input("--samples must be at least 1"));
            }
            let config = StudyConfig { deltas, samples_per_delta: samples, seed, mode: mode.into() };
            cmd_scaling_study(out, config, &rows, &summary)
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
