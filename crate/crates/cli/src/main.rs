//! `evalgame` — solve, simulate, sweep, and report on test-then-deploy
//! evaluation games from the command line.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, bad scenario
//! file, incompatible model), 2 solver non-convergence, 3 I/O error.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evalgame_core::{
    build_report, coding_assistant_preset, estimate_metrics, fig2_preset, naive_posterior,
    solve_and_report, sweep, ModelKind, OptimizeError, OptimizeSettings, PosteriorReport,
    ReportError, SafetyCaseReport, ScenarioSpec, SimulateError, StrategyProfile, SweepParameter,
    SweepResult,
};

use output::{render_csv, render_json, OutputDocument};

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(
    name = "evalgame",
    version,
    about = "Game-theoretic safety cases for test-then-deploy AI evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the misaligned AI's optimal strategy in a model.
    Solve(RunArgs),
    /// Solve (or assume) a strategy and run seeded Monte Carlo episodes.
    Simulate(RunArgs),
    /// Re-solve across a range of one scenario field.
    Sweep(RunArgs),
    /// Build the evaluator-side safety-case report.
    Report(RunArgs),
    /// Write a built-in scenario to a JSON file.
    Preset(PresetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    #[value(name = "uniform")]
    Uniform,
    #[value(name = "truth_or_nothing")]
    TruthOrNothing,
    #[value(name = "pretend")]
    Pretend,
    #[value(name = "perfect_sa")]
    PerfectSa,
    #[value(name = "naive")]
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    #[value(name = "coding-assistant")]
    CodingAssistant,
    #[value(name = "fig2")]
    Fig2,
}

impl PresetArg {
    fn scenario(self) -> ScenarioSpec {
        match self {
            PresetArg::CodingAssistant => coding_assistant_preset(),
            PresetArg::Fig2 => fig2_preset(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    #[value(name = "json")]
    Json,
    #[value(name = "csv")]
    Csv,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true)))]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long, group = "source")]
    scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, group = "source")]
    preset: Option<PresetArg>,
    /// Game model to solve or simulate.
    #[arg(long)]
    model: ModelArg,
    /// RNG seed (simulate).
    #[arg(long)]
    seed: Option<u64>,
    /// Episode count (simulate).
    #[arg(long)]
    episodes: Option<u64>,
    /// Scenario field to sweep.
    #[arg(long = "sweep")]
    sweep_parameter: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Assumed per-input defection rate (naive model).
    #[arg(long = "p-defect")]
    p_defect: Option<f64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Optimizer grid points override.
    #[arg(long)]
    grid: Option<u64>,
    /// Optimizer tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct PresetArgs {
    /// Which built-in scenario to write.
    #[arg(value_enum)]
    name: PresetArg,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Error classification
// ---------------------------------------------------------------------------

enum CliError {
    Validation(String),
    NonConvergence(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::NonConvergence(m) | CliError::Io(m) => m,
        }
    }
}

fn classify_optimize(err: OptimizeError) -> CliError {
    match err {
        OptimizeError::NoConvergence { .. } | OptimizeError::NonFiniteObjective { .. } => {
            CliError::NonConvergence(err.to_string())
        }
        other => CliError::Validation(other.to_string()),
    }
}

fn classify_report(err: ReportError) -> CliError {
    match err {
        ReportError::Optimize(inner) => classify_optimize(inner),
        other => CliError::Validation(other.to_string()),
    }
}

impl From<SimulateError> for CliError {
    fn from(err: SimulateError) -> Self {
        CliError::Validation(err.to_string())
    }
}

// ---------------------------------------------------------------------------
// Manifest execution
// ---------------------------------------------------------------------------

fn load_scenario(args: &RunArgs) -> Result<ScenarioSpec, CliError> {
    let spec = if let Some(preset) = args.preset {
        preset.scenario()
    } else {
        let path = args.scenario.as_ref().expect("clap enforces the group");
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Validation(format!("invalid scenario {}: {e}", path.display()))
        })?
    };
    spec.validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(spec)
}

fn settings_from(args: &RunArgs) -> Result<OptimizeSettings, CliError> {
    let mut settings = OptimizeSettings::default();
    if let Some(grid) = args.grid {
        settings.grid_points = grid;
    }
    if let Some(tol) = args.tol {
        settings.tolerance = tol;
    }
    settings.validate().map_err(classify_optimize)?;
    Ok(settings)
}

fn solver_model(model: ModelArg) -> Result<ModelKind, CliError> {
    match model {
        ModelArg::Uniform => Ok(ModelKind::Uniform),
        ModelArg::TruthOrNothing => Ok(ModelKind::TruthOrNothing),
        ModelArg::Pretend => Ok(ModelKind::Pretend),
        ModelArg::PerfectSa => Ok(ModelKind::PerfectSa),
        ModelArg::Naive => Err(CliError::Validation(
            "the naive model has no solver; it assumes a fixed rate (see --p-defect)".to_string(),
        )),
    }
}

fn require_p_defect(args: &RunArgs) -> Result<f64, CliError> {
    args.p_defect
        .ok_or_else(|| CliError::Validation("the naive model requires --p-defect".to_string()))
}

fn reject_p_defect(args: &RunArgs) -> Result<(), CliError> {
    if args.p_defect.is_some() {
        Err(CliError::Validation(
            "--p-defect only applies to the naive model".to_string(),
        ))
    } else {
        Ok(())
    }
}

fn model_name(model: ModelArg) -> &'static str {
    match model {
        ModelArg::Uniform => "uniform",
        ModelArg::TruthOrNothing => "truth_or_nothing",
        ModelArg::Pretend => "pretend",
        ModelArg::PerfectSa => "perfect_sa",
        ModelArg::Naive => "naive",
    }
}

/// The naive "solve": the assumed-rate strategy, its report, and — when
/// the base signal-free model applies — the utility that rate would earn.
fn naive_parts(
    scenario: &ScenarioSpec,
    p_defect: f64,
) -> Result<(StrategyProfile, SafetyCaseReport, PosteriorReport, f64), CliError> {
    let strategy = StrategyProfile::UniformDefect { p_defect };
    let report = build_report(scenario, &strategy).map_err(classify_report)?;
    let posterior =
        naive_posterior(scenario, p_defect).map_err(|e| CliError::Validation(e.to_string()))?;
    let utility = evalgame_core::expected_utility_uniform(scenario, p_defect).unwrap_or(f64::NAN);
    Ok((strategy, report, posterior, utility))
}

fn run_solve(args: &RunArgs) -> Result<OutputDocument, CliError> {
    reject_p_defect(args)?;
    let scenario = load_scenario(args)?;
    let settings = settings_from(args)?;
    let model = solver_model(args.model)?;
    let (solve, report) = solve_and_report(&scenario, model, &settings).map_err(classify_report)?;
    Ok(OutputDocument::solve(
        model_name(args.model),
        scenario,
        solve,
        report,
    ))
}

fn run_report(args: &RunArgs) -> Result<OutputDocument, CliError> {
    let scenario = load_scenario(args)?;
    if args.model == ModelArg::Naive {
        let p_defect = require_p_defect(args)?;
        let (strategy, report, posterior, utility) = naive_parts(&scenario, p_defect)?;
        return Ok(OutputDocument::naive_report(
            scenario, strategy, report, posterior, utility,
        ));
    }
    reject_p_defect(args)?;
    let settings = settings_from(args)?;
    let model = solver_model(args.model)?;
    let (solve, report) = solve_and_report(&scenario, model, &settings).map_err(classify_report)?;
    Ok(OutputDocument::report(
        model_name(args.model),
        scenario,
        solve,
        report,
    ))
}

fn run_simulate(args: &RunArgs) -> Result<OutputDocument, CliError> {
    let scenario = load_scenario(args)?;
    let seed = args
        .seed
        .ok_or_else(|| CliError::Validation("simulate requires --seed".to_string()))?;
    let episodes = args
        .episodes
        .ok_or_else(|| CliError::Validation("simulate requires --episodes".to_string()))?;

    let (solve, strategy, report) = if args.model == ModelArg::Naive {
        let p_defect = require_p_defect(args)?;
        let (strategy, report, _, _) = naive_parts(&scenario, p_defect)?;
        (None, strategy, report)
    } else {
        reject_p_defect(args)?;
        let settings = settings_from(args)?;
        let model = solver_model(args.model)?;
        let (solve, report) =
            solve_and_report(&scenario, model, &settings).map_err(classify_report)?;
        (Some(solve.clone()), solve.strategy, report)
    };

    let estimates = estimate_metrics(&scenario, &strategy, episodes, seed)?;
    Ok(OutputDocument::simulate(
        model_name(args.model),
        scenario,
        solve,
        strategy,
        report,
        estimates,
    ))
}

fn run_sweep(args: &RunArgs) -> Result<OutputDocument, CliError> {
    reject_p_defect(args)?;
    let scenario = load_scenario(args)?;
    let settings = settings_from(args)?;
    let model = solver_model(args.model)?;
    let parameter_name = args
        .sweep_parameter
        .as_deref()
        .ok_or_else(|| CliError::Validation("sweep requires --sweep FIELD".to_string()))?;
    let parameter = SweepParameter::parse(parameter_name).map_err(classify_report)?;
    let values = args
        .values
        .as_deref()
        .filter(|v| !v.is_empty())
        .ok_or_else(|| CliError::Validation("sweep requires --values LIST".to_string()))?;
    let result: SweepResult =
        sweep(&scenario, parameter, values, model, &settings).map_err(classify_report)?;
    Ok(OutputDocument::sweep(
        model_name(args.model),
        scenario,
        result,
    ))
}

fn run_preset(args: &PresetArgs) -> Result<(), CliError> {
    let scenario = args.name.scenario();
    let mut text =
        serde_json::to_string_pretty(&scenario).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_output(args.out.as_deref(), &text)
}

fn write_output(path: Option<&std::path::Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let (document, args) = match command {
        Command::Solve(args) => (run_solve(args)?, args),
        Command::Simulate(args) => (run_simulate(args)?, args),
        Command::Report(args) => (run_report(args)?, args),
        Command::Sweep(args) => (run_sweep(args)?, args),
        Command::Preset(args) => return run_preset(args),
    };
    let text = match args.format {
        FormatArg::Json => render_json(&document)?,
        FormatArg::Csv => render_csv(&document)?,
    };
    write_output(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
