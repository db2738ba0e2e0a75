//! Output documents and their JSON/CSV renderings.
//!
//! JSON uses serde_json's shortest-round-trip float encoding (non-finite
//! values become `null`). CSV numerics are printed with 17 significant
//! digits so every 64-bit float round-trips exactly.
//!
//! Sweep CSV columns, in order: `parameter_value, strategy_summary,
//! expected_utility, pass_prob_misaligned, detection_prob_misaligned,
//! posterior_given_pass, defections_given_deployed,
//! defections_unconditional, pretends_given_deployed, regime`. Report CSV
//! uses the same schema with an empty `parameter_value`.

use serde::Serialize;

use evalgame_core::{
    PosteriorReport, SafetyCaseReport, ScenarioSpec, SimulationEstimate, SolveResult,
    StrategyProfile, SweepResult,
};

use crate::CliError;

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "parameter_value",
    "strategy_summary",
    "expected_utility",
    "pass_prob_misaligned",
    "detection_prob_misaligned",
    "posterior_given_pass",
    "defections_given_deployed",
    "defections_unconditional",
    "pretends_given_deployed",
    "regime",
];

/// 17 significant digits: enough to reconstruct the exact f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum OutputDocument {
    Solve {
        model: &'static str,
        scenario: ScenarioSpec,
        solve: SolveResult,
        report: SafetyCaseReport,
    },
    Report {
        model: &'static str,
        scenario: ScenarioSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        solve: Option<SolveResult>,
        strategy: StrategyProfile,
        /// Expected utility of `strategy` (from the solver, or the uniform
        /// formula for the naive model's assumed rate).
        expected_utility: f64,
        report: SafetyCaseReport,
        /// Naive model only: the posterior-odds calculation.
        #[serde(skip_serializing_if = "Option::is_none")]
        posterior: Option<PosteriorReport>,
    },
    Simulate {
        model: &'static str,
        scenario: ScenarioSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        solve: Option<SolveResult>,
        strategy: StrategyProfile,
        report: SafetyCaseReport,
        estimates: Vec<SimulationEstimate>,
    },
    Sweep {
        model: &'static str,
        scenario: ScenarioSpec,
        parameter: &'static str,
        rows: Vec<SweepCsvSource>,
    },
}

/// One sweep row kept in both structured and CSV-ready form.
#[derive(Debug, Serialize)]
pub struct SweepCsvSource {
    pub value: f64,
    pub solve: SolveResult,
    pub report: SafetyCaseReport,
}

impl OutputDocument {
    pub fn solve(
        model: &'static str,
        scenario: ScenarioSpec,
        solve: SolveResult,
        report: SafetyCaseReport,
    ) -> Self {
        OutputDocument::Solve {
            model,
            scenario,
            solve,
            report,
        }
    }

    pub fn report(
        model: &'static str,
        scenario: ScenarioSpec,
        solve: SolveResult,
        report: SafetyCaseReport,
    ) -> Self {
        OutputDocument::Report {
            model,
            scenario,
            strategy: solve.strategy.clone(),
            expected_utility: solve.expected_utility,
            solve: Some(solve),
            report,
            posterior: None,
        }
    }

    pub fn naive_report(
        scenario: ScenarioSpec,
        strategy: StrategyProfile,
        report: SafetyCaseReport,
        posterior: PosteriorReport,
        expected_utility: f64,
    ) -> Self {
        OutputDocument::Report {
            model: "naive",
            scenario,
            solve: None,
            strategy,
            expected_utility,
            report,
            posterior: Some(posterior),
        }
    }

    pub fn simulate(
        model: &'static str,
        scenario: ScenarioSpec,
        solve: Option<SolveResult>,
        strategy: StrategyProfile,
        report: SafetyCaseReport,
        estimates: Vec<SimulationEstimate>,
    ) -> Self {
        OutputDocument::Simulate {
            model,
            scenario,
            solve,
            strategy,
            report,
            estimates,
        }
    }

    pub fn sweep(model: &'static str, scenario: ScenarioSpec, result: SweepResult) -> Self {
        OutputDocument::Sweep {
            model,
            scenario,
            parameter: result.parameter.as_str(),
            rows: result
                .rows
                .into_iter()
                .map(|row| SweepCsvSource {
                    value: row.value,
                    solve: row.solve,
                    report: row.report,
                })
                .collect(),
        }
    }
}

pub fn render_json(document: &OutputDocument) -> Result<String, CliError> {
    let mut text =
        serde_json::to_string_pretty(document).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Deterministic one-line strategy label for CSV rows.
pub fn strategy_summary(strategy: &StrategyProfile) -> String {
    match strategy {
        StrategyProfile::UniformDefect { p_defect } => {
            format!("uniform_defect(p_defect={})", fmt_f64(*p_defect))
        }
        StrategyProfile::PerfectSa {
            p_defect_test,
            p_defect_deploy,
        } => format!(
            "perfect_sa(p_defect_test={};p_defect_deploy={})",
            fmt_f64(*p_defect_test),
            fmt_f64(*p_defect_deploy)
        ),
        StrategyProfile::SignalConditioned {
            pi_none,
            pi_testflag,
            pi_deployflag,
        } => format!(
            "signal_conditioned(pi_none={};pi_testflag={};pi_deployflag={})",
            fmt_f64(*pi_none),
            fmt_f64(*pi_testflag),
            fmt_f64(*pi_deployflag)
        ),
        StrategyProfile::ThreeActionMix {
            w_comply,
            w_pretend,
            w_defect,
        } => format!(
            "three_action_mix(w_comply={};w_pretend={};w_defect={})",
            fmt_f64(*w_comply),
            fmt_f64(*w_pretend),
            fmt_f64(*w_defect)
        ),
    }
}

fn report_record(
    parameter_value: Option<f64>,
    solve_utility: f64,
    strategy: &StrategyProfile,
    report: &SafetyCaseReport,
) -> Vec<String> {
    vec![
        parameter_value.map(fmt_f64).unwrap_or_default(),
        strategy_summary(strategy),
        fmt_f64(solve_utility),
        fmt_f64(report.pass_prob_misaligned),
        fmt_f64(report.detection_prob_misaligned),
        fmt_f64(report.posterior_misaligned_given_pass),
        fmt_f64(report.expected_defections_given_deployed),
        fmt_f64(report.expected_defections_unconditional),
        fmt_f64(report.expected_pretends_given_deployed),
        report
            .regime
            .map(|r| r.as_str().to_string())
            .unwrap_or_default(),
    ]
}

pub fn render_csv(document: &OutputDocument) -> Result<String, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Io(e.to_string());

    match document {
        OutputDocument::Sweep { rows, .. } => {
            writer.write_record(SWEEP_CSV_HEADER).map_err(io_err)?;
            for row in rows {
                writer
                    .write_record(report_record(
                        Some(row.value),
                        row.solve.expected_utility,
                        &row.solve.strategy,
                        &row.report,
                    ))
                    .map_err(io_err)?;
            }
        }
        OutputDocument::Report {
            strategy,
            expected_utility,
            report,
            ..
        } => {
            writer.write_record(SWEEP_CSV_HEADER).map_err(io_err)?;
            writer
                .write_record(report_record(None, *expected_utility, strategy, report))
                .map_err(io_err)?;
        }
        OutputDocument::Solve { solve, .. } => {
            writer
                .write_record(["strategy_summary", "expected_utility", "method", "regime"])
                .map_err(io_err)?;
            writer
                .write_record([
                    strategy_summary(&solve.strategy),
                    fmt_f64(solve.expected_utility),
                    format!("{:?}", solve.method).to_lowercase(),
                    solve
                        .regime
                        .map(|r| r.as_str().to_string())
                        .unwrap_or_default(),
                ])
                .map_err(io_err)?;
        }
        OutputDocument::Simulate { estimates, .. } => {
            writer
                .write_record([
                    "metric",
                    "value",
                    "std_error",
                    "n_episodes",
                    "seed",
                    "low_confidence",
                ])
                .map_err(io_err)?;
            for e in estimates {
                writer
                    .write_record([
                        e.metric.as_str().to_string(),
                        fmt_f64(e.value),
                        fmt_f64(e.std_error),
                        e.n_episodes.to_string(),
                        e.seed.to_string(),
                        e.low_confidence.to_string(),
                    ])
                    .map_err(io_err)?;
            }
        }
    }

    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}
