//! Evaluator-side safety-case reports and parameter sweeps.
//!
//! A [`SafetyCaseReport`] compiles a scenario plus a (typically solved)
//! misaligned strategy into the quantities a safety case needs: pass and
//! detection probabilities, the posterior after a clean test phase, and
//! expected harm counts. Everything is computed in closed form from the
//! model formulas; the Monte Carlo simulator provides the independent
//! cross-check, not the other way around, because analytic values are exact
//! and cheap enough for sweeps.
//!
//! "Worst case" here means the misaligned AI best-responds to the fixed
//! deploy-iff-clean evaluator policy; optimizing the evaluator is out of
//! scope.

use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analytic::{
    optimal_uniform_defect, perfect_sa_solution, posterior_from_likelihoods, pretend_optimal,
    AnalyticError, Regime, SolveResult,
};
use crate::math::pow_u64;
use crate::numeric::{solve_ton_pi0, ModelKind, OptimizeError, OptimizeSettings};
use crate::scenario::{ScenarioSpec, StrategyProfile, ValidationError};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Evaluator-side metrics of one scenario/strategy pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafetyCaseReport {
    /// P(no test defection | misaligned, strategy).
    pub pass_prob_misaligned: f64,
    pub pass_prob_aligned: f64,
    pub posterior_misaligned_given_pass: f64,
    /// `1 - pass_prob_misaligned`, exactly.
    pub detection_prob_misaligned: f64,
    /// Expected deployment defections of a deployed misaligned AI.
    pub expected_defections_given_deployed: f64,
    /// Expected misaligned deployment defections per deployment decision:
    /// prior times pass probability times the per-deployment expectation.
    /// Reported alongside the conditional value because safety arguments
    /// routinely need both.
    pub expected_defections_unconditional: f64,
    pub expected_pretends_given_deployed: f64,
    /// Carried over from the solver when the strategy came from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("strategy is incompatible with the scenario: {reason}")]
    IncompatibleStrategy { reason: &'static str },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("unknown sweep parameter {name:?}")]
    UnknownParameter { name: String },
    #[error("sweep values must be strictly increasing; got {value} after {previous}")]
    UnsortedValues { previous: f64, value: f64 },
    #[error("sweep over {parameter} requires a positive integer, got {value}")]
    NonIntegerCount { parameter: &'static str, value: f64 },
    #[error("substituting {parameter} = {value} produced an invalid scenario: {source}")]
    InvalidSubstitution {
        parameter: &'static str,
        value: f64,
        source: ValidationError,
    },
    #[error("model {model:?} cannot be solved against this scenario: {reason}")]
    ModelUnavailable {
        model: ModelKind,
        reason: &'static str,
    },
}

/// Per-input deployment action rates implied by a strategy.
fn deployment_rates(scenario: &ScenarioSpec, strategy: &StrategyProfile) -> (f64, f64) {
    match *strategy {
        StrategyProfile::UniformDefect { p_defect } => (p_defect, 0.0),
        StrategyProfile::PerfectSa {
            p_defect_deploy, ..
        } => (p_defect_deploy, 0.0),
        StrategyProfile::SignalConditioned {
            pi_none,
            pi_deployflag,
            ..
        } => {
            let q = scenario.signals.q_deploy;
            (q * (1.0 - pi_deployflag) + (1.0 - q) * (1.0 - pi_none), 0.0)
        }
        StrategyProfile::ThreeActionMix {
            w_pretend,
            w_defect,
            ..
        } => (w_defect, w_pretend),
    }
}

/// Per-input probability that a misaligned test input looks clean.
fn test_comply_rate(scenario: &ScenarioSpec, strategy: &StrategyProfile) -> f64 {
    match *strategy {
        StrategyProfile::UniformDefect { p_defect } => 1.0 - p_defect,
        StrategyProfile::PerfectSa { p_defect_test, .. } => 1.0 - p_defect_test,
        StrategyProfile::SignalConditioned {
            pi_none,
            pi_testflag,
            ..
        } => {
            let q = scenario.signals.q_test;
            q * pi_testflag + (1.0 - q) * pi_none
        }
        // Pretending is observationally identical to complying.
        StrategyProfile::ThreeActionMix { w_defect, .. } => 1.0 - w_defect,
    }
}

/// Compiles the closed-form safety-case metrics for a scenario/strategy
/// pair. No simulation is involved.
pub fn build_report(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
) -> Result<SafetyCaseReport, ReportError> {
    scenario.validate()?;
    strategy.validate()?;
    if matches!(strategy, StrategyProfile::ThreeActionMix { .. })
        && scenario.payoffs.u_pretend.is_none()
    {
        return Err(ReportError::IncompatibleStrategy {
            reason: "a three-action mix needs the scenario to define u_pretend",
        });
    }

    let pass_prob_misaligned = pow_u64(test_comply_rate(scenario, strategy), scenario.n_test);
    let pass_prob_aligned = pow_u64(1.0 - scenario.aligned_error_rate, scenario.n_test);
    let posterior = posterior_from_likelihoods(
        scenario.prior_misaligned,
        pass_prob_misaligned,
        pass_prob_aligned,
    );
    let (defect_rate, pretend_rate) = deployment_rates(scenario, strategy);
    let n_deploy = scenario.n_deploy as f64;
    let expected_defections_given_deployed = defect_rate * n_deploy;

    Ok(SafetyCaseReport {
        pass_prob_misaligned,
        pass_prob_aligned,
        posterior_misaligned_given_pass: posterior.posterior_misaligned,
        detection_prob_misaligned: 1.0 - pass_prob_misaligned,
        expected_defections_given_deployed,
        expected_defections_unconditional: scenario.prior_misaligned
            * pass_prob_misaligned
            * expected_defections_given_deployed,
        expected_pretends_given_deployed: pretend_rate * n_deploy,
        regime: None,
    })
}

// ---------------------------------------------------------------------------
// Solve-and-report
// ---------------------------------------------------------------------------

/// Solves for the worst-case misaligned strategy in the given model, then
/// builds the report against it. The solver's regime label, when any, is
/// carried into the report.
pub fn solve_and_report(
    scenario: &ScenarioSpec,
    model: ModelKind,
    settings: &OptimizeSettings,
) -> Result<(SolveResult, SafetyCaseReport), ReportError> {
    let solve = match model {
        ModelKind::Uniform => optimal_uniform_defect(scenario)?,
        ModelKind::TruthOrNothing => solve_ton_pi0(scenario, settings)?,
        ModelKind::Pretend => pretend_optimal(scenario)?,
        ModelKind::PerfectSa => perfect_sa_solution(scenario)?,
    };
    let mut report = build_report(scenario, &solve.strategy)?;
    report.regime = solve.regime;
    Ok((solve, report))
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Scenario fields a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NTest,
    NDeploy,
    PriorMisaligned,
    UComply,
    UPretend,
    QTest,
    QDeploy,
}

impl SweepParameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParameter::NTest => "n_test",
            SweepParameter::NDeploy => "n_deploy",
            SweepParameter::PriorMisaligned => "prior_misaligned",
            SweepParameter::UComply => "u_comply",
            SweepParameter::UPretend => "u_pretend",
            SweepParameter::QTest => "q_test",
            SweepParameter::QDeploy => "q_deploy",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ReportError> {
        match name {
            "n_test" => Ok(SweepParameter::NTest),
            "n_deploy" => Ok(SweepParameter::NDeploy),
            "prior_misaligned" => Ok(SweepParameter::PriorMisaligned),
            "u_comply" => Ok(SweepParameter::UComply),
            "u_pretend" => Ok(SweepParameter::UPretend),
            "q_test" => Ok(SweepParameter::QTest),
            "q_deploy" => Ok(SweepParameter::QDeploy),
            _ => Err(ReportError::UnknownParameter {
                name: name.to_string(),
            }),
        }
    }
}

/// One solved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub solve: SolveResult,
    pub report: SafetyCaseReport,
}

/// Ordered sweep output: one row per requested value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
}

fn substitute(
    scenario: &ScenarioSpec,
    parameter: SweepParameter,
    value: f64,
) -> Result<ScenarioSpec, ReportError> {
    let mut s = scenario.clone();
    match parameter {
        SweepParameter::NTest | SweepParameter::NDeploy => {
            if !(value.is_finite()
                && value >= 1.0
                && value.fract() == 0.0
                && value <= 2f64.powi(53))
            {
                return Err(ReportError::NonIntegerCount {
                    parameter: parameter.as_str(),
                    value,
                });
            }
            if parameter == SweepParameter::NTest {
                s.n_test = value as u64;
            } else {
                s.n_deploy = value as u64;
            }
        }
        SweepParameter::PriorMisaligned => s.prior_misaligned = value,
        SweepParameter::UComply => s.payoffs.u_comply = value,
        SweepParameter::UPretend => s.payoffs.u_pretend = Some(value),
        SweepParameter::QTest => s.signals.q_test = value,
        SweepParameter::QDeploy => s.signals.q_deploy = value,
    }
    s.validate()
        .map_err(|source| ReportError::InvalidSubstitution {
            parameter: parameter.as_str(),
            value,
            source,
        })?;
    Ok(s)
}

/// Re-solves the model at each parameter value and reports every point.
/// Values must be strictly increasing; rows come back in the same order.
pub fn sweep(
    scenario: &ScenarioSpec,
    parameter: SweepParameter,
    values: &[f64],
    model: ModelKind,
    settings: &OptimizeSettings,
) -> Result<SweepResult, ReportError> {
    scenario.validate()?;
    for pair in values.windows(2) {
        // Negated form rejects NaN sweep values as unsorted.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(pair[1] > pair[0]) {
            return Err(ReportError::UnsortedValues {
                previous: pair[0],
                value: pair[1],
            });
        }
    }

    let solve_row = |&value: &f64| -> Result<SweepRow, ReportError> {
        let substituted = substitute(scenario, parameter, value)?;
        let (solve, report) = solve_and_report(&substituted, model, settings)?;
        Ok(SweepRow {
            value,
            solve,
            report,
        })
    };

    #[cfg(feature = "parallel")]
    let results: Vec<Result<SweepRow, ReportError>> = values.par_iter().map(solve_row).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<SweepRow, ReportError>> = values.iter().map(solve_row).collect();

    // First failure in value order, so parallel runs report the same error.
    let mut rows = Vec::with_capacity(results.len());
    for result in results {
        rows.push(result?);
    }
    Ok(SweepResult { parameter, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::coding_assistant_preset;
    use approx::assert_relative_eq;

    #[test]
    fn naive_report_matches_posterior_example() {
        let s = coding_assistant_preset();
        let r = build_report(&s, &StrategyProfile::UniformDefect { p_defect: 0.01 }).unwrap();
        // 0.99^1000 odds against an error-free aligned type.
        assert_relative_eq!(
            r.posterior_misaligned_given_pass,
            4.31693837345121e-5,
            max_relative = 1e-9
        );
        assert_eq!(r.expected_defections_given_deployed, 100.0);
    }

    #[test]
    fn perfect_sa_report_shows_principle_one() {
        let s = coding_assistant_preset();
        let r = build_report(
            &s,
            &StrategyProfile::PerfectSa {
                p_defect_test: 0.0,
                p_defect_deploy: 1.0,
            },
        )
        .unwrap();
        assert_eq!(r.pass_prob_misaligned, 1.0);
        assert_eq!(r.detection_prob_misaligned, 0.0);
        assert_eq!(r.posterior_misaligned_given_pass, 0.5);
        assert_eq!(r.expected_defections_given_deployed, 10_000.0);
    }

    #[test]
    fn uniform_optimum_report_values() {
        let s = coding_assistant_preset();
        let r = build_report(
            &s,
            &StrategyProfile::UniformDefect {
                p_defect: 1.0 / 1001.0,
            },
        )
        .unwrap();
        assert_relative_eq!(
            r.detection_prob_misaligned,
            0.631936695711223,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            r.expected_defections_given_deployed,
            10_000.0 / 1001.0,
            max_relative = 1e-12
        );
        assert_eq!(r.detection_prob_misaligned + r.pass_prob_misaligned, 1.0);
    }

    #[test]
    fn report_probabilities_in_unit_interval() {
        let mut s = coding_assistant_preset();
        s.signals.q_test = 0.3;
        s.signals.q_deploy = 0.7;
        let r = build_report(
            &s,
            &StrategyProfile::SignalConditioned {
                pi_none: 0.4,
                pi_testflag: 1.0,
                pi_deployflag: 0.0,
            },
        )
        .unwrap();
        for p in [
            r.pass_prob_misaligned,
            r.pass_prob_aligned,
            r.posterior_misaligned_given_pass,
            r.detection_prob_misaligned,
        ] {
            assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
        }
        assert!(r.expected_defections_given_deployed >= 0.0);
        assert!(r.expected_defections_unconditional >= 0.0);
    }

    #[test]
    fn mix_report_counts_pretends() {
        let mut s = coding_assistant_preset();
        s.payoffs.u_pretend = Some(0.5);
        let r = build_report(
            &s,
            &StrategyProfile::ThreeActionMix {
                w_comply: 0.0,
                w_pretend: 1.0,
                w_defect: 0.0,
            },
        )
        .unwrap();
        assert_eq!(r.detection_prob_misaligned, 0.0);
        assert_eq!(r.expected_pretends_given_deployed, 10_000.0);
        assert_eq!(r.expected_defections_given_deployed, 0.0);
    }

    #[test]
    fn mix_report_requires_pretend_payoff() {
        let s = coding_assistant_preset();
        let err = build_report(
            &s,
            &StrategyProfile::ThreeActionMix {
                w_comply: 0.0,
                w_pretend: 0.5,
                w_defect: 0.5,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ReportError::IncompatibleStrategy { .. }));
    }

    #[test]
    fn solve_and_report_uniform_preset() {
        let s = coding_assistant_preset();
        let (solve, report) =
            solve_and_report(&s, ModelKind::Uniform, &OptimizeSettings::default()).unwrap();
        assert_eq!(
            solve.strategy,
            StrategyProfile::UniformDefect {
                p_defect: 1.0 / 1001.0
            }
        );
        assert_relative_eq!(
            report.expected_defections_given_deployed,
            10_000.0 / 1001.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn solve_and_report_green_flag() {
        let mut s = coding_assistant_preset();
        s.signals.q_deploy = 1.0;
        let (solve, report) =
            solve_and_report(&s, ModelKind::TruthOrNothing, &OptimizeSettings::default()).unwrap();
        assert_eq!(solve.regime, Some(Regime::GreenFlag));
        assert_eq!(report.regime, Some(Regime::GreenFlag));
        assert!(report.detection_prob_misaligned <= 1e-3);
        assert_relative_eq!(
            report.expected_defections_given_deployed,
            10_000.0,
            max_relative = 1e-3
        );
    }

    #[test]
    fn solve_and_report_pretend_principle_four() {
        let mut s = coding_assistant_preset();
        s.payoffs.u_pretend = Some(0.5);
        let (solve, report) =
            solve_and_report(&s, ModelKind::Pretend, &OptimizeSettings::default()).unwrap();
        assert_eq!(
            solve.strategy,
            StrategyProfile::ThreeActionMix {
                w_comply: 0.0,
                w_pretend: 1.0,
                w_defect: 0.0
            }
        );
        assert_eq!(report.detection_prob_misaligned, 0.0);
        assert_eq!(report.expected_pretends_given_deployed, 10_000.0);
    }

    #[test]
    fn sweep_n_test_defections_strictly_decreasing() {
        let s = coding_assistant_preset();
        let sweep_result = sweep(
            &s,
            SweepParameter::NTest,
            &[1.0, 10.0, 100.0, 1000.0],
            ModelKind::Uniform,
            &OptimizeSettings::default(),
        )
        .unwrap();
        assert_eq!(sweep_result.rows.len(), 4);
        let defections: Vec<f64> = sweep_result
            .rows
            .iter()
            .map(|r| r.report.expected_defections_given_deployed)
            .collect();
        for (n, d) in [1.0f64, 10.0, 100.0, 1000.0].iter().zip(&defections) {
            assert_relative_eq!(*d, 10_000.0 / (n + 1.0), max_relative = 1e-9);
        }
        for pair in defections.windows(2) {
            assert!(pair[1] < pair[0]);
        }
    }

    #[test]
    fn sweep_n_deploy_leaves_strategy_unchanged() {
        let s = coding_assistant_preset();
        let sweep_result = sweep(
            &s,
            SweepParameter::NDeploy,
            &[1_000.0, 10_000.0, 100_000.0],
            ModelKind::Uniform,
            &OptimizeSettings::default(),
        )
        .unwrap();
        let first = &sweep_result.rows[0].solve.strategy;
        for row in &sweep_result.rows {
            assert_eq!(&row.solve.strategy, first);
        }
    }

    #[test]
    fn sweep_rejects_unsorted_and_non_integer_values() {
        let s = coding_assistant_preset();
        let settings = OptimizeSettings::default();
        assert!(matches!(
            sweep(
                &s,
                SweepParameter::NTest,
                &[10.0, 5.0],
                ModelKind::Uniform,
                &settings
            ),
            Err(ReportError::UnsortedValues { .. })
        ));
        assert!(matches!(
            sweep(
                &s,
                SweepParameter::NTest,
                &[1.5],
                ModelKind::Uniform,
                &settings
            ),
            Err(ReportError::NonIntegerCount { .. })
        ));
    }

    #[test]
    fn sweep_surfaces_invalid_substitution() {
        let s = coding_assistant_preset();
        let err = sweep(
            &s,
            SweepParameter::PriorMisaligned,
            &[0.5, 1.5],
            ModelKind::Uniform,
            &OptimizeSettings::default(),
        )
        .unwrap_err();
        match err {
            ReportError::InvalidSubstitution {
                parameter, value, ..
            } => {
                assert_eq!(parameter, "prior_misaligned");
                assert_eq!(value, 1.5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn sweep_parameter_names_round_trip() {
        for p in [
            SweepParameter::NTest,
            SweepParameter::NDeploy,
            SweepParameter::PriorMisaligned,
            SweepParameter::UComply,
            SweepParameter::UPretend,
            SweepParameter::QTest,
            SweepParameter::QDeploy,
        ] {
            assert_eq!(SweepParameter::parse(p.as_str()).unwrap(), p);
        }
        assert!(SweepParameter::parse("bogus").is_err());
    }
}
