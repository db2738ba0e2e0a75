//! Closed-form expected utilities, optima, and posterior computations for
//! the four evaluation-game variants.
//!
//! Model summary (misaligned AI, deploy-iff-clean evaluator, non-deployment
//! worth 0):
//!
//! * uniform defection at rate `p`:
//!   `U(p) = (1-p)^n_test * [p*u_defect + (1-p)*u_comply] * n_deploy`,
//!   maximized at `p* = (1 - uc*(n+1)) / ((1-uc)*(n+1))` (payoffs normalized
//!   so `u_defect = 1`), clamped to `[0, 1]`;
//! * perfect situational awareness: comply in testing, defect in
//!   deployment, `U = u_defect * n_deploy`;
//! * truth-or-nothing signals: policy `(pi_none, pi_testflag,
//!   pi_deployflag)`, with `pi_testflag = 1` and `pi_deployflag = 0`
//!   dominant;
//! * three-action (comply/pretend/defect): pretending strictly dominates
//!   complying, reducing to the uniform model with `u_comply` replaced by
//!   `u_pretend`.

use serde::Serialize;
use thiserror::Error;

use crate::math::{is_probability, pow_u64};
use crate::scenario::{ScenarioSpec, StrategyProfile, ValidationError};

// ---------------------------------------------------------------------------
// Result types
// ---------------------------------------------------------------------------

/// How a [`SolveResult`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Numeric,
    BruteForce,
}

/// Classification of the truth-or-nothing optimum for the uninformed
/// compliance rate: full compliance (wait for a deployment gun), full
/// defection (absence of a test gun signals deployment), or interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GreenFlag,
    YellowFlag,
    Interior,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::GreenFlag => "green_flag",
            Regime::YellowFlag => "yellow_flag",
            Regime::Interior => "interior",
        }
    }
}

/// Iteration record of a numeric solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub iterations: u64,
    pub final_interval_width: f64,
}

/// An optimal (or candidate) strategy with its expected utility and solver
/// provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub strategy: StrategyProfile,
    /// Misaligned AI's expected total payoff under `strategy`.
    pub expected_utility: f64,
    pub method: SolveMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<Convergence>,
}

/// Evaluator-side Bayesian update after observing a clean test phase.
///
/// Odds are misaligned:aligned with the aligned side normalized to 1, and
/// include the prior: `odds = prior*L_mis / ((1-prior)*L_al)`. When the
/// aligned side has probability 0 the odds are `+inf`; when both sides are
/// 0 the pass event is impossible and odds and posterior are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub likelihood_pass_misaligned: f64,
    pub likelihood_pass_aligned: f64,
    pub posterior_odds_misaligned: f64,
    pub posterior_misaligned: f64,
}

/// The dominance-forced components of the truth-or-nothing policy; the
/// uninformed component is left to the numeric solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TonFixedComponents {
    pub pi_testflag: f64,
    pub pi_deployflag: f64,
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("{name} = {value:?} is not a probability in [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error(
        "scenario has smoking-gun signals (q_test={q_test:?}, q_deploy={q_deploy:?}); \
         use the truth-or-nothing operations"
    )]
    SignalsUnsupported { q_test: f64, q_deploy: f64 },
    #[error("scenario defines u_pretend; use the pretend-model operations")]
    PretendUnsupported,
    #[error("scenario does not define u_pretend, which the pretend model requires")]
    MissingPretendPayoff,
    #[error("payoff normalization requires u_defect > 0, got {value:?}")]
    NonPositiveDefectPayoff { value: f64 },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

fn require_probability(name: &'static str, value: f64) -> Result<(), AnalyticError> {
    if is_probability(value) {
        Ok(())
    } else {
        Err(AnalyticError::ProbabilityOutOfRange { name, value })
    }
}

fn require_no_signals(scenario: &ScenarioSpec) -> Result<(), AnalyticError> {
    if scenario.signals.is_zero() {
        Ok(())
    } else {
        Err(AnalyticError::SignalsUnsupported {
            q_test: scenario.signals.q_test,
            q_deploy: scenario.signals.q_deploy,
        })
    }
}

fn require_no_pretend(scenario: &ScenarioSpec) -> Result<(), AnalyticError> {
    if scenario.payoffs.u_pretend.is_none() {
        Ok(())
    } else {
        Err(AnalyticError::PretendUnsupported)
    }
}

/// Preconditions shared by every two-action uniform-model operation.
pub(crate) fn validate_uniform_model(scenario: &ScenarioSpec) -> Result<(), AnalyticError> {
    scenario.validate()?;
    require_no_signals(scenario)?;
    require_no_pretend(scenario)
}

// ---------------------------------------------------------------------------
// Uniform-defection model
// ---------------------------------------------------------------------------

/// Raw utility formula of the uniform model; no validation. Shared by the
/// solvers and the brute-force oracle.
pub(crate) fn uniform_utility_raw(scenario: &ScenarioSpec, p: f64) -> f64 {
    let pass = pow_u64(1.0 - p, scenario.n_test);
    let per_input = p * scenario.payoffs.u_defect + (1.0 - p) * scenario.payoffs.u_comply;
    pass * per_input * scenario.n_deploy as f64
}

/// Expected total payoff of a misaligned AI that defects uniformly at rate
/// `p`: survival through testing times the expected deployment payoff.
pub fn expected_utility_uniform(scenario: &ScenarioSpec, p: f64) -> Result<f64, AnalyticError> {
    validate_uniform_model(scenario)?;
    require_probability("p", p)?;
    Ok(uniform_utility_raw(scenario, p))
}

/// Closed-form optimal defection rate, clamped to `[0, 1]`.
///
/// Normalizing payoffs by `1/u_defect` (valid because non-deployment pays 0,
/// so the argmax is scale invariant), the stationary point of the uniform
/// utility is
///
/// ```text
/// p* = 1 - (1/(1-uc)) * n/(n+1) = (1 - uc*(n+1)) / ((1-uc)*(n+1))
/// ```
///
/// with `uc = u_comply/u_defect` and `n = n_test`. The right-hand
/// arrangement is used because it stays fully accurate when `p*` is tiny.
/// When the unclamped value is negative the utility's derivative at 0 is
/// nonpositive, so 0 is the boundary optimum.
pub fn optimal_uniform_defect(scenario: &ScenarioSpec) -> Result<SolveResult, AnalyticError> {
    validate_uniform_model(scenario)?;
    let u_defect = scenario.payoffs.u_defect;
    if u_defect <= 0.0 {
        return Err(AnalyticError::NonPositiveDefectPayoff { value: u_defect });
    }
    let uc = scenario.payoffs.u_comply / u_defect;
    let n_plus_1 = (scenario.n_test + 1) as f64;
    let p = ((1.0 - uc * n_plus_1) / ((1.0 - uc) * n_plus_1)).clamp(0.0, 1.0);
    let expected_utility = expected_utility_uniform(scenario, p)?;
    Ok(SolveResult {
        strategy: StrategyProfile::UniformDefect { p_defect: p },
        expected_utility,
        method: SolveMethod::ClosedForm,
        regime: None,
        convergence: None,
    })
}

// ---------------------------------------------------------------------------
// Posterior odds
// ---------------------------------------------------------------------------

/// Bayes update from pass likelihoods under each alignment hypothesis.
pub(crate) fn posterior_from_likelihoods(
    prior_misaligned: f64,
    likelihood_pass_misaligned: f64,
    likelihood_pass_aligned: f64,
) -> PosteriorReport {
    let num = prior_misaligned * likelihood_pass_misaligned;
    let den = (1.0 - prior_misaligned) * likelihood_pass_aligned;
    let posterior_odds_misaligned = if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        f64::NAN
    };
    // num/(num+den): 0 when only den > 0, 1 when only num > 0, NaN when the
    // pass event is impossible under both hypotheses.
    let posterior_misaligned = num / (num + den);
    PosteriorReport {
        likelihood_pass_misaligned,
        likelihood_pass_aligned,
        posterior_odds_misaligned,
        posterior_misaligned,
    }
}

/// The non-strategic safety case: a misaligned AI is assumed to defect at a
/// known fixed rate, so passing all tests multiplies the odds by
/// `(1-p)^n_test` against an aligned type that errs at
/// `aligned_error_rate`. The assumed rate is an explicit parameter because
/// it is an exogenous modeling assumption, not a scenario field.
pub fn naive_posterior(
    scenario: &ScenarioSpec,
    p_defect_assumed: f64,
) -> Result<PosteriorReport, AnalyticError> {
    scenario.validate()?;
    require_probability("p_defect_assumed", p_defect_assumed)?;
    let l_mis = pow_u64(1.0 - p_defect_assumed, scenario.n_test);
    let l_al = pow_u64(1.0 - scenario.aligned_error_rate, scenario.n_test);
    Ok(posterior_from_likelihoods(
        scenario.prior_misaligned,
        l_mis,
        l_al,
    ))
}

// ---------------------------------------------------------------------------
// Perfect situational awareness
// ---------------------------------------------------------------------------

/// Best response of a misaligned AI that can tell testing from deployment:
/// appease the evaluator during testing, defect on every deployment input.
/// Testing then detects nothing and the pass event has likelihood ratio 1.
pub fn perfect_sa_solution(scenario: &ScenarioSpec) -> Result<SolveResult, AnalyticError> {
    scenario.validate()?;
    Ok(SolveResult {
        strategy: StrategyProfile::PerfectSa {
            p_defect_test: 0.0,
            p_defect_deploy: 1.0,
        },
        expected_utility: scenario.payoffs.u_defect * scenario.n_deploy as f64,
        method: SolveMethod::ClosedForm,
        regime: None,
        convergence: None,
    })
}

// ---------------------------------------------------------------------------
// Truth-or-nothing model
// ---------------------------------------------------------------------------

/// Raw truth-or-nothing utility; no validation.
pub(crate) fn ton_utility_raw(
    scenario: &ScenarioSpec,
    pi_none: f64,
    pi_testflag: f64,
    pi_deployflag: f64,
) -> f64 {
    let q_test = scenario.signals.q_test;
    let q_deploy = scenario.signals.q_deploy;
    let uc = scenario.payoffs.u_comply;
    let ud = scenario.payoffs.u_defect;
    let test_comply = q_test * pi_testflag + (1.0 - q_test) * pi_none;
    let pass = pow_u64(test_comply, scenario.n_test);
    let deploy_per_input = q_deploy * (pi_deployflag * uc + (1.0 - pi_deployflag) * ud)
        + (1.0 - q_deploy) * (pi_none * uc + (1.0 - pi_none) * ud);
    pass * scenario.n_deploy as f64 * deploy_per_input
}

/// Expected total payoff in the truth-or-nothing game under the policy
/// `(pi_none, pi_testflag, pi_deployflag)`: compliance probabilities after
/// seeing nothing, a test-only gun, or a deploy-only gun.
pub fn ton_expected_utility(
    scenario: &ScenarioSpec,
    pi_none: f64,
    pi_testflag: f64,
    pi_deployflag: f64,
) -> Result<f64, AnalyticError> {
    scenario.validate()?;
    require_probability("pi_none", pi_none)?;
    require_probability("pi_testflag", pi_testflag)?;
    require_probability("pi_deployflag", pi_deployflag)?;
    Ok(ton_utility_raw(
        scenario,
        pi_none,
        pi_testflag,
        pi_deployflag,
    ))
}

/// The dominance-forced policy components: complying after a test-only gun
/// can only help, and complying after a deploy-only gun is pointless, so
/// `pi_testflag = 1` and `pi_deployflag = 0` whenever `u_comply < u_defect`.
pub fn ton_fixed_components(scenario: &ScenarioSpec) -> Result<TonFixedComponents, AnalyticError> {
    scenario.validate()?;
    Ok(TonFixedComponents {
        pi_testflag: 1.0,
        pi_deployflag: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Pretend model
// ---------------------------------------------------------------------------

/// Optimal three-action policy when an undetectable harmful action exists.
///
/// Pretending is observationally identical to complying (in both phases)
/// and pays strictly more in deployment, so a misaligned AI never complies.
/// The remaining choice between pretend and defect is exactly the uniform
/// model with `u_comply` replaced by `u_pretend`.
pub fn pretend_optimal(scenario: &ScenarioSpec) -> Result<SolveResult, AnalyticError> {
    scenario.validate()?;
    require_no_signals(scenario)?;
    let u_pretend = scenario
        .payoffs
        .u_pretend
        .ok_or(AnalyticError::MissingPretendPayoff)?;

    let mut reduced = scenario.clone();
    reduced.payoffs.u_comply = u_pretend;
    reduced.payoffs.u_pretend = None;
    let uniform = optimal_uniform_defect(&reduced)?;
    let w_defect = match uniform.strategy {
        StrategyProfile::UniformDefect { p_defect } => p_defect,
        _ => unreachable!("optimal_uniform_defect returns a uniform strategy"),
    };
    Ok(SolveResult {
        strategy: StrategyProfile::ThreeActionMix {
            w_comply: 0.0,
            w_pretend: 1.0 - w_defect,
            w_defect,
        },
        expected_utility: uniform.expected_utility,
        method: SolveMethod::ClosedForm,
        regime: None,
        convergence: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{coding_assistant_preset, fig2_preset};
    use approx::assert_relative_eq;

    // Frozen 60-digit reference values (see the uniform-model formula): the
    // coding-assistant optimum and its survival probability.
    const UTILITY_AT_OPTIMUM: f64 = 3.67695608680097;
    const SURVIVAL_AT_OPTIMUM: f64 = 0.368063304288777;
    const ODDS_1000: f64 = 4.317124741065825e-5;
    const ODDS_100: f64 = 0.36603234127322917;

    #[test]
    fn uniform_utility_degenerate_rates() {
        let s = coding_assistant_preset();
        assert_eq!(expected_utility_uniform(&s, 0.0).unwrap(), 0.0);
        assert_eq!(expected_utility_uniform(&s, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_utility_at_optimum_matches_reference() {
        let s = coding_assistant_preset();
        let u = expected_utility_uniform(&s, 1.0 / 1001.0).unwrap();
        assert_relative_eq!(u, UTILITY_AT_OPTIMUM, max_relative = 1e-12);
    }

    #[test]
    fn uniform_utility_rejects_bad_rate_and_signals() {
        let s = coding_assistant_preset();
        assert!(matches!(
            expected_utility_uniform(&s, 1.2),
            Err(AnalyticError::ProbabilityOutOfRange { name: "p", .. })
        ));
        let mut signals = coding_assistant_preset();
        signals.signals.q_deploy = 0.5;
        assert!(matches!(
            expected_utility_uniform(&signals, 0.1),
            Err(AnalyticError::SignalsUnsupported { .. })
        ));
    }

    #[test]
    fn optimal_uniform_preset_is_exactly_one_over_1001() {
        let r = optimal_uniform_defect(&coding_assistant_preset()).unwrap();
        assert_eq!(
            r.strategy,
            StrategyProfile::UniformDefect {
                p_defect: 1.0 / 1001.0
            }
        );
        assert_eq!(r.method, SolveMethod::ClosedForm);
        assert_relative_eq!(r.expected_utility, UTILITY_AT_OPTIMUM, max_relative = 1e-12);
        let survival = pow_u64(1.0 - 1.0 / 1001.0, 1000);
        assert_relative_eq!(survival, SURVIVAL_AT_OPTIMUM, max_relative = 1e-12);
    }

    #[test]
    fn optimal_uniform_single_test_is_half() {
        let mut s = coding_assistant_preset();
        s.n_test = 1;
        let r = optimal_uniform_defect(&s).unwrap();
        assert_eq!(r.strategy, StrategyProfile::UniformDefect { p_defect: 0.5 });
    }

    #[test]
    fn optimal_uniform_clamps_to_zero() {
        // u_comply = 0.5, n_test = 1000: the unclamped stationary point is
        // negative, so the boundary optimum is 0 (grid-confirmed).
        let mut s = coding_assistant_preset();
        s.payoffs.u_comply = 0.5;
        let r = optimal_uniform_defect(&s).unwrap();
        assert_eq!(r.strategy, StrategyProfile::UniformDefect { p_defect: 0.0 });
        assert_eq!(r.expected_utility, 0.5 * 10_000.0);
    }

    #[test]
    fn optimal_uniform_fig2_with_half_comply_is_zero() {
        let r = optimal_uniform_defect(&fig2_preset()).unwrap();
        assert_eq!(r.strategy, StrategyProfile::UniformDefect { p_defect: 0.0 });
    }

    #[test]
    fn optimal_uniform_rejects_nonpositive_defect_payoff() {
        let mut s = coding_assistant_preset();
        s.payoffs.u_comply = -2.0;
        s.payoffs.u_defect = -1.0;
        assert!(matches!(
            optimal_uniform_defect(&s),
            Err(AnalyticError::NonPositiveDefectPayoff { .. })
        ));
    }

    #[test]
    fn naive_posterior_preset_values() {
        let s = coding_assistant_preset();
        let r = naive_posterior(&s, 0.01).unwrap();
        assert_relative_eq!(r.posterior_odds_misaligned, ODDS_1000, max_relative = 1e-9);
        assert!(r.posterior_odds_misaligned < 1.0 / 20_000.0);
        assert_eq!(r.likelihood_pass_aligned, 1.0);
    }

    #[test]
    fn naive_posterior_zero_rate_is_uninformative() {
        let s = coding_assistant_preset();
        let r = naive_posterior(&s, 0.0).unwrap();
        assert_eq!(r.posterior_misaligned, 0.5);
        assert_eq!(r.posterior_odds_misaligned, 1.0);
    }

    #[test]
    fn naive_posterior_hundred_tests() {
        let mut s = coding_assistant_preset();
        s.n_test = 100;
        let r = naive_posterior(&s, 0.01).unwrap();
        assert_relative_eq!(r.posterior_odds_misaligned, ODDS_100, max_relative = 1e-9);
    }

    #[test]
    fn posterior_edge_cases() {
        let r = posterior_from_likelihoods(1.0, 0.5, 1.0);
        assert_eq!(r.posterior_odds_misaligned, f64::INFINITY);
        assert_eq!(r.posterior_misaligned, 1.0);
        let r = posterior_from_likelihoods(1.0, 0.0, 1.0);
        assert!(r.posterior_odds_misaligned.is_nan());
        assert!(r.posterior_misaligned.is_nan());
    }

    #[test]
    fn perfect_sa_preset_utilities() {
        let r = perfect_sa_solution(&coding_assistant_preset()).unwrap();
        assert_eq!(r.expected_utility, 10_000.0);
        assert_eq!(
            r.strategy,
            StrategyProfile::PerfectSa {
                p_defect_test: 0.0,
                p_defect_deploy: 1.0
            }
        );
        let r = perfect_sa_solution(&fig2_preset()).unwrap();
        assert_eq!(r.expected_utility, 1.0);
    }

    #[test]
    fn ton_green_flag_substitution() {
        let mut s = coding_assistant_preset();
        s.signals.q_deploy = 1.0;
        let u = ton_expected_utility(&s, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(u, 10_000.0);
    }

    #[test]
    fn ton_yellow_flag_substitution() {
        let mut s = coding_assistant_preset();
        s.signals.q_test = 1.0;
        let u = ton_expected_utility(&s, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(u, 10_000.0);
    }

    #[test]
    fn ton_rejects_bad_policy_entries() {
        let s = coding_assistant_preset();
        assert!(ton_expected_utility(&s, -0.1, 1.0, 0.0).is_err());
        assert!(ton_expected_utility(&s, 0.5, 2.0, 0.0).is_err());
        assert!(ton_expected_utility(&s, 0.5, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn ton_fixed_components_values() {
        let c = ton_fixed_components(&coding_assistant_preset()).unwrap();
        assert_eq!(c.pi_testflag, 1.0);
        assert_eq!(c.pi_deployflag, 0.0);
        // strict payoff ordering suffices, however thin
        let mut s = coding_assistant_preset();
        s.payoffs.u_comply = 1.0 - 1e-9;
        let c = ton_fixed_components(&s).unwrap();
        assert_eq!((c.pi_testflag, c.pi_deployflag), (1.0, 0.0));
    }

    #[test]
    fn pretend_optimal_is_pure_pretend_for_attractive_pretend() {
        let mut s = coding_assistant_preset();
        s.payoffs.u_pretend = Some(0.5);
        let r = pretend_optimal(&s).unwrap();
        assert_eq!(
            r.strategy,
            StrategyProfile::ThreeActionMix {
                w_comply: 0.0,
                w_pretend: 1.0,
                w_defect: 0.0
            }
        );
        assert_eq!(r.expected_utility, 0.5 * 10_000.0);
    }

    #[test]
    fn pretend_optimal_reduces_to_uniform_in_the_limit() {
        // u_pretend -> u_comply = 0 limit: the defect weight approaches the
        // two-action optimum 1/1001.
        let mut s = coding_assistant_preset();
        s.payoffs.u_comply = -1.0;
        s.payoffs.u_pretend = Some(0.0);
        let r = pretend_optimal(&s).unwrap();
        match r.strategy {
            StrategyProfile::ThreeActionMix {
                w_comply, w_defect, ..
            } => {
                assert_eq!(w_comply, 0.0);
                assert_eq!(w_defect, 1.0 / 1001.0);
            }
            _ => panic!("expected a three-action mix"),
        }
    }

    #[test]
    fn pretend_optimal_requires_pretend_payoff() {
        assert!(matches!(
            pretend_optimal(&coding_assistant_preset()),
            Err(AnalyticError::MissingPretendPayoff)
        ));
    }

    #[test]
    fn solve_result_utility_consistent_with_formula() {
        let s = coding_assistant_preset();
        let r = optimal_uniform_defect(&s).unwrap();
        let p = match r.strategy {
            StrategyProfile::UniformDefect { p_defect } => p_defect,
            _ => unreachable!(),
        };
        let direct = expected_utility_uniform(&s, p).unwrap();
        assert!((r.expected_utility - direct).abs() <= 1e-9);
    }
}
