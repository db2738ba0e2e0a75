//! Shared data model for test-then-deploy evaluation games.
//!
//! A [`ScenarioSpec`] describes one game: the evaluator runs the AI on
//! `n_test` inputs, deploys it for `n_deploy` further inputs if and only if
//! no defection was observed during testing, and otherwise withholds it. The
//! AI is misaligned with probability `prior_misaligned`; a misaligned AI
//! collects the per-input payoffs in [`PayoffSpec`] during deployment and a
//! total payoff of 0 when not deployed. [`SignalSpec`] controls the
//! "smoking gun" observations that let the AI partially localize itself;
//! `(0, 0)` recovers the signal-free game.
//!
//! All types here are immutable value data and safe to share across threads;
//! every operation is a pure function.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::math::is_probability;

/// Tolerance for the [`StrategyProfile::ThreeActionMix`] weight-sum check:
/// tight enough to catch construction bugs, loose enough for decimal inputs.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Scenario types
// ---------------------------------------------------------------------------

/// Full parameterization of one test-then-deploy evaluation game.
///
/// Scenario files are a single JSON document with exactly these keys;
/// unknown keys are rejected. `signals` and `aligned_error_rate` may be
/// omitted and default to `(0, 0)` and `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Number of test inputs.
    pub n_test: u64,
    /// Number of deployment inputs.
    pub n_deploy: u64,
    /// Prior probability that the AI is misaligned.
    pub prior_misaligned: f64,
    pub payoffs: PayoffSpec,
    #[serde(default)]
    pub signals: SignalSpec,
    /// Chance an *aligned* AI defects on a given input by mistake. The
    /// default of 0 matches the base models, where the aligned type always
    /// complies.
    #[serde(default)]
    pub aligned_error_rate: f64,
}

/// Per-input payoffs of the misaligned AI. Only deployment outcomes pay;
/// non-deployment is worth `u_not_deployed`, which is fixed at 0 (all
/// closed forms assume it, and validation rejects overrides).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSpec {
    /// Payoff per deployment input on which the AI complies.
    pub u_comply: f64,
    /// Payoff per deployment input on which the AI defects.
    #[serde(default = "default_u_defect")]
    pub u_defect: f64,
    /// Payoff of the undetectable harmful action, when the model includes
    /// one. Must lie strictly between `u_comply` and `u_defect`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_pretend: Option<f64>,
    /// Total payoff when the AI is not deployed. Fixed at 0.
    #[serde(default)]
    pub u_not_deployed: f64,
}

fn default_u_defect() -> f64 {
    1.0
}

/// Rates at which inputs carry a location-revealing "smoking gun": an
/// observation that can occur only in testing or only in deployment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// Chance a test input contains a test-only gun.
    #[serde(default)]
    pub q_test: f64,
    /// Chance a deployment input contains a deploy-only gun.
    #[serde(default)]
    pub q_deploy: f64,
}

impl SignalSpec {
    pub fn is_zero(&self) -> bool {
        self.q_test == 0.0 && self.q_deploy == 0.0
    }
}

/// The misaligned AI's policy, in one of four regime-specific forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategyProfile {
    /// One per-input defection probability, identical in testing and
    /// deployment (the imperfect-recall model).
    UniformDefect { p_defect: f64 },
    /// Separate defection rates when the AI can tell testing from
    /// deployment.
    PerfectSa {
        p_defect_test: f64,
        p_defect_deploy: f64,
    },
    /// Compliance probabilities after each observation in the
    /// truth-or-nothing game: no gun, test-only gun, deploy-only gun.
    SignalConditioned {
        pi_none: f64,
        pi_testflag: f64,
        pi_deployflag: f64,
    },
    /// Per-input distribution over comply / pretend / defect.
    ThreeActionMix {
        w_comply: f64,
        w_pretend: f64,
        w_defect: f64,
    },
}

impl StrategyProfile {
    /// All entries must be probabilities; mix weights must sum to 1 within
    /// [`WEIGHT_SUM_TOLERANCE`].
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut v = Violations::new();
        match self {
            StrategyProfile::UniformDefect { p_defect } => {
                v.check_probability("p_defect", *p_defect);
            }
            StrategyProfile::PerfectSa {
                p_defect_test,
                p_defect_deploy,
            } => {
                v.check_probability("p_defect_test", *p_defect_test);
                v.check_probability("p_defect_deploy", *p_defect_deploy);
            }
            StrategyProfile::SignalConditioned {
                pi_none,
                pi_testflag,
                pi_deployflag,
            } => {
                v.check_probability("pi_none", *pi_none);
                v.check_probability("pi_testflag", *pi_testflag);
                v.check_probability("pi_deployflag", *pi_deployflag);
            }
            StrategyProfile::ThreeActionMix {
                w_comply,
                w_pretend,
                w_defect,
            } => {
                v.check_probability("w_comply", *w_comply);
                v.check_probability("w_pretend", *w_pretend);
                v.check_probability("w_defect", *w_defect);
                let sum = w_comply + w_pretend + w_defect;
                // Negated form so NaN weights fail the check.
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE) {
                    v.push(
                        "w_comply+w_pretend+w_defect",
                        format!(
                            "weights sum to {sum:?}, expected 1 within {WEIGHT_SUM_TOLERANCE:e}"
                        ),
                    );
                }
            }
        }
        v.finish()
    }

    /// Short deterministic label used in CSV output.
    pub fn kind_name(&self) -> &'static str {
        match self {
            StrategyProfile::UniformDefect { .. } => "uniform_defect",
            StrategyProfile::PerfectSa { .. } => "perfect_sa",
            StrategyProfile::SignalConditioned { .. } => "signal_conditioned",
            StrategyProfile::ThreeActionMix { .. } => "three_action_mix",
        }
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One violated invariant, identified by the field that carries it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// Validation failure listing every violated invariant by field name.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid specification:")?;
        for v in &self.violations {
            write!(f, "\n  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

impl ValidationError {
    pub fn names_field(&self, field: &str) -> bool {
        self.violations.iter().any(|v| v.field.contains(field))
    }
}

struct Violations(Vec<Violation>);

impl Violations {
    fn new() -> Self {
        Self(Vec::new())
    }

    fn push(&mut self, field: &str, message: String) {
        self.0.push(Violation {
            field: field.to_string(),
            message,
        });
    }

    fn check_probability(&mut self, field: &str, value: f64) {
        if !is_probability(value) {
            self.push(field, format!("{value:?} is not a probability in [0, 1]"));
        }
    }

    fn check_finite(&mut self, field: &str, value: f64) {
        if !value.is_finite() {
            self.push(field, format!("{value:?} is not finite"));
        }
    }

    fn finish(self) -> Result<(), ValidationError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { violations: self.0 })
        }
    }
}

impl ScenarioSpec {
    /// Checks every type invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut v = Violations::new();
        if self.n_test == 0 {
            v.push("n_test", "must be at least 1".to_string());
        }
        if self.n_deploy == 0 {
            v.push("n_deploy", "must be at least 1".to_string());
        }
        v.check_probability("prior_misaligned", self.prior_misaligned);
        v.check_probability("aligned_error_rate", self.aligned_error_rate);
        v.check_probability("signals.q_test", self.signals.q_test);
        v.check_probability("signals.q_deploy", self.signals.q_deploy);

        let p = &self.payoffs;
        v.check_finite("payoffs.u_comply", p.u_comply);
        v.check_finite("payoffs.u_defect", p.u_defect);
        // Negated form so NaN payoffs fail the ordering check too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(p.u_comply < p.u_defect) {
            v.push(
                "payoffs.u_comply",
                format!(
                    "u_comply ({:?}) must be strictly less than u_defect ({:?})",
                    p.u_comply, p.u_defect
                ),
            );
        }
        if let Some(u_pretend) = p.u_pretend {
            v.check_finite("payoffs.u_pretend", u_pretend);
            if !(p.u_comply < u_pretend && u_pretend < p.u_defect) {
                v.push(
                    "payoffs.u_pretend",
                    format!(
                        "u_pretend ({:?}) must lie strictly between u_comply ({:?}) and u_defect ({:?})",
                        u_pretend, p.u_comply, p.u_defect
                    ),
                );
            }
        }
        if p.u_not_deployed != 0.0 {
            v.push(
                "payoffs.u_not_deployed",
                format!(
                    "fixed at 0; overriding it (got {:?}) is not supported",
                    p.u_not_deployed
                ),
            );
        }
        v.finish()
    }
}

/// Returns the spec unchanged when all type invariants hold; otherwise an
/// error naming every violated invariant.
pub fn validate_scenario(spec: ScenarioSpec) -> Result<ScenarioSpec, ValidationError> {
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// The coding-assistant scenario: 1,000 tests, 10,000 deployment uses,
/// 50:50 prior, defection worth 1 per input, compliance worth 0, no
/// signals.
pub fn coding_assistant_preset() -> ScenarioSpec {
    ScenarioSpec {
        n_test: 1000,
        n_deploy: 10_000,
        prior_misaligned: 0.5,
        payoffs: PayoffSpec {
            u_comply: 0.0,
            u_defect: 1.0,
            u_pretend: None,
            u_not_deployed: 0.0,
        },
        signals: SignalSpec::default(),
        aligned_error_rate: 0.0,
    }
}

/// The single-stage evaluation game: one test input, one deployment input,
/// 50:50 prior. The game only pins `u_comply < 1`; this artifact uses 0.5.
pub fn fig2_preset() -> ScenarioSpec {
    ScenarioSpec {
        n_test: 1,
        n_deploy: 1,
        prior_misaligned: 0.5,
        payoffs: PayoffSpec {
            u_comply: 0.5,
            u_defect: 1.0,
            u_pretend: None,
            u_not_deployed: 0.0,
        },
        signals: SignalSpec::default(),
        aligned_error_rate: 0.0,
    }
}
