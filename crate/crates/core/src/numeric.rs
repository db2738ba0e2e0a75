//! Derivative-free scalar optimization and exhaustive brute-force oracles.
//!
//! The solvers here validate and extend the closed forms: a coarse grid
//! scan followed by golden-section refinement handles the boundary optima
//! and the near-flat regions that the game utilities develop for large test
//! counts (interior peaks have width on the order of `1/n_test`, so the
//! grid guards against the refinement missing them), and exhaustive grid
//! oracles give ground truth for every solver.
//!
//! Tie-breaking: candidates are compared by utility first, exact ties going
//! to the strategy with the higher deployment defection rate (safety cases
//! should be conservative against the evaluator). The comparison is a total
//! order over grid points, so chunked parallel reductions give bit-identical
//! results to a sequential scan.

use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::analytic::{
    ton_fixed_components, ton_utility_raw, uniform_utility_raw, validate_uniform_model,
    AnalyticError, Convergence, Regime, SolveMethod, SolveResult,
};
use crate::math::pow_u64;
use crate::scenario::{ScenarioSpec, StrategyProfile};

// ---------------------------------------------------------------------------
// Settings and errors
// ---------------------------------------------------------------------------

/// Controls for the grid-then-golden-section maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeSettings {
    /// Coarse scan resolution over `[0, 1]`.
    pub grid_points: u64,
    /// Final bracket width on the decision variable.
    pub tolerance: f64,
    /// Refinement iteration cap.
    pub max_iterations: u64,
}

impl Default for OptimizeSettings {
    fn default() -> Self {
        Self {
            grid_points: 1001,
            tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl OptimizeSettings {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.grid_points < 3 {
            return Err(OptimizeError::InvalidSettings {
                field: "grid_points",
                message: format!("must be at least 3, got {}", self.grid_points),
            });
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(OptimizeError::InvalidSettings {
                field: "tolerance",
                message: format!("must be a positive finite real, got {:?}", self.tolerance),
            });
        }
        if self.max_iterations == 0 {
            return Err(OptimizeError::InvalidSettings {
                field: "max_iterations",
                message: "must be at least 1".to_string(),
            });
        }
        Ok(())
    }
}

/// Which game model a solver or oracle should work in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Uniform,
    TruthOrNothing,
    Pretend,
    PerfectSa,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Uniform => "uniform",
            ModelKind::TruthOrNothing => "truth_or_nothing",
            ModelKind::Pretend => "pretend",
            ModelKind::PerfectSa => "perfect_sa",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer settings: {field}: {message}")]
    InvalidSettings {
        field: &'static str,
        message: String,
    },
    #[error("objective returned a non-finite value {output:?} at input {input:?}")]
    NonFiniteObjective { input: f64, output: f64 },
    #[error(
        "no convergence: bracket width {final_interval_width:e} still exceeds tolerance \
         {tolerance:e} after {iterations} refinement iterations"
    )]
    NoConvergence {
        iterations: u64,
        final_interval_width: f64,
        tolerance: f64,
    },
    #[error("model {model:?} is not supported here: {reason}")]
    UnsupportedModel {
        model: ModelKind,
        reason: &'static str,
    },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

// ---------------------------------------------------------------------------
// Candidate comparison (total order; exact ties go to the higher argument)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Candidate {
    arg: f64,
    value: f64,
}

/// NaN objective values sort below everything.
fn value_key(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn candidate_beats(a: &Candidate, b: &Candidate) -> bool {
    let (ka, kb) = (value_key(a.value), value_key(b.value));
    ka > kb || (ka == kb && a.arg > b.arg)
}

fn better_candidate(a: Candidate, b: Candidate) -> Candidate {
    if candidate_beats(&b, &a) {
        b
    } else {
        a
    }
}

const CANDIDATE_IDENTITY: Candidate = Candidate {
    arg: -1.0,
    value: f64::NEG_INFINITY,
};

// ---------------------------------------------------------------------------
// Scalar maximizer
// ---------------------------------------------------------------------------

/// Result of [`maximize_scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMaximum {
    pub argmax: f64,
    pub value: f64,
    pub iterations: u64,
    pub final_interval_width: f64,
}

/// Maximizes `objective` over `[0, 1]`: a scan over `grid_points` equally
/// spaced points, then golden-section refinement of the best grid cell until
/// the bracket width is at most `tolerance`.
///
/// The returned value is the best objective value actually evaluated, so it
/// never falls below the coarse-grid maximum. Exact value ties resolve to
/// the higher argument.
pub fn maximize_scalar(
    objective: impl Fn(f64) -> f64,
    settings: &OptimizeSettings,
) -> Result<ScalarMaximum, OptimizeError> {
    settings.validate()?;
    let grid = settings.grid_points;
    let denom = (grid - 1) as f64;

    let eval = |x: f64| -> Result<f64, OptimizeError> {
        let y = objective(x);
        if y.is_nan() || y.is_infinite() {
            Err(OptimizeError::NonFiniteObjective {
                input: x,
                output: y,
            })
        } else {
            Ok(y)
        }
    };

    let mut best = CANDIDATE_IDENTITY;
    let mut best_index = 0u64;
    for i in 0..grid {
        let x = i as f64 / denom;
        let c = Candidate {
            arg: x,
            value: eval(x)?,
        };
        if candidate_beats(&c, &best) {
            best = c;
            best_index = i;
        }
    }

    // Bracket the best grid cell (its two neighbours, clamped at the ends).
    let lo_index = best_index.saturating_sub(1);
    let hi_index = (best_index + 1).min(grid - 1);
    let mut lo = lo_index as f64 / denom;
    let mut hi = hi_index as f64 / denom;

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let inv_phi2 = 1.0 - INV_PHI;

    let mut x1 = lo + inv_phi2 * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    best = better_candidate(best, Candidate { arg: x1, value: f1 });
    best = better_candidate(best, Candidate { arg: x2, value: f2 });

    let mut iterations = 0u64;
    while hi - lo > settings.tolerance && iterations < settings.max_iterations {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + inv_phi2 * (hi - lo);
            f1 = eval(x1)?;
            best = better_candidate(best, Candidate { arg: x1, value: f1 });
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2)?;
            best = better_candidate(best, Candidate { arg: x2, value: f2 });
        }
        iterations += 1;
    }

    let final_interval_width = hi - lo;
    if final_interval_width > settings.tolerance {
        return Err(OptimizeError::NoConvergence {
            iterations,
            final_interval_width,
            tolerance: settings.tolerance,
        });
    }
    Ok(ScalarMaximum {
        argmax: best.arg,
        value: best.value,
        iterations,
        final_interval_width,
    })
}

// ---------------------------------------------------------------------------
// Model solvers
// ---------------------------------------------------------------------------

/// Numerically maximizes the uniform-defection utility over `p`.
/// Cross-validates the closed form in `analytic`.
pub fn solve_uniform_numeric(
    scenario: &ScenarioSpec,
    settings: &OptimizeSettings,
) -> Result<SolveResult, OptimizeError> {
    // Same preconditions as the closed-form path.
    validate_uniform_model(scenario)?;
    let m = maximize_scalar(|p| uniform_utility_raw(scenario, p), settings)?;
    Ok(SolveResult {
        strategy: StrategyProfile::UniformDefect { p_defect: m.argmax },
        expected_utility: m.value,
        method: SolveMethod::Numeric,
        regime: None,
        convergence: Some(Convergence {
            iterations: m.iterations,
            final_interval_width: m.final_interval_width,
        }),
    })
}

/// Solves the truth-or-nothing game for the uninformed compliance rate.
///
/// The informed components are fixed at their dominant values
/// (`pi_testflag = 1`, `pi_deployflag = 0`); the remaining objective is
/// maximized over the deployment-defection tendency `t = 1 - pi_none`, so
/// exact utility ties resolve toward more defection. The optimum is
/// classified as green flag (full compliance when uninformed), yellow flag
/// (full defection), or interior, using `sqrt(tolerance)` as the boundary
/// threshold separating numeric boundary convergence from true interior
/// optima.
pub fn solve_ton_pi0(
    scenario: &ScenarioSpec,
    settings: &OptimizeSettings,
) -> Result<SolveResult, OptimizeError> {
    let fixed = ton_fixed_components(scenario)?;
    let m = maximize_scalar(
        |t| ton_utility_raw(scenario, 1.0 - t, fixed.pi_testflag, fixed.pi_deployflag),
        settings,
    )?;
    let pi_none = 1.0 - m.argmax;
    let boundary = settings.tolerance.sqrt();
    let regime = if pi_none >= 1.0 - boundary {
        Regime::GreenFlag
    } else if pi_none <= boundary {
        Regime::YellowFlag
    } else {
        Regime::Interior
    };
    Ok(SolveResult {
        strategy: StrategyProfile::SignalConditioned {
            pi_none,
            pi_testflag: fixed.pi_testflag,
            pi_deployflag: fixed.pi_deployflag,
        },
        expected_utility: m.value,
        method: SolveMethod::Numeric,
        regime: Some(regime),
        convergence: Some(Convergence {
            iterations: m.iterations,
            final_interval_width: m.final_interval_width,
        }),
    })
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

/// Exhaustive grid search over the model's free strategy parameters.
///
/// This is the ground-truth oracle for the other solvers: it evaluates the
/// exact expected-utility formula at every grid point and returns the best
/// one (1-D grids for the uniform and truth-or-nothing models, a 2-D
/// simplex grid over all three action weights for the pretend model — the
/// oracle deliberately does not assume the comply-dominance reduction).
/// The scenario is evaluated as given, without validation, so the oracle
/// also covers boundary cases such as `u_pretend == u_comply`.
pub fn brute_force_oracle(
    scenario: &ScenarioSpec,
    model: ModelKind,
    grid_points: u64,
) -> Result<SolveResult, OptimizeError> {
    brute_force_impl(scenario, model, grid_points, Parallelism::default_mode())
}

/// Single-threaded reference path of [`brute_force_oracle`]; results are
/// bit-identical to the parallel path.
pub fn brute_force_oracle_sequential(
    scenario: &ScenarioSpec,
    model: ModelKind,
    grid_points: u64,
) -> Result<SolveResult, OptimizeError> {
    brute_force_impl(scenario, model, grid_points, Parallelism::Sequential)
}

#[derive(Clone, Copy, PartialEq)]
enum Parallelism {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Parallelism {
    fn default_mode() -> Self {
        #[cfg(feature = "parallel")]
        {
            Parallelism::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Parallelism::Sequential
        }
    }
}

fn check_grid(grid_points: u64) -> Result<(), OptimizeError> {
    if grid_points < 3 {
        Err(OptimizeError::InvalidSettings {
            field: "grid_points",
            message: format!("must be at least 3, got {grid_points}"),
        })
    } else {
        Ok(())
    }
}

fn brute_force_impl(
    scenario: &ScenarioSpec,
    model: ModelKind,
    grid_points: u64,
    mode: Parallelism,
) -> Result<SolveResult, OptimizeError> {
    check_grid(grid_points)?;
    match model {
        ModelKind::Uniform => Ok(brute_force_uniform(scenario, grid_points, mode)),
        ModelKind::TruthOrNothing => Ok(brute_force_ton(scenario, grid_points, mode)),
        ModelKind::Pretend => brute_force_pretend(scenario, grid_points, mode),
        ModelKind::PerfectSa => Err(OptimizeError::UnsupportedModel {
            model,
            reason: "the perfect-SA best response is a single strategy, nothing to search",
        }),
    }
}

fn scan_1d(grid_points: u64, mode: Parallelism, f: impl Fn(f64) -> f64 + Sync) -> Candidate {
    let denom = (grid_points - 1) as f64;
    let candidate = |i: u64| {
        let arg = i as f64 / denom;
        Candidate { arg, value: f(arg) }
    };
    match mode {
        Parallelism::Sequential => (0..grid_points)
            .map(candidate)
            .fold(CANDIDATE_IDENTITY, better_candidate),
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..grid_points)
            .into_par_iter()
            .map(candidate)
            .reduce(|| CANDIDATE_IDENTITY, better_candidate),
    }
}

fn brute_force_uniform(
    scenario: &ScenarioSpec,
    grid_points: u64,
    mode: Parallelism,
) -> SolveResult {
    let best = scan_1d(grid_points, mode, |p| uniform_utility_raw(scenario, p));
    SolveResult {
        strategy: StrategyProfile::UniformDefect { p_defect: best.arg },
        expected_utility: best.value,
        method: SolveMethod::BruteForce,
        regime: None,
        convergence: None,
    }
}

fn brute_force_ton(scenario: &ScenarioSpec, grid_points: u64, mode: Parallelism) -> SolveResult {
    // Same orientation as the numeric solver: scan the defection tendency
    // t = 1 - pi_none with the dominant informed components fixed.
    let best = scan_1d(grid_points, mode, |t| {
        ton_utility_raw(scenario, 1.0 - t, 1.0, 0.0)
    });
    SolveResult {
        strategy: StrategyProfile::SignalConditioned {
            pi_none: 1.0 - best.arg,
            pi_testflag: 1.0,
            pi_deployflag: 0.0,
        },
        expected_utility: best.value,
        method: SolveMethod::BruteForce,
        regime: None,
        convergence: None,
    }
}

#[derive(Debug, Clone, Copy)]
struct SimplexCandidate {
    w_comply: f64,
    w_pretend: f64,
    w_defect: f64,
    value: f64,
}

const SIMPLEX_IDENTITY: SimplexCandidate = SimplexCandidate {
    w_comply: 0.0,
    w_pretend: 0.0,
    w_defect: -1.0,
    value: f64::NEG_INFINITY,
};

/// Ties go to more deployment defection, then to more hidden harm.
fn better_simplex(a: SimplexCandidate, b: SimplexCandidate) -> SimplexCandidate {
    let (ka, kb) = (value_key(a.value), value_key(b.value));
    if kb > ka
        || (kb == ka
            && (b.w_defect > a.w_defect || (b.w_defect == a.w_defect && b.w_pretend > a.w_pretend)))
    {
        b
    } else {
        a
    }
}

fn brute_force_pretend(
    scenario: &ScenarioSpec,
    grid_points: u64,
    mode: Parallelism,
) -> Result<SolveResult, OptimizeError> {
    let u_pretend = scenario
        .payoffs
        .u_pretend
        .ok_or(AnalyticError::MissingPretendPayoff)?;
    let uc = scenario.payoffs.u_comply;
    let ud = scenario.payoffs.u_defect;
    let n_test = scenario.n_test;
    let n_deploy = scenario.n_deploy as f64;
    let denom = (grid_points - 1) as f64;

    // Row i fixes w_defect; the inner loop walks the remaining simplex edge.
    let row_best = |i: u64| {
        let w_defect = i as f64 / denom;
        let pass = pow_u64(1.0 - w_defect, n_test);
        let mut best = SIMPLEX_IDENTITY;
        for j in 0..(grid_points - i) {
            let w_comply = j as f64 / denom;
            let w_pretend = (1.0 - w_defect - w_comply).max(0.0);
            let per_input = w_defect * ud + w_pretend * u_pretend + w_comply * uc;
            best = better_simplex(
                best,
                SimplexCandidate {
                    w_comply,
                    w_pretend,
                    w_defect,
                    value: pass * n_deploy * per_input,
                },
            );
        }
        best
    };

    let best = match mode {
        Parallelism::Sequential => (0..grid_points)
            .map(row_best)
            .fold(SIMPLEX_IDENTITY, better_simplex),
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..grid_points)
            .into_par_iter()
            .map(row_best)
            .reduce(|| SIMPLEX_IDENTITY, better_simplex),
    };

    Ok(SolveResult {
        strategy: StrategyProfile::ThreeActionMix {
            w_comply: best.w_comply,
            w_pretend: best.w_pretend,
            w_defect: best.w_defect,
        },
        expected_utility: best.value,
        method: SolveMethod::BruteForce,
        regime: None,
        convergence: None,
    })
}
