//! Game-theoretic toolkit for evaluation-based AI safety cases.
//!
//! Models a test-then-deploy evaluation as a game between an evaluator with
//! a fixed deploy-iff-clean policy and a possibly misaligned AI, solves for
//! the misaligned agent's optimal strategy under several information
//! regimes (imperfect recall, perfect situational awareness, partial
//! "smoking gun" signals, undetectable harmful actions), and produces
//! quantitative safety-case reports cross-validated by seeded Monte Carlo
//! simulation.
//!
//! Module map:
//!
//! * [`scenario`] — the shared data model, validation, and the two built-in
//!   presets;
//! * [`analytic`] — closed-form utilities, optima, and posterior odds;
//! * [`numeric`] — grid + golden-section maximization and exhaustive
//!   brute-force oracles;
//! * [`sim`] — reproducible episode simulation and metric estimation;
//! * [`report`] — safety-case reports and parameter sweeps;
//! * [`rng`] — the counter-based random streams behind the simulator.
//!
//! The `parallel` feature (on by default) runs episode batches, oracle
//! grids, and sweep rows on a rayon pool; all results are bit-identical to
//! the sequential fallback.

pub mod analytic;
pub mod math;
pub mod numeric;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use analytic::{
    expected_utility_uniform, naive_posterior, optimal_uniform_defect, perfect_sa_solution,
    pretend_optimal, ton_expected_utility, ton_fixed_components, AnalyticError, Convergence,
    PosteriorReport, Regime, SolveMethod, SolveResult, TonFixedComponents,
};
pub use numeric::{
    brute_force_oracle, brute_force_oracle_sequential, maximize_scalar, solve_ton_pi0,
    solve_uniform_numeric, ModelKind, OptimizeError, OptimizeSettings, ScalarMaximum,
};
pub use report::{
    build_report, solve_and_report, sweep, ReportError, SafetyCaseReport, SweepParameter,
    SweepResult, SweepRow,
};
pub use scenario::{
    coding_assistant_preset, fig2_preset, validate_scenario, PayoffSpec, ScenarioSpec, SignalSpec,
    StrategyProfile, ValidationError, Violation,
};
pub use sim::{
    estimate_metrics, estimate_metrics_sequential, simulate_episode, EpisodeOutcome, MetricKind,
    SimulateError, SimulationEstimate,
};
