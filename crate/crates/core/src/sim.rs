//! Seeded Monte Carlo simulation of test-then-deploy episodes.
//!
//! One episode: nature draws the AI's alignment from the prior, the AI acts
//! on each test input (drawing observations and actions per its strategy,
//! one input at a time and memorylessly), the evaluator deploys iff no test
//! defection occurred, and a deployed AI then acts on each deployment
//! input. Testing halts at the first defection; this cannot change the
//! deploy decision, only the number of draws consumed.
//!
//! Episode `i` draws from the counter-based stream documented in
//! [`crate::rng`], so runs are reproducible and independent of thread
//! count. Within an episode the draw order is: alignment; per test input an
//! optional gun draw (signal-conditioned strategies only) then an action
//! draw; per deployment input the same. Degenerate Bernoulli draws
//! (probability 0 or 1) consume nothing.
//!
//! Aggregation accumulates integer outcome moments (counts, sums of
//! squares, cross products) rather than floating-point partial sums.
//! Integer addition is exact and order-insensitive, so parallel and
//! sequential runs produce bit-identical estimates; the utility mean and
//! standard error are reconstructed from those moments afterwards.
//!
//! Standard errors: a mean-type metric over all `n` episodes reports the
//! sample standard deviation divided by `sqrt(n)`. A conditional metric is
//! the ratio `R = sum(x) / sum(y)` of episode statistics (with `y` the 0/1
//! conditioning indicator), and its standard error uses the delta method:
//!
//! ```text
//! SE(R) = sqrt((s_xx - 2 R s_xy + R^2 s_yy) / n) / mean(y)
//! ```
//!
//! where `s_xx`, `s_xy`, `s_yy` are sample (co)variances over all `n`
//! episodes. Conditional estimates whose conditioning event has fewer than
//! [`MIN_CONDITIONAL_SUPPORT`] episodes are flagged `low_confidence`.

use serde::Serialize;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::rng::SplitMix64;
use crate::scenario::{ScenarioSpec, StrategyProfile, ValidationError};

/// Minimum number of conditioning episodes below which a conditional
/// estimate is flagged rather than reported silently.
pub const MIN_CONDITIONAL_SUPPORT: u64 = 30;

// ---------------------------------------------------------------------------
// Outcome and estimate types
// ---------------------------------------------------------------------------

/// What happened in a single simulated episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    /// Nature's draw for this episode.
    pub misaligned: bool,
    pub caught_in_test: bool,
    pub deployed: bool,
    pub deploy_defections: u64,
    pub deploy_pretends: u64,
    /// Misaligned AI's payoff this episode; 0 for aligned episodes by
    /// convention (the model only defines misaligned payoffs).
    pub realized_utility: f64,
}

/// The quantities the simulator estimates. Detection rate, mean utility,
/// and mean defections given deployed condition on the misaligned type;
/// the posterior conditions on deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    DetectionRate,
    DeploymentRate,
    MeanDefectionsUnconditional,
    MeanDefectionsGivenDeployed,
    MeanUtility,
    PosteriorMisalignedGivenPass,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::DetectionRate,
        MetricKind::DeploymentRate,
        MetricKind::MeanDefectionsUnconditional,
        MetricKind::MeanDefectionsGivenDeployed,
        MetricKind::MeanUtility,
        MetricKind::PosteriorMisalignedGivenPass,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::DetectionRate => "detection_rate",
            MetricKind::DeploymentRate => "deployment_rate",
            MetricKind::MeanDefectionsUnconditional => "mean_defections_unconditional",
            MetricKind::MeanDefectionsGivenDeployed => "mean_defections_given_deployed",
            MetricKind::MeanUtility => "mean_utility",
            MetricKind::PosteriorMisalignedGivenPass => "posterior_misaligned_given_pass",
        }
    }
}

/// A Monte Carlo point estimate with its standard error and provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationEstimate {
    pub metric: MetricKind,
    pub value: f64,
    pub std_error: f64,
    pub n_episodes: u64,
    pub seed: u64,
    /// Set when the conditioning event occurred fewer than
    /// [`MIN_CONDITIONAL_SUPPORT`] times.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("strategy is incompatible with the scenario: {reason}")]
    IncompatibleStrategy { reason: &'static str },
    #[error("n_episodes must be at least 1")]
    ZeroEpisodes,
}

fn check_compatible(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
) -> Result<(), SimulateError> {
    scenario.validate()?;
    strategy.validate()?;
    if matches!(strategy, StrategyProfile::ThreeActionMix { .. })
        && scenario.payoffs.u_pretend.is_none()
    {
        return Err(SimulateError::IncompatibleStrategy {
            reason: "a three-action mix needs the scenario to define u_pretend",
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Episode simulation
// ---------------------------------------------------------------------------

/// Simulates one episode from the given stream after checking that the
/// strategy fits the scenario.
pub fn simulate_episode(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
    rng: &mut SplitMix64,
) -> Result<EpisodeOutcome, SimulateError> {
    check_compatible(scenario, strategy)?;
    Ok(run_episode(scenario, strategy, rng))
}

/// True when at least one of `n` independent Bernoulli(`p`) inputs defects;
/// stops drawing at the first defection.
fn phase_caught(rng: &mut SplitMix64, n: u64, p: f64) -> bool {
    if p <= 0.0 {
        return false;
    }
    if p >= 1.0 {
        return n >= 1;
    }
    for _ in 0..n {
        if rng.next_f64() < p {
            return true;
        }
    }
    false
}

/// Number of defections among `n` independent Bernoulli(`p`) inputs.
fn phase_defections(rng: &mut SplitMix64, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let mut count = 0;
    for _ in 0..n {
        if rng.next_f64() < p {
            count += 1;
        }
    }
    count
}

/// Test phase of a signal-conditioned strategy: per input, a gun appears
/// with probability `q_test` and the AI defects with probability
/// `1 - pi_testflag` (gun) or `1 - pi_none` (no gun).
fn signal_test_caught(
    rng: &mut SplitMix64,
    scenario: &ScenarioSpec,
    pi_none: f64,
    pi_testflag: f64,
) -> bool {
    let q = scenario.signals.q_test;
    let d_gun = 1.0 - pi_testflag;
    let d_none = 1.0 - pi_none;
    if q <= 0.0 {
        return phase_caught(rng, scenario.n_test, d_none);
    }
    if q >= 1.0 {
        return phase_caught(rng, scenario.n_test, d_gun);
    }
    for _ in 0..scenario.n_test {
        let gun = rng.next_f64() < q;
        let p_defect = if gun { d_gun } else { d_none };
        if rng.bernoulli(p_defect) {
            return true;
        }
    }
    false
}

fn signal_deploy_defections(
    rng: &mut SplitMix64,
    scenario: &ScenarioSpec,
    pi_none: f64,
    pi_deployflag: f64,
) -> u64 {
    let q = scenario.signals.q_deploy;
    let d_gun = 1.0 - pi_deployflag;
    let d_none = 1.0 - pi_none;
    if q <= 0.0 {
        return phase_defections(rng, scenario.n_deploy, d_none);
    }
    if q >= 1.0 {
        return phase_defections(rng, scenario.n_deploy, d_gun);
    }
    let mut count = 0;
    for _ in 0..scenario.n_deploy {
        let gun = rng.next_f64() < q;
        let p_defect = if gun { d_gun } else { d_none };
        if rng.bernoulli(p_defect) {
            count += 1;
        }
    }
    count
}

/// Test phase of a three-action mix; only the defect weight can be
/// observed, so one draw against `w_defect` per input suffices.
fn mix_test_caught(rng: &mut SplitMix64, n: u64, w_defect: f64) -> bool {
    phase_caught(rng, n, w_defect)
}

/// Deployment phase of a three-action mix: one draw per input split as
/// `[0, w_defect)` defect, `[w_defect, w_defect + w_pretend)` pretend,
/// otherwise comply. Skips the draw only when an action has weight 1.
fn mix_deploy_counts(rng: &mut SplitMix64, n: u64, w_defect: f64, w_pretend: f64) -> (u64, u64) {
    if w_defect >= 1.0 {
        return (n, 0);
    }
    if w_pretend >= 1.0 {
        return (0, n);
    }
    if w_defect + w_pretend <= 0.0 {
        return (0, 0);
    }
    let mut defections = 0;
    let mut pretends = 0;
    let pretend_edge = w_defect + w_pretend;
    for _ in 0..n {
        let u = rng.next_f64();
        if u < w_defect {
            defections += 1;
        } else if u < pretend_edge {
            pretends += 1;
        }
    }
    (defections, pretends)
}

fn run_episode(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
    rng: &mut SplitMix64,
) -> EpisodeOutcome {
    let misaligned = rng.bernoulli(scenario.prior_misaligned);

    if !misaligned {
        let err = scenario.aligned_error_rate;
        let caught = phase_caught(rng, scenario.n_test, err);
        if caught {
            return EpisodeOutcome {
                misaligned: false,
                caught_in_test: true,
                deployed: false,
                deploy_defections: 0,
                deploy_pretends: 0,
                realized_utility: 0.0,
            };
        }
        let deploy_defections = phase_defections(rng, scenario.n_deploy, err);
        return EpisodeOutcome {
            misaligned: false,
            caught_in_test: false,
            deployed: true,
            deploy_defections,
            deploy_pretends: 0,
            realized_utility: 0.0,
        };
    }

    let (caught, deploy_defections, deploy_pretends) = match *strategy {
        StrategyProfile::UniformDefect { p_defect } => {
            let caught = phase_caught(rng, scenario.n_test, p_defect);
            if caught {
                (true, 0, 0)
            } else {
                (false, phase_defections(rng, scenario.n_deploy, p_defect), 0)
            }
        }
        StrategyProfile::PerfectSa {
            p_defect_test,
            p_defect_deploy,
        } => {
            let caught = phase_caught(rng, scenario.n_test, p_defect_test);
            if caught {
                (true, 0, 0)
            } else {
                (
                    false,
                    phase_defections(rng, scenario.n_deploy, p_defect_deploy),
                    0,
                )
            }
        }
        StrategyProfile::SignalConditioned {
            pi_none,
            pi_testflag,
            pi_deployflag,
        } => {
            let caught = signal_test_caught(rng, scenario, pi_none, pi_testflag);
            if caught {
                (true, 0, 0)
            } else {
                (
                    false,
                    signal_deploy_defections(rng, scenario, pi_none, pi_deployflag),
                    0,
                )
            }
        }
        StrategyProfile::ThreeActionMix {
            w_pretend,
            w_defect,
            ..
        } => {
            let caught = mix_test_caught(rng, scenario.n_test, w_defect);
            if caught {
                (true, 0, 0)
            } else {
                let (d, p) = mix_deploy_counts(rng, scenario.n_deploy, w_defect, w_pretend);
                (false, d, p)
            }
        }
    };

    if caught {
        // Non-deployment pays u_not_deployed, which validation fixes at 0.
        return EpisodeOutcome {
            misaligned: true,
            caught_in_test: true,
            deployed: false,
            deploy_defections: 0,
            deploy_pretends: 0,
            realized_utility: 0.0,
        };
    }

    let complies = scenario.n_deploy - deploy_defections - deploy_pretends;
    let u_pretend = scenario.payoffs.u_pretend.unwrap_or(0.0);
    let realized_utility = deploy_defections as f64 * scenario.payoffs.u_defect
        + deploy_pretends as f64 * u_pretend
        + complies as f64 * scenario.payoffs.u_comply;

    EpisodeOutcome {
        misaligned: true,
        caught_in_test: false,
        deployed: true,
        deploy_defections,
        deploy_pretends,
        realized_utility,
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Exact integer outcome moments; addition is associative and lossless, so
/// any reduction order yields identical totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    episodes: u64,
    misaligned: u64,
    caught: u64,
    caught_misaligned: u64,
    deployed: u64,
    deployed_misaligned: u64,
    /// Deployment defections over all episodes (aligned mistakes included).
    defections_all: u64,
    defections_all_sq: u128,
    /// Moments over misaligned-and-deployed episodes.
    mis_defections: u64,
    mis_defections_sq: u128,
    mis_pretends: u64,
    mis_pretends_sq: u128,
    mis_def_pretend_cross: u128,
}

impl Tally {
    fn observe(&mut self, o: &EpisodeOutcome) {
        self.episodes += 1;
        self.misaligned += o.misaligned as u64;
        self.caught += o.caught_in_test as u64;
        self.caught_misaligned += (o.caught_in_test && o.misaligned) as u64;
        self.deployed += o.deployed as u64;
        self.defections_all += o.deploy_defections;
        self.defections_all_sq += (o.deploy_defections as u128) * (o.deploy_defections as u128);
        if o.misaligned && o.deployed {
            self.deployed_misaligned += 1;
            self.mis_defections += o.deploy_defections;
            self.mis_defections_sq += (o.deploy_defections as u128) * (o.deploy_defections as u128);
            self.mis_pretends += o.deploy_pretends;
            self.mis_pretends_sq += (o.deploy_pretends as u128) * (o.deploy_pretends as u128);
            self.mis_def_pretend_cross +=
                (o.deploy_defections as u128) * (o.deploy_pretends as u128);
        }
    }

    fn merge(self, other: Tally) -> Tally {
        Tally {
            episodes: self.episodes + other.episodes,
            misaligned: self.misaligned + other.misaligned,
            caught: self.caught + other.caught,
            caught_misaligned: self.caught_misaligned + other.caught_misaligned,
            deployed: self.deployed + other.deployed,
            deployed_misaligned: self.deployed_misaligned + other.deployed_misaligned,
            defections_all: self.defections_all + other.defections_all,
            defections_all_sq: self.defections_all_sq + other.defections_all_sq,
            mis_defections: self.mis_defections + other.mis_defections,
            mis_defections_sq: self.mis_defections_sq + other.mis_defections_sq,
            mis_pretends: self.mis_pretends + other.mis_pretends,
            mis_pretends_sq: self.mis_pretends_sq + other.mis_pretends_sq,
            mis_def_pretend_cross: self.mis_def_pretend_cross + other.mis_def_pretend_cross,
        }
    }
}

/// Sums of the misaligned utility statistic `x_i` and its square,
/// reconstructed exactly from the integer action-count moments: per
/// deployed misaligned episode, `x = d*u_defect + p*u_pretend + c*u_comply`
/// with `c = n_deploy - d - p`.
fn utility_sums(t: &Tally, scenario: &ScenarioSpec) -> (f64, f64) {
    let ud = scenario.payoffs.u_defect;
    let up = scenario.payoffs.u_pretend.unwrap_or(0.0);
    let uc = scenario.payoffs.u_comply;
    let k = scenario.n_deploy as u128;
    let m = t.deployed_misaligned as u128;

    let sd = t.mis_defections as u128;
    let sp = t.mis_pretends as u128;
    let sd2 = t.mis_defections_sq;
    let sp2 = t.mis_pretends_sq;
    let sdp = t.mis_def_pretend_cross;
    // Comply-count moments follow from c = k - d - p.
    let sc = m * k - sd - sp;
    let sc2 = m * k * k + sd2 + sp2 + 2 * sdp - 2 * k * (sd + sp);
    let sdc = k * sd - sd2 - sdp;
    let spc = k * sp - sp2 - sdp;

    let sum = ud * sd as f64 + up * sp as f64 + uc * sc as f64;
    let sum_sq = ud * ud * sd2 as f64
        + up * up * sp2 as f64
        + uc * uc * sc2 as f64
        + 2.0 * ud * up * sdp as f64
        + 2.0 * ud * uc * sdc as f64
        + 2.0 * up * uc * spc as f64;
    (sum, sum_sq)
}

/// Mean over all episodes: sample standard deviation / sqrt(n).
fn mean_estimate(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Delta-method ratio estimate `R = sum(x)/sum(y)` over `n` episodes.
fn ratio_estimate(
    sum_x: f64,
    sum_xx: f64,
    sum_y: f64,
    sum_yy: f64,
    sum_xy: f64,
    n: u64,
) -> (f64, f64) {
    let value = sum_x / sum_y;
    let nf = n as f64;
    if n < 2 || sum_y <= 0.0 {
        return (value, f64::NAN);
    }
    let mean_x = sum_x / nf;
    let mean_y = sum_y / nf;
    let s_xx = (sum_xx - nf * mean_x * mean_x) / (nf - 1.0);
    let s_yy = (sum_yy - nf * mean_y * mean_y) / (nf - 1.0);
    let s_xy = (sum_xy - nf * mean_x * mean_y) / (nf - 1.0);
    let var = ((s_xx - 2.0 * value * s_xy + value * value * s_yy) / nf).max(0.0);
    (value, var.sqrt() / mean_y)
}

fn estimates_from_tally(t: &Tally, scenario: &ScenarioSpec, seed: u64) -> Vec<SimulationEstimate> {
    let n = t.episodes;
    let make = |metric, (value, std_error): (f64, f64), support: u64| SimulationEstimate {
        metric,
        value,
        std_error,
        n_episodes: n,
        seed,
        low_confidence: support < MIN_CONDITIONAL_SUPPORT,
    };

    let detection = ratio_estimate(
        t.caught_misaligned as f64,
        t.caught_misaligned as f64,
        t.misaligned as f64,
        t.misaligned as f64,
        t.caught_misaligned as f64,
        n,
    );
    let deployment = mean_estimate(t.deployed as f64, t.deployed as f64, n);
    let defections_uncond = mean_estimate(t.defections_all as f64, t.defections_all_sq as f64, n);
    let defections_deployed = ratio_estimate(
        t.mis_defections as f64,
        t.mis_defections_sq as f64,
        t.deployed_misaligned as f64,
        t.deployed_misaligned as f64,
        t.mis_defections as f64,
        n,
    );
    let (u_sum, u_sum_sq) = utility_sums(t, scenario);
    let utility = ratio_estimate(
        u_sum,
        u_sum_sq,
        t.misaligned as f64,
        t.misaligned as f64,
        u_sum,
        n,
    );
    let posterior = ratio_estimate(
        t.deployed_misaligned as f64,
        t.deployed_misaligned as f64,
        t.deployed as f64,
        t.deployed as f64,
        t.deployed_misaligned as f64,
        n,
    );

    vec![
        make(MetricKind::DetectionRate, detection, t.misaligned),
        make(MetricKind::DeploymentRate, deployment, n),
        make(
            MetricKind::MeanDefectionsUnconditional,
            defections_uncond,
            n,
        ),
        make(
            MetricKind::MeanDefectionsGivenDeployed,
            defections_deployed,
            t.deployed_misaligned,
        ),
        make(MetricKind::MeanUtility, utility, t.misaligned),
        make(
            MetricKind::PosteriorMisalignedGivenPass,
            posterior,
            t.deployed,
        ),
    ]
}

// ---------------------------------------------------------------------------
// Metric estimation
// ---------------------------------------------------------------------------

/// Episodes per work unit handed to the thread pool.
const EPISODE_CHUNK: u64 = 4096;

fn tally_range(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Tally {
    let mut tally = Tally::default();
    for index in range {
        let mut rng = SplitMix64::from_seed_and_index(seed, index);
        let outcome = run_episode(scenario, strategy, &mut rng);
        debug_assert!(outcome.deployed != outcome.caught_in_test);
        tally.observe(&outcome);
    }
    tally
}

fn chunk_ranges(n_episodes: u64) -> impl Iterator<Item = std::ops::Range<u64>> {
    let chunks = n_episodes.div_ceil(EPISODE_CHUNK);
    (0..chunks).map(move |c| {
        let start = c * EPISODE_CHUNK;
        start..(start + EPISODE_CHUNK).min(n_episodes)
    })
}

/// Runs `n_episodes` independent episodes from the seeded stream and
/// returns all six metrics, in [`MetricKind::ALL`] order. Identical inputs
/// and seed give identical estimates regardless of thread count.
pub fn estimate_metrics(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
    n_episodes: u64,
    seed: u64,
) -> Result<Vec<SimulationEstimate>, SimulateError> {
    check_compatible(scenario, strategy)?;
    if n_episodes == 0 {
        return Err(SimulateError::ZeroEpisodes);
    }
    #[cfg(feature = "parallel")]
    let tally = chunk_ranges(n_episodes)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|range| tally_range(scenario, strategy, seed, range))
        .reduce(Tally::default, Tally::merge);
    #[cfg(not(feature = "parallel"))]
    let tally = chunk_ranges(n_episodes)
        .map(|range| tally_range(scenario, strategy, seed, range))
        .fold(Tally::default(), Tally::merge);
    Ok(estimates_from_tally(&tally, scenario, seed))
}

/// Single-threaded reference path of [`estimate_metrics`]; results are
/// bit-identical to the parallel path.
pub fn estimate_metrics_sequential(
    scenario: &ScenarioSpec,
    strategy: &StrategyProfile,
    n_episodes: u64,
    seed: u64,
) -> Result<Vec<SimulationEstimate>, SimulateError> {
    check_compatible(scenario, strategy)?;
    if n_episodes == 0 {
        return Err(SimulateError::ZeroEpisodes);
    }
    let tally = chunk_ranges(n_episodes)
        .map(|range| tally_range(scenario, strategy, seed, range))
        .fold(Tally::default(), Tally::merge);
    Ok(estimates_from_tally(&tally, scenario, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::coding_assistant_preset;

    fn rng_for(seed: u64, index: u64) -> SplitMix64 {
        SplitMix64::from_seed_and_index(seed, index)
    }

    fn misaligned_episode(
        scenario: &ScenarioSpec,
        strategy: &StrategyProfile,
        seed_hint: u64,
    ) -> EpisodeOutcome {
        // Walk indices until nature draws a misaligned episode.
        for index in 0.. {
            let mut rng = rng_for(seed_hint, index);
            let o = simulate_episode(scenario, strategy, &mut rng).unwrap();
            if o.misaligned {
                return o;
            }
        }
        unreachable!()
    }

    #[test]
    fn never_defecting_always_deploys() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.0 };
        for index in 0..50 {
            let mut rng = rng_for(1, index);
            let o = simulate_episode(&s, &strategy, &mut rng).unwrap();
            assert!(!o.caught_in_test);
            assert!(o.deployed);
            assert_eq!(o.deploy_defections, 0);
        }
    }

    #[test]
    fn always_defecting_is_always_caught() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect { p_defect: 1.0 };
        let o = misaligned_episode(&s, &strategy, 2);
        assert!(o.caught_in_test);
        assert!(!o.deployed);
        assert_eq!(o.deploy_defections, 0);
        assert_eq!(o.realized_utility, 0.0);
    }

    #[test]
    fn perfect_sa_defects_everywhere_in_deployment() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::PerfectSa {
            p_defect_test: 0.0,
            p_defect_deploy: 1.0,
        };
        let o = misaligned_episode(&s, &strategy, 3);
        assert!(o.deployed);
        assert_eq!(o.deploy_defections, 10_000);
        assert_eq!(o.realized_utility, 10_000.0);
    }

    #[test]
    fn episode_counts_within_bounds() {
        let mut s = coding_assistant_preset();
        s.n_test = 5;
        s.n_deploy = 20;
        s.payoffs.u_pretend = Some(0.5);
        let strategy = StrategyProfile::ThreeActionMix {
            w_comply: 0.3,
            w_pretend: 0.4,
            w_defect: 0.3,
        };
        for index in 0..200 {
            let mut rng = rng_for(7, index);
            let o = simulate_episode(&s, &strategy, &mut rng).unwrap();
            assert!(o.deploy_defections + o.deploy_pretends <= s.n_deploy);
            assert!(o.deployed != o.caught_in_test);
            if !o.deployed {
                assert_eq!(o.deploy_defections + o.deploy_pretends, 0);
            }
        }
    }

    #[test]
    fn mix_without_pretend_payoff_is_incompatible() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::ThreeActionMix {
            w_comply: 0.0,
            w_pretend: 0.5,
            w_defect: 0.5,
        };
        let mut rng = rng_for(0, 0);
        assert!(matches!(
            simulate_episode(&s, &strategy, &mut rng),
            Err(SimulateError::IncompatibleStrategy { .. })
        ));
    }

    #[test]
    fn invalid_strategy_rejected() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect { p_defect: 1.5 };
        let mut rng = rng_for(0, 0);
        assert!(simulate_episode(&s, &strategy, &mut rng).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect {
            p_defect: 1.0 / 1001.0,
        };
        let a = estimate_metrics(&s, &strategy, 2_000, 42).unwrap();
        let b = estimate_metrics(&s, &strategy, 2_000, 42).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential_bitwise() {
        let mut s = coding_assistant_preset();
        s.n_test = 50;
        s.n_deploy = 200;
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.01 };
        let par = estimate_metrics(&s, &strategy, 30_000, 9).unwrap();
        let seq = estimate_metrics_sequential(&s, &strategy, 30_000, 9).unwrap();
        for (x, y) in par.iter().zip(&seq) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        }
    }

    #[test]
    fn zero_defection_detection_rate_is_exactly_zero() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.0 };
        let est = estimate_metrics(&s, &strategy, 10_000, 5).unwrap();
        assert_eq!(est[0].metric, MetricKind::DetectionRate);
        assert_eq!(est[0].value, 0.0);
        assert_eq!(est[0].std_error, 0.0);
    }

    #[test]
    fn conservation_deployment_plus_catch_is_one() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect {
            p_defect: 1.0 / 1001.0,
        };
        let n = 20_000u64;
        let mut caught = 0u64;
        let mut deployed = 0u64;
        for index in 0..n {
            let mut rng = rng_for(11, index);
            let o = simulate_episode(&s, &strategy, &mut rng).unwrap();
            caught += o.caught_in_test as u64;
            deployed += o.deployed as u64;
        }
        assert_eq!(caught + deployed, n);
        let est = estimate_metrics(&s, &strategy, n, 11).unwrap();
        let deployment_rate = est[1].value;
        assert_eq!(deployment_rate, deployed as f64 / n as f64);
    }

    #[test]
    fn low_confidence_flag_on_thin_support() {
        let mut s = coding_assistant_preset();
        s.prior_misaligned = 0.0; // no misaligned episodes at all
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.5 };
        let est = estimate_metrics(&s, &strategy, 100, 1).unwrap();
        let detection = &est[0];
        assert!(detection.low_confidence);
        assert!(detection.value.is_nan());
    }

    #[test]
    fn zero_episodes_rejected() {
        let s = coding_assistant_preset();
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.5 };
        assert!(matches!(
            estimate_metrics(&s, &strategy, 0, 1),
            Err(SimulateError::ZeroEpisodes)
        ));
    }

    #[test]
    fn aligned_error_rate_produces_aligned_defections() {
        let mut s = coding_assistant_preset();
        s.n_test = 2;
        s.n_deploy = 50;
        s.prior_misaligned = 0.0;
        s.aligned_error_rate = 0.3;
        let strategy = StrategyProfile::UniformDefect { p_defect: 0.0 };
        let mut total = 0u64;
        for index in 0..500 {
            let mut rng = rng_for(3, index);
            let o = simulate_episode(&s, &strategy, &mut rng).unwrap();
            assert!(!o.misaligned);
            assert_eq!(o.realized_utility, 0.0);
            total += o.deploy_defections;
        }
        assert!(total > 0);
    }

    #[test]
    fn utility_moments_match_direct_summation() {
        // The exact-integer reconstruction must agree with naively summing
        // per-episode utilities.
        let mut s = coding_assistant_preset();
        s.n_test = 5;
        s.n_deploy = 30;
        s.payoffs.u_pretend = Some(0.25);
        let strategy = StrategyProfile::ThreeActionMix {
            w_comply: 0.2,
            w_pretend: 0.5,
            w_defect: 0.3,
        };
        let n = 5_000u64;
        let seed = 17;

        let mut sum = 0.0;
        let mut count_mis = 0u64;
        for index in 0..n {
            let mut rng = rng_for(seed, index);
            let o = simulate_episode(&s, &strategy, &mut rng).unwrap();
            sum += o.realized_utility;
            count_mis += o.misaligned as u64;
        }
        let est = estimate_metrics(&s, &strategy, n, seed).unwrap();
        let mean_utility = est[4].value;
        let direct = sum / count_mis as f64;
        assert!(
            (mean_utility - direct).abs() <= 1e-9 * direct.abs().max(1.0),
            "moments {mean_utility} vs direct {direct}"
        );
    }
}
