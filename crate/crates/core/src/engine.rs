//! The adaptive large neighborhood search driver: segmented roulette-wheel
//! operator selection, simulated-annealing acceptance and score/weight
//! bookkeeping.
//!
//! Each of the `phi1` segments runs `phi2` iterations. An iteration draws a
//! shaking and a local search operator by roulette wheel, shakes the working
//! solution, drives the local search to its fixed point, then classifies the
//! outcome: new best, improvement over the current solution, accepted-worse
//! under the Metropolis rule `exp(-(cost_new - cost_cur)/theta)`, or
//! rejected (in which case the working solution resets to the incumbent).
//! The temperature cools geometrically while above its floor. At segment
//! ends, operator weights blend toward observed score rates:
//! `w <- (1 - eta) * w + eta * pi / gamma`, untouched where `gamma = 0`.

use crate::construct::{initialize, ConstructError};
use crate::forest::{check_feasible, Forest};
use crate::instance::Instance;
use crate::neighborhoods::LocalSearch;
use crate::shaking::Shaking;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::time::{Duration, Instant};
use thiserror::Error;

/// All tunable constants of the search.
#[derive(Clone, Debug, PartialEq)]
pub struct AlnsParams {
    /// Initial temperature.
    pub theta0: f64,
    /// Temperature floor; no cooling (or worse-acceptance) below it.
    pub epsilon: f64,
    /// Geometric cooling rate, in (0, 1).
    pub lambda: f64,
    /// Reaction factor blending old weights with observed score rates.
    pub eta: f64,
    /// Score reward for a new best solution.
    pub zeta1: f64,
    /// Score reward for improving the current solution.
    pub zeta2: f64,
    /// Score reward for an accepted non-improving solution.
    pub zeta3: f64,
    /// Number of segments.
    pub phi1: usize,
    /// Iterations per segment.
    pub phi2: usize,
    /// Distance cutoff for the far-pair shaking; `None` selects the 75th
    /// percentile of pairwise demand costs per instance.
    pub far_threshold: Option<f64>,
    /// Independent restarts merged by best cost.
    pub restarts: usize,
}

impl Default for AlnsParams {
    fn default() -> Self {
        Self {
            theta0: 100.0,
            epsilon: 0.01,
            lambda: 0.99,
            eta: 0.1,
            zeta1: 10.0,
            zeta2: 5.0,
            zeta3: 2.0,
            phi1: 5,
            phi2: 10,
            far_threshold: None,
            restarts: 5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("cooling rate must satisfy 0 < lambda < 1, got {0}")]
    Lambda(f64),
    #[error("reaction factor must satisfy 0 <= eta <= 1, got {0}")]
    Eta(f64),
    #[error("temperatures must satisfy 0 <= epsilon < theta0, got theta0 = {theta0}, epsilon = {epsilon}")]
    Temperatures { theta0: f64, epsilon: f64 },
    #[error("score rewards must be nonnegative")]
    Zeta,
    #[error("phi1, phi2 and restarts must be at least 1")]
    Counts,
}

impl AlnsParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(ParamError::Lambda(self.lambda));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(ParamError::Eta(self.eta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < self.theta0) {
            return Err(ParamError::Temperatures {
                theta0: self.theta0,
                epsilon: self.epsilon,
            });
        }
        if self.zeta1 < 0.0 || self.zeta2 < 0.0 || self.zeta3 < 0.0 {
            return Err(ParamError::Zeta);
        }
        if self.phi1 == 0 || self.phi2 == 0 || self.restarts == 0 {
            return Err(ParamError::Counts);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
}

/// How one iteration's solution fared against the incumbents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    NewBest,
    ImprovedCurrent,
    AcceptedWorse,
    Rejected,
}

/// Per-operator weights, scores and usage counts for one operator class.
#[derive(Clone, Debug)]
pub struct BankSlice {
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub counts: Vec<u64>,
}

impl BankSlice {
    fn new(len: usize) -> Self {
        Self {
            weights: vec![1.0; len],
            scores: vec![0.0; len],
            counts: vec![0; len],
        }
    }

    fn reset_segment(&mut self) {
        self.scores.iter_mut().for_each(|s| *s = 0.0);
        self.counts.iter_mut().for_each(|c| *c = 0);
    }
}

/// Weights, scores and counts for both operator classes.
#[derive(Clone, Debug)]
pub struct OperatorBank {
    pub local_search: BankSlice,
    pub shaking: BankSlice,
}

impl OperatorBank {
    pub fn new() -> Self {
        Self {
            local_search: BankSlice::new(LocalSearch::ALL.len()),
            shaking: BankSlice::new(Shaking::ALL.len()),
        }
    }

    /// Zeroes scores and counts at the start of a segment.
    pub fn reset_segment(&mut self) {
        self.local_search.reset_segment();
        self.shaking.reset_segment();
    }
}

impl Default for OperatorBank {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("cannot select from an empty operator bank")]
pub struct EmptyBank;

/// Roulette-wheel selection: index `i` with probability `w_i / sum(w)`.
pub fn select_operator<R: Rng>(weights: &[f64], rng: &mut R) -> Result<usize, EmptyBank> {
    if weights.is_empty() {
        return Err(EmptyBank);
    }
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return Ok(i);
        }
        draw -= w;
    }
    Ok(weights.len() - 1)
}

/// Credits the chosen operator pair for the iteration's outcome and counts
/// the usage. Rewards: `zeta1` for a new best, `zeta2` for improving the
/// current solution, `zeta3` for an accepted worse solution, nothing for a
/// rejection.
pub fn update_scores(
    bank: &mut OperatorBank,
    ls: usize,
    sh: usize,
    outcome: Outcome,
    params: &AlnsParams,
) {
    let reward = match outcome {
        Outcome::NewBest => params.zeta1,
        Outcome::ImprovedCurrent => params.zeta2,
        Outcome::AcceptedWorse => params.zeta3,
        Outcome::Rejected => 0.0,
    };
    bank.local_search.scores[ls] += reward;
    bank.shaking.scores[sh] += reward;
    bank.local_search.counts[ls] += 1;
    bank.shaking.counts[sh] += 1;
}

/// Segment-end weight update: `w <- (1 - eta) w + eta * pi / gamma` for used
/// operators, unchanged where `gamma = 0`; scores and counts then reset.
pub fn update_weights(bank: &mut OperatorBank, params: &AlnsParams) {
    for slice in [&mut bank.local_search, &mut bank.shaking] {
        for k in 0..slice.weights.len() {
            if slice.counts[k] > 0 {
                slice.weights[k] = (1.0 - params.eta) * slice.weights[k]
                    + params.eta * slice.scores[k] / slice.counts[k] as f64;
            }
        }
    }
    bank.reset_segment();
}

/// Metropolis acceptance: improving solutions always pass; worse ones pass
/// with probability `exp(-(temp_cost - current_cost) / theta)`.
pub fn sa_accept<R: Rng>(temp_cost: f64, current_cost: f64, theta: f64, rng: &mut R) -> bool {
    debug_assert!(theta > 0.0);
    if temp_cost < current_cost {
        return true;
    }
    let delta = temp_cost - current_cost;
    rng.random::<f64>() < (-delta / theta).exp()
}

/// Statistics of a single run.
#[derive(Clone, Debug)]
pub struct RunStats {
    pub seed: u64,
    pub initial_cost: f64,
    pub best_cost: f64,
    pub iterations: usize,
    /// Incumbent cost after each iteration; non-increasing.
    pub best_trace: Vec<f64>,
    pub ls_usage: Vec<u64>,
    pub sh_usage: Vec<u64>,
    pub ls_weights: Vec<f64>,
    pub sh_weights: Vec<f64>,
    pub new_best: u64,
    pub improved_current: u64,
    pub accepted_worse: u64,
    pub rejected: u64,
    pub final_theta: f64,
    pub wall_time: Duration,
}

/// Result of a multi-restart solve.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub best: Forest,
    pub best_cost: f64,
    /// Index of the restart that produced the best forest (lowest index on ties).
    pub best_restart: usize,
    pub runs: Vec<RunStats>,
    pub wall_time: Duration,
}

/// 75th percentile (nearest-rank) of pairwise demand costs; infinite when
/// there are fewer than two demands, which disables far-pair shaking.
pub fn default_far_threshold(inst: &Instance) -> f64 {
    let demands: Vec<usize> = inst.demands().collect();
    let mut costs = Vec::new();
    for (ai, &a) in demands.iter().enumerate() {
        for &b in &demands[ai + 1..] {
            costs.push(inst.cost(a, b));
        }
    }
    if costs.is_empty() {
        return f64::INFINITY;
    }
    costs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let rank = ((costs.len() as f64) * 0.75).ceil() as usize;
    costs[rank.saturating_sub(1)]
}

/// One full search: construct, then `phi1 x phi2` adaptive iterations.
pub fn run(inst: &Instance, params: &AlnsParams, seed: u64) -> Result<(Forest, RunStats), EngineError> {
    params.validate()?;
    let started = Instant::now();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let far_threshold = params
        .far_threshold
        .unwrap_or_else(|| default_far_threshold(inst));

    let mut temp = initialize(inst, &mut rng)?;
    let mut current = temp.clone();
    let mut best = temp.clone();
    let initial_cost = best.cost();

    let mut bank = OperatorBank::new();
    let mut theta = params.theta0;
    let mut stats = RunStats {
        seed,
        initial_cost,
        best_cost: initial_cost,
        iterations: 0,
        best_trace: Vec::with_capacity(params.phi1 * params.phi2),
        ls_usage: vec![0; LocalSearch::ALL.len()],
        sh_usage: vec![0; Shaking::ALL.len()],
        ls_weights: Vec::new(),
        sh_weights: Vec::new(),
        new_best: 0,
        improved_current: 0,
        accepted_worse: 0,
        rejected: 0,
        final_theta: theta,
        wall_time: Duration::ZERO,
    };

    for _segment in 0..params.phi1 {
        bank.reset_segment();
        for _iter in 0..params.phi2 {
            let ls_idx = select_operator(&bank.local_search.weights, &mut rng).expect("bank");
            let sh_idx = select_operator(&bank.shaking.weights, &mut rng).expect("bank");
            stats.ls_usage[ls_idx] += 1;
            stats.sh_usage[sh_idx] += 1;

            Shaking::ALL[sh_idx].apply(&mut temp, inst, far_threshold, &mut rng);
            while LocalSearch::ALL[ls_idx].apply(&mut temp, inst, &mut rng) {}

            let outcome = if temp.cost() < best.cost() {
                best = temp.clone();
                current = temp.clone();
                stats.new_best += 1;
                Outcome::NewBest
            } else if temp.cost() < current.cost() {
                current = temp.clone();
                stats.improved_current += 1;
                Outcome::ImprovedCurrent
            } else if theta > params.epsilon {
                let accepted = sa_accept(temp.cost(), current.cost(), theta, &mut rng);
                theta *= params.lambda;
                if accepted {
                    current = temp.clone();
                    stats.accepted_worse += 1;
                    Outcome::AcceptedWorse
                } else {
                    temp = best.clone();
                    stats.rejected += 1;
                    Outcome::Rejected
                }
            } else {
                temp = best.clone();
                stats.rejected += 1;
                Outcome::Rejected
            };
            update_scores(&mut bank, ls_idx, sh_idx, outcome, params);
            stats.iterations += 1;
            stats.best_trace.push(best.cost());
        }
        update_weights(&mut bank, params);
    }

    debug_assert!(check_feasible(&best, inst).is_feasible());
    stats.best_cost = best.cost();
    stats.ls_weights = bank.local_search.weights.clone();
    stats.sh_weights = bank.shaking.weights.clone();
    stats.final_theta = theta;
    stats.wall_time = started.elapsed();
    Ok((best, stats))
}

/// Runs `params.restarts` independent searches (in parallel, with rng
/// streams derived from the master seed) and keeps the cheapest result,
/// breaking ties toward the lowest restart index.
pub fn solve(inst: &Instance, params: &AlnsParams, master_seed: u64) -> Result<SolveOutcome, EngineError> {
    params.validate()?;
    let started = Instant::now();
    let mut seeder = Xoshiro256StarStar::seed_from_u64(master_seed);
    let seeds: Vec<u64> = (0..params.restarts).map(|_| seeder.random()).collect();
    let results: Vec<Result<(Forest, RunStats), EngineError>> = seeds
        .into_par_iter()
        .map(|seed| run(inst, params, seed))
        .collect();

    let mut runs = Vec::with_capacity(results.len());
    let mut best: Option<(Forest, f64, usize)> = None;
    for (idx, result) in results.into_iter().enumerate() {
        let (forest, stats) = result?;
        if best.as_ref().is_none_or(|&(_, c, _)| stats.best_cost < c) {
            best = Some((forest, stats.best_cost, idx));
        }
        runs.push(stats);
    }
    let (best, best_cost, best_restart) = best.expect("restarts >= 1");
    Ok(SolveOutcome {
        best,
        best_cost,
        best_restart,
        runs,
        wall_time: started.elapsed(),
    })
}

/// Structured text report: headline result, per-restart table, operator
/// usage of the best run, and its incumbent cost trace.
pub fn render_report(outcome: &SolveOutcome, label: &str) -> String {
    let mut out = String::new();
    writeln!(out, "solve report: {label}").unwrap();
    writeln!(out, "best_cost: {:.6}", outcome.best_cost).unwrap();
    writeln!(out, "best_restart: {}", outcome.best_restart).unwrap();
    writeln!(out, "restarts: {}", outcome.runs.len()).unwrap();
    writeln!(out, "wall_time_ms: {}", outcome.wall_time.as_millis()).unwrap();
    writeln!(out).unwrap();
    writeln!(out, "[restarts]").unwrap();
    writeln!(out, "restart seed initial best iterations time_ms").unwrap();
    for (idx, run) in outcome.runs.iter().enumerate() {
        writeln!(
            out,
            "{idx} {} {:.6} {:.6} {} {}",
            run.seed,
            run.initial_cost,
            run.best_cost,
            run.iterations,
            run.wall_time.as_millis()
        )
        .unwrap();
    }
    let best_run = &outcome.runs[outcome.best_restart];
    writeln!(out).unwrap();
    writeln!(out, "[operators]").unwrap();
    writeln!(out, "operator uses weight").unwrap();
    for (k, op) in LocalSearch::ALL.iter().enumerate() {
        writeln!(
            out,
            "{} {} {:.4}",
            op.name(),
            best_run.ls_usage[k],
            best_run.ls_weights[k]
        )
        .unwrap();
    }
    for (k, op) in Shaking::ALL.iter().enumerate() {
        writeln!(
            out,
            "{} {} {:.4}",
            op.name(),
            best_run.sh_usage[k],
            best_run.sh_weights[k]
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(out, "[outcomes]").unwrap();
    writeln!(
        out,
        "new_best {} improved_current {} accepted_worse {} rejected {}",
        best_run.new_best, best_run.improved_current, best_run.accepted_worse, best_run.rejected
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "[trace]").unwrap();
    writeln!(out, "iteration best_cost").unwrap();
    for (i, c) in best_run.best_trace.iter().enumerate() {
        writeln!(out, "{} {:.6}", i + 1, c).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, ConstraintSpec, Family, GenSpec};
    use approx::assert_relative_eq;

    fn rng(seed: u64) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(seed)
    }

    fn small_instance(seed: u64) -> Instance {
        generate(&GenSpec {
            family: Family::Euclidean,
            n: 12,
            m: 2,
            constraint: ConstraintSpec::Reliability { alpha: 0.9 },
            seed,
        })
        .unwrap()
    }

    #[test]
    fn roulette_uniform_when_weights_equal() {
        // Chi-squared over 1e5 draws, 4 categories; critical value for
        // df = 3 at p = 0.01 is 11.345.
        let weights = [1.0; 4];
        let mut counts = [0u64; 4];
        let mut r = rng(11);
        let draws = 100_000;
        for _ in 0..draws {
            counts[select_operator(&weights, &mut r).unwrap()] += 1;
        }
        let expected = draws as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 11.345, "chi-squared too large: {chi2}");
    }

    #[test]
    fn roulette_three_to_one_frequency() {
        let weights = [3.0, 1.0];
        let mut first = 0u64;
        let mut r = rng(12);
        let draws = 100_000;
        for _ in 0..draws {
            if select_operator(&weights, &mut r).unwrap() == 0 {
                first += 1;
            }
        }
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.75).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn roulette_single_operator_always_selected() {
        let mut r = rng(13);
        for _ in 0..100 {
            assert_eq!(select_operator(&[2.5], &mut r).unwrap(), 0);
        }
        assert_eq!(select_operator(&[], &mut r), Err(EmptyBank));
    }

    #[test]
    fn score_updates_follow_the_reward_table() {
        let params = AlnsParams::default();
        let mut bank = OperatorBank::new();
        update_scores(&mut bank, 0, 1, Outcome::NewBest, &params);
        assert_eq!(bank.local_search.scores[0], params.zeta1);
        assert_eq!(bank.shaking.scores[1], params.zeta1);
        update_scores(&mut bank, 0, 1, Outcome::Rejected, &params);
        assert_eq!(bank.local_search.scores[0], params.zeta1);
        assert_eq!(bank.local_search.counts[0], 2);
        update_scores(&mut bank, 2, 3, Outcome::ImprovedCurrent, &params);
        update_scores(&mut bank, 2, 3, Outcome::ImprovedCurrent, &params);
        assert_eq!(bank.local_search.scores[2], 2.0 * params.zeta2);
        assert_eq!(bank.shaking.scores[3], 2.0 * params.zeta2);
    }

    #[test]
    fn weight_update_blends_score_rate() {
        let params = AlnsParams {
            eta: 0.1,
            ..AlnsParams::default()
        };
        let mut bank = OperatorBank::new();
        // Unused operator: weight unchanged.
        bank.local_search.scores[0] = 42.0;
        bank.local_search.counts[0] = 0;
        // Used operator: w = 1, pi = 6, gamma = 2 -> 0.9 * 1 + 0.1 * 3 = 1.2.
        bank.local_search.scores[1] = 6.0;
        bank.local_search.counts[1] = 2;
        update_weights(&mut bank, &params);
        assert_eq!(bank.local_search.weights[0], 1.0);
        assert_relative_eq!(bank.local_search.weights[1], 1.2, epsilon = 1e-12);
        // Scores and counts reset for the next segment.
        assert_eq!(bank.local_search.scores[1], 0.0);
        assert_eq!(bank.local_search.counts[1], 0);
    }

    #[test]
    fn zero_eta_freezes_weights() {
        let params = AlnsParams {
            eta: 0.0,
            ..AlnsParams::default()
        };
        let mut bank = OperatorBank::new();
        bank.shaking.scores[2] = 100.0;
        bank.shaking.counts[2] = 4;
        update_weights(&mut bank, &params);
        assert_eq!(bank.shaking.weights[2], 1.0);
    }

    #[test]
    fn sa_accepts_equal_cost_with_probability_one() {
        let mut r = rng(14);
        for _ in 0..1000 {
            assert!(sa_accept(10.0, 10.0, 5.0, &mut r));
        }
    }

    #[test]
    fn sa_delta_equals_theta_accepts_at_inverse_e() {
        let mut r = rng(15);
        let draws = 100_000;
        let mut accepted = 0u64;
        for _ in 0..draws {
            if sa_accept(11.0, 10.0, 1.0, &mut r) {
                accepted += 1;
            }
        }
        let freq = accepted as f64 / draws as f64;
        assert!((freq - (-1.0f64).exp()).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn sa_freezes_as_theta_vanishes() {
        let mut r = rng(16);
        for _ in 0..1000 {
            assert!(!sa_accept(10.5, 10.0, 1e-12, &mut r));
        }
    }

    #[test]
    fn best_trace_is_non_increasing() {
        let inst = small_instance(3);
        let (_, stats) = run(&inst, &AlnsParams::default(), 17).unwrap();
        for pair in stats.best_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
        assert_eq!(stats.iterations, 50);
        assert!(stats.best_cost <= stats.initial_cost);
        // Weights stay positive under nonnegative rewards.
        assert!(stats.ls_weights.iter().chain(&stats.sh_weights).all(|&w| w > 0.0));
        // Temperature only decreases and never cools past the floor by
        // more than one lambda step.
        assert!(stats.final_theta <= 100.0);
        assert!(stats.final_theta > 0.01 * 0.99);
    }

    #[test]
    fn fixed_seed_reproduces_run_and_solve() {
        let inst = small_instance(4);
        let params = AlnsParams::default();
        let (f1, s1) = run(&inst, &params, 99).unwrap();
        let (f2, s2) = run(&inst, &params, 99).unwrap();
        assert_eq!(s1.best_cost, s2.best_cost);
        assert_eq!(s1.best_trace, s2.best_trace);
        assert_eq!(f1.arcs(), f2.arcs());

        let o1 = solve(&inst, &params, 1234).unwrap();
        let o2 = solve(&inst, &params, 1234).unwrap();
        assert_eq!(o1.best_cost, o2.best_cost);
        assert_eq!(o1.best_restart, o2.best_restart);
        assert_eq!(o1.best.arcs(), o2.best.arcs());
    }

    #[test]
    fn solve_output_is_feasible_and_no_worse_than_any_run() {
        let inst = small_instance(5);
        let outcome = solve(&inst, &AlnsParams::default(), 7).unwrap();
        assert!(check_feasible(&outcome.best, &inst).is_feasible());
        for run in &outcome.runs {
            assert!(outcome.best_cost <= run.best_cost + 1e-12);
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let inst = small_instance(6);
        let bad = AlnsParams {
            lambda: 1.5,
            ..AlnsParams::default()
        };
        assert!(matches!(
            run(&inst, &bad, 0),
            Err(EngineError::Params(ParamError::Lambda(_)))
        ));
        let bad = AlnsParams {
            epsilon: 200.0,
            ..AlnsParams::default()
        };
        assert!(matches!(
            run(&inst, &bad, 0),
            Err(EngineError::Params(ParamError::Temperatures { .. }))
        ));
    }

    #[test]
    fn report_contains_operator_table_and_trace() {
        let inst = small_instance(8);
        let outcome = solve(
            &inst,
            &AlnsParams {
                restarts: 2,
                ..AlnsParams::default()
            },
            21,
        )
        .unwrap();
        let report = render_report(&outcome, "test-instance");
        assert!(report.contains("[operators]"));
        assert!(report.contains("ls5"));
        assert!(report.contains("sh6"));
        assert!(report.contains("[trace]"));
        assert!(report.contains("best_cost:"));
    }
}
