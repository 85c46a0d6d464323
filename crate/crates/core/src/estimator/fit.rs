use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::inner::{maximize, maximize_from, InnerSolution};
use super::outer::{nelder_mead_max, LocalResult};
use super::reduced::ReducedProblem;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::error_model::ErrorModel;
use crate::hazard::SplineHazard;
use crate::objective::corrected_objective;

/// Relative slack below which a constraint counts as active.
const ACTIVE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Newton steps of the inner solver, summed over every profile evaluation.
    pub inner_iterations: usize,
    /// Profile evaluations made by the outer search.
    pub evaluations: usize,
    pub starts: usize,
    /// Adjacent Lipschitz constraints active at the returned nodes.
    pub active_lipschitz: usize,
    /// Nodes sitting on the hazard floor.
    pub active_floor: usize,
    /// Hazard floor imposed on this fit (zero at stage 1).
    pub floor: f64,
    /// `min_t lambda(t)` of the returned hazard.
    pub hazard_min: f64,
    pub epsilon_n: f64,
    /// Every inner solve and every local search met its tolerance.
    pub converged: bool,
    /// Largest objective difference between the local searches' results.
    pub start_objective_spread: f64,
    /// Largest sup-norm distance between the local searches' parameters.
    pub start_beta_spread: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub stage: u8,
    pub beta: Vec<f64>,
    /// `Q_n^cor` at `(hazard, beta)`.
    pub objective: f64,
    pub hazard: SplineHazard,
    pub diagnostics: Diagnostics,
}

/// Result of maximizing over the hazard at a fixed `beta`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub hazard: SplineHazard,
    /// `Q_n^cor` at `(hazard, beta)`.
    pub objective: f64,
    pub nodes: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_inputs(d: &Dataset, e: &ErrorModel, cfg: &FitConfig) -> Result<()> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::usage("cannot fit an empty dataset"));
    }
    if cfg.param_box.dim() != d.dim() {
        return Err(Error::Dimension { expected: d.dim(), got: cfg.param_box.dim(), context: "parameter box" });
    }
    if e.dim() != d.dim() {
        return Err(Error::Dimension { expected: d.dim(), got: e.dim(), context: "error model" });
    }
    if (cfg.tau - d.tau()).abs() > 0.0 {
        return Err(Error::usage(format!("config tau {} differs from dataset tau {}", cfg.tau, d.tau())));
    }
    Ok(())
}

fn solve_profile(
    d: &Dataset,
    beta: &[f64],
    e: &ErrorModel,
    cfg: &FitConfig,
    floor: f64,
) -> Result<(ReducedProblem, InnerSolution)> {
    let problem = ReducedProblem::new(d, beta, e, cfg.lipschitz, floor)?;
    let solution = maximize(&problem, &cfg.inner)?;
    Ok((problem, solution))
}

/// Maximizes the corrected objective over hazards at fixed `beta`.
///
/// The maximizer is a tent spline with knots at the distinct observation
/// times; its node values solve a concave problem over
/// `{v >= floor, |v_{k+1} - v_k| <= L (t_{k+1} - t_k)}`. Use `floor = 0` at
/// stage 1.
pub fn profile_hazard(d: &Dataset, beta: &[f64], e: &ErrorModel, cfg: &FitConfig, floor: f64) -> Result<Profile> {
    check_inputs(d, e, cfg)?;
    let (problem, solution) = solve_profile(d, beta, e, cfg, floor)?;
    let hazard = problem.hazard(&solution.values)?;
    let objective = corrected_objective(d, &hazard, beta, e)?.to_f64();
    Ok(Profile {
        hazard,
        objective,
        nodes: solution.values,
        iterations: solution.iterations,
        converged: solution.converged,
    })
}

fn count_active(problem: &ReducedProblem, v: &[f64]) -> (usize, usize) {
    let floor = problem.floor();
    let gaps = problem.gaps();
    let l = problem.lipschitz();
    let lip = (1..v.len())
        .filter(|&k| {
            let band = l * gaps[k];
            band - (v[k] - v[k - 1]).abs() <= ACTIVE_RTOL * band.max(f64::MIN_POSITIVE)
        })
        .count();
    let fl = v.iter().filter(|&&x| x - floor <= ACTIVE_RTOL * floor.max(1e-12)).count();
    (lip, fl)
}

/// Start points: midpoint, box corners, then seeded uniform draws.
fn start_points(cfg: &FitConfig, extra: Option<&[f64]>) -> Vec<Vec<f64>> {
    let bx = &cfg.param_box;
    let mut starts = Vec::new();
    if let Some(x) = extra {
        starts.push(x.to_vec());
    }
    starts.push(bx.midpoint());
    starts.extend(bx.corners());
    starts.dedup();
    starts.truncate(cfg.outer.starts.max(usize::from(extra.is_some())));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let free = !bx.free_coords().is_empty();
    while starts.len() < cfg.outer.starts && free {
        starts.push(bx.sample_uniform(&mut rng));
    }
    starts
}

struct SearchOutcome {
    beta: Vec<f64>,
    evaluations: usize,
    inner_iterations: usize,
    converged: bool,
    objective_spread: f64,
    beta_spread: f64,
    starts: usize,
}

fn search(
    d: &Dataset,
    e: &ErrorModel,
    cfg: &FitConfig,
    floor: f64,
    extra_start: Option<&[f64]>,
) -> Result<SearchOutcome> {
    let starts = start_points(cfg, extra_start);
    let runs: Vec<Result<(LocalResult, usize, bool)>> = starts
        .par_iter()
        .map(|start| {
            let mut iterations = 0usize;
            let mut all_converged = true;
            let mut warm: Option<Vec<f64>> = None;
            let mut objective = |beta: &[f64]| -> Result<f64> {
                let problem = ReducedProblem::new(d, beta, e, cfg.lipschitz, floor)?;
                let sol = maximize_from(&problem, &cfg.inner, warm.as_deref())?;
                iterations += sol.iterations;
                all_converged &= sol.converged;
                let value = problem.objective(&sol.values);
                warm = Some(sol.values);
                Ok(value)
            };
            let local = nelder_mead_max(&mut objective, start, &cfg.param_box, &cfg.outer)?;
            Ok((local, iterations, all_converged))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    // best objective wins; ties go to the earliest start
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.0.value > runs[best].0.value {
            best = i;
        }
    }
    let values: Vec<f64> = runs.iter().map(|r| r.0.value).collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut beta_spread = 0.0f64;
    for a in &runs {
        for b in &runs {
            for (x, y) in a.0.x.iter().zip(&b.0.x) {
                beta_spread = beta_spread.max((x - y).abs());
            }
        }
    }
    Ok(SearchOutcome {
        beta: runs[best].0.x.clone(),
        evaluations: runs.iter().map(|r| r.0.evaluations).sum(),
        inner_iterations: runs.iter().map(|r| r.1).sum(),
        converged: runs.iter().all(|r| r.0.converged && r.2),
        objective_spread: hi - lo,
        beta_spread,
        starts: runs.len(),
    })
}

fn finish(
    d: &Dataset,
    e: &ErrorModel,
    cfg: &FitConfig,
    floor: f64,
    stage: u8,
    outcome: SearchOutcome,
) -> Result<Estimate> {
    let (problem, solution) = solve_profile(d, &outcome.beta, e, cfg, floor)?;
    let hazard = problem.hazard(&solution.values)?;
    let objective = corrected_objective(d, &hazard, &outcome.beta, e)?.to_f64();
    let (active_lipschitz, active_floor) = count_active(&problem, &solution.values);
    let hazard_min = hazard.min_value();
    Ok(Estimate {
        stage,
        beta: outcome.beta,
        objective,
        hazard,
        diagnostics: Diagnostics {
            inner_iterations: outcome.inner_iterations + solution.iterations,
            evaluations: outcome.evaluations,
            starts: outcome.starts,
            active_lipschitz,
            active_floor,
            floor,
            hazard_min,
            epsilon_n: cfg.epsilon_n(d.len()),
            converged: outcome.converged && solution.converged,
            start_objective_spread: outcome.objective_spread,
            start_beta_spread: outcome.beta_spread,
        },
    })
}

fn fit_floor(
    d: &Dataset,
    e: &ErrorModel,
    cfg: &FitConfig,
    floor: f64,
    stage: u8,
    extra_start: Option<&[f64]>,
) -> Result<Estimate> {
    check_inputs(d, e, cfg)?;
    if d.event_count() == 0 {
        // the objective no longer depends on beta: take the box midpoint
        let outcome = SearchOutcome {
            beta: cfg.param_box.midpoint(),
            evaluations: 0,
            inner_iterations: 0,
            converged: true,
            objective_spread: 0.0,
            beta_spread: 0.0,
            starts: 0,
        };
        return finish(d, e, cfg, floor, stage, outcome);
    }
    let outcome = search(d, e, cfg, floor, extra_start)?;
    finish(d, e, cfg, floor, stage, outcome)
}

/// Stage-1 estimate: an `epsilon_n`-approximate maximizer of the corrected
/// objective over the Lipschitz cone times the parameter box.
pub fn fit_stage1(d: &Dataset, e: &ErrorModel, cfg: &FitConfig) -> Result<Estimate> {
    fit_floor(d, e, cfg, 0.0, 1, None)
}

/// Refit restricted to hazards bounded below by half the stage-1 minimum.
/// When the stage-1 hazard touches zero the stage-1 estimate is returned.
pub fn fit_stage2(d: &Dataset, e: &ErrorModel, stage1: &Estimate, cfg: &FitConfig) -> Result<Estimate> {
    check_inputs(d, e, cfg)?;
    if stage1.stage != 1 {
        return Err(Error::usage(format!("expected a stage-1 estimate, got stage {}", stage1.stage)));
    }
    let expected = ReducedProblem::new(d, &stage1.beta, e, cfg.lipschitz, 0.0)?;
    if stage1.hazard.knots() != expected.knots() || stage1.hazard.tau() != d.tau() || stage1.beta.len() != d.dim() {
        return Err(Error::usage("the stage-1 estimate was not computed on this dataset"));
    }
    let mu = stage1.hazard.min_value();
    if mu <= 0.0 {
        return Ok(stage1.clone());
    }
    fit_floor(d, e, cfg, 0.5 * mu, 2, Some(&stage1.beta))
}

/// Maximizer over hazards with `min_t lambda(t) >= floor`.
pub fn fit_with_floor(d: &Dataset, e: &ErrorModel, cfg: &FitConfig, floor: f64) -> Result<Estimate> {
    if !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::usage(format!("hazard floor must be finite and >= 0, got {floor}")));
    }
    fit_floor(d, e, cfg, floor, 3, None)
}
