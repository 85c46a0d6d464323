//! Exhaustive grid search over `(beta, node values)` for tiny datasets.
//!
//! Serves as a reference for the profile solver and the outer search. For a
//! fixed `beta`, the tent spline on `[t_{k-1}, t_k]` depends only on the two
//! adjacent node values, so the objective is a sum of chain potentials and the
//! grid maximum is found exactly by dynamic programming over the knots. Tent
//! integrals are computed from the breakpoints of the max-of-affine pieces,
//! independently of the closed forms used by the solver.

use super::fit::{Diagnostics, Estimate};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::error_model::{dot, ErrorModel};
use crate::hazard::tent_transform_with_floor;
use crate::objective::corrected_objective;
use crate::param::ParamBox;

pub const MAX_OBSERVATIONS: usize = 4;
pub const MAX_DIM: usize = 2;
const MAX_NODE_GRID: usize = 20_000;
const MAX_BETA_GRID: usize = 200_000;
// points per coordinate of the fixed lattice used to size the node grid
const CAP_LATTICE: usize = 33;

#[derive(Debug, Clone)]
pub struct GridOracle {
    pub estimate: Estimate,
    pub nodes: Vec<f64>,
    /// Sum over coordinates of the largest objective change when the optimum
    /// moves one grid step along that coordinate.
    pub cell_variation: f64,
    pub node_grid: usize,
    pub beta_grid: usize,
}

/// Best grid point of the stage-1 problem.
pub fn brute_force_fit(d: &Dataset, e: &ErrorModel, bx: &ParamBox, lipschitz: f64, grid_step: f64) -> Result<Estimate> {
    Ok(brute_force_search(d, e, bx, lipschitz, grid_step, 0.0)?.estimate)
}

struct Chain {
    knots: Vec<f64>,
    events: Vec<f64>,
    // (sorted knot index, W) per observation
    obs: Vec<(usize, Vec<f64>, bool)>,
}

impl Chain {
    fn new(d: &Dataset) -> Self {
        let mut knots: Vec<f64> = d.y().to_vec();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let mut events = vec![0.0; knots.len()];
        let mut obs = Vec::with_capacity(d.len());
        for r in d.records() {
            let k = knots.iter().position(|&t| t == r.y).unwrap_or(0);
            if r.delta {
                events[k] += 1.0;
            }
            obs.push((k, r.w.to_vec(), r.delta));
        }
        Chain { knots, events, obs }
    }

    fn weights(&self, beta: &[f64], e: &ErrorModel) -> Vec<f64> {
        let m = e.mgf(beta);
        self.obs.iter().map(|(_, w, _)| dot(beta, w).exp() / m).collect()
    }

    // risk weight R_k of each segment
    fn risk(&self, c: &[f64]) -> Vec<f64> {
        (0..self.knots.len())
            .map(|k| self.obs.iter().zip(c).filter(|((j, _, _), _)| *j >= k).map(|(_, ci)| ci).sum())
            .collect()
    }

    fn linear(&self, beta: &[f64]) -> f64 {
        self.obs.iter().filter(|o| o.2).map(|(_, w, _)| dot(beta, w)).sum()
    }
}

/// Integral over `[a, b]` of a piecewise linear function with the given kinks.
fn integrate_kinks(f: impl Fn(f64) -> f64, a: f64, b: f64, kinks: &mut Vec<f64>) -> f64 {
    kinks.retain(|t| *t > a && *t < b);
    kinks.push(a);
    kinks.push(b);
    kinks.sort_by(f64::total_cmp);
    kinks.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1]))).sum()
}

fn pair_integral(a: f64, b: f64, va: f64, vb: f64, l: f64, floor: f64) -> f64 {
    let f = |t: f64| (va - l * (t - a)).max(vb - l * (b - t)).max(floor);
    let mut kinks = Vec::with_capacity(5);
    if l > 0.0 {
        kinks.push((va - vb + l * (a + b)) / (2.0 * l));
        kinks.push(a + (va - floor) / l);
        kinks.push(b - (vb - floor) / l);
    }
    integrate_kinks(f, a, b, &mut kinks)
}

fn left_integral(b: f64, vb: f64, l: f64, floor: f64) -> f64 {
    let f = |t: f64| (vb - l * (b - t)).max(floor);
    let mut kinks = Vec::with_capacity(3);
    if l > 0.0 {
        kinks.push(b - (vb - floor) / l);
    }
    integrate_kinks(f, 0.0, b, &mut kinks)
}

/// Grid `{lo} ∪ {lo + k h} ∪ {hi}`; nested when `h` is halved.
fn axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let mut out = vec![lo];
    let mut k = 1u64;
    loop {
        let x = lo + k as f64 * h;
        if x >= hi - 1e-12 * (hi - lo).abs().max(1.0) {
            break;
        }
        out.push(x);
        k += 1;
    }
    if hi > lo {
        out.push(hi);
    }
    out
}

/// Largest node value an optimum can take at this `beta`.
///
/// With `x` the largest node value the hazard is at least `x - L tau` on
/// `[0, t_max]`, so the objective is at most `D ln x - C (x - L tau)_+`,
/// where `C` is the weight at the last knot times `t_max`. The best
/// constant hazard `c` attains `D ln c - c S`; any optimum must do at
/// least as well.
fn node_cap(chain: &Chain, c: &[f64], l: f64, tau: f64, floor: f64) -> f64 {
    let d: f64 = chain.events.iter().sum();
    if d == 0.0 {
        return floor;
    }
    let last = chain.knots.len() - 1;
    let t_max = chain.knots[last];
    let s: f64 = chain.obs.iter().zip(c).map(|((k, _, _), ci)| ci * chain.knots[*k]).sum();
    let w_last: f64 = chain.obs.iter().zip(c).filter(|((k, _, _), _)| *k == last).map(|(_, ci)| ci).sum();
    let big_c = w_last * t_max;
    let best_const = (d / s).max(floor);
    let target = d * best_const.ln() - best_const * s;
    let slack = |x: f64| d * x.ln() - big_c * (x - l * tau).max(0.0) - target;
    let mut lo = best_const.max(l * tau);
    let mut hi = 2.0 * lo + 1.0;
    while slack(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slack(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn lattice(bx: &ParamBox, per_axis: impl Fn(f64, f64) -> Vec<f64>) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..bx.dim()).map(|j| per_axis(bx.lower()[j], bx.upper()[j])).collect();
    let mut out = vec![Vec::new()];
    for ax in &axes {
        out = out.iter().flat_map(|p| ax.iter().map(move |x| [p.as_slice(), &[*x]].concat())).collect();
    }
    out
}

/// Banded table of segment integrals: row `j` holds the integral for every
/// feasible left value `i in [start[j], start[j] + row.len())`.
struct Segment {
    start: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

fn segment_table(grid: &[f64], a: f64, b: f64, l: f64, floor: f64) -> Segment {
    let band = l * (b - a);
    let tol = 1e-12 * (1.0 + band);
    let mut start = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    for &vb in grid {
        let lo = grid.partition_point(|&v| v < vb - band - tol);
        let hi = grid.partition_point(|&v| v <= vb + band + tol);
        start.push(lo);
        rows.push(grid[lo..hi].iter().map(|&va| pair_integral(a, b, va, vb, l, floor)).collect());
    }
    Segment { start, rows }
}

/// Grid maximum of the corrected objective over hazards `>= floor`.
///
/// `beta` ranges over `{lower + k h} ∪ {upper}` per coordinate and node values
/// over `{floor} ∪ {k h > floor} ∪ {cap}`, where the cap bounds every optimal
/// node value on a fixed reference lattice of the box (so refining `h` only
/// adds points).
pub fn brute_force_search(
    d: &Dataset,
    e: &ErrorModel,
    bx: &ParamBox,
    lipschitz: f64,
    grid_step: f64,
    floor: f64,
) -> Result<GridOracle> {
    if d.is_empty() || d.len() > MAX_OBSERVATIONS || d.dim() > MAX_DIM {
        return Err(Error::usage(format!(
            "grid search needs 1..={MAX_OBSERVATIONS} observations and dimension <= {MAX_DIM}, got n = {} and m = {}",
            d.len(),
            d.dim()
        )));
    }
    if bx.dim() != d.dim() || e.dim() != d.dim() {
        return Err(Error::Dimension { expected: d.dim(), got: bx.dim().max(e.dim()), context: "grid search" });
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::usage(format!("grid step must be positive, got {grid_step}")));
    }
    if !(lipschitz >= 0.0 && lipschitz.is_finite()) || !(floor >= 0.0 && floor.is_finite()) {
        return Err(Error::usage("L and the hazard floor must be finite and >= 0"));
    }
    let chain = Chain::new(d);
    let tau = d.tau();
    if chain.events.iter().sum::<f64>() > 0.0 && chain.knots.iter().all(|&t| t == 0.0) {
        return Err(Error::DegenerateData("all observations sit at time zero".into()));
    }

    let reference =
        lattice(bx, |lo, hi| (0..CAP_LATTICE).map(|i| lo + (hi - lo) * i as f64 / (CAP_LATTICE - 1) as f64).collect());
    let cap =
        reference.iter().map(|b| node_cap(&chain, &chain.weights(b, e), lipschitz, tau, floor)).fold(floor, f64::max);
    let mut grid = vec![floor];
    let mut k = (floor / grid_step).floor() as u64 + 1;
    loop {
        let v = k as f64 * grid_step;
        if v >= cap {
            break;
        }
        if v > floor {
            grid.push(v);
        }
        k += 1;
        if grid.len() > MAX_NODE_GRID {
            return Err(Error::usage(format!("node grid exceeds {MAX_NODE_GRID} points; use a coarser step")));
        }
    }
    if cap > floor {
        grid.push(cap);
    }
    let betas = lattice(bx, |lo, hi| axis(lo, hi, grid_step));
    if betas.len() > MAX_BETA_GRID {
        return Err(Error::usage(format!("beta grid exceeds {MAX_BETA_GRID} points; use a coarser step")));
    }

    let kk = chain.knots.len();
    let left: Vec<f64> = grid.iter().map(|&v| left_integral(chain.knots[0], v, lipschitz, floor)).collect();
    let segments: Vec<Segment> =
        (1..kk).map(|k| segment_table(&grid, chain.knots[k - 1], chain.knots[k], lipschitz, floor)).collect();
    let logs: Vec<f64> = grid.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect();
    let event_term = |k: usize, j: usize| if chain.events[k] > 0.0 { chain.events[k] * logs[j] } else { 0.0 };

    let g = grid.len();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut score = vec![0.0; g];
    let mut next = vec![0.0; g];
    let mut back: Vec<Vec<usize>> = vec![vec![0; g]; kk];
    for (bi, beta) in betas.iter().enumerate() {
        let c = chain.weights(beta, e);
        let risk = chain.risk(&c);
        if !risk.iter().all(|r| r.is_finite()) {
            return Err(Error::numeric(format!("risk weights overflow at beta = {beta:?}")));
        }
        for j in 0..g {
            score[j] = event_term(0, j) - risk[0] * left[j];
        }
        for k in 1..kk {
            let seg = &segments[k - 1];
            for j in 0..g {
                let mut top = f64::NEG_INFINITY;
                let mut arg = seg.start[j];
                for (off, integral) in seg.rows[j].iter().enumerate() {
                    let i = seg.start[j] + off;
                    let s = score[i] - risk[k] * integral;
                    if s > top {
                        top = s;
                        arg = i;
                    }
                }
                back[k][j] = arg;
                next[j] = top + event_term(k, j);
            }
            std::mem::swap(&mut score, &mut next);
        }
        let mut arg = 0;
        for j in 1..g {
            if score[j] > score[arg] {
                arg = j;
            }
        }
        let total = (score[arg] + chain.linear(beta)) / d.len() as f64;
        if best.as_ref().is_none_or(|b| total > b.0) {
            let mut path = vec![arg; kk];
            for k in (1..kk).rev() {
                path[k - 1] = back[k][path[k]];
            }
            best = Some((total, bi, path));
        }
    }
    let (_, bi, path) = best.ok_or_else(|| Error::numeric("empty grid"))?;
    let beta = betas[bi].clone();
    let nodes: Vec<f64> = path.iter().map(|&j| grid[j]).collect();

    let objective_at = |beta: &[f64], v: &[f64]| -> Option<f64> {
        let h = tent_transform_with_floor(&chain.knots, v, lipschitz, tau, floor).ok()?;
        corrected_objective(d, &h, beta, e).ok()?.finite()
    };
    let hazard = tent_transform_with_floor(&chain.knots, &nodes, lipschitz, tau, floor)?;
    let objective = corrected_objective(d, &hazard, &beta, e)?.to_f64();

    let mut cell_variation = 0.0;
    if objective.is_finite() {
        for j in bx.free_coords() {
            let mut worst = 0.0f64;
            for s in [-1.0, 1.0] {
                let mut b = beta.clone();
                b[j] = (b[j] + s * grid_step).clamp(bx.lower()[j], bx.upper()[j]);
                if let Some(q) = objective_at(&b, &nodes) {
                    worst = worst.max((q - objective).abs());
                }
            }
            cell_variation += worst;
        }
        for k in 0..nodes.len() {
            let mut worst = 0.0f64;
            for s in [-1.0, 1.0] {
                let mut v = nodes.clone();
                v[k] += s * grid_step;
                if v[k] < floor {
                    continue;
                }
                if let Some(q) = objective_at(&beta, &v) {
                    worst = worst.max((q - objective).abs());
                }
            }
            cell_variation += worst;
        }
    }

    let hazard_min = hazard.min_value();
    Ok(GridOracle {
        estimate: Estimate {
            stage: if floor > 0.0 { 3 } else { 1 },
            beta,
            objective,
            hazard,
            diagnostics: Diagnostics {
                inner_iterations: 0,
                evaluations: betas.len(),
                starts: 0,
                active_lipschitz: 0,
                active_floor: nodes.iter().filter(|&&v| v == floor).count(),
                floor,
                hazard_min,
                epsilon_n: 0.0,
                converged: true,
                start_objective_spread: 0.0,
                start_beta_spread: 0.0,
            },
        },
        nodes,
        cell_variation,
        node_grid: g,
        beta_grid: betas.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kink_integrals_match_closed_forms() {
        // two meeting slopes: triangle-shaped valley
        let v = pair_integral(0.0, 1.0, 1.0, 1.0, 1.0, 0.0);
        assert!((v - 0.75).abs() < 1e-15);
        // valley cut at zero
        let v = pair_integral(0.0, 4.0, 1.0, 1.0, 1.0, 0.0);
        assert!((v - 1.0).abs() < 1e-15);
        let v = left_integral(2.0, 1.0, 1.0, 0.25);
        assert!((v - (0.5 * 0.75 * 1.25 + 0.25 * 1.25)).abs() < 1e-15);
    }

    #[test]
    fn axis_is_nested() {
        let coarse = axis(-1.0, 1.0, 0.5);
        let fine = axis(-1.0, 1.0, 0.25);
        assert_eq!(coarse, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        for x in coarse {
            assert!(fine.iter().any(|y| (x - y).abs() < 1e-14));
        }
    }

    #[test]
    fn rejects_large_instances() {
        let mut d = Dataset::new(1.0, 1).unwrap();
        for i in 0..5 {
            d.push(0.1 * (i + 1) as f64, true, &[0.0]).unwrap();
        }
        let bx = ParamBox::new(vec![-1.0], vec![1.0]).unwrap();
        let err = brute_force_fit(&d, &ErrorModel::none(1), &bx, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn censored_single_observation_gives_zero_hazard() {
        let mut d = Dataset::new(1.0, 1).unwrap();
        d.push(0.4, false, &[0.3]).unwrap();
        let bx = ParamBox::new(vec![-1.0], vec![1.0]).unwrap();
        for step in [0.1, 0.05] {
            let est = brute_force_fit(&d, &ErrorModel::none(1), &bx, 1.0, step).unwrap();
            assert_eq!(est.hazard.max_value(), 0.0);
            assert_eq!(est.objective, 0.0);
        }
    }
}
