//! Log-barrier Newton ascent for the reduced node-value problem.
//!
//! The feasible set `{v >= floor, |v_k - v_{k-1}| <= L g_k}` and the objective
//! both couple only neighbouring knots, so every Newton system is tridiagonal
//! and costs `O(K)`.

use super::config::InnerSettings;
use super::reduced::{ReducedProblem, Tridiagonal};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Duality-gap bound at termination, per observation.
    pub gap: f64,
}

/// Solves `A x = b` for symmetric positive definite tridiagonal `A`.
pub(crate) fn solve_tridiagonal(a: &Tridiagonal, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = a.diag[0];
    if !(denom > 0.0) {
        return None;
    }
    d[0] = b[0] / denom;
    for i in 1..n {
        c[i - 1] = a.off[i - 1] / denom;
        denom = a.diag[i] - a.off[i - 1] * c[i - 1];
        if !(denom > 0.0) || !denom.is_finite() {
            return None;
        }
        d[i] = (b[i] - a.off[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

// initial barrier weight of a warm start, relative to the final one
const WARM_BARRIER: f64 = 1.0;

struct Barrier<'a> {
    p: &'a ReducedProblem,
    mu: f64,
}

impl Barrier<'_> {
    fn slacks(&self, v: &[f64], k: usize) -> (f64, f64) {
        let band = self.p.lipschitz() * self.p.gaps()[k];
        let d = v[k] - v[k - 1];
        (band - d, band + d)
    }

    fn value(&self, v: &[f64]) -> f64 {
        let phi = self.p.floor();
        let mut b = 0.0;
        for k in 0..v.len() {
            let u = v[k] - phi;
            if !(u > 0.0) {
                return f64::NEG_INFINITY;
            }
            b += u.ln();
            if k > 0 {
                let (s1, s2) = self.slacks(v, k);
                if !(s1 > 0.0 && s2 > 0.0) {
                    return f64::NEG_INFINITY;
                }
                b += s1.ln() + s2.ln();
            }
        }
        self.p.value(v) + self.mu * b
    }

    // gradient and negated Hessian of the barrier objective
    fn derivatives(&self, v: &[f64]) -> (Vec<f64>, Tridiagonal) {
        let k_len = v.len();
        let mut g = vec![0.0; k_len];
        let mut h = Tridiagonal::zeros(k_len);
        self.p.accumulate(v, Some(&mut g), Some(&mut h));
        for x in h.diag.iter_mut().chain(h.off.iter_mut()) {
            *x = -*x;
        }
        let phi = self.p.floor();
        let mu = self.mu;
        for k in 0..k_len {
            let u = v[k] - phi;
            g[k] += mu / u;
            h.diag[k] += mu / (u * u);
            if k > 0 {
                let (s1, s2) = self.slacks(v, k);
                g[k] += -mu / s1 + mu / s2;
                g[k - 1] += mu / s1 - mu / s2;
                let w = mu / (s1 * s1) + mu / (s2 * s2);
                h.diag[k] += w;
                h.diag[k - 1] += w;
                h.off[k - 1] -= w;
            }
        }
        (g, h)
    }

    // largest step along dir keeping all slacks strictly positive
    fn max_step(&self, v: &[f64], dir: &[f64]) -> f64 {
        let phi = self.p.floor();
        let mut t = f64::INFINITY;
        for k in 0..v.len() {
            if dir[k] < 0.0 {
                t = t.min((v[k] - phi) / -dir[k]);
            }
            if k > 0 {
                let (s1, s2) = self.slacks(v, k);
                let rate = dir[k] - dir[k - 1];
                if rate > 0.0 {
                    t = t.min(s1 / rate);
                } else if rate < 0.0 {
                    t = t.min(s2 / -rate);
                }
            }
        }
        t
    }
}

/// Strictly feasible starting point: the best constant hazard, nudged above
/// the floor.
fn initial_point(p: &ReducedProblem) -> Vec<f64> {
    let events = p.total_events();
    let exposure = p.exposure();
    let phi = p.floor();
    let constant = if exposure > 0.0 { events / exposure } else { 1.0 };
    let start = if constant > phi { constant } else { 2.0 * phi.max(1e-3) };
    vec![start; p.len()]
}

/// Maximizes the reduced objective over feasible node values.
///
/// Problems without events are solved exactly (every node at the floor); for
/// `L = 0` the feasible set is the constant line and the optimum is closed
/// form. Otherwise a sequence of centering problems with decreasing barrier
/// weight is solved by damped Newton steps.
pub fn maximize(p: &ReducedProblem, settings: &InnerSettings) -> Result<InnerSolution> {
    maximize_from(p, settings, None)
}

/// As [`maximize`], starting from a strictly feasible `warm` point (typically
/// the solution at a nearby `beta`) with a small initial barrier weight.
/// Falls back to a cold start when `warm` is not strictly feasible.
pub fn maximize_from(p: &ReducedProblem, settings: &InnerSettings, warm: Option<&[f64]>) -> Result<InnerSolution> {
    let k_len = p.len();
    let phi = p.floor();
    let events = p.total_events();
    let exposure = p.exposure();
    if events > 0.0 && exposure <= 0.0 {
        return Err(Error::DegenerateData(
            "all observations sit at time zero, so the objective is unbounded in the hazard".into(),
        ));
    }
    if events == 0.0 {
        return Ok(InnerSolution { values: vec![phi; k_len], iterations: 0, converged: true, gap: 0.0 });
    }
    if p.lipschitz() == 0.0 {
        let v = (events / exposure).max(phi);
        return Ok(InnerSolution { values: vec![v; k_len], iterations: 0, converged: true, gap: 0.0 });
    }

    let n = p.n() as f64;
    let constraints = (3 * k_len - 2) as f64;
    let mu_end = settings.tolerance * n / constraints;
    let mut barrier = Barrier { p, mu: settings.barrier_start.max(settings.tolerance) * n / constraints };
    let mut v = initial_point(p);
    if let Some(w) = warm {
        if w.len() == k_len && barrier.value(w).is_finite() {
            v = w.to_vec();
            barrier.mu = barrier.mu.min(WARM_BARRIER * mu_end);
        }
    }
    let mut iterations = 0usize;
    let mut trial = vec![0.0; k_len];

    loop {
        // centering at the current barrier weight
        let mut current = barrier.value(&v);
        loop {
            if iterations >= settings.max_iterations {
                return Ok(InnerSolution {
                    values: v,
                    iterations,
                    converged: false,
                    gap: constraints * barrier.mu / n,
                });
            }
            let (g, h) = barrier.derivatives(&v);
            let dir =
                solve_tridiagonal(&h, &g).ok_or_else(|| Error::numeric("Newton system is not positive definite"))?;
            iterations += 1;
            let decrement: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            if !decrement.is_finite() {
                return Err(Error::numeric("non-finite Newton decrement"));
            }
            if decrement <= 1e-3 * settings.tolerance * n {
                // the pending full step squares the remaining error in v
                if barrier.max_step(&v, &dir) > 1.0 {
                    for k in 0..k_len {
                        trial[k] = v[k] + dir[k];
                    }
                    if barrier.value(&trial) >= current {
                        v.copy_from_slice(&trial);
                    }
                }
                break;
            }
            let mut step = (0.99 * barrier.max_step(&v, &dir)).min(1.0);
            let mut accepted = false;
            for _ in 0..60 {
                for k in 0..k_len {
                    trial[k] = v[k] + step * dir[k];
                }
                let next = barrier.value(&trial);
                if next.is_finite() && next >= current + 0.25 * step * decrement {
                    v.copy_from_slice(&trial);
                    current = next;
                    accepted = true;
                    break;
                }
                step *= settings.backtrack;
            }
            if !accepted {
                // no ascent possible at this precision; the point is centered
                break;
            }
        }
        if barrier.mu <= mu_end {
            break;
        }
        barrier.mu = (barrier.mu * settings.barrier_shrink).max(mu_end);
    }
    Ok(InnerSolution { values: v, iterations, converged: true, gap: constraints * barrier.mu / n })
}
