//! The profile problem at fixed `beta`, reduced to node values.
//!
//! With knots at the distinct sorted observation times `t_0 < ... < t_{K-1}`
//! and the tent spline through node values `v`, the corrected objective is
//!
//! `n Q = sum_i Delta_i beta'W_i + sum_k D_k log v_k - sum_k R_k J_k(v)`
//!
//! where `D_k` counts events at `t_k`, `R_k = sum_{i: Y_i >= t_k} c_i` with
//! `c_i = exp(beta'W_i) / M_U(beta)`, and `J_k` is the tent integral over
//! `[t_{k-1}, t_k]` (over `[0, t_0]` for `k = 0`). Each `J_k` is convex and
//! piecewise quadratic in the node values, so the reduced objective is
//! concave with a tridiagonal Hessian.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::error_model::{dot, ErrorModel};
use crate::hazard::{tent_transform_with_floor, SplineHazard};

/// Tridiagonal symmetric matrix: `diag[k]` and `off[k]` at `(k, k+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(k: usize) -> Self {
        Tridiagonal { diag: vec![0.0; k], off: vec![0.0; k.saturating_sub(1)] }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s: f64 = self.diag.iter().zip(x).map(|(d, xi)| d * xi * xi).sum();
        for k in 0..self.off.len() {
            s += 2.0 * self.off[k] * x[k] * x[k + 1];
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    knots: Vec<f64>,
    events: Vec<f64>,
    // risk weight of the interval ending at knot k
    risk: Vec<f64>,
    gaps: Vec<f64>,
    lipschitz: f64,
    floor: f64,
    tau: f64,
    linear_term: f64,
    n: usize,
}

impl ReducedProblem {
    pub fn new(d: &Dataset, beta: &[f64], e: &ErrorModel, lipschitz: f64, floor: f64) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::usage("cannot profile an empty dataset"));
        }
        if beta.len() != d.dim() || e.dim() != d.dim() {
            return Err(Error::Dimension {
                expected: d.dim(),
                got: beta.len().max(e.dim()),
                context: "beta / error model",
            });
        }
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(Error::usage(format!("hazard floor must be finite and >= 0, got {floor}")));
        }
        let mgf = e.mgf(beta);
        let mut order: Vec<usize> = (0..d.len()).collect();
        order.sort_by(|&a, &b| d.y()[a].total_cmp(&d.y()[b]));

        let mut knots: Vec<f64> = Vec::new();
        let mut events: Vec<f64> = Vec::new();
        let mut weight: Vec<f64> = Vec::new();
        let mut linear_term = 0.0;
        for &i in &order {
            let rec = d.record(i);
            let lin = dot(beta, rec.w);
            if rec.delta {
                linear_term += lin;
            }
            let c = lin.exp() / mgf;
            if knots.last() != Some(&rec.y) {
                knots.push(rec.y);
                events.push(0.0);
                weight.push(0.0);
            }
            let k = knots.len() - 1;
            events[k] += f64::from(u8::from(rec.delta));
            weight[k] += c;
        }
        let k = knots.len();
        let mut risk = vec![0.0; k];
        let mut acc = 0.0;
        for j in (0..k).rev() {
            acc += weight[j];
            risk[j] = acc;
        }
        if !risk.iter().all(|r| r.is_finite()) {
            return Err(Error::numeric(format!("risk weights overflow at beta = {beta:?}")));
        }
        let gaps = (0..k).map(|j| if j == 0 { knots[0] } else { knots[j] - knots[j - 1] }).collect();
        Ok(ReducedProblem { knots, events, risk, gaps, lipschitz, floor, tau: d.tau(), linear_term, n: d.len() })
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn risk(&self) -> &[f64] {
        &self.risk
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_events(&self) -> f64 {
        self.events.iter().sum()
    }

    /// `sum_i c_i Y_i`: the integral term of a unit constant hazard.
    pub fn exposure(&self) -> f64 {
        self.risk.iter().zip(&self.gaps).map(|(r, g)| r * g).sum()
    }

    /// `sum_i Delta_i beta'W_i`.
    pub fn linear_term(&self) -> f64 {
        self.linear_term
    }

    /// Whether `v` respects the floor and the adjacent Lipschitz bounds.
    pub fn is_feasible(&self, v: &[f64]) -> bool {
        if v.len() != self.len() || v.iter().any(|&x| !(x >= self.floor)) {
            return false;
        }
        (1..v.len()).all(|k| (v[k] - v[k - 1]).abs() <= self.lipschitz * self.gaps[k])
    }

    // integral of the tent piece on [0, t_0], without the floor rectangle
    fn boundary_piece(&self, u: f64, g: f64) -> (f64, f64, f64) {
        let l = self.lipschitz;
        if u >= l * g {
            (u * g - 0.5 * l * g * g, g, 0.0)
        } else {
            (0.5 * u * u / l, u / l, 1.0 / l)
        }
    }

    // integral of the tent piece between adjacent knots, without the floor
    // rectangle; returns (value, d/du_a, d/du_b, hessian diag, hessian off)
    fn interior_piece(&self, ua: f64, ub: f64, g: f64) -> (f64, f64, f64, f64, f64) {
        let l = self.lipschitz;
        let bottom = 0.5 * (ua + ub - l * g);
        if bottom >= 0.0 {
            let d = ua - ub;
            let value = 0.25 * d * d / l + 0.5 * (ua + ub) * g - 0.25 * l * g * g;
            let h = 0.5 / l;
            (value, 0.5 * d / l + 0.5 * g, -0.5 * d / l + 0.5 * g, h, -h)
        } else {
            (0.5 * (ua * ua + ub * ub) / l, ua / l, ub / l, 1.0 / l, 0.0)
        }
    }

    /// `int_0^tau lambda(u) C(u) du` for the floor-cut tent through `v`, with
    /// `C` the at-risk weight. Requires `L > 0`.
    pub fn integral_term(&self, v: &[f64]) -> f64 {
        let phi = self.floor;
        let mut total = 0.0;
        for k in 0..self.len() {
            let g = self.gaps[k];
            let piece = if k == 0 {
                if g > 0.0 {
                    self.boundary_piece(v[0] - phi, g).0
                } else {
                    0.0
                }
            } else {
                self.interior_piece(v[k - 1] - phi, v[k] - phi, g).0
            };
            total += self.risk[k] * (piece + phi * g);
        }
        total
    }

    /// `sum_k D_k log v_k - int lambda C` (the part of `n Q` that depends on
    /// the node values); `-inf` if an event knot has value zero.
    pub fn value(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.len());
        let mut log_part = 0.0;
        for (&dk, &vk) in self.events.iter().zip(v) {
            if dk > 0.0 {
                if vk <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                log_part += dk * vk.ln();
            }
        }
        log_part - self.integral_term(v)
    }

    /// `Q_n^cor` at the tent through `v` and the fixed `beta`.
    pub fn objective(&self, v: &[f64]) -> f64 {
        (self.value(v) + self.linear_term) / self.n as f64
    }

    /// Gradient of [`Self::value`].
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.len()];
        self.accumulate(v, Some(&mut g), None);
        g
    }

    /// Hessian of [`Self::value`] (negative semidefinite).
    pub fn hessian(&self, v: &[f64]) -> Tridiagonal {
        let mut h = Tridiagonal::zeros(self.len());
        self.accumulate(v, None, Some(&mut h));
        h
    }

    pub(crate) fn accumulate(&self, v: &[f64], mut grad: Option<&mut [f64]>, mut hess: Option<&mut Tridiagonal>) {
        let phi = self.floor;
        for k in 0..self.len() {
            let dk = self.events[k];
            if dk > 0.0 {
                if let Some(g) = grad.as_deref_mut() {
                    g[k] += dk / v[k];
                }
                if let Some(h) = hess.as_deref_mut() {
                    h.diag[k] -= dk / (v[k] * v[k]);
                }
            }
            let r = self.risk[k];
            let gap = self.gaps[k];
            if k == 0 {
                if gap > 0.0 {
                    let (_, d1, h1) = self.boundary_piece(v[0] - phi, gap);
                    if let Some(g) = grad.as_deref_mut() {
                        g[0] -= r * d1;
                    }
                    if let Some(h) = hess.as_deref_mut() {
                        h.diag[0] -= r * h1;
                    }
                }
            } else {
                let (_, da, db, hd, ho) = self.interior_piece(v[k - 1] - phi, v[k] - phi, gap);
                if let Some(g) = grad.as_deref_mut() {
                    g[k - 1] -= r * da;
                    g[k] -= r * db;
                }
                if let Some(h) = hess.as_deref_mut() {
                    h.diag[k - 1] -= r * hd;
                    h.diag[k] -= r * hd;
                    h.off[k - 1] -= r * ho;
                }
            }
        }
    }

    /// The floor-cut tent spline through `v`.
    pub fn hazard(&self, v: &[f64]) -> Result<SplineHazard> {
        tent_transform_with_floor(&self.knots, v, self.lipschitz, self.tau, self.floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::corrected_objective;
    use approx::assert_relative_eq;

    fn small() -> Dataset {
        Dataset::from_records(
            1.0,
            1,
            [
                (0.2, true, &[0.5][..]),
                (0.45, false, &[-0.3][..]),
                (0.45, true, &[1.0][..]),
                (0.8, true, &[0.0][..]),
                (1.0, false, &[0.2][..]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ties_are_merged() {
        let p = ReducedProblem::new(&small(), &[0.4], &ErrorModel::none(1), 1.0, 0.0).unwrap();
        assert_eq!(p.knots(), &[0.2, 0.45, 0.8, 1.0]);
        assert_eq!(p.events(), &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn matches_corrected_objective() {
        let d = small();
        let e = ErrorModel::isotropic(1, 0.3).unwrap();
        for floor in [0.0, 0.05] {
            let p = ReducedProblem::new(&d, &[0.4], &e, 1.0, floor).unwrap();
            for v in [[0.3, 0.2, 0.5, 0.4], [0.1, 0.3, 0.2, 0.06], [0.9, 0.7, 0.6, 0.5]] {
                let h = p.hazard(&v).unwrap();
                let direct = corrected_objective(&d, &h, &[0.4], &e).unwrap().to_f64();
                assert_relative_eq!(p.objective(&v), direct, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn feasibility() {
        let p = ReducedProblem::new(&small(), &[0.0], &ErrorModel::none(1), 1.0, 0.1).unwrap();
        assert!(p.is_feasible(&[0.3, 0.3, 0.3, 0.3]));
        assert!(!p.is_feasible(&[0.3, 0.6, 0.3, 0.3]));
        assert!(!p.is_feasible(&[0.05, 0.1, 0.1, 0.1]));
    }
}
