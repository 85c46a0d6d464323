use crate::asymptotics::Truth;
use crate::error::{Error, Result};
use crate::error_model::dot;

const B_FLOOR: f64 = 1e-280;

/// `a(t)`, `b(t)` and `p(t)` at one time point; `p` is row-major `m x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPoint {
    pub a: Vec<f64>,
    pub b: f64,
    pub p: Vec<f64>,
}

/// Evaluates the covariate moments weighted by `exp(beta_0'X) G_T(t | X)` at
/// arbitrary times, by exact summation over a discrete representation of the
/// covariate law.
#[derive(Debug, Clone)]
pub struct Moments {
    points: Vec<Vec<f64>>,
    // probability times exp(beta_0'x)
    weights: Vec<f64>,
    risk: Vec<f64>,
    truth: Truth,
}

impl Moments {
    pub fn new(truth: &Truth, hermite_nodes: usize) -> Result<Self> {
        let support = truth.covariate().support(hermite_nodes)?;
        let mut points = Vec::with_capacity(support.len());
        let mut weights = Vec::with_capacity(support.len());
        let mut risk = Vec::with_capacity(support.len());
        for (x, w) in support {
            let r = dot(truth.beta(), &x).exp();
            if w > 0.0 {
                weights.push(w * r);
                risk.push(r);
                points.push(x);
            }
        }
        Ok(Moments { points, weights, risk, truth: truth.clone() })
    }

    pub fn truth(&self) -> &Truth {
        &self.truth
    }

    pub fn dim(&self) -> usize {
        self.truth.dim()
    }

    fn survival_weights(&self, t: f64) -> Vec<f64> {
        let lam = self.truth.hazard().cumulative_unchecked(t);
        self.weights.iter().zip(&self.risk).map(|(w, r)| w * (-r * lam).exp()).collect()
    }

    fn check_b(b: f64, t: f64) -> Result<()> {
        if !(b > B_FLOOR) || !b.is_finite() {
            return Err(Error::numeric(format!("b(t) underflows at t = {t} (b = {b})")));
        }
        Ok(())
    }

    /// `(a(t), b(t))`.
    pub fn ab(&self, t: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.dim();
        let s = self.survival_weights(t);
        let mut a = vec![0.0; m];
        let mut b = 0.0;
        for (x, w) in self.points.iter().zip(&s) {
            b += w;
            for j in 0..m {
                a[j] += w * x[j];
            }
        }
        Self::check_b(b, t)?;
        Ok((a, b))
    }

    pub fn at(&self, t: f64) -> Result<MomentPoint> {
        let m = self.dim();
        let s = self.survival_weights(t);
        let mut a = vec![0.0; m];
        let mut p = vec![0.0; m * m];
        let mut b = 0.0;
        for (x, w) in self.points.iter().zip(&s) {
            b += w;
            for i in 0..m {
                a[i] += w * x[i];
                for j in 0..m {
                    p[i * m + j] += w * x[i] * x[j];
                }
            }
        }
        Self::check_b(b, t)?;
        Ok(MomentPoint { a, b, p })
    }

    /// `K(t) = lambda_0(t) / b(t)`.
    pub fn k(&self, t: f64) -> Result<f64> {
        let (_, b) = self.ab(t)?;
        Ok(self.truth.hazard().eval_unchecked(t) / b)
    }
}

/// Running integral `int_0^y g(u) du` of a smooth vector function, tabulated
/// on a uniform grid with per-interval Simpson sums and completed inside the
/// last interval by a partial Simpson step.
pub struct Cumulative<F> {
    f: F,
    h: f64,
    nodes: Vec<f64>,
    at_nodes: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
}

impl<F> Cumulative<F>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    pub fn new(f: F, grid: &[f64]) -> Result<Self> {
        let n = grid.len();
        let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let at_nodes = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        let dim = at_nodes[0].len();
        let mut values = vec![vec![0.0; dim]];
        for j in 0..n - 1 {
            let mid = f(0.5 * (grid[j] + grid[j + 1]))?;
            let width = grid[j + 1] - grid[j];
            let next: Vec<f64> = (0..dim)
                .map(|i| values[j][i] + width / 6.0 * (at_nodes[j][i] + 4.0 * mid[i] + at_nodes[j + 1][i]))
                .collect();
            values.push(next);
        }
        Ok(Cumulative { f, h, nodes: grid.to_vec(), at_nodes, values })
    }

    pub fn eval(&self, y: f64) -> Result<Vec<f64>> {
        let n = self.nodes.len();
        let j = ((y / self.h).floor().max(0.0) as usize).min(n - 1);
        let j = if self.nodes[j] > y && j > 0 { j - 1 } else { j };
        let t = self.nodes[j];
        let width = y - t;
        if width <= 0.0 {
            return Ok(self.values[j].clone());
        }
        let mid = (self.f)(t + 0.5 * width)?;
        let end = (self.f)(y)?;
        Ok((0..mid.len())
            .map(|i| self.values[j][i] + width / 6.0 * (self.at_nodes[j][i] + 4.0 * mid[i] + end[i]))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::quadrature::uniform_grid;

    #[test]
    fn cumulative_of_smooth_function() {
        let grid = uniform_grid(1.0, 101).unwrap();
        let c = Cumulative::new(|u: f64| Ok(vec![u.exp(), 1.0]), &grid).unwrap();
        for y in [0.0, 0.013, 0.5, 0.77777, 1.0] {
            let v = c.eval(y).unwrap();
            assert!((v[0] - (y.exp() - 1.0)).abs() < 1e-10, "{y}");
            assert!((v[1] - y).abs() < 1e-14);
        }
    }
}
