use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::{Cumulative, Moments};
use super::quadrature::simpson_weights;
use super::tables::{matrix_s, sample_covariance, AsymptoticTables, MC_CHUNK};
use super::truth::Truth;
use crate::error::{Error, Result};
use crate::error_model::dot;
use crate::simulation::substream;

/// Lipschitz weight function `f` on `[0, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Weight {
    /// `f(u) = 1`.
    One,
    /// `f(u) = u`.
    Identity,
    /// Linear interpolation of `values` on an equally spaced grid over `[0, tau]`.
    Grid { values: Vec<f64> },
}

impl Weight {
    /// Parses `one`, `t`, or comma-separated grid values.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "one" | "1" => Ok(Weight::One),
            "t" | "u" => Ok(Weight::Identity),
            other => {
                let values = other
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| Error::usage(format!("bad weight value '{v}'"))))
                    .collect::<Result<Vec<_>>>()?;
                let w = Weight::Grid { values };
                w.validate()?;
                Ok(w)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Weight::Grid { values } = self {
            if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::usage("grid weight needs at least two finite values"));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            Weight::One => "one".into(),
            Weight::Identity => "t".into(),
            Weight::Grid { values } => format!("grid[{}]", values.len()),
        }
    }

    pub fn eval(&self, u: f64, tau: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Identity => u,
            Weight::Grid { values } => {
                let n = values.len() - 1;
                let x = (u / tau).clamp(0.0, 1.0) * n as f64;
                let j = (x.floor() as usize).min(n - 1);
                let r = x - j as f64;
                values[j] * (1.0 - r) + values[j + 1] * r
            }
        }
    }

    /// Interior points where `f` may have kinks.
    pub fn breakpoints(&self, tau: f64) -> Vec<f64> {
        match self {
            Weight::Grid { values } => {
                let n = values.len() - 1;
                (1..n).map(|j| tau * j as f64 / n as f64).collect()
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FredholmSolution {
    pub weight: Weight,
    pub grid: Vec<f64>,
    pub phi_lambda: Vec<f64>,
    pub phi_beta: Vec<f64>,
    /// `4 Var <q', phi>`.
    pub sigma_sq: f64,
    /// `Var <q', phi>`.
    pub variance: f64,
    /// Standard error of `variance`.
    pub variance_se: f64,
    /// Sup-norm residual of the integral equation on the grid.
    pub residual: f64,
    pub reps: usize,
}

/// Residual `phi / K - a' A^{-1} m(phi) - f` on the grid, sup-norm.
pub fn fredholm_residual(tables: &AsymptoticTables, f: &[f64], phi: &[f64]) -> Result<f64> {
    let g = &tables.grids;
    let w = simpson_weights(&g.grid);
    let dim = tables.a_matrix.len();
    let mut mphi = DVector::zeros(dim);
    for i in 0..g.grid.len() {
        for j in 0..dim {
            mphi[j] += w[i] * phi[i] * g.a[i][j] * g.g_c[i];
        }
    }
    let coef = tables.a().lu().solve(&mphi).ok_or_else(|| Error::numeric("A is singular"))?;
    let mut worst = 0.0f64;
    for i in 0..g.grid.len() {
        let r = phi[i] / g.k[i] - dot(&g.a[i], coef.as_slice()) - f[i];
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// Solves `phi / K - a' A^{-1} m(phi) = f` through its finite-rank structure
/// and estimates `sigma_phi^2(f)` by Monte Carlo.
///
/// With `c = A^{-1} m(phi)` the solution is `phi = K (f + a'c)`, where `c`
/// solves `(A - S) c = v`, `S = int K a a' G_C`, `v = int K f a G_C`. The
/// bracket `<q', phi>` uses `phi_beta = -c`.
pub fn solve_fredholm(
    truth: &Truth,
    tables: &AsymptoticTables,
    weight: &Weight,
    reps: usize,
    seed: u64,
) -> Result<FredholmSolution> {
    weight.validate()?;
    if reps < 2 {
        return Err(Error::usage("functional variance needs at least 2 draws"));
    }
    let g = &tables.grids;
    let tau = truth.tau();
    let dim = truth.dim();
    let wts = simpson_weights(&g.grid);
    let f: Vec<f64> = g.grid.iter().map(|&u| weight.eval(u, tau)).collect();
    let mut v = DVector::zeros(dim);
    for i in 0..g.grid.len() {
        for j in 0..dim {
            v[j] += wts[i] * g.k[i] * f[i] * g.a[i][j] * g.g_c[i];
        }
    }
    let system = tables.a() - matrix_s(g)?;
    let c = system.lu().solve(&v).ok_or_else(|| {
        Error::numeric("A - S is singular, so the integral equation has no unique solution for this truth")
    })?;
    let c: Vec<f64> = c.iter().copied().collect();
    let phi: Vec<f64> = (0..g.grid.len()).map(|i| g.k[i] * (f[i] + dot(&g.a[i], &c))).collect();
    let residual = fredholm_residual(tables, &f, &phi)?;

    let moments = Moments::new(truth, tables.settings.hermite_nodes)?;
    let phi_at = |u: f64| -> Result<f64> {
        let (a, b) = moments.ab(u)?;
        Ok(truth.hazard().eval_unchecked(u) / b * (weight.eval(u, tau) + dot(&a, &c)))
    };
    let cum = Cumulative::new(|u| Ok(vec![phi_at(u)?]), &g.grid)?;
    let beta = truth.beta();
    let e = truth.error();
    let mgf = e.mgf(beta);
    let moment = e.mgf_moment(beta);
    let phi_beta: Vec<f64> = c.iter().map(|x| -x).collect();

    let chunks = reps.div_ceil(MC_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rng = substream(seed, 3, ch as u64);
            let mut out = Vec::with_capacity(MC_CHUNK);
            for _ in 0..MC_CHUNK.min(reps - ch * MC_CHUNK) {
                let r = truth.sample_latent(&mut rng)?;
                let (y, delta, w) = (r.y(), r.delta(), r.w());
                let ew = dot(beta, &w).exp();
                let lam_cum = truth.hazard().cumulative_unchecked(y);
                let mut bracket = -ew / mgf * cum.eval(y)?[0];
                if delta {
                    bracket += phi_at(y)? / truth.hazard().eval_unchecked(y) + dot(&phi_beta, &w);
                }
                for j in 0..dim {
                    bracket -= phi_beta[j] * (mgf * w[j] - moment[j]) / (mgf * mgf) * ew * lam_cum;
                }
                out.push(vec![bracket]);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let draws: Vec<Vec<f64>> = parts.into_iter().flatten().collect();
    let (_, cov, se) = sample_covariance(&draws);
    let variance = cov[(0, 0)];
    Ok(FredholmSolution {
        weight: weight.clone(),
        grid: g.grid.clone(),
        phi_lambda: phi,
        phi_beta,
        sigma_sq: 4.0 * variance,
        variance,
        variance_se: se[(0, 0)],
        residual,
        reps,
    })
}
