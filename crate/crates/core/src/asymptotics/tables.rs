use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::moments::{Cumulative, Moments};
use super::quadrature::{simpson_weights, uniform_grid};
use super::truth::Truth;
use crate::error::{Error, Result};
use crate::error_model::dot;
use crate::simulation::substream;

/// Monte Carlo draws per independent substream.
pub(crate) const MC_CHUNK: usize = 2048;

pub type Matrix = Vec<Vec<f64>>;

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub(crate) fn from_rows(rows: &Matrix) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSettings {
    /// Odd number of Simpson nodes on `[0, tau]`.
    pub grid_nodes: usize,
    /// Gauss-Hermite nodes per coordinate for a gaussian covariate.
    pub hermite_nodes: usize,
    /// Monte Carlo draws for the score covariance and the functional variance.
    pub reps: usize,
    pub seed: u64,
}

impl Default for AsymptoticSettings {
    fn default() -> Self {
        AsymptoticSettings { grid_nodes: 2001, hermite_nodes: 40, reps: 100_000, seed: 0 }
    }
}

/// Grid functions `a, b, p, T, K` and the censor survival on a common grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentGrids {
    pub grid: Vec<f64>,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub p: Vec<Matrix>,
    #[serde(rename = "T")]
    pub t: Vec<Matrix>,
    #[serde(rename = "K")]
    pub k: Vec<f64>,
    pub g_c: Vec<f64>,
}

/// `a, b, p, T = p b - a a', K = lambda_0 / b` and `G_C` on `grid`.
pub fn moment_grids(truth: &Truth, grid: &[f64], hermite_nodes: usize) -> Result<MomentGrids> {
    if grid.iter().any(|&t| !(0.0..=truth.tau()).contains(&t)) {
        return Err(Error::usage("moment grid must lie in [0, tau]"));
    }
    let moments = Moments::new(truth, hermite_nodes)?;
    let m = truth.dim();
    let points = grid.par_iter().map(|&u| moments.at(u)).collect::<Result<Vec<_>>>()?;
    let mut out = MomentGrids {
        grid: grid.to_vec(),
        a: Vec::with_capacity(grid.len()),
        b: Vec::with_capacity(grid.len()),
        p: Vec::with_capacity(grid.len()),
        t: Vec::with_capacity(grid.len()),
        k: Vec::with_capacity(grid.len()),
        g_c: grid.iter().map(|&u| truth.censor().survival(u)).collect(),
    };
    for (pt, &u) in points.into_iter().zip(grid) {
        let p: Matrix = (0..m).map(|i| pt.p[i * m..(i + 1) * m].to_vec()).collect();
        let t: Matrix = (0..m).map(|i| (0..m).map(|j| p[i][j] * pt.b - pt.a[i] * pt.a[j]).collect()).collect();
        out.k.push(truth.hazard().eval_unchecked(u) / pt.b);
        out.b.push(pt.b);
        out.a.push(pt.a);
        out.p.push(p);
        out.t.push(t);
    }
    Ok(out)
}

fn integrate_matrix(grid: &[f64], f: impl Fn(usize) -> DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let w = simpson_weights(grid);
    let mut acc = DMatrix::zeros(m, m);
    for (i, wi) in w.iter().enumerate() {
        acc += f(i) * *wi;
    }
    if acc.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite matrix entries"));
    }
    Ok(symmetrize(&acc))
}

/// `A = E[X X' exp(beta_0'X) Lambda_0(Y)] = int_0^tau p lambda_0 G_C du`.
pub fn matrix_a(truth: &Truth, grids: &MomentGrids) -> Result<DMatrix<f64>> {
    let lam: Vec<f64> = grids.grid.iter().map(|&u| truth.hazard().eval_unchecked(u)).collect();
    integrate_matrix(&grids.grid, |i| from_rows(&grids.p[i]) * (lam[i] * grids.g_c[i]), truth.dim())
}

/// Monte Carlo estimate of `A` from `reps` draws of `(X, Y)`.
pub fn matrix_a_mc(truth: &Truth, reps: usize, seed: u64) -> Result<DMatrix<f64>> {
    let m = truth.dim();
    let chunks = reps.div_ceil(MC_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, 1, c as u64);
            let mut acc = DMatrix::zeros(m, m);
            for _ in 0..MC_CHUNK.min(reps - c * MC_CHUNK) {
                let r = truth.sample_latent(&mut rng)?;
                let s = dot(truth.beta(), &r.x).exp() * truth.hazard().cumulative_unchecked(r.y());
                for i in 0..m {
                    for j in 0..m {
                        acc[(i, j)] += r.x[i] * r.x[j] * s;
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = parts.into_iter().fold(DMatrix::zeros(m, m), |a, b| a + b);
    Ok(total / reps as f64)
}

/// `M = int_0^tau T K G_C du`.
pub fn matrix_m(grids: &MomentGrids) -> Result<DMatrix<f64>> {
    let m = grids.a.first().map_or(0, Vec::len);
    integrate_matrix(&grids.grid, |i| from_rows(&grids.t[i]) * (grids.k[i] * grids.g_c[i]), m)
}

/// `S = int_0^tau K a a' G_C du`; `A - S = M`.
pub fn matrix_s(grids: &MomentGrids) -> Result<DMatrix<f64>> {
    let m = grids.a.first().map_or(0, Vec::len);
    integrate_matrix(
        &grids.grid,
        |i| {
            let a = nalgebra::DVector::from_column_slice(&grids.a[i]);
            &a * a.transpose() * (grids.k[i] * grids.g_c[i])
        },
        m,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreCovariance {
    /// `4 Cov(zeta)`.
    pub sigma_beta: Matrix,
    /// `Cov(zeta)`.
    pub covariance: Matrix,
    pub mean: Vec<f64>,
    /// Standard error of each entry of `covariance`.
    pub standard_error: Matrix,
    pub reps: usize,
}

/// Draws of `zeta = -Delta a(Y)/b(Y) + c(W) int_0^Y a K du + dq/dbeta` at the
/// truth, with `c(W) = exp(beta_0'W)/M_U(beta_0)`.
pub fn score_draws(truth: &Truth, grid: &[f64], hermite_nodes: usize, reps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let moments = Moments::new(truth, hermite_nodes)?;
    let ak = Cumulative::new(
        |u| {
            let (a, b) = moments.ab(u)?;
            let k = truth.hazard().eval_unchecked(u) / b;
            Ok(a.into_iter().map(|x| x * k).collect())
        },
        grid,
    )?;
    let beta = truth.beta();
    let e = truth.error();
    let mgf = e.mgf(beta);
    let moment = e.mgf_moment(beta);
    let m = truth.dim();
    let chunks = reps.div_ceil(MC_CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, 2, c as u64);
            let mut out = Vec::with_capacity(MC_CHUNK);
            for _ in 0..MC_CHUNK.min(reps - c * MC_CHUNK) {
                let r = truth.sample_latent(&mut rng)?;
                let (y, delta, w) = (r.y(), r.delta(), r.w());
                let ew = dot(beta, &w).exp();
                let cum = truth.hazard().cumulative_unchecked(y);
                let int_ak = ak.eval(y)?;
                let (a, b) = moments.ab(y)?;
                let d = f64::from(u8::from(delta));
                let zeta: Vec<f64> = (0..m)
                    .map(|j| {
                        let dq = d * w[j] - (mgf * w[j] - moment[j]) / (mgf * mgf) * ew * cum;
                        -d * a[j] / b + ew / mgf * int_ak[j] + dq
                    })
                    .collect();
                out.push(zeta);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Mean, unbiased covariance and the standard error of each covariance entry.
pub fn sample_covariance(draws: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = draws.len() as f64;
    let m = draws.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..m).map(|j| draws.iter().map(|z| z[j]).sum::<f64>() / n).collect();
    let mut cov = DMatrix::<f64>::zeros(m, m);
    let mut fourth = DMatrix::<f64>::zeros(m, m);
    for z in draws {
        for i in 0..m {
            for j in 0..m {
                let v = (z[i] - mean[i]) * (z[j] - mean[j]);
                cov[(i, j)] += v;
                fourth[(i, j)] += v * v;
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    let cov = cov / denom;
    let se = DMatrix::from_fn(m, m, |i, j| ((fourth[(i, j)] / n - cov[(i, j)].powi(2)).max(0.0) / n).sqrt());
    (mean, symmetrize(&cov), se)
}

/// `Sigma_beta = 4 Cov(zeta_1)` from `reps` Monte Carlo draws.
pub fn sigma_beta(
    truth: &Truth,
    grid: &[f64],
    hermite_nodes: usize,
    reps: usize,
    seed: u64,
) -> Result<ScoreCovariance> {
    if reps < 2 {
        return Err(Error::usage("score covariance needs at least 2 draws"));
    }
    let draws = score_draws(truth, grid, hermite_nodes, reps, seed)?;
    let (mean, cov, se) = sample_covariance(&draws);
    Ok(ScoreCovariance {
        sigma_beta: to_rows(&(&cov * 4.0)),
        covariance: to_rows(&cov),
        mean,
        standard_error: to_rows(&se),
        reps,
    })
}

/// `M^{-1} Sigma M^{-1}`, symmetrized.
pub fn sandwich(m: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let smallest = eig.iter().fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if !(smallest > 1e-12 * scale) || scale == 0.0 {
        return Err(Error::Condition {
            label: "(v)-(xii)",
            message: format!(
                "M is singular for this truth (smallest |eigenvalue| {smallest}), although these conditions make it invertible"
            ),
        });
    }
    let lu = m.clone().lu();
    let left = lu.solve(sigma).ok_or_else(|| Error::numeric("M is singular"))?;
    let both = lu.solve(&left.transpose()).ok_or_else(|| Error::numeric("M is singular"))?;
    Ok(symmetrize(&both))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticTables {
    pub settings: AsymptoticSettings,
    #[serde(flatten)]
    pub grids: MomentGrids,
    #[serde(rename = "A")]
    pub a_matrix: Matrix,
    #[serde(rename = "M")]
    pub m_matrix: Matrix,
    #[serde(rename = "Sigma_beta")]
    pub sigma_beta: Matrix,
    pub score: ScoreCovariance,
    /// `M^{-1} Sigma_beta M^{-1}`.
    pub sandwich: Matrix,
}

impl AsymptoticTables {
    pub fn a(&self) -> DMatrix<f64> {
        from_rows(&self.a_matrix)
    }

    pub fn m(&self) -> DMatrix<f64> {
        from_rows(&self.m_matrix)
    }

    pub fn sandwich(&self) -> DMatrix<f64> {
        from_rows(&self.sandwich)
    }
}

pub fn compute_tables(truth: &Truth, settings: &AsymptoticSettings) -> Result<AsymptoticTables> {
    let grid = uniform_grid(truth.tau(), settings.grid_nodes)?;
    let grids = moment_grids(truth, &grid, settings.hermite_nodes)?;
    let a = matrix_a(truth, &grids)?;
    let m = matrix_m(&grids)?;
    let score = sigma_beta(truth, &grid, settings.hermite_nodes, settings.reps, settings.seed)?;
    let sigma = from_rows(&score.sigma_beta);
    let sw = sandwich(&m, &sigma)?;
    Ok(AsymptoticTables {
        settings: *settings,
        grids,
        a_matrix: to_rows(&a),
        m_matrix: to_rows(&m),
        sigma_beta: score.sigma_beta.clone(),
        score,
        sandwich: to_rows(&sw),
    })
}
