//! Laws of the additive measurement error `U` in `W = X + U`.
//!
//! The estimator only ever needs `E exp(beta'U)` and `E[U exp(beta'U)]`;
//! sampling is used by the simulation and Monte Carlo modules.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ErrorSpec {
    /// No measurement error, `W = X`.
    None { dim: usize },
    /// Centered Gaussian with covariance `cov` (symmetric PSD).
    Gaussian { cov: Vec<Vec<f64>> },
    /// Discrete law on `atoms` with probabilities `probs`; must be centered.
    Finite { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ErrorSpec", into = "ErrorSpec")]
pub struct ErrorModel {
    spec: ErrorSpec,
    dim: usize,
    // factor S with S S' = cov, row-major, gaussian only
    sqrt_cov: Vec<f64>,
    cdf: Vec<f64>,
}

impl TryFrom<ErrorSpec> for ErrorModel {
    type Error = Error;

    fn try_from(spec: ErrorSpec) -> Result<Self> {
        match spec {
            ErrorSpec::None { dim } => Ok(ErrorModel::none(dim)),
            ErrorSpec::Gaussian { cov } => ErrorModel::gaussian(cov),
            ErrorSpec::Finite { atoms, probs } => ErrorModel::finite(atoms, probs),
        }
    }
}

impl From<ErrorModel> for ErrorSpec {
    fn from(e: ErrorModel) -> Self {
        e.spec
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric PSD square root `S` (row-major) with `S S' = cov`.
pub(crate) fn psd_sqrt(cov: &[Vec<f64>], what: &str) -> Result<Vec<f64>> {
    let m = cov.len();
    if cov.iter().any(|row| row.len() != m) {
        return Err(Error::usage(format!("{what} must be square")));
    }
    let mat = DMatrix::from_fn(m, m, |i, j| cov[i][j]);
    let scale = mat.amax().max(1.0);
    for i in 0..m {
        for j in 0..i {
            if (mat[(i, j)] - mat[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::usage(format!("{what} must be symmetric")));
            }
        }
    }
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::usage(format!("{what} has non-finite entries")));
    }
    let eig = SymmetricEigen::new(mat);
    if eig.eigenvalues.iter().any(|&ev| ev < -1e-10 * scale) {
        return Err(Error::usage(format!("{what} must be positive semidefinite")));
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|ev| ev.max(0.0).sqrt()));
    let s = &eig.eigenvectors * root;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            out.push(s[(i, j)]);
        }
    }
    Ok(out)
}

impl ErrorModel {
    pub fn none(dim: usize) -> Self {
        ErrorModel { spec: ErrorSpec::None { dim }, dim, sqrt_cov: Vec::new(), cdf: Vec::new() }
    }

    pub fn gaussian(cov: Vec<Vec<f64>>) -> Result<Self> {
        let dim = cov.len();
        if dim == 0 {
            return Err(Error::usage("gaussian error covariance must be at least 1x1"));
        }
        let sqrt_cov = psd_sqrt(&cov, "error covariance")?;
        Ok(ErrorModel { spec: ErrorSpec::Gaussian { cov }, dim, sqrt_cov, cdf: Vec::new() })
    }

    /// Isotropic Gaussian error `N(0, sigma^2 I_dim)`.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        let cov = (0..dim).map(|i| (0..dim).map(|j| if i == j { sigma * sigma } else { 0.0 }).collect()).collect();
        Self::gaussian(cov)
    }

    pub fn finite(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::usage("finite error law needs one probability per atom"));
        }
        let dim = atoms[0].len();
        if dim == 0 || atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::usage("error atoms must share a positive dimension"));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::usage("error probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!("error probabilities sum to {total}, not 1")));
        }
        let scale = atoms.iter().flatten().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for j in 0..dim {
            let mean: f64 = atoms.iter().zip(&probs).map(|(a, p)| p * a[j]).sum();
            if mean.abs() > MEAN_TOL * scale {
                return Err(Error::Condition {
                    label: "(iii)",
                    message: format!("measurement error must have mean zero, component {j} has mean {mean}"),
                });
            }
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(ErrorModel { spec: ErrorSpec::Finite { atoms, probs }, dim, sqrt_cov: Vec::new(), cdf })
    }

    /// Two symmetric atoms `+-u0` with probability one half each (scalar).
    pub fn two_point(u0: f64) -> Result<Self> {
        Self::finite(vec![vec![u0], vec![-u0]], vec![0.5, 0.5])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &ErrorSpec {
        &self.spec
    }

    pub fn is_none(&self) -> bool {
        matches!(self.spec, ErrorSpec::None { .. })
    }

    fn check_dim(&self, beta: &[f64]) {
        assert_eq!(beta.len(), self.dim, "beta has dimension {} but the error model has {}", beta.len(), self.dim);
    }

    /// `M_U(beta) = E exp(beta'U)`.
    pub fn mgf(&self, beta: &[f64]) -> f64 {
        self.check_dim(beta);
        match &self.spec {
            ErrorSpec::None { .. } => 1.0,
            ErrorSpec::Gaussian { cov } => {
                let q: f64 = cov.iter().zip(beta).map(|(row, b)| b * dot(row, beta)).sum();
                (0.5 * q).exp()
            }
            ErrorSpec::Finite { atoms, probs } => atoms.iter().zip(probs).map(|(u, p)| p * dot(beta, u).exp()).sum(),
        }
    }

    /// `E[U exp(beta'U)]`.
    pub fn mgf_moment(&self, beta: &[f64]) -> Vec<f64> {
        self.check_dim(beta);
        match &self.spec {
            ErrorSpec::None { dim } => vec![0.0; *dim],
            ErrorSpec::Gaussian { cov } => {
                let m = self.mgf(beta);
                cov.iter().map(|row| dot(row, beta) * m).collect()
            }
            ErrorSpec::Finite { atoms, probs } => {
                let mut out = vec![0.0; self.dim];
                for (u, p) in atoms.iter().zip(probs) {
                    let w = p * dot(beta, u).exp();
                    for (o, ui) in out.iter_mut().zip(u) {
                        *o += w * ui;
                    }
                }
                out
            }
        }
    }

    /// One draw of `U`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.spec {
            ErrorSpec::None { dim } => vec![0.0; *dim],
            ErrorSpec::Gaussian { .. } => {
                let m = self.dim;
                let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                (0..m).map(|i| dot(&self.sqrt_cov[i * m..(i + 1) * m], &z)).collect()
            }
            ErrorSpec::Finite { atoms, .. } => {
                let r: f64 = rng.random();
                let k = self.cdf.partition_point(|&c| c <= r).min(atoms.len() - 1);
                atoms[k].clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mgf_at_zero_is_one() {
        let models = [
            ErrorModel::none(2),
            ErrorModel::gaussian(vec![vec![0.2, 0.05], vec![0.05, 0.1]]).unwrap(),
            ErrorModel::finite(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap(),
        ];
        for e in &models {
            assert_eq!(e.mgf(&[0.0, 0.0]), 1.0);
            assert_eq!(e.mgf_moment(&[0.0, 0.0]), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn isotropic_gaussian_mgf() {
        let e = ErrorModel::isotropic(2, 0.3).unwrap();
        let beta = [0.7, -1.1];
        let norm2 = 0.7f64 * 0.7 + 1.1 * 1.1;
        assert_abs_diff_eq!(e.mgf(&beta), (0.09 * norm2 / 2.0).exp(), epsilon = 1e-14);
        let mom = e.mgf_moment(&beta);
        assert_abs_diff_eq!(mom[0], 0.09 * 0.7 * e.mgf(&beta), epsilon = 1e-14);
    }

    #[test]
    fn two_point_law() {
        let e = ErrorModel::two_point(0.4).unwrap();
        let b = 1.3;
        assert_abs_diff_eq!(e.mgf(&[b]), (b * 0.4f64).cosh(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.mgf_moment(&[b])[0], 0.4 * (b * 0.4f64).sinh(), epsilon = 1e-14);
    }

    #[test]
    fn uncentered_law_is_rejected() {
        let err = ErrorModel::finite(vec![vec![1.0], vec![0.0]], vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::Condition { label: "(iii)", .. }));
    }

    #[test]
    fn zero_covariance_matches_none() {
        let g = ErrorModel::gaussian(vec![vec![0.0]]).unwrap();
        let n = ErrorModel::none(1);
        for b in [-2.0, 0.0, 0.5] {
            assert_eq!(g.mgf(&[b]), n.mgf(&[b]));
            assert_eq!(g.mgf_moment(&[b]), n.mgf_moment(&[b]));
        }
    }

    #[test]
    fn json_tags() {
        let e: ErrorModel = serde_json::from_str(r#"{"kind":"gaussian","cov":[[0.09]]}"#).unwrap();
        assert_eq!(e.dim(), 1);
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"kind":"gaussian","cov":[[0.09]]}"#);
    }
}
