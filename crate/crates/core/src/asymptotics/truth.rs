//! The data-generating law: baseline hazard, regression parameter, and the
//! laws of the covariate, the censor and the measurement error.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::quadrature::gauss_hermite;
use crate::error::{Error, Result};
use crate::error_model::{dot, psd_sqrt, ErrorModel};
use crate::hazard::SplineHazard;

const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovariateLaw {
    Finite { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl CovariateLaw {
    pub fn dim(&self) -> usize {
        match self {
            CovariateLaw::Finite { atoms, .. } => atoms.first().map_or(0, Vec::len),
            CovariateLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Weighted points representing the law: the atoms themselves, or a
    /// tensor Gauss-Hermite rule with `hermite_nodes` points per coordinate.
    pub fn support(&self, hermite_nodes: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        match self {
            CovariateLaw::Finite { atoms, probs } => Ok(atoms.iter().cloned().zip(probs.iter().copied()).collect()),
            CovariateLaw::Gaussian { mean, cov } => {
                let m = mean.len();
                let s = psd_sqrt(cov, "covariate covariance")?;
                let (z, w) = gauss_hermite(hermite_nodes.max(1));
                let mut points = vec![(Vec::with_capacity(m), 1.0)];
                for _ in 0..m {
                    points = points
                        .iter()
                        .flat_map(|(p, pw)| {
                            z.iter().zip(&w).map(move |(zi, wi)| {
                                let mut q = p.clone();
                                q.push(*zi);
                                (q, pw * wi)
                            })
                        })
                        .collect();
                }
                Ok(points
                    .into_iter()
                    .map(|(zv, wt)| {
                        let x = (0..m).map(|i| mean[i] + dot(&s[i * m..(i + 1) * m], &zv)).collect();
                        (x, wt)
                    })
                    .collect())
            }
        }
    }

    fn covariance(&self) -> Vec<Vec<f64>> {
        match self {
            CovariateLaw::Gaussian { cov, .. } => cov.clone(),
            CovariateLaw::Finite { atoms, probs } => {
                let m = self.dim();
                let mean: Vec<f64> = (0..m).map(|j| atoms.iter().zip(probs).map(|(a, p)| p * a[j]).sum()).collect();
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| {
                                atoms.iter().zip(probs).map(|(a, p)| p * (a[i] - mean[i]) * (a[j] - mean[j])).sum()
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.dim();
        if m == 0 {
            return Err(Error::usage("covariate law must have positive dimension"));
        }
        match self {
            CovariateLaw::Finite { atoms, probs } => {
                if atoms.len() != probs.len() || atoms.iter().any(|a| a.len() != m) {
                    return Err(Error::usage("covariate atoms need equal dimensions and one probability each"));
                }
                check_probs(probs, "covariate")?;
                if atoms.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::usage("covariate atoms must be finite"));
                }
            }
            CovariateLaw::Gaussian { mean, cov } => {
                if cov.len() != m || mean.iter().any(|x| !x.is_finite()) {
                    return Err(Error::usage("covariate mean and covariance dimensions differ"));
                }
                psd_sqrt(cov, "covariate covariance")?;
            }
        }
        Ok(())
    }

    /// Condition (vi): the covariate covariance is positive definite.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let cov = self.covariance();
        let m = cov.len();
        let mat = DMatrix::from_fn(m, m, |i, j| cov[i][j]);
        let scale = mat.amax().max(f64::MIN_POSITIVE);
        let min_ev = mat.symmetric_eigenvalues().min();
        if min_ev <= 1e-12 * scale || mat.amax() == 0.0 {
            return Err(Error::Condition {
                label: "(vi)",
                message: format!("covariate covariance must be positive definite (smallest eigenvalue {min_ev})"),
            });
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            CovariateLaw::Finite { atoms, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return a.clone();
                    }
                }
                atoms[atoms.len() - 1].clone()
            }
            CovariateLaw::Gaussian { mean, cov } => {
                let m = mean.len();
                // validated at construction
                let s = psd_sqrt(cov, "covariate covariance").unwrap_or_else(|_| vec![0.0; m * m]);
                let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                (0..m).map(|i| mean[i] + dot(&s[i * m..(i + 1) * m], &z)).collect()
            }
        }
    }
}

fn check_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::usage(format!("{what} probabilities must be nonnegative")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::usage(format!("{what} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CensorComponent {
    Uniform { lo: f64, hi: f64, weight: f64 },
    Point { at: f64, weight: f64 },
}

impl CensorComponent {
    fn weight(&self) -> f64 {
        match *self {
            CensorComponent::Uniform { weight, .. } | CensorComponent::Point { weight, .. } => weight,
        }
    }
}

/// Mixture of uniform and point-mass components on `[0, tau]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorLaw {
    pub components: Vec<CensorComponent>,
}

impl CensorLaw {
    /// `C = tau` almost surely.
    pub fn fixed(tau: f64) -> Self {
        CensorLaw { components: vec![CensorComponent::Point { at: tau, weight: 1.0 }] }
    }

    /// `G_C(u) = P(C >= u)`.
    pub fn survival(&self, u: f64) -> f64 {
        self.components
            .iter()
            .map(|c| match *c {
                CensorComponent::Uniform { lo, hi, weight } => {
                    let s = if u <= lo {
                        1.0
                    } else if u >= hi {
                        0.0
                    } else {
                        (hi - u) / (hi - lo)
                    };
                    weight * s
                }
                CensorComponent::Point { at, weight } => {
                    if u <= at {
                        weight
                    } else {
                        0.0
                    }
                }
            })
            .sum()
    }

    /// Points where `G_C` has a kink or a jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for c in &self.components {
            match *c {
                CensorComponent::Uniform { lo, hi, .. } => out.extend([lo, hi]),
                CensorComponent::Point { at, .. } => out.push(at),
            }
        }
        out
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let pick = self
            .components
            .iter()
            .find(|c| {
                acc += c.weight();
                u < acc
            })
            .unwrap_or(&self.components[self.components.len() - 1]);
        match *pick {
            CensorComponent::Uniform { lo, hi, .. } => lo + (hi - lo) * rng.random::<f64>(),
            CensorComponent::Point { at, .. } => at,
        }
    }

    fn validate(&self, tau: f64) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::usage("censor law needs at least one component"));
        }
        let weights: Vec<f64> = self.components.iter().map(CensorComponent::weight).collect();
        check_probs(&weights, "censor component")?;
        for c in &self.components {
            match *c {
                CensorComponent::Uniform { lo, hi, weight } => {
                    if !(lo >= 0.0 && lo < hi && hi <= tau) {
                        return Err(Error::usage(format!(
                            "uniform censor component needs 0 <= lo < hi <= tau, got [{lo}, {hi}]"
                        )));
                    }
                    let _ = weight;
                }
                CensorComponent::Point { at, weight } => {
                    if !(at >= 0.0 && at <= tau) {
                        return Err(Error::usage(format!("censor point {at} lies outside [0, {tau}]")));
                    }
                    if at == 0.0 && weight > 0.0 {
                        return Err(Error::Condition {
                            label: "(x)",
                            message: "the censor must satisfy P(C > 0) = 1".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSpec {
    pub hazard: SplineHazard,
    pub beta: Vec<f64>,
    pub covariate: CovariateLaw,
    pub censor: CensorLaw,
    pub error: ErrorModel,
}

/// A validated data-generating law.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TruthSpec", into = "TruthSpec")]
pub struct Truth {
    spec: TruthSpec,
}

impl TryFrom<TruthSpec> for Truth {
    type Error = Error;

    fn try_from(spec: TruthSpec) -> Result<Self> {
        Truth::new(spec.hazard, spec.beta, spec.covariate, spec.censor, spec.error)
    }
}

impl From<Truth> for TruthSpec {
    fn from(t: Truth) -> Self {
        t.spec
    }
}

/// One draw of the full (partly latent) record.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentRecord {
    pub x: Vec<f64>,
    /// Lifetime, `None` when it exceeds `tau`.
    pub t: Option<f64>,
    pub c: f64,
    pub u: Vec<f64>,
}

impl LatentRecord {
    pub fn y(&self) -> f64 {
        self.t.map_or(self.c, |t| t.min(self.c))
    }

    pub fn delta(&self) -> bool {
        self.t.is_some_and(|t| t <= self.c)
    }

    pub fn w(&self) -> Vec<f64> {
        self.x.iter().zip(&self.u).map(|(x, u)| x + u).collect()
    }
}

impl Truth {
    pub fn new(
        hazard: SplineHazard,
        beta: Vec<f64>,
        covariate: CovariateLaw,
        censor: CensorLaw,
        error: ErrorModel,
    ) -> Result<Self> {
        let truth = Self::new_degenerate(hazard, beta, covariate, censor, error)?;
        truth.covariate().check_nondegenerate()?;
        Ok(truth)
    }

    /// As [`Truth::new`] without the positive-definiteness check on the
    /// covariate covariance. Such truths break identifiability of `beta_0` but
    /// keep the moment functions well defined, which closed-form checks use.
    pub fn new_degenerate(
        hazard: SplineHazard,
        beta: Vec<f64>,
        covariate: CovariateLaw,
        censor: CensorLaw,
        error: ErrorModel,
    ) -> Result<Self> {
        let m = beta.len();
        if m == 0 || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::usage("beta must be a nonempty finite vector"));
        }
        covariate.validate()?;
        if covariate.dim() != m {
            return Err(Error::Dimension { expected: m, got: covariate.dim(), context: "covariate law" });
        }
        if error.dim() != m {
            return Err(Error::Dimension { expected: m, got: error.dim(), context: "error model" });
        }
        hazard.check_membership()?;
        if !(hazard.min_value() > 0.0) {
            return Err(Error::Condition {
                label: "(vii)",
                message: format!("lambda_0 must be positive on [0, tau], but its minimum is {}", hazard.min_value()),
            });
        }
        censor.validate(hazard.tau())?;
        Ok(Truth { spec: TruthSpec { hazard, beta, covariate, censor, error } })
    }

    /// `tau = 1`, `lambda_0(t) = 0.5 + 0.4 t`, `beta_0 = 0.7`, `X` uniform on
    /// `{-1, 0, 1}`, `C` uniform on `[0.2, 1]` with probability 0.8 and `C = 1`
    /// otherwise, `U ~ N(0, 0.3^2)`, `L = 1`.
    pub fn default_fixture() -> Self {
        let hazard = SplineHazard::interp(1.0, 1.0, &[0.0, 1.0], &[0.5, 0.9]).expect("valid hazard");
        let third = 1.0 / 3.0;
        let covariate =
            CovariateLaw::Finite { atoms: vec![vec![-1.0], vec![0.0], vec![1.0]], probs: vec![third, third, third] };
        let censor = CensorLaw {
            components: vec![
                CensorComponent::Uniform { lo: 0.2, hi: 1.0, weight: 0.8 },
                CensorComponent::Point { at: 1.0, weight: 0.2 },
            ],
        };
        let error = ErrorModel::isotropic(1, 0.3).expect("valid error");
        Truth::new(hazard, vec![0.7], covariate, censor, error).expect("valid fixture")
    }

    pub fn hazard(&self) -> &SplineHazard {
        &self.spec.hazard
    }

    pub fn beta(&self) -> &[f64] {
        &self.spec.beta
    }

    pub fn covariate(&self) -> &CovariateLaw {
        &self.spec.covariate
    }

    pub fn censor(&self) -> &CensorLaw {
        &self.spec.censor
    }

    pub fn error(&self) -> &ErrorModel {
        &self.spec.error
    }

    pub fn tau(&self) -> f64 {
        self.spec.hazard.tau()
    }

    pub fn dim(&self) -> usize {
        self.spec.beta.len()
    }

    /// Copy with a different error law (same dimension).
    pub fn with_error(&self, error: ErrorModel) -> Result<Self> {
        let s = self.spec.clone();
        Truth::new(s.hazard, s.beta, s.covariate, s.censor, error)
    }

    /// `G_T(t | x) = exp(-exp(beta_0'x) Lambda_0(t))`.
    pub fn lifetime_survival(&self, t: f64, x: &[f64]) -> f64 {
        (-dot(&self.spec.beta, x).exp() * self.spec.hazard.cumulative_unchecked(t.clamp(0.0, self.tau()))).exp()
    }

    /// Draws `(X, T, C, U)`; `T = Lambda_0^{-1}(E exp(-beta_0'X))`.
    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LatentRecord> {
        let x = self.spec.covariate.sample(rng);
        let e: f64 = rng.sample(Exp1);
        let t = self.spec.hazard.inverse_cumulative(e * (-dot(&self.spec.beta, &x)).exp())?;
        let c = self.spec.censor.sample(rng);
        let u = self.spec.error.sample(rng);
        Ok(LatentRecord { x, t, c, u })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixture_is_valid_and_round_trips() {
        let t = Truth::default_fixture();
        let json = serde_json::to_string(&t).unwrap();
        let back: Truth = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        assert_eq!(t.censor().survival(0.1), 1.0);
        assert!((t.censor().survival(0.6) - 0.6).abs() < 1e-15);
        assert!((t.censor().survival(1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_hazard_cites_condition() {
        let h = SplineHazard::interp(1.0, 1.0, &[0.0, 1.0], &[0.0, 0.5]).unwrap();
        let t = Truth::default_fixture();
        let err = Truth::new(h, vec![0.7], t.covariate().clone(), t.censor().clone(), t.error().clone()).unwrap_err();
        assert!(err.to_string().contains("(vii)"), "{err}");
    }

    #[test]
    fn degenerate_covariate_cites_condition() {
        let t = Truth::default_fixture();
        let cov = CovariateLaw::Finite { atoms: vec![vec![0.0]], probs: vec![1.0] };
        let err = Truth::new(t.hazard().clone(), vec![0.7], cov, t.censor().clone(), t.error().clone()).unwrap_err();
        assert!(err.to_string().contains("(vi)"), "{err}");
    }

    #[test]
    fn censor_at_zero_cites_condition() {
        let t = Truth::default_fixture();
        let censor = CensorLaw {
            components: vec![
                CensorComponent::Point { at: 0.0, weight: 0.5 },
                CensorComponent::Point { at: 1.0, weight: 0.5 },
            ],
        };
        let err =
            Truth::new(t.hazard().clone(), vec![0.7], t.covariate().clone(), censor, t.error().clone()).unwrap_err();
        assert!(err.to_string().contains("(x)"), "{err}");
    }

    #[test]
    fn gaussian_support_matches_moments() {
        let law = CovariateLaw::Gaussian { mean: vec![0.5], cov: vec![vec![0.25]] };
        let pts = law.support(30).unwrap();
        let mean: f64 = pts.iter().map(|(x, w)| w * x[0]).sum();
        let mgf: f64 = pts.iter().map(|(x, w)| w * x[0].exp()).sum();
        assert!((mean - 0.5).abs() < 1e-13);
        assert!((mgf - (0.5f64 + 0.125).exp()).abs() < 1e-12);
    }

    #[test]
    fn latent_records_respect_censoring() {
        let truth = Truth::default_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let r = truth.sample_latent(&mut rng).unwrap();
            assert!(r.y() <= truth.tau() && r.y() > 0.0);
            assert_eq!(r.delta(), r.t.is_some_and(|t| t <= r.c));
        }
    }
}
