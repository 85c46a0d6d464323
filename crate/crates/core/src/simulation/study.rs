use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diagnostics::{normality, variance, NormalityDiagnostics, Summary};
use super::sample::{sample_dataset, substream_seed};
use crate::asymptotics::quadrature::gauss_legendre3;
use crate::asymptotics::{
    compute_tables, sample_covariance, sandwich, solve_fredholm, AsymptoticSettings, Matrix, Truth, Weight,
};
use crate::error::{Error, Result};
use crate::estimator::{fit_stage1, fit_stage2, Estimate, FitConfig};
use crate::hazard::SplineHazard;

/// Largest tolerated share of failed replicate fits.
const MAX_FAILURE_SHARE: f64 = 0.1;
/// Replications below which covariance comparisons are flagged as unreliable.
const LOW_REPLICATION: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Consistency,
    Normality,
}

fn default_functionals() -> Vec<Weight> {
    vec![Weight::One, Weight::Identity]
}

fn default_trim() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub truth: Truth,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub fit: FitConfig,
    #[serde(default = "default_functionals")]
    pub functionals: Vec<Weight>,
    #[serde(default)]
    pub seed: u64,
    /// Sup-norm errors are also reported on `[0, (1 - trim) tau]`.
    #[serde(default = "default_trim")]
    pub trim: f64,
    #[serde(default)]
    pub asymptotics: AsymptoticSettings,
}

impl StudyConfig {
    /// Default truth, box `[-1, 3]`, `L = 1`.
    pub fn default_fixture(sizes: Vec<usize>, replications: usize) -> Self {
        let truth = Truth::default_fixture();
        let bx = crate::param::ParamBox::new(vec![-1.0], vec![3.0]).expect("valid box");
        StudyConfig {
            fit: FitConfig::new(bx, 1.0, truth.tau()),
            truth,
            sizes,
            replications,
            functionals: default_functionals(),
            seed: 0,
            trim: default_trim(),
            asymptotics: AsymptoticSettings::default(),
        }
    }

    pub fn validate(&self, kind: StudyKind) -> Result<()> {
        self.fit.validate()?;
        if self.sizes.is_empty() || self.sizes.contains(&0) || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::usage("sample sizes must be positive and strictly increasing"));
        }
        if self.replications == 0 {
            return Err(Error::usage("replications must be at least 1"));
        }
        if kind == StudyKind::Consistency && self.sizes.len() < 3 {
            return Err(Error::usage("a consistency study needs at least 3 sample sizes"));
        }
        if (self.fit.tau - self.truth.tau()).abs() > 0.0 {
            return Err(Error::usage("fit tau differs from the truth's tau"));
        }
        if self.fit.param_box.dim() != self.truth.dim() {
            return Err(Error::Dimension {
                expected: self.truth.dim(),
                got: self.fit.param_box.dim(),
                context: "parameter box",
            });
        }
        if !(0.0..1.0).contains(&self.trim) {
            return Err(Error::usage(format!("trim must lie in [0, 1), got {}", self.trim)));
        }
        for w in &self.functionals {
            w.validate()?;
        }
        if kind == StudyKind::Normality {
            let bx = &self.fit.param_box;
            let interior = self.truth.beta().iter().enumerate().all(|(j, b)| *b > bx.lower()[j] && *b < bx.upper()[j]);
            if !interior {
                return Err(Error::Condition {
                    label: "(viii)",
                    message: "beta_0 must be an interior point of the parameter box".into(),
                });
            }
        }
        Ok(())
    }
}

/// Outcome of one replicate fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Replicate {
    pub n: usize,
    pub rep: usize,
    pub beta: Vec<f64>,
    pub supnorm_full: f64,
    pub supnorm_trim: f64,
    pub objective: f64,
    pub stage: u8,
    pub converged: bool,
    /// `min lambda` of the stage-1 hazard.
    pub stage1_min: f64,
    /// `min lambda` of the reported hazard.
    pub hazard_min: f64,
    /// `sqrt(n) int (lambda_hat - lambda_0) f G_C du`, one per configured `f`.
    pub functionals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSummary {
    pub weight: Weight,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    /// `sigma_phi^2(f)`.
    pub sigma_sq: Option<f64>,
    /// `Var <q', phi>`, the same bracket without the factor 4.
    pub bracket_variance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloorCheck {
    /// Replicates whose stage-1 hazard has a positive minimum.
    pub eligible: usize,
    /// Smallest `min lambda^(2) - mu^(1) / 2` over eligible replicates.
    pub min_margin: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub supnorm_full: Option<Summary>,
    pub supnorm_trim: Option<Summary>,
    pub beta_error: Option<Summary>,
    /// Sample covariance of `sqrt(n) (beta_hat - beta_0)`.
    pub empirical_cov: Option<Matrix>,
    /// Standard error of each entry of `empirical_cov`.
    pub empirical_cov_se: Option<Matrix>,
    pub normality: Vec<NormalityDiagnostics>,
    pub functionals: Vec<FunctionalSummary>,
    pub floor: Option<FloorCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheorySummary {
    #[serde(rename = "M")]
    pub m: Matrix,
    #[serde(rename = "Sigma_beta")]
    pub sigma_beta: Matrix,
    /// `M^{-1} Sigma_beta M^{-1}`.
    pub sandwich: Matrix,
    /// `M^{-1} Cov(zeta) M^{-1}`.
    pub score_sandwich: Matrix,
    pub fredholm_residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub supnorm_full_decreasing: bool,
    pub supnorm_trim_decreasing: bool,
    pub beta_error_decreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub seed: u64,
    pub replications: usize,
    pub trim: f64,
    pub sizes: Vec<SizeSummary>,
    /// Whether the medians strictly decrease along the sample sizes.
    pub trend: Option<Trend>,
    pub theory: Option<TheorySummary>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub replicates: Vec<Replicate>,
}

/// `sqrt(n) int_0^tau (lambda_hat - lambda_0) f G_C du`, integrated exactly
/// between the breakpoints of all four factors.
pub fn functional_statistic(hat: &SplineHazard, truth: &Truth, weight: &Weight, n: usize) -> f64 {
    let tau = truth.tau();
    let mut cuts: Vec<f64> = Vec::new();
    cuts.extend_from_slice(hat.breakpoints());
    cuts.extend_from_slice(truth.hazard().breakpoints());
    cuts.extend(truth.censor().breakpoints());
    cuts.extend(weight.breakpoints(tau));
    cuts.push(0.0);
    cuts.push(tau);
    cuts.retain(|t| (0.0..=tau).contains(t));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let g = |u: f64| {
        (hat.eval_unchecked(u) - truth.hazard().eval_unchecked(u)) * weight.eval(u, tau) * truth.censor().survival(u)
    };
    let integral: f64 = cuts.windows(2).map(|w| gauss_legendre3(g, w[0], w[1])).sum();
    (n as f64).sqrt() * integral
}

fn replicate(cfg: &StudyConfig, kind: StudyKind, size_idx: usize, rep: usize) -> Result<Replicate> {
    let n = cfg.sizes[size_idx];
    let seed = substream_seed(cfg.seed, size_idx as u64, rep as u64);
    let d = sample_dataset(&cfg.truth, n, seed)?;
    let e = cfg.truth.error();
    let s1 = fit_stage1(&d, e, &cfg.fit)?;
    let stage1_min = s1.hazard.min_value();
    let est: Estimate = match kind {
        StudyKind::Consistency => s1,
        StudyKind::Normality => fit_stage2(&d, e, &s1, &cfg.fit)?,
    };
    let tau = cfg.truth.tau();
    Ok(Replicate {
        n,
        rep,
        supnorm_full: est.hazard.sup_distance(cfg.truth.hazard(), tau)?,
        supnorm_trim: est.hazard.sup_distance(cfg.truth.hazard(), (1.0 - cfg.trim) * tau)?,
        objective: est.objective,
        stage: est.stage,
        converged: est.diagnostics.converged,
        stage1_min,
        hazard_min: est.hazard.min_value(),
        functionals: cfg.functionals.iter().map(|w| functional_statistic(&est.hazard, &cfg.truth, w, n)).collect(),
        beta: est.beta,
    })
}

// sample covariance and the standard error of each entry
fn covariance(rows: &[Vec<f64>]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    if rows.len() < 2 {
        return None;
    }
    let (_, cov, se) = sample_covariance(rows);
    Some((cov, se))
}

fn rows_of(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn summarize(
    cfg: &StudyConfig,
    kind: StudyKind,
    n: usize,
    reps: &[Replicate],
    failures: usize,
    theory: &[(f64, f64)],
) -> SizeSummary {
    let beta0 = cfg.truth.beta();
    let root_n = (n as f64).sqrt();
    let scaled: Vec<Vec<f64>> =
        reps.iter().map(|r| r.beta.iter().zip(beta0).map(|(b, b0)| root_n * (b - b0)).collect()).collect();
    let beta_err: Vec<f64> =
        reps.iter().map(|r| r.beta.iter().zip(beta0).map(|(b, b0)| (b - b0).powi(2)).sum::<f64>().sqrt()).collect();
    let cov = covariance(&scaled);
    let full: Vec<f64> = reps.iter().map(|r| r.supnorm_full).collect();
    let trim: Vec<f64> = reps.iter().map(|r| r.supnorm_trim).collect();
    let normality_diag =
        (0..beta0.len()).filter_map(|j| normality(&scaled.iter().map(|r| r[j]).collect::<Vec<_>>(), j)).collect();
    let functionals = cfg
        .functionals
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let vals: Vec<f64> = reps.iter().map(|r| r.functionals[k]).collect();
            FunctionalSummary {
                weight: w.clone(),
                mean: (!vals.is_empty()).then(|| super::diagnostics::mean(&vals)),
                variance: variance(&vals),
                sigma_sq: theory.get(k).map(|t| t.0),
                bracket_variance: theory.get(k).map(|t| t.1),
            }
        })
        .collect();
    let floor = (kind == StudyKind::Normality).then(|| {
        let margins: Vec<f64> =
            reps.iter().filter(|r| r.stage1_min > 0.0).map(|r| r.hazard_min - 0.5 * r.stage1_min).collect();
        FloorCheck {
            eligible: margins.len(),
            min_margin: margins.iter().copied().reduce(f64::min),
            violations: margins.iter().filter(|&&m| m < -1e-12).count(),
        }
    });
    SizeSummary {
        n,
        replications: reps.len() + failures,
        failures,
        nonconverged: reps.iter().filter(|r| !r.converged).count(),
        supnorm_full: Summary::of(&full),
        supnorm_trim: Summary::of(&trim),
        beta_error: Summary::of(&beta_err),
        empirical_cov: cov.as_ref().map(|c| rows_of(&c.0)),
        empirical_cov_se: cov.as_ref().map(|c| rows_of(&c.1)),
        normality: normality_diag,
        functionals,
        floor,
    }
}

fn strictly_decreasing(xs: impl Iterator<Item = Option<f64>>) -> bool {
    let v: Vec<Option<f64>> = xs.collect();
    v.iter().all(Option::is_some) && v.windows(2).all(|w| w[1].unwrap_or(f64::NAN) < w[0].unwrap_or(f64::NAN))
}

fn run(cfg: &StudyConfig, kind: StudyKind) -> Result<StudyReport> {
    cfg.validate(kind)?;
    let mut warnings = Vec::new();
    if cfg.replications < LOW_REPLICATION {
        warnings.push(format!(
            "only {} replications per size; covariance and normality summaries are unreliable",
            cfg.replications
        ));
    }

    let (theory, per_weight) = if kind == StudyKind::Normality {
        let tables = compute_tables(&cfg.truth, &cfg.asymptotics)?;
        let m = cfg.truth.dim();
        let cov = DMatrix::from_fn(m, m, |i, j| tables.score.covariance[i][j]);
        let score_sandwich = sandwich(&tables.m(), &cov)?;
        let mut per_weight = Vec::new();
        let mut residuals = Vec::new();
        for w in &cfg.functionals {
            let sol = solve_fredholm(&cfg.truth, &tables, w, cfg.asymptotics.reps, cfg.asymptotics.seed)?;
            residuals.push(sol.residual);
            per_weight.push((sol.sigma_sq, sol.variance));
        }
        let theory = TheorySummary {
            m: tables.m_matrix.clone(),
            sigma_beta: tables.sigma_beta.clone(),
            sandwich: tables.sandwich.clone(),
            score_sandwich: rows_of(&score_sandwich),
            fredholm_residuals: residuals,
        };
        (Some(theory), per_weight)
    } else {
        (None, Vec::new())
    };

    let jobs: Vec<(usize, usize)> =
        (0..cfg.sizes.len()).flat_map(|s| (0..cfg.replications).map(move |r| (s, r))).collect();
    let results: Vec<Result<Replicate>> = jobs.par_iter().map(|&(s, r)| replicate(cfg, kind, s, r)).collect();

    let mut sizes = Vec::new();
    let mut replicates = Vec::new();
    let mut chunks = results.into_iter();
    for &n in &cfg.sizes {
        let mut ok = Vec::new();
        let mut failures = 0;
        for (rep, res) in chunks.by_ref().take(cfg.replications).enumerate() {
            match res {
                Ok(r) => ok.push(r),
                Err(err) => {
                    failures += 1;
                    warnings.push(format!("n = {n}, replicate {rep}: {err}"));
                }
            }
        }
        if failures as f64 > MAX_FAILURE_SHARE * cfg.replications as f64 {
            return Err(Error::numeric(format!("{failures} of {} fits failed at n = {n}", cfg.replications)));
        }
        sizes.push(summarize(cfg, kind, n, &ok, failures, &per_weight));
        replicates.extend(ok);
    }

    let trend = (kind == StudyKind::Consistency).then(|| Trend {
        supnorm_full_decreasing: strictly_decreasing(sizes.iter().map(|s| s.supnorm_full.as_ref().map(|q| q.median))),
        supnorm_trim_decreasing: strictly_decreasing(sizes.iter().map(|s| s.supnorm_trim.as_ref().map(|q| q.median))),
        beta_error_decreasing: strictly_decreasing(sizes.iter().map(|s| s.beta_error.as_ref().map(|q| q.median))),
    });

    Ok(StudyReport {
        kind,
        seed: cfg.seed,
        replications: cfg.replications,
        trim: cfg.trim,
        sizes,
        trend,
        theory,
        warnings,
        replicates,
    })
}

/// Stage-1 fits across sample sizes, tracking sup-norm and parameter errors.
pub fn run_consistency_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run(cfg, StudyKind::Consistency)
}

/// Stage-2 fits compared against the sandwich covariance and the
/// hazard-functional variances.
pub fn run_normality_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run(cfg, StudyKind::Normality)
}

pub fn run_study(cfg: &StudyConfig, kind: StudyKind) -> Result<StudyReport> {
    run(cfg, kind)
}

/// One row per replicate: `n,rep,beta_hat_1..m,supnorm_full,supnorm_trim,objective,stage`.
pub fn write_replicates_csv<W: Write>(replicates: &[Replicate], dim: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string(), "rep".to_string()];
    header.extend((1..=dim).map(|j| format!("beta_hat_{j}")));
    header.extend(["supnorm_full", "supnorm_trim", "objective", "stage"].map(String::from));
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for r in replicates {
        let mut row = vec![r.n.to_string(), r.rep.to_string()];
        row.extend(r.beta.iter().map(|b| b.to_string()));
        row.extend([
            r.supnorm_full.to_string(),
            r.supnorm_trim.to_string(),
            r.objective.to_string(),
            r.stage.to_string(),
        ]);
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
