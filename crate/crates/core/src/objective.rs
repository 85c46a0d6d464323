//! The corrected log-likelihood objective.
//!
//! For one record,
//! `q = Delta (log lambda(Y) + beta'W) - exp(beta'W) / M_U(beta) * Lambda(Y)`,
//! where dividing by the error mgf makes the expectation over `U` match the
//! error-free term.

use crate::data::{Dataset, Record};
use crate::error::{Error, Result};
use crate::error_model::{dot, ErrorModel};
use crate::extended::ExtendedValue;
use crate::hazard::SplineHazard;

fn check_record(rec: &Record<'_>, h: &SplineHazard, beta: &[f64], e: &ErrorModel) -> Result<()> {
    if rec.y.is_nan() || rec.y < 0.0 || rec.y > h.tau() {
        return Err(Error::Domain { what: "y", value: rec.y, tau: h.tau() });
    }
    if beta.len() != rec.w.len() {
        return Err(Error::Dimension { expected: rec.w.len(), got: beta.len(), context: "beta" });
    }
    if e.dim() != rec.w.len() {
        return Err(Error::Dimension { expected: rec.w.len(), got: e.dim(), context: "error model" });
    }
    Ok(())
}

fn term(rec: &Record<'_>, h: &SplineHazard, beta: &[f64], mgf: f64) -> ExtendedValue {
    let lin = dot(beta, rec.w);
    let integral = h.cumulative_unchecked(rec.y);
    let compensator = lin.exp() / mgf * integral;
    if rec.delta {
        let rate = h.eval_unchecked(rec.y);
        if rate <= 0.0 {
            return ExtendedValue::NegInfinity;
        }
        ExtendedValue::Finite(rate.ln() + lin - compensator)
    } else {
        ExtendedValue::Finite(-compensator)
    }
}

/// Contribution `q(Y, Delta, W; lambda, beta)` of a single record; `-inf`
/// when an event falls where the hazard is zero.
pub fn corrected_term(rec: &Record<'_>, h: &SplineHazard, beta: &[f64], e: &ErrorModel) -> Result<ExtendedValue> {
    check_record(rec, h, beta, e)?;
    Ok(term(rec, h, beta, e.mgf(beta)))
}

/// `Q_n^cor(lambda, beta)`: the mean of [`corrected_term`] over the dataset.
pub fn corrected_objective(d: &Dataset, h: &SplineHazard, beta: &[f64], e: &ErrorModel) -> Result<ExtendedValue> {
    if d.is_empty() {
        return Err(Error::usage("the corrected objective needs at least one record"));
    }
    if (d.tau() - h.tau()).abs() > 0.0 {
        return Err(Error::usage(format!("dataset tau {} differs from hazard tau {}", d.tau(), h.tau())));
    }
    let mgf = e.mgf(beta);
    let mut total = ExtendedValue::ZERO;
    for rec in d.records() {
        check_record(&rec, h, beta, e)?;
        total = total + term(&rec, h, beta, mgf);
        if !total.is_finite() {
            return Ok(ExtendedValue::NegInfinity);
        }
    }
    Ok(total * (1.0 / d.len() as f64))
}
