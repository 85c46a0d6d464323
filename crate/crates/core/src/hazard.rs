//! Piecewise-linear baseline hazards on `[0, tau]` with a Lipschitz bound.
//!
//! A [`SplineHazard`] stores the user-facing description (knots, node values,
//! mode) together with the breakpoint representation of the function it
//! denotes, so evaluation and integration are exact and `O(log k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack accepted when checking `|v[k+1] - v[k]| <= L * gap`.
const LIPSCHITZ_RTOL: f64 = 1e-10;
const LIPSCHITZ_ATOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplineMode {
    /// Pointwise-minimal Lipschitz function through the nodes (slopes `+-L`,
    /// truncated at the floor).
    Tent,
    /// Straight-line interpolation between nodes, flat outside them.
    Interp,
}

/// Serialized form, `{"tau", "L", "knots", "values", "mode"}` plus an optional
/// `floor` for tents truncated above zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardSpec {
    pub tau: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub mode: SplineMode,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub floor: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "HazardSpec", into = "HazardSpec")]
pub struct SplineHazard {
    tau: f64,
    lipschitz: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
    mode: SplineMode,
    floor: f64,
    // breakpoints of the piecewise-linear function, from 0 to tau
    bp_t: Vec<f64>,
    bp_v: Vec<f64>,
    // cumulative integral at each breakpoint
    cum: Vec<f64>,
}

impl TryFrom<HazardSpec> for SplineHazard {
    type Error = Error;

    fn try_from(spec: HazardSpec) -> Result<Self> {
        match spec.mode {
            SplineMode::Tent => {
                tent_transform_with_floor(&spec.knots, &spec.values, spec.lipschitz, spec.tau, spec.floor)
            }
            SplineMode::Interp => {
                if spec.floor != 0.0 {
                    return Err(Error::usage("floor is only meaningful for tent hazards"));
                }
                SplineHazard::interp(spec.tau, spec.lipschitz, &spec.knots, &spec.values)
            }
        }
    }
}

impl From<SplineHazard> for HazardSpec {
    fn from(h: SplineHazard) -> Self {
        HazardSpec {
            tau: h.tau,
            lipschitz: h.lipschitz,
            knots: h.knots,
            values: h.values,
            mode: h.mode,
            floor: h.floor,
        }
    }
}

fn validate_common(tau: f64, lipschitz: f64, knots: &[f64], values: &[f64], floor: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::usage(format!("tau must be positive and finite, got {tau}")));
    }
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(Error::usage(format!("Lipschitz constant must be finite and >= 0, got {lipschitz}")));
    }
    if !(floor.is_finite() && floor >= 0.0) {
        return Err(Error::usage(format!("floor must be finite and >= 0, got {floor}")));
    }
    if knots.is_empty() {
        return Err(Error::usage("a hazard needs at least one knot"));
    }
    if knots.len() != values.len() {
        return Err(Error::Dimension { expected: knots.len(), got: values.len(), context: "hazard values" });
    }
    for (i, &t) in knots.iter().enumerate() {
        if !(0.0..=tau).contains(&t) {
            return Err(Error::Domain { what: "knot", value: t, tau });
        }
        if i > 0 && t <= knots[i - 1] {
            return Err(Error::usage(format!("knots must be strictly increasing (knot {i} = {t})")));
        }
    }
    for &v in values {
        if !v.is_finite() || v < floor {
            return Err(Error::constraint(format!("hazard value {v} is below the floor {floor}")));
        }
    }
    Ok(())
}

fn lipschitz_ok(dv: f64, gap: f64, lipschitz: f64, scale: f64) -> bool {
    dv.abs() <= lipschitz * gap * (1.0 + LIPSCHITZ_RTOL) + LIPSCHITZ_ATOL * scale.max(1.0)
}

struct Breakpoints {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl Breakpoints {
    fn with_capacity(n: usize) -> Self {
        Breakpoints { t: Vec::with_capacity(n), v: Vec::with_capacity(n) }
    }

    fn push(&mut self, t: f64, v: f64) {
        self.t.push(t);
        self.v.push(v);
    }

    /// Pushes an interior point only if it lies strictly after the last one
    /// and strictly before `limit`.
    fn push_inside(&mut self, t: f64, v: f64, limit: f64) {
        if t > *self.t.last().unwrap_or(&f64::NEG_INFINITY) && t < limit {
            self.push(t, v);
        }
    }
}

/// The pointwise-minimal function in the Lipschitz cone through the nodes.
///
/// Between consecutive knots the result descends at slope `-L`, is cut at
/// zero, then ascends at `+L`. Before the first knot it is the ascending line
/// and after the last one the descending line, both cut at zero.
pub fn tent_transform(knots: &[f64], values: &[f64], lipschitz: f64, tau: f64) -> Result<SplineHazard> {
    tent_transform_with_floor(knots, values, lipschitz, tau, 0.0)
}

/// Same as [`tent_transform`] with the pieces cut at `floor` instead of zero:
/// the minimal Lipschitz function through the nodes that stays `>= floor`.
pub fn tent_transform_with_floor(
    knots: &[f64],
    values: &[f64],
    lipschitz: f64,
    tau: f64,
    floor: f64,
) -> Result<SplineHazard> {
    validate_common(tau, lipschitz, knots, values, floor)?;
    for k in 1..knots.len() {
        let gap = knots[k] - knots[k - 1];
        let dv = values[k] - values[k - 1];
        if !lipschitz_ok(dv, gap, lipschitz, values[k].max(values[k - 1])) {
            return Err(Error::constraint(format!(
                "node values {} at t={} and {} at t={} differ by more than L * gap (L = {lipschitz})",
                values[k - 1],
                knots[k - 1],
                values[k],
                knots[k]
            )));
        }
    }

    let n = knots.len();
    let mut bp = Breakpoints::with_capacity(3 * n + 4);
    let l = lipschitz;

    if l == 0.0 {
        // feasibility forces equal node values
        bp.push(0.0, values[0]);
        bp.push(tau, values[0]);
        return Ok(SplineHazard::assemble(tau, l, knots, values, SplineMode::Tent, floor, bp));
    }

    // left boundary piece
    let (t1, v1) = (knots[0], values[0]);
    if t1 > 0.0 {
        let start = v1 - l * t1;
        if start >= floor {
            bp.push(0.0, start);
        } else {
            bp.push(0.0, floor);
            bp.push_inside(t1 - (v1 - floor) / l, floor, t1);
        }
    }
    bp.push(t1, v1);

    for k in 1..n {
        let (ta, va) = (knots[k - 1], values[k - 1]);
        let (tb, vb) = (knots[k], values[k]);
        let gap = tb - ta;
        let bottom = 0.5 * (va + vb - l * gap);
        if bottom >= floor {
            let b = ta + 0.5 * (va - vb + l * gap) / l;
            bp.push_inside(b, bottom, tb);
        } else {
            bp.push_inside(ta + (va - floor) / l, floor, tb);
            bp.push_inside(tb - (vb - floor) / l, floor, tb);
        }
        bp.push(tb, vb);
    }

    // right boundary piece
    let (tn, vn) = (knots[n - 1], values[n - 1]);
    if tn < tau {
        let end = vn - l * (tau - tn);
        if end >= floor {
            bp.push(tau, end);
        } else {
            bp.push_inside(tn + (vn - floor) / l, floor, tau);
            bp.push(tau, floor);
        }
    }

    Ok(SplineHazard::assemble(tau, l, knots, values, SplineMode::Tent, floor, bp))
}

impl SplineHazard {
    /// Straight-line interpolation through the nodes, constant outside them.
    pub fn interp(tau: f64, lipschitz: f64, knots: &[f64], values: &[f64]) -> Result<Self> {
        validate_common(tau, lipschitz, knots, values, 0.0)?;
        for k in 1..knots.len() {
            let gap = knots[k] - knots[k - 1];
            let dv = values[k] - values[k - 1];
            if !lipschitz_ok(dv, gap, lipschitz, values[k].max(values[k - 1])) {
                return Err(Error::constraint(format!(
                    "segment [{}, {}] has slope {} exceeding L = {lipschitz}",
                    knots[k - 1],
                    knots[k],
                    dv / gap
                )));
            }
        }
        let n = knots.len();
        let mut bp = Breakpoints::with_capacity(n + 2);
        if knots[0] > 0.0 {
            bp.push(0.0, values[0]);
        }
        for (&t, &v) in knots.iter().zip(values) {
            bp.push(t, v);
        }
        if knots[n - 1] < tau {
            bp.push(tau, values[n - 1]);
        }
        Ok(Self::assemble(tau, lipschitz, knots, values, SplineMode::Interp, 0.0, bp))
    }

    /// The constant hazard `c` on `[0, tau]`.
    pub fn constant(tau: f64, c: f64, lipschitz: f64) -> Result<Self> {
        Self::interp(tau, lipschitz, &[0.0, tau], &[c, c])
    }

    fn assemble(
        tau: f64,
        lipschitz: f64,
        knots: &[f64],
        values: &[f64],
        mode: SplineMode,
        floor: f64,
        bp: Breakpoints,
    ) -> Self {
        let Breakpoints { t: bp_t, v: bp_v } = bp;
        let mut cum = Vec::with_capacity(bp_t.len());
        cum.push(0.0);
        for i in 1..bp_t.len() {
            let area = 0.5 * (bp_v[i - 1] + bp_v[i]) * (bp_t[i] - bp_t[i - 1]);
            cum.push(cum[i - 1] + area);
        }
        SplineHazard { tau, lipschitz, knots: knots.to_vec(), values: values.to_vec(), mode, floor, bp_t, bp_v, cum }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> SplineMode {
        self.mode
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Times at which the function changes slope, `0` and `tau` included.
    pub fn breakpoints(&self) -> &[f64] {
        &self.bp_t
    }

    /// Function values at [`Self::breakpoints`].
    pub fn breakpoint_values(&self) -> &[f64] {
        &self.bp_v
    }

    fn check_time(&self, what: &'static str, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.tau {
            Err(Error::Domain { what, value: t, tau: self.tau })
        } else {
            Ok(())
        }
    }

    // index j with bp_t[j] <= t < bp_t[j+1], or the last index at t = tau
    fn locate(&self, t: f64) -> usize {
        let j = self.bp_t.partition_point(|&x| x <= t);
        j.saturating_sub(1).min(self.bp_t.len() - 1)
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        let j = self.locate(t);
        let t0 = self.bp_t[j];
        if t == t0 || j + 1 == self.bp_t.len() {
            return self.bp_v[j];
        }
        let (t1, v0, v1) = (self.bp_t[j + 1], self.bp_v[j], self.bp_v[j + 1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub(crate) fn cumulative_unchecked(&self, y: f64) -> f64 {
        let j = self.locate(y);
        let t0 = self.bp_t[j];
        if y == t0 {
            return self.cum[j];
        }
        let v_y = self.eval_unchecked(y);
        self.cum[j] + 0.5 * (self.bp_v[j] + v_y) * (y - t0)
    }

    /// `lambda(t)`; exact at knots.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_time("t", t)?;
        Ok(self.eval_unchecked(t))
    }

    /// `int_0^y lambda(u) du`, in closed form.
    pub fn cumulative(&self, y: f64) -> Result<f64> {
        self.check_time("y", y)?;
        Ok(self.cumulative_unchecked(y))
    }

    /// `int_a^b lambda(u) du` for `0 <= a <= b <= tau`.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check_time("a", a)?;
        self.check_time("b", b)?;
        if a > b {
            return Err(Error::usage(format!("integral bounds out of order: {a} > {b}")));
        }
        Ok(self.cumulative_unchecked(b) - self.cumulative_unchecked(a))
    }

    /// `min_t lambda(t)` over `[0, tau]`.
    pub fn min_value(&self) -> f64 {
        self.bp_v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.bp_v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership in the Lipschitz cone: nonnegative and every segment has
    /// slope at most `L` in absolute value.
    pub fn check_membership(&self) -> Result<()> {
        if let Some(&v) = self.bp_v.iter().find(|&&v| !(v >= 0.0)) {
            return Err(Error::constraint(format!("hazard takes negative value {v}")));
        }
        for i in 1..self.bp_t.len() {
            let gap = self.bp_t[i] - self.bp_t[i - 1];
            let dv = self.bp_v[i] - self.bp_v[i - 1];
            if !lipschitz_ok(dv, gap, self.lipschitz, self.bp_v[i].max(self.bp_v[i - 1])) {
                return Err(Error::constraint(format!(
                    "segment [{}, {}] has slope {} exceeding L = {}",
                    self.bp_t[i - 1],
                    self.bp_t[i],
                    dv / gap,
                    self.lipschitz
                )));
            }
        }
        Ok(())
    }

    /// `sup_{t in [0, upper]} |self(t) - other(t)|`, exact for piecewise-linear
    /// functions: the supremum is attained at a breakpoint of either one.
    pub fn sup_distance(&self, other: &SplineHazard, upper: f64) -> Result<f64> {
        self.check_time("upper", upper)?;
        other.check_time("upper", upper)?;
        let diff = |t: f64| (self.eval_unchecked(t) - other.eval_unchecked(t)).abs();
        let mut sup = diff(upper);
        for &t in self.bp_t.iter().chain(other.bp_t.iter()) {
            if t <= upper {
                sup = sup.max(diff(t));
            }
        }
        Ok(sup)
    }

    /// Smallest `t` with `Lambda(t) = target`, or `None` when
    /// `target > Lambda(tau)`. Requires a strictly positive hazard.
    pub fn inverse_cumulative(&self, target: f64) -> Result<Option<f64>> {
        if !(target >= 0.0) {
            return Err(Error::usage(format!("cumulative hazard target must be >= 0, got {target}")));
        }
        if self.min_value() <= 0.0 {
            return Err(Error::Condition {
                label: "(vii)",
                message: "baseline hazard must be positive on [0, tau] to invert its integral".into(),
            });
        }
        let total = *self.cum.last().expect("breakpoints are never empty");
        if target > total {
            return Ok(None);
        }
        let j = self.cum.partition_point(|&c| c <= target).saturating_sub(1);
        if j + 1 >= self.bp_t.len() {
            return Ok(Some(self.tau));
        }
        let (t0, t1) = (self.bp_t[j], self.bp_t[j + 1]);
        let (v0, v1) = (self.bp_v[j], self.bp_v[j + 1]);
        let slope = (v1 - v0) / (t1 - t0);
        let r = target - self.cum[j];
        // Lambda(t0 + s) - cum[j] = v0 s + slope s^2 / 2
        let disc = (v0 * v0 + 2.0 * slope * r).max(0.0);
        let s = 2.0 * r / (v0 + disc.sqrt());
        Ok(Some((t0 + s).min(t1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_hazard_evaluates_everywhere() {
        let h = SplineHazard::constant(1.0, 2.0, 0.0).unwrap();
        for t in [0.0, 0.3, 0.77, 1.0] {
            assert_eq!(h.eval(t).unwrap(), 2.0);
        }
        assert_abs_diff_eq!(h.cumulative(0.3).unwrap(), 0.6, epsilon = 1e-15);
        assert_eq!(h.cumulative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tent_between_two_unit_nodes() {
        let h = tent_transform(&[0.0, 1.0], &[1.0, 1.0], 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(h.eval(0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.cumulative(1.0).unwrap(), 0.75, epsilon = 1e-15);
        assert_eq!(h.breakpoints(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_knot_boundary_values() {
        let h = tent_transform(&[0.5], &[1.0], 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(h.eval(0.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h.eval(1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(h.eval(0.5).unwrap(), 1.0);
    }

    #[test]
    fn boundary_pieces_are_cut_at_zero() {
        let h = tent_transform(&[0.5], &[0.2], 1.0, 1.0).unwrap();
        assert_eq!(h.eval(0.0).unwrap(), 0.0);
        assert_eq!(h.eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(h.eval(0.4).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(h.cumulative(1.0).unwrap(), 0.04, epsilon = 1e-15);
        h.check_membership().unwrap();
    }

    #[test]
    fn interior_dip_is_cut_at_floor() {
        let h = tent_transform_with_floor(&[0.0, 1.0], &[0.5, 0.5], 1.0, 1.0, 0.25).unwrap();
        assert_abs_diff_eq!(h.eval(0.5).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(h.min_value(), 0.25, epsilon = 1e-15);
        // 0.25 * 1 + two triangles of area 0.25^2 / 2
        assert_abs_diff_eq!(h.cumulative(1.0).unwrap(), 0.3125, epsilon = 1e-15);
    }

    #[test]
    fn infeasible_nodes_are_rejected() {
        let err = tent_transform(&[0.0, 0.1], &[0.0, 1.0], 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Constraint(_)));
    }

    #[test]
    fn out_of_domain_queries() {
        let h = SplineHazard::constant(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(h.eval(1.5), Err(Error::Domain { .. })));
        assert!(matches!(h.cumulative(-0.1), Err(Error::Domain { .. })));
    }

    #[test]
    fn exact_at_knots() {
        let knots = [0.1, 0.25, 0.4, 0.9];
        let values = [0.3, 0.35, 0.2, 0.6];
        let h = tent_transform(&knots, &values, 1.0, 1.0).unwrap();
        for (&t, &v) in knots.iter().zip(&values) {
            assert_eq!(h.eval(t).unwrap(), v);
        }
        let g = SplineHazard::interp(1.0, 1.0, &knots, &values).unwrap();
        for (&t, &v) in knots.iter().zip(&values) {
            assert_eq!(g.eval(t).unwrap(), v);
        }
    }

    #[test]
    fn inverse_of_linear_hazard() {
        let h = SplineHazard::interp(1.0, 1.0, &[0.0, 1.0], &[0.5, 0.9]).unwrap();
        for t in [0.0, 0.1, 0.5, 0.999, 1.0] {
            let target = h.cumulative(t).unwrap();
            let back = h.inverse_cumulative(target).unwrap().unwrap();
            assert_abs_diff_eq!(back, t, epsilon = 1e-12);
        }
        assert!(h.inverse_cumulative(0.71).unwrap().is_none());
    }

    #[test]
    fn json_shape() {
        let h = tent_transform(&[0.2, 0.6], &[0.4, 0.5], 1.0, 1.0).unwrap();
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, r#"{"tau":1.0,"L":1.0,"knots":[0.2,0.6],"values":[0.4,0.5],"mode":"tent"}"#);
        let back: SplineHazard = serde_json::from_str(&s).unwrap();
        assert_eq!(back.breakpoints(), h.breakpoints());
        let bad = r#"{"tau":1.0,"L":1.0,"knots":[0.2,0.3],"values":[0.0,0.5],"mode":"tent"}"#;
        assert!(serde_json::from_str::<SplineHazard>(bad).is_err());
    }
}
