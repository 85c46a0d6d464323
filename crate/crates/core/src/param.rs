use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compact axis-aligned box for the regression parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxSpec", into = "BoxSpec")]
pub struct ParamBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl TryFrom<BoxSpec> for ParamBox {
    type Error = Error;

    fn try_from(s: BoxSpec) -> Result<Self> {
        ParamBox::new(s.lower, s.upper)
    }
}

impl From<ParamBox> for BoxSpec {
    fn from(b: ParamBox) -> Self {
        BoxSpec { lower: b.lower, upper: b.upper }
    }
}

impl ParamBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::usage("parameter box bounds must be nonempty and of equal length"));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::usage(format!(
                    "parameter box coordinate {j}: need finite lower <= upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(ParamBox { lower, upper })
    }

    /// The singleton box `{point}`.
    pub fn point(point: Vec<f64>) -> Result<Self> {
        Self::new(point.clone(), point)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Coordinates with `lower < upper`.
    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.width(j) > 0.0).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(j, v)| *v >= self.lower[j] && *v <= self.upper[j])
    }

    pub fn project(&self, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[j], self.upper[j]);
        }
    }

    /// Corners over the free coordinates, in binary counting order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let free = self.free_coords();
        (0..1usize << free.len())
            .map(|mask| {
                let mut c = self.lower.clone();
                for (bit, &j) in free.iter().enumerate() {
                    if mask >> bit & 1 == 1 {
                        c[j] = self.upper[j];
                    }
                }
                c
            })
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(&a, &b)| if b > a { rng.random_range(a..=b) } else { a }).collect()
    }
}
