use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamBox;

/// Slack `epsilon_n` allowed between the returned objective and the best one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonRule {
    Fixed {
        value: f64,
    },
    /// `c / n`.
    InverseN {
        c: f64,
    },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::InverseN { c: 1.0 }
    }
}

impl EpsilonRule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            EpsilonRule::Fixed { value } => value,
            EpsilonRule::InverseN { c } => c / n.max(1) as f64,
        }
    }
}

/// Barrier Newton settings for the node-value problem at fixed `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerSettings {
    /// Cap on Newton steps summed over all barrier stages.
    pub max_iterations: usize,
    /// Target duality gap, per observation.
    pub tolerance: f64,
    /// Barrier weight at the first stage, per observation.
    pub barrier_start: f64,
    /// Barrier weight reduction factor between stages, in (0, 1).
    pub barrier_shrink: f64,
    /// Step reduction factor of the backtracking line search, in (0, 1).
    pub backtrack: f64,
}

impl Default for InnerSettings {
    fn default() -> Self {
        InnerSettings { max_iterations: 500, tolerance: 1e-8, barrier_start: 1e-3, barrier_shrink: 0.1, backtrack: 0.5 }
    }
}

/// Multistart Nelder-Mead settings for the search over the parameter box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterSettings {
    pub starts: usize,
    /// Simplex size at which a local search stops, relative to the box width.
    pub tolerance: f64,
    /// Initial simplex edge, relative to the box width.
    pub initial_step: f64,
    pub max_evaluations: usize,
}

impl Default for OuterSettings {
    fn default() -> Self {
        OuterSettings { starts: 8, tolerance: 1e-6, initial_step: 0.1, max_evaluations: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub param_box: ParamBox,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub tau: f64,
    #[serde(default)]
    pub epsilon: EpsilonRule,
    #[serde(default)]
    pub inner: InnerSettings,
    #[serde(default)]
    pub outer: OuterSettings,
    #[serde(default)]
    pub seed: u64,
}

impl FitConfig {
    pub fn new(param_box: ParamBox, lipschitz: f64, tau: f64) -> Self {
        FitConfig {
            param_box,
            lipschitz,
            tau,
            epsilon: EpsilonRule::default(),
            inner: InnerSettings::default(),
            outer: OuterSettings::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::usage(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lipschitz.is_finite() && self.lipschitz >= 0.0) {
            return Err(Error::usage(format!("L must be finite and >= 0, got {}", self.lipschitz)));
        }
        match self.epsilon {
            EpsilonRule::Fixed { value } if !(value > 0.0) => {
                return Err(Error::usage("epsilon_n must be positive"));
            }
            EpsilonRule::InverseN { c } if !(c > 0.0) => {
                return Err(Error::usage("epsilon_n constant must be positive"));
            }
            _ => {}
        }
        let inner = &self.inner;
        if inner.max_iterations == 0 || !(inner.tolerance > 0.0) || !(inner.barrier_start > 0.0) {
            return Err(Error::usage("inner solver iterations, tolerance and barrier weight must be positive"));
        }
        if !(inner.barrier_shrink > 0.0 && inner.barrier_shrink < 1.0)
            || !(inner.backtrack > 0.0 && inner.backtrack < 1.0)
        {
            return Err(Error::usage("inner solver shrink factors must lie in (0, 1)"));
        }
        let outer = &self.outer;
        if outer.starts == 0 || !(outer.tolerance > 0.0) || !(outer.initial_step > 0.0) || outer.max_evaluations == 0 {
            return Err(Error::usage("outer search needs positive starts, tolerance, step and evaluation budget"));
        }
        Ok(())
    }

    pub fn epsilon_n(&self, n: usize) -> f64 {
        self.epsilon.at(n)
    }
}
