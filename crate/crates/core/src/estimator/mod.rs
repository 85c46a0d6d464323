//! Two-stage corrected-score estimation of the baseline hazard and the
//! regression parameter.

mod brute;
mod config;
mod fit;
mod inner;
mod outer;
mod reduced;

pub use brute::{brute_force_fit, brute_force_search, GridOracle};
pub use config::{EpsilonRule, FitConfig, InnerSettings, OuterSettings};
pub use fit::{fit_stage1, fit_stage2, fit_with_floor, profile_hazard, Diagnostics, Estimate, Profile};
pub use inner::{maximize, maximize_from, InnerSolution};
pub use outer::{nelder_mead_max, LocalResult};
pub use reduced::{ReducedProblem, Tridiagonal};
