//! Population quantities under a known truth: moment functions, the
//! information matrices, the sandwich covariance and the Fredholm direction
//! behind the hazard-functional limit law.

mod fredholm;
mod moments;
pub mod quadrature;
mod tables;
mod truth;

pub use fredholm::{fredholm_residual, solve_fredholm, FredholmSolution, Weight};
pub use moments::{Cumulative, MomentPoint, Moments};
pub use tables::{
    compute_tables, matrix_a, matrix_a_mc, matrix_m, matrix_s, moment_grids, sample_covariance, sandwich, score_draws,
    sigma_beta, AsymptoticSettings, AsymptoticTables, Matrix, MomentGrids, ScoreCovariance,
};
pub use truth::{CensorComponent, CensorLaw, CovariateLaw, LatentRecord, Truth, TruthSpec};
