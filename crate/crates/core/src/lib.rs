//! Corrected-score Cox regression with a known covariate measurement-error
//! law and a Lipschitz baseline hazard.

// guards like `!(x > 0.0)` are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod data;
pub mod error;
pub mod error_model;
pub mod estimator;
pub mod extended;
pub mod hazard;
pub mod objective;
pub mod param;
pub mod simulation;

pub use data::{Dataset, Record};
pub use error::{Error, Result};
pub use error_model::{ErrorModel, ErrorSpec};
pub use extended::ExtendedValue;
pub use hazard::{tent_transform, tent_transform_with_floor, HazardSpec, SplineHazard, SplineMode};
pub use objective::{corrected_objective, corrected_term};
pub use param::ParamBox;
