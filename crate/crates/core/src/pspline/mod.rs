//! Penalized B-spline (P-spline) surrogates: per-run smoothing, export to
//! piecewise cubic polynomials, and a coefficient-response model that predicts
//! profiles at new factor settings.

pub mod basis;
pub mod fit;
pub mod piecewise;
pub mod response;

pub use basis::{basis_matrix, basis_row, BasisMatrix, KnotVector};
pub use fit::{
    default_lambda_grid, fit, fit_xy, gcv_scores, log_grid, select_lambda, select_lambda_pooled, GcvScore, SplineModel,
};
pub use piecewise::{eval_piecewise, to_piecewise, PiecewiseCubic};
pub use response::{fit_response, predict_profile, CoeffResponseModel};
