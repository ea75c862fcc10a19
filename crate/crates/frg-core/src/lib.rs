//! Symbolic contraction engine and renormalization-group flow solvers.
//!
//! The crate has three layers:
//!
//! * [`algebra`]: exact symbolic functionals over three field models, their
//!   deformed and time-ordered products, truncated S-matrices, and the
//!   Bogoliubov map. Coefficients are Gaussian rationals; nothing rounds.
//! * `flows`: closed-form beta functions for the same models and a guarded
//!   adaptive integrator for coupling trajectories in the scale parameter.
//! * `lpa`: the local-potential-approximation flow as a method-of-lines PDE
//!   on a compact field grid, with well-posedness diagnostics and coupling
//!   extraction.

pub mod algebra;
pub mod flows;
pub mod lpa;
