//! Exact symbolic layer: functionals, deformed products, perturbative maps.

pub mod coeff;
pub mod functional;
pub mod model;
pub mod perturb;
pub mod product;
pub mod term;

pub use coeff::Coeff;
pub use functional::{AlgebraError, Functional};
pub use model::{Channel, Coupling, Grading, KernelKind, Model, Species};
pub use perturb::{
    bogoliubov_truncated, dirac_potential, msr_potential, s_matrix_truncated,
    two_scalar_potential,
};
pub use product::{
    anti_time_ordered_product, deformed_product, pointwise_product, star_h, star_product,
    time_ordered_product, uniform_assignment, KernelAssignment,
};
pub use term::{FieldFactor, PropagatorSymbol, Term, TermKey, VertexId};
