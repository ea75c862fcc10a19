//! Beta-function right-hand sides and coupling trajectories.
//!
//! The three coupling systems are implemented exactly as printed for the
//! four-dimensional Minkowski vacuum (and the three-dimensional response
//! field variant), with hbar = 1 and the 8 pi^2 / 4 pi prefactors hard-coded.
//! All formulas give k d/dk; the integrator works in d/dk, so every RHS
//! divides by k once at the end.
//!
//! Two exactness guarantees matter downstream and are arranged at the
//! expression level rather than asserted after the fact:
//!
//! * conserved couplings (the noise amplitude, the d3 and Dirac
//!   self-couplings) have literal 0.0 derivatives, so trajectories keep them
//!   bit-identical;
//! * the two scalar species are computed by mirrored expression trees, so
//!   swapping (m1, lambda1) with (m2, lambda2) in the input swaps the output
//!   bitwise.

pub mod integrate;
pub mod reference;

pub use integrate::{integrate_fixed_step, integrate_flow, FlowOptions};

use std::f64::consts::PI;
use thiserror::Error;

/// Log arguments are considered singular below this fraction of the
/// reference scale; keeps |log| bounded by about 18 while staying far from
/// the locus where local existence fails.
pub const EPS_SING_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("singular locus at k = {k}: regularized mass {argument} <= {threshold}")]
    SingularLocus { k: f64, argument: f64, threshold: f64 },
    #[error("invalid flow input: {0}")]
    InvalidInput(String),
}

/// Couplings of the symmetric two-scalar model. `mu_sq` is a run constant;
/// it rides along in the state vector with derivative zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCouplings {
    pub u0: f64,
    pub m1_sq: f64,
    pub m2_sq: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub mu_sq: f64,
}

impl ScalarCouplings {
    pub const NAMES: [&'static str; 7] =
        ["U0", "m1_sq", "m2_sq", "lambda1", "lambda2", "lambda3", "mu_sq"];

    pub fn to_array(self) -> [f64; 7] {
        [self.u0, self.m1_sq, self.m2_sq, self.lambda1, self.lambda2, self.lambda3, self.mu_sq]
    }

    pub fn from_array(y: [f64; 7]) -> Self {
        ScalarCouplings {
            u0: y[0],
            m1_sq: y[1],
            m2_sq: y[2],
            lambda1: y[3],
            lambda2: y[4],
            lambda3: y[5],
            mu_sq: y[6],
        }
    }

    /// Swaps the two species (masses and quartic self-couplings).
    pub fn swapped(self) -> Self {
        ScalarCouplings {
            m1_sq: self.m2_sq,
            m2_sq: self.m1_sq,
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsrDimension {
    D4,
    D3,
}

/// Couplings of the response-field (stochastic) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsrCouplings {
    pub u0: f64,
    pub m_sq: f64,
    pub lambda: f64,
    pub noise_d: f64,
    pub mu_sq: f64,
    pub dimension: MsrDimension,
}

impl MsrCouplings {
    pub const NAMES: [&'static str; 5] = ["U0", "m_sq", "lambda", "D", "mu_sq"];

    pub fn to_array(self) -> [f64; 5] {
        [self.u0, self.m_sq, self.lambda, self.noise_d, self.mu_sq]
    }

    pub fn from_array(y: [f64; 5], dimension: MsrDimension) -> Self {
        MsrCouplings {
            u0: y[0],
            m_sq: y[1],
            lambda: y[2],
            noise_d: y[3],
            mu_sq: y[4],
            dimension,
        }
    }
}

/// Couplings of the self-interacting Dirac model. The mass-like coupling
/// enters the energy density linearly and unsquared, exactly as the source
/// formulas are printed; the dimensional mismatch is inherited deliberately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracCouplings {
    pub u0: f64,
    pub m: f64,
    pub lambda: f64,
}

impl DiracCouplings {
    pub const NAMES: [&'static str; 3] = ["U0", "m", "lambda"];

    pub fn to_array(self) -> [f64; 3] {
        [self.u0, self.m, self.lambda]
    }

    pub fn from_array(y: [f64; 3]) -> Self {
        DiracCouplings { u0: y[0], m: y[1], lambda: y[2] }
    }
}

fn guard_log_argument(k: f64, reg_mass: f64, mu_sq: f64) -> Result<(), FlowError> {
    let threshold = EPS_SING_FACTOR * mu_sq;
    if reg_mass <= threshold {
        return Err(FlowError::SingularLocus { k, argument: reg_mass, threshold });
    }
    Ok(())
}

/// d(state)/dk for the two-scalar system.
pub fn beta_two_scalar(s: &ScalarCouplings, k: f64) -> Result<ScalarCouplings, FlowError> {
    if k <= 0.0 {
        return Err(FlowError::InvalidInput(format!("scale k = {k} must be positive")));
    }
    let (r1, r2) = (k * k + s.m1_sq, k * k + s.m2_sq);
    guard_log_argument(k, r1, s.mu_sq)?;
    guard_log_argument(k, r2, s.mu_sq)?;
    let (l1, l2) = ((r1 / s.mu_sq).ln(), (r2 / s.mu_sq).ln());
    let c = k * k / (8.0 * PI * PI);

    // The two species' components are mirrored expression trees: swapping
    // the inputs swaps the outputs bitwise.
    let u0 = c * ((s.m1_sq + k * k) * l1 + (s.m2_sq + k * k) * l2);
    let m1 = c * (s.lambda1 / 6.0 * (l1 + 1.0) + s.lambda3 / 2.0 * (l2 + 1.0));
    let m2 = c * (s.lambda2 / 6.0 * (l2 + 1.0) + s.lambda3 / 2.0 * (l1 + 1.0));
    let q1 = 3.0 * c * (s.lambda1 * s.lambda1 / 36.0 / r1 + s.lambda3 * s.lambda3 / 4.0 / r2);
    let q2 = 3.0 * c * (s.lambda2 * s.lambda2 / 36.0 / r2 + s.lambda3 * s.lambda3 / 4.0 / r1);
    // Factored through lambda3 so the symmetric-coupling subspace
    // lambda3 = 0 is preserved exactly.
    let q3 = c * s.lambda3 * (s.lambda1 / (12.0 * r1) + s.lambda2 / (12.0 * r2));

    Ok(ScalarCouplings {
        u0: u0 / k,
        m1_sq: m1 / k,
        m2_sq: m2 / k,
        lambda1: q1 / k,
        lambda2: q2 / k,
        lambda3: q3 / k,
        mu_sq: 0.0,
    })
}

/// d(state)/dk for the response-field system, in the chosen dimension.
pub fn beta_msr(s: &MsrCouplings, k: f64) -> Result<MsrCouplings, FlowError> {
    if k <= 0.0 {
        return Err(FlowError::InvalidInput(format!("scale k = {k} must be positive")));
    }
    let r = k * k + s.m_sq;
    let (u0, m_sq, lambda) = match s.dimension {
        MsrDimension::D4 => {
            guard_log_argument(k, r, s.mu_sq)?;
            let l = (r / s.mu_sq).ln();
            let c = k * k / (8.0 * PI * PI);
            (c * r * l, c * s.lambda / 2.0 * (l + 1.0), k * k / (4.0 * PI * PI) * s.lambda * s.lambda / 4.0 / r)
        }
        MsrDimension::D3 => (k * k / (4.0 * PI) * r, k * k / (8.0 * PI) * s.lambda, 0.0),
    };
    Ok(MsrCouplings {
        u0: u0 / k,
        m_sq: m_sq / k,
        lambda: lambda / k,
        noise_d: 0.0,
        mu_sq: 0.0,
        dimension: s.dimension,
    })
}

/// d(state)/dk for the Dirac system, verbatim from the printed formulas.
pub fn beta_dirac(s: &DiracCouplings, k: f64) -> Result<DiracCouplings, FlowError> {
    if k <= 0.0 {
        return Err(FlowError::InvalidInput(format!("scale k = {k} must be positive")));
    }
    Ok(DiracCouplings {
        u0: (k * (k * k + s.m)) / k,
        m: (k * k * k * s.lambda / 2.0) / k,
        lambda: 0.0,
    })
}

/// Result of the quartic boundedness certificate.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundedness {
    Ok,
    Violated { condition: &'static str, margin: f64 },
}

/// Checks that the quartic part of the potential is bounded below:
/// lambda1 > 0, lambda2 > 0, lambda1 lambda2 > 9 lambda3^2 (positive
/// definiteness of the quartic form). Equality counts as a violation.
pub fn check_boundedness(s: &ScalarCouplings) -> Boundedness {
    if s.lambda1 <= 0.0 {
        return Boundedness::Violated { condition: "lambda1 > 0", margin: s.lambda1 };
    }
    if s.lambda2 <= 0.0 {
        return Boundedness::Violated { condition: "lambda2 > 0", margin: s.lambda2 };
    }
    let margin = s.lambda1 * s.lambda2 - 9.0 * s.lambda3 * s.lambda3;
    if margin <= 0.0 {
        return Boundedness::Violated { condition: "lambda1*lambda2 > 9*lambda3^2", margin };
    }
    Boundedness::Ok
}

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    SingularLocus,
    StepUnderflow,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::ReachedEnd => "reached-end",
            Termination::SingularLocus => "singular-locus",
            Termination::StepUnderflow => "step-underflow",
        }
    }
}

/// Sampled solution of one coupling flow. `samples` holds (k, state vector)
/// at the initial point and after every accepted step; k is strictly
/// monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub names: &'static [&'static str],
    pub samples: Vec<(f64, Vec<f64>)>,
    pub termination: Termination,
}

impl FlowTrajectory {
    pub fn final_k(&self) -> f64 {
        self.samples.last().expect("trajectory holds the initial sample").0
    }

    pub fn final_state(&self) -> &[f64] {
        &self.samples.last().expect("trajectory holds the initial sample").1
    }
}
