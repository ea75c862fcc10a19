//! Local-potential flow on a compact field grid.
//!
//! The potential surface u(field, field, k) is marched in the scale k as a
//! mixed initial-boundary value problem: quasi-linear diffusion in field
//! space, method of lines on a uniform grid, explicit fourth-order stepping
//! under a diffusion-based step guard. Alongside the march the solver
//! records the diagnostics that certify the problem stayed parabolic: the
//! minimum effective diffusion coefficient, the relative sensitivity of
//! that coefficient to the evolving solution, and discrete seminorms of the
//! surface up to fourth order.
//!
//! Grids live on a compact box. Axis 0 is the first scalar field (or the
//! dynamical field for the response-field model), axis 1 the second scalar
//! (or the response field). The fermionic model has no real-valued grid
//! representation and is deliberately handled at the coupling level only,
//! by the `flows` module.

pub mod fit;
pub mod rhs;
pub mod seminorm;
pub mod step;

use crate::flows::{MsrCouplings, ScalarCouplings};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpaError {
    #[error("invalid setup: {0}")]
    Invalid(String),
    #[error("log argument {argument} <= {threshold} at node ({i}, {j}), k = {k}")]
    LogDomain { k: f64, i: usize, j: usize, argument: f64, threshold: f64 },
    #[error("stability guard asks for dk = {required_dk:e} below the floor {min_step:e} at k = {k}")]
    StabilityGuard { k: f64, required_dk: f64, min_step: f64 },
    #[error("diffusion coefficient {sigma} is not positive at node ({i}, {j}), k = {k}")]
    SigmaNonPositive { k: f64, i: usize, j: usize, sigma: f64 },
    #[error("quasi-linear sensitivity {ratio} exceeds the cap {cap} at node ({i}, {j}), k = {k}")]
    KRatioExceeded { k: f64, i: usize, j: usize, ratio: f64, cap: f64 },
    #[error("normal-matrix condition {condition:.3e} exceeds {threshold:.1e} in the coupling fit")]
    IllConditionedFit { condition: f64, threshold: f64 },
    #[error("boundary datum failed: {0}")]
    Boundary(String),
}

/// Which closed-form right-hand side drives the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpaModel {
    TwoScalar { mu_sq: f64 },
    MsrD4 { mu_sq: f64 },
    MsrD3,
}

impl LpaModel {
    pub fn axis_names(&self) -> [&'static str; 2] {
        match self {
            LpaModel::TwoScalar { .. } => ["phi1", "phi2"],
            LpaModel::MsrD4 { .. } | LpaModel::MsrD3 => ["phi", "phitilde"],
        }
    }
}

/// Uniform tensor grid on a compact box in field space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldGrid {
    bounds: [(f64, f64); 2],
    points: [usize; 2],
}

impl FieldGrid {
    pub fn new(bounds: [(f64, f64); 2], points: [usize; 2]) -> Result<Self, LpaError> {
        for axis in 0..2 {
            let (lo, hi) = bounds[axis];
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(LpaError::Invalid(format!(
                    "axis {axis} bounds [{lo}, {hi}] are not a proper interval"
                )));
            }
            if points[axis] < 5 {
                return Err(LpaError::Invalid(format!(
                    "axis {axis} has {} points, need at least 5",
                    points[axis]
                )));
            }
        }
        Ok(FieldGrid { bounds, points })
    }

    pub fn bounds(&self, axis: usize) -> (f64, f64) {
        self.bounds[axis]
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points[axis] - 1) as f64
    }

    pub fn coord(&self, axis: usize, idx: usize) -> f64 {
        debug_assert!(idx < self.points[axis]);
        if idx + 1 == self.points[axis] {
            self.bounds[axis].1
        } else {
            self.bounds[axis].0 + idx as f64 * self.spacing(axis)
        }
    }

    pub fn node_count(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.points[0] && j < self.points[1]);
        i * self.points[1] + j
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.points[0] || j + 1 == self.points[1]
    }

    /// Row-major iteration over all (i, j) nodes.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (n0, n1) = (self.points[0], self.points[1]);
        (0..n0).flat_map(move |i| (0..n1).map(move |j| (i, j)))
    }

    /// Indices along one axis whose coordinate lies within `half_width` of
    /// the axis midpoint. Used for fitting stencils.
    pub fn centered_window(&self, axis: usize, half_width: f64) -> Vec<usize> {
        let (lo, hi) = self.bounds[axis];
        let mid = 0.5 * (lo + hi);
        let slack = 1e-12 * (hi - lo);
        (0..self.points[axis])
            .filter(|&idx| (self.coord(axis, idx) - mid).abs() <= half_width + slack)
            .collect()
    }
}

/// The potential sampled on a grid at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSurface {
    pub grid: FieldGrid,
    pub k: f64,
    values: Vec<f64>,
}

impl PotentialSurface {
    pub fn from_fn(grid: FieldGrid, k: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self, LpaError> {
        let mut values = Vec::with_capacity(grid.node_count());
        for (i, j) in grid.nodes() {
            let v = f(grid.coord(0, i), grid.coord(1, j));
            if !v.is_finite() {
                return Err(LpaError::Invalid(format!("non-finite initial value at ({i}, {j})")));
            }
            values.push(v);
        }
        Ok(PotentialSurface { grid, k, values })
    }

    pub fn constant(grid: FieldGrid, k: f64, c: f64) -> Result<Self, LpaError> {
        Self::from_fn(grid, k, |_, _| c)
    }

    pub(crate) fn from_values(grid: FieldGrid, k: f64, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        PotentialSurface { grid, k, values }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Initial surface plus the boundary datum for the rest of the march. The
/// datum is a callable so that companion-ODE boundaries can be plugged in;
/// it receives (axis-0 field, axis-1 field, k).
pub struct BoundaryData {
    pub init: PotentialSurface,
    pub beta: Box<dyn Fn(f64, f64, f64) -> Result<f64, LpaError>>,
}

impl BoundaryData {
    /// Boundary values held fixed at their initial-surface values.
    pub fn frozen(init: PotentialSurface) -> Self {
        let copy = init.clone();
        let beta = Box::new(move |x: f64, y: f64, _k: f64| {
            let grid = copy.grid;
            let i = nearest_index(&grid, 0, x);
            let j = nearest_index(&grid, 1, y);
            Ok(copy.value(i, j))
        });
        BoundaryData { init, beta }
    }

    pub fn with_beta(
        init: PotentialSurface,
        beta: impl Fn(f64, f64, f64) -> Result<f64, LpaError> + 'static,
    ) -> Self {
        BoundaryData { init, beta: Box::new(beta) }
    }

    /// The datum at the initial scale must reproduce the initial surface on
    /// the boundary, up to grid-level round-off.
    pub fn check_compatibility(&self) -> Result<(), LpaError> {
        let grid = self.init.grid;
        for (i, j) in grid.nodes() {
            if !grid.is_boundary(i, j) {
                continue;
            }
            let want = self.init.value(i, j);
            let got = (self.beta)(grid.coord(0, i), grid.coord(1, j), self.init.k)?;
            if (got - want).abs() > 1e-8 * (1.0 + want.abs()) {
                return Err(LpaError::Invalid(format!(
                    "boundary datum {got} disagrees with the initial surface {want} at ({i}, {j})"
                )));
            }
        }
        Ok(())
    }
}

fn nearest_index(grid: &FieldGrid, axis: usize, x: f64) -> usize {
    let (lo, _) = grid.bounds(axis);
    let raw = ((x - lo) / grid.spacing(axis)).round();
    (raw.max(0.0) as usize).min(grid.points(axis) - 1)
}

/// The symmetric quartic potential of the two-scalar model at one point.
pub fn scalar_ansatz(c: &ScalarCouplings, x: f64, y: f64) -> f64 {
    c.u0
        + 0.5 * (c.m1_sq * x * x + c.m2_sq * y * y)
        + c.lambda1 / 24.0 * x.powi(4)
        + c.lambda2 / 24.0 * y.powi(4)
        + c.lambda3 / 4.0 * x * x * y * y
}

/// The response-field potential at one point: linear in the response field
/// except for the noise term.
pub fn msr_ansatz(c: &MsrCouplings, phi: f64, phit: f64) -> f64 {
    c.u0 + c.m_sq * phi * phit + 0.5 * c.lambda * phi * phi * phit - c.noise_d * phit * phit
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FieldGrid {
        FieldGrid::new([(-0.5, 0.5), (-1.0, 1.0)], [5, 9]).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = grid();
        assert_eq!(g.spacing(0), 0.25);
        assert_eq!(g.spacing(1), 0.25);
        assert_eq!(g.coord(0, 0), -0.5);
        assert_eq!(g.coord(0, 4), 0.5);
        assert_eq!(g.coord(1, 8), 1.0);
        assert_eq!(g.node_count(), 45);
        assert!(g.is_boundary(0, 3));
        assert!(g.is_boundary(2, 8));
        assert!(!g.is_boundary(2, 4));
        let interior = g.nodes().filter(|&(i, j)| !g.is_boundary(i, j)).count();
        assert_eq!(interior, 3 * 7);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(FieldGrid::new([(0.0, 1.0), (0.0, 1.0)], [4, 5]).is_err());
        assert!(FieldGrid::new([(1.0, 1.0), (0.0, 1.0)], [5, 5]).is_err());
        assert!(FieldGrid::new([(0.0, f64::NAN), (0.0, 1.0)], [5, 5]).is_err());
    }

    #[test]
    fn centered_window_picks_the_middle() {
        let g = FieldGrid::new([(-0.5, 0.5), (-0.5, 0.5)], [41, 41]).unwrap();
        let w = g.centered_window(0, 1.0 / 6.0);
        assert_eq!(w.first(), Some(&14));
        assert_eq!(w.last(), Some(&26));
    }

    #[test]
    fn frozen_boundary_is_compatible() {
        let g = grid();
        let s = PotentialSurface::from_fn(g, 1.0, |x, y| x * x + 0.3 * y).unwrap();
        let b = BoundaryData::frozen(s);
        b.check_compatibility().unwrap();
        // Later scales return the same frozen values.
        assert_eq!((b.beta)(0.5, -1.0, 7.0).unwrap(), 0.25 - 0.3);
    }

    #[test]
    fn incompatible_boundary_detected() {
        let g = grid();
        let s = PotentialSurface::constant(g, 1.0, 2.0).unwrap();
        let b = BoundaryData::with_beta(s, |_, _, _| Ok(0.0));
        assert!(b.check_compatibility().is_err());
    }

    #[test]
    fn ansatz_values() {
        let c = ScalarCouplings {
            u0: 1.0,
            m1_sq: 2.0,
            m2_sq: 4.0,
            lambda1: 24.0,
            lambda2: 0.0,
            lambda3: 4.0,
            mu_sq: 1.0,
        };
        assert_eq!(scalar_ansatz(&c, 1.0, 0.0), 1.0 + 1.0 + 1.0);
        assert_eq!(scalar_ansatz(&c, 1.0, 1.0), 1.0 + 1.0 + 2.0 + 1.0 + 1.0);
        let m = MsrCouplings {
            u0: 0.5,
            m_sq: 3.0,
            lambda: 2.0,
            noise_d: 1.5,
            mu_sq: 1.0,
            dimension: crate::flows::MsrDimension::D4,
        };
        assert_eq!(msr_ansatz(&m, 2.0, 1.0), 0.5 + 6.0 + 4.0 - 1.5);
    }
}
