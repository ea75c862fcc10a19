//! Nodal right-hand sides for the potential flow.
//!
//! Both closed forms are driven by a regularized squared mass built from
//! second differences of the surface:
//!
//! * two-scalar: the two diagonal curvatures M_l^2 = d^2u/dphi_l^2 enter
//!   one log term each; off-diagonal curvature is dropped, which is the
//!   model's own reduction, not a numerical shortcut;
//! * response-field: the mixed curvature M^2 = d^2u/(dphi dphitilde)
//!   enters a single term B(M^2). The potential is linear in the response
//!   field (the noise term is field-constant curvature and drops out of the
//!   mixed difference), so M^2 is a function of the dynamical field alone;
//!   each interior column averages its mixed differences to use that fact.
//!
//! The response-field surface update distributes B across the
//! response-field sector as du/dk = B(0) + (phitilde/2)(B(phi) - B(0)).
//! The response-linear part of the potential then gains half the increment
//! of B, which is exactly the projection that produces the model's printed
//! coupling system (the mass picks up B'(0)/2, the cubic coupling B''(0)/2,
//! the noise amplitude stays flat). A literal phitilde-independent update
//! would freeze the response-linear couplings entirely and decouple the
//! surface flow from the coupling flow; the distributed form keeps the two
//! consistent, and reduces to the same B at phitilde-independent
//! observables.

use std::f64::consts::PI;

use super::{FieldGrid, LpaError, LpaModel, PotentialSurface};
use crate::flows::EPS_SING_FACTOR;

/// Second-difference mass fields backing one right-hand-side evaluation.
/// Entries outside the stated validity range are zero filler.
#[derive(Debug, Clone)]
pub(crate) enum MassFields {
    /// Diagonal curvatures; `m1` valid for interior axis-0 indices (any j),
    /// `m2` for interior axis-1 indices (any i).
    Scalar { m1: Vec<f64>, m2: Vec<f64> },
    /// Column-averaged mixed curvature, indexed by axis-0 column, valid at
    /// interior columns.
    MsrColumns { m: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct RhsData {
    /// Nodal d u / d k; boundary entries are zero filler (the stepper owns
    /// the boundary).
    pub dudk: Vec<f64>,
    pub masses: MassFields,
    pub sigma_min: f64,
    pub sigma_min_node: (usize, usize),
    pub sigma_abs_max: f64,
}

fn log_guard(k: f64, i: usize, j: usize, reg_mass: f64, mu_sq: f64) -> Result<(), LpaError> {
    let threshold = EPS_SING_FACTOR * mu_sq;
    if reg_mass <= threshold {
        return Err(LpaError::LogDomain { k, i, j, argument: reg_mass, threshold });
    }
    Ok(())
}

fn diag_second_differences(u: &PotentialSurface) -> (Vec<f64>, Vec<f64>) {
    let g = u.grid;
    let (n0, n1) = (g.points(0), g.points(1));
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let mut m1 = vec![0.0; g.node_count()];
    let mut m2 = vec![0.0; g.node_count()];
    for i in 1..n0 - 1 {
        for j in 0..n1 {
            m1[g.index(i, j)] =
                (u.value(i + 1, j) - 2.0 * u.value(i, j) + u.value(i - 1, j)) / (h0 * h0);
        }
    }
    for i in 0..n0 {
        for j in 1..n1 - 1 {
            m2[g.index(i, j)] =
                (u.value(i, j + 1) - 2.0 * u.value(i, j) + u.value(i, j - 1)) / (h1 * h1);
        }
    }
    (m1, m2)
}

pub(crate) fn msr_column_masses(u: &PotentialSurface) -> Vec<f64> {
    let g = u.grid;
    let (n0, n1) = (g.points(0), g.points(1));
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    let mut m = vec![0.0; n0];
    for (i, slot) in m.iter_mut().enumerate().take(n0 - 1).skip(1) {
        let mut acc = 0.0;
        for j in 1..n1 - 1 {
            acc += (u.value(i + 1, j + 1) - u.value(i + 1, j - 1) - u.value(i - 1, j + 1)
                + u.value(i - 1, j - 1))
                / (4.0 * h0 * h1);
        }
        *slot = acc / (n1 - 2) as f64;
    }
    m
}

/// B(M^2) for the response-field model and its diffusion coefficient
/// dB/dM^2.
fn msr_b_and_sigma(model: &LpaModel, k: f64, reg_mass: f64) -> (f64, f64) {
    match model {
        LpaModel::MsrD4 { mu_sq } => {
            let l = (reg_mass / mu_sq).ln();
            (k / (8.0 * PI * PI) * reg_mass * l, k / (8.0 * PI * PI) * (l + 1.0))
        }
        LpaModel::MsrD3 => (k / (4.0 * PI) * reg_mass, k / (4.0 * PI)),
        LpaModel::TwoScalar { .. } => unreachable!("scalar model has no single-channel B"),
    }
}

/// Locates the axis-0 value 0 between interior columns; returns the left
/// column and the interpolation weight.
fn origin_bracket(grid: &FieldGrid) -> Result<(usize, f64), LpaError> {
    let n0 = grid.points(0);
    let tol = 1e-9 * grid.spacing(0);
    for i in 1..n0 - 1 {
        if grid.coord(0, i).abs() <= tol {
            return Ok((i, 0.0));
        }
    }
    for i in 1..n0 - 2 {
        let (a, b) = (grid.coord(0, i), grid.coord(0, i + 1));
        if a < 0.0 && 0.0 < b {
            return Ok((i, -a / (b - a)));
        }
    }
    Err(LpaError::Invalid(
        "response-field grid must cover the origin of the dynamical field axis".into(),
    ))
}

pub(crate) fn evaluate(
    model: &LpaModel,
    u: &PotentialSurface,
    k: f64,
) -> Result<RhsData, LpaError> {
    if k <= 0.0 {
        return Err(LpaError::Invalid(format!("scale k = {k} must be positive")));
    }
    let g = u.grid;
    let (n0, n1) = (g.points(0), g.points(1));
    let mut dudk = vec![0.0; g.node_count()];
    let mut sigma_min = f64::INFINITY;
    let mut sigma_min_node = (1, 1);
    let mut sigma_abs_max = 0.0_f64;
    let note_sigma = |s: f64, node: (usize, usize), min: &mut f64, min_node: &mut (usize, usize), max: &mut f64| {
        if s < *min {
            *min = s;
            *min_node = node;
        }
        *max = max.max(s.abs());
    };

    match model {
        LpaModel::TwoScalar { mu_sq } => {
            let c = k / (8.0 * PI * PI);
            let (m1, m2) = diag_second_differences(u);
            for i in 1..n0 - 1 {
                for j in 1..n1 - 1 {
                    let idx = g.index(i, j);
                    let mut acc = 0.0;
                    for m in [&m1, &m2] {
                        let r = k * k + m[idx];
                        log_guard(k, i, j, r, *mu_sq)?;
                        let l = (r / mu_sq).ln();
                        acc += c * r * l;
                        note_sigma(
                            c * (l + 1.0),
                            (i, j),
                            &mut sigma_min,
                            &mut sigma_min_node,
                            &mut sigma_abs_max,
                        );
                    }
                    dudk[idx] = acc;
                }
            }
            Ok(RhsData {
                dudk,
                masses: MassFields::Scalar { m1, m2 },
                sigma_min,
                sigma_min_node,
                sigma_abs_max,
            })
        }
        LpaModel::MsrD4 { .. } | LpaModel::MsrD3 => {
            let masses = msr_column_masses(u);
            let mid = n1 / 2;
            let mut b = vec![0.0; n0];
            for i in 1..n0 - 1 {
                let r = k * k + masses[i];
                if let LpaModel::MsrD4 { mu_sq } = model {
                    log_guard(k, i, mid, r, *mu_sq)?;
                }
                let (bi, sigma) = msr_b_and_sigma(model, k, r);
                b[i] = bi;
                note_sigma(
                    sigma,
                    (i, mid),
                    &mut sigma_min,
                    &mut sigma_min_node,
                    &mut sigma_abs_max,
                );
            }
            let (i0, t) = origin_bracket(&g)?;
            let b0 = if t == 0.0 { b[i0] } else { b[i0] + t * (b[i0 + 1] - b[i0]) };
            for i in 1..n0 - 1 {
                for j in 1..n1 - 1 {
                    let phit = g.coord(1, j);
                    dudk[g.index(i, j)] = b0 + 0.5 * phit * (b[i] - b0);
                }
            }
            Ok(RhsData {
                dudk,
                masses: MassFields::MsrColumns { m: masses },
                sigma_min,
                sigma_min_node,
                sigma_abs_max,
            })
        }
    }
}

/// Nodal d u / d k at the interior; boundary entries are zero (the boundary
/// belongs to the datum, not to the flow).
pub fn rhs_surface(
    model: &LpaModel,
    u: &PotentialSurface,
    k: f64,
) -> Result<Vec<f64>, LpaError> {
    evaluate(model, u, k).map(|d| d.dudk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{MsrCouplings, MsrDimension};
    use crate::lpa::msr_ansatz;

    fn square_grid(n: usize) -> FieldGrid {
        FieldGrid::new([(-0.5, 0.5), (-0.5, 0.5)], [n, n]).unwrap()
    }

    #[test]
    fn flat_surface_at_matched_reference_scale_is_stationary() {
        let k = 1.3_f64;
        let model = LpaModel::TwoScalar { mu_sq: k * k };
        let u = PotentialSurface::constant(square_grid(9), k, 0.7).unwrap();
        let d = rhs_surface(&model, &u, k).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_differences_reproduce_planted_curvatures() {
        // Cubic per axis: central second differences are exact there.
        let g = square_grid(11);
        let u = PotentialSurface::from_fn(g, 1.0, |x, y| {
            0.3 * x * x * x - 0.2 * x * x + 0.5 * y * y * y + x * y
        })
        .unwrap();
        let (m1, m2) = diag_second_differences(&u);
        for i in 1..10 {
            for j in 0..11 {
                let x = g.coord(0, i);
                assert!((m1[g.index(i, j)] - (1.8 * x - 0.4)).abs() < 1e-12);
            }
        }
        for i in 0..11 {
            for j in 1..10 {
                let y = g.coord(1, j);
                assert!((m2[g.index(i, j)] - 3.0 * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quartic_curvature_error_shrinks_at_second_order() {
        let planted = |x: f64, y: f64| x.powi(4) + 0.1 * y;
        let exact = |x: f64| 12.0 * x * x;
        let max_err = |n: usize| {
            let g = square_grid(n);
            let u = PotentialSurface::from_fn(g, 1.0, planted).unwrap();
            let (m1, _) = diag_second_differences(&u);
            let mut e = 0.0_f64;
            for i in 1..n - 1 {
                e = e.max((m1[g.index(i, 0)] - exact(g.coord(0, i))).abs());
            }
            e
        };
        let (e1, e2) = (max_err(11), max_err(21));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn column_masses_are_first_differences_of_the_response_linear_part() {
        // u = phitilde * W(phi) - D phitilde^2 with cubic W: the mixed
        // difference is the central first difference of W', j-independent,
        // and the noise term drops out.
        let g = square_grid(11);
        let h = g.spacing(0);
        let w = |x: f64| x * x * x;
        let u = PotentialSurface::from_fn(g, 1.0, |x, y| y * w(x) - 2.0 * y * y).unwrap();
        let m = msr_column_masses(&u);
        for i in 1..10 {
            let x = g.coord(0, i);
            let expect = 3.0 * x * x + h * h;
            assert!((m[i] - expect).abs() < 1e-12, "{} vs {expect}", m[i]);
        }
    }

    #[test]
    fn msr_rhs_matches_the_analytic_sector_form() {
        let c = MsrCouplings {
            u0: 0.3,
            m_sq: 0.1,
            lambda: 0.2,
            noise_d: 1.0,
            mu_sq: 1.0,
            dimension: MsrDimension::D4,
        };
        let k = 1.2_f64;
        let g = square_grid(21);
        let u = PotentialSurface::from_fn(g, k, |x, y| msr_ansatz(&c, x, y)).unwrap();
        let b = |phi: f64| {
            let r = k * k + c.m_sq + c.lambda * phi;
            k / (8.0 * PI * PI) * r * (r / c.mu_sq).ln()
        };
        let d = rhs_surface(&LpaModel::MsrD4 { mu_sq: c.mu_sq }, &u, k).unwrap();
        for i in 1..20 {
            for j in 1..20 {
                let (x, y) = (g.coord(0, i), g.coord(1, j));
                let expect = b(0.0) + 0.5 * y * (b(x) - b(0.0));
                assert!((d[g.index(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn d3_rhs_is_linear_in_the_mass() {
        let c = MsrCouplings {
            u0: 0.0,
            m_sq: 0.4,
            lambda: 0.6,
            noise_d: 0.5,
            mu_sq: 1.0,
            dimension: MsrDimension::D3,
        };
        let k = 0.8_f64;
        let g = square_grid(9);
        let u = PotentialSurface::from_fn(g, k, |x, y| msr_ansatz(&c, x, y)).unwrap();
        let b = |phi: f64| k / (4.0 * PI) * (k * k + c.m_sq + c.lambda * phi);
        let d = rhs_surface(&LpaModel::MsrD3, &u, k).unwrap();
        for i in 1..8 {
            for j in 1..8 {
                let (x, y) = (g.coord(0, i), g.coord(1, j));
                let expect = b(0.0) + 0.5 * y * (b(x) - b(0.0));
                assert!((d[g.index(i, j)] - expect).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn log_domain_reports_the_offending_node() {
        // Curvature -1.5 everywhere pushes k^2 + M^2 to -0.5.
        let u = PotentialSurface::from_fn(square_grid(9), 1.0, |x, _| -0.75 * x * x).unwrap();
        let err = rhs_surface(&LpaModel::TwoScalar { mu_sq: 1.0 }, &u, 1.0).unwrap_err();
        match err {
            LpaError::LogDomain { i, j, argument, .. } => {
                assert_eq!((i, j), (1, 1));
                assert!((argument + 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn msr_grid_must_cover_the_origin() {
        let g = FieldGrid::new([(0.5, 1.5), (-0.5, 0.5)], [9, 9]).unwrap();
        let u = PotentialSurface::constant(g, 1.0, 0.0).unwrap();
        assert!(matches!(
            rhs_surface(&LpaModel::MsrD3, &u, 1.0),
            Err(LpaError::Invalid(_))
        ));
    }

    #[test]
    fn sigma_extrema_recorded() {
        let model = LpaModel::MsrD4 { mu_sq: 1.0 };
        let u = PotentialSurface::constant(square_grid(9), 1.0, 0.0).unwrap();
        let d = evaluate(&model, &u, 1.0).unwrap();
        // Flat surface: sigma = (k/8pi^2)(log(k^2/mu^2)+1) at every column.
        let expect = 1.0 / (8.0 * PI * PI);
        assert!((d.sigma_min - expect).abs() < 1e-15);
        assert!((d.sigma_abs_max - expect).abs() < 1e-15);
    }
}
