//! Coupling extraction from potential surfaces and scale derivatives of the
//! truncation obtained by finite differences of the exact bracket.
//!
//! `fit_couplings` projects a surface onto the polynomial ansatz of its model
//! by least squares over a centered stencil, solving the normal equations
//! with a Cholesky factorization and reporting their condition number.
//! The stencil spans the middle third of the grid in each axis so boundary
//! layers never contaminate the fit.
//!
//! `project_betas_*_fd` differentiates the closed-form one-loop bracket at
//! the origin of field space with Richardson-extrapolated central stencils.
//! Agreement of these projections with the hand-derived coupling flows is a
//! consistency check between the functional and ODE layers.

use super::{LpaError, LpaModel, PotentialSurface};
use crate::flows::{MsrCouplings, MsrDimension, ScalarCouplings, EPS_SING_FACTOR};
use std::f64::consts::PI;

/// Condition cap for the normal equations.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Base offsets of the origin stencils of the beta projections; each
/// stencil is evaluated at its base step, half, and quarter for the
/// extrapolation. Fourth differences divide by h^4 and amplify round-off,
/// so they start from a larger base.
const FD_STEP: f64 = 0.06;
const FD_STEP_QUARTIC: f64 = 0.16;

/// Couplings recovered by a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedCouplings {
    TwoScalar(ScalarCouplings),
    Msr(MsrCouplings),
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub couplings: FittedCouplings,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub condition: f64,
}

impl FitResult {
    pub fn as_two_scalar(&self) -> Option<&ScalarCouplings> {
        match &self.couplings {
            FittedCouplings::TwoScalar(c) => Some(c),
            FittedCouplings::Msr(_) => None,
        }
    }

    pub fn as_msr(&self) -> Option<&MsrCouplings> {
        match &self.couplings {
            FittedCouplings::Msr(c) => Some(c),
            FittedCouplings::TwoScalar(_) => None,
        }
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i][p] * y[p];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for p in i + 1..n {
            s -= l[p][i] * x[p];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(r, x)| r * x).sum()).collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Extremal-eigenvalue ratio of a symmetric positive definite matrix, via
/// power iteration on A and inverse iteration through its factorization.
fn condition_number(a: &[Vec<f64>], l: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..80 {
        v = mat_vec(a, &v);
        if normalize(&mut v) == 0.0 {
            return f64::INFINITY;
        }
    }
    let lambda_max: f64 = v.iter().zip(mat_vec(a, &v)).map(|(x, y)| x * y).sum();
    let mut w = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..80 {
        w = chol_solve(l, &w);
        if normalize(&mut w) == 0.0 {
            return f64::INFINITY;
        }
    }
    let lambda_min: f64 = w.iter().zip(mat_vec(a, &w)).map(|(x, y)| x * y).sum();
    if lambda_min <= 0.0 {
        f64::INFINITY
    } else {
        lambda_max / lambda_min
    }
}

fn basis_eval(model: &LpaModel, x: f64, y: f64, out: &mut Vec<f64>) {
    out.clear();
    match model {
        LpaModel::TwoScalar { .. } => {
            let (x2, y2) = (x * x, y * y);
            out.extend_from_slice(&[1.0, x2, y2, x2 * x2, y2 * y2, x2 * y2]);
        }
        LpaModel::MsrD4 { .. } | LpaModel::MsrD3 => {
            out.extend_from_slice(&[1.0, x * y, x * x * y, y * y]);
        }
    }
}

/// Least-squares projection onto the model ansatz over the centered stencil.
pub fn fit_couplings(model: &LpaModel, u: &PotentialSurface) -> Result<FitResult, LpaError> {
    let grid = u.grid;
    let mut window = Vec::new();
    for axis in 0..2 {
        let (lo, hi) = grid.bounds(axis);
        window.push(grid.centered_window(axis, (hi - lo) / 6.0));
    }
    let dim = match model {
        LpaModel::TwoScalar { .. } => 6,
        LpaModel::MsrD4 { .. } | LpaModel::MsrD3 => 4,
    };
    let mut normal = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    let mut row = Vec::with_capacity(dim);
    for &i in &window[0] {
        for &j in &window[1] {
            basis_eval(model, grid.coord(0, i), grid.coord(1, j), &mut row);
            let val = u.value(i, j);
            for a in 0..dim {
                for b in 0..=a {
                    normal[a][b] += row[a] * row[b];
                }
                rhs[a] += row[a] * val;
            }
        }
    }
    for a in 0..dim {
        for b in a + 1..dim {
            normal[a][b] = normal[b][a];
        }
    }
    let l = cholesky(&normal).ok_or(LpaError::IllConditionedFit {
        condition: f64::INFINITY,
        threshold: CONDITION_LIMIT,
    })?;
    let condition = condition_number(&normal, &l);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(LpaError::IllConditionedFit { condition, threshold: CONDITION_LIMIT });
    }
    let coeff = chol_solve(&l, &rhs);

    let mut sq_sum = 0.0;
    let mut max_abs = 0.0_f64;
    let mut count = 0usize;
    for &i in &window[0] {
        for &j in &window[1] {
            basis_eval(model, grid.coord(0, i), grid.coord(1, j), &mut row);
            let fitted: f64 = row.iter().zip(&coeff).map(|(b, c)| b * c).sum();
            let r = u.value(i, j) - fitted;
            sq_sum += r * r;
            max_abs = max_abs.max(r.abs());
            count += 1;
        }
    }
    let residual_rms = (sq_sum / count as f64).sqrt();

    let couplings = match model {
        LpaModel::TwoScalar { mu_sq } => FittedCouplings::TwoScalar(ScalarCouplings {
            u0: coeff[0],
            m1_sq: 2.0 * coeff[1],
            m2_sq: 2.0 * coeff[2],
            lambda1: 24.0 * coeff[3],
            lambda2: 24.0 * coeff[4],
            lambda3: 4.0 * coeff[5],
            mu_sq: *mu_sq,
        }),
        LpaModel::MsrD4 { mu_sq } => FittedCouplings::Msr(MsrCouplings {
            u0: coeff[0],
            m_sq: coeff[1],
            lambda: 2.0 * coeff[2],
            noise_d: -coeff[3],
            mu_sq: *mu_sq,
            dimension: MsrDimension::D4,
        }),
        LpaModel::MsrD3 => FittedCouplings::Msr(MsrCouplings {
            u0: coeff[0],
            m_sq: coeff[1],
            lambda: 2.0 * coeff[2],
            noise_d: -coeff[3],
            mu_sq: 1.0,
            dimension: MsrDimension::D3,
        }),
    };
    Ok(FitResult { couplings, residual_rms, residual_max: max_abs, condition })
}

fn guarded_bracket(r: f64, k: f64, mu_sq: f64) -> Result<f64, LpaError> {
    if r <= EPS_SING_FACTOR * mu_sq {
        return Err(LpaError::LogDomain { k, i: 0, j: 0, argument: r, threshold: EPS_SING_FACTOR * mu_sq });
    }
    Ok(k / (8.0 * PI * PI) * r * (r / mu_sq).ln())
}

/// Bracket increment (k/8pi^2)[r log(r/mu^2) - r0 log(r0/mu^2)] for
/// r = r0 + delta, arranged so its magnitude is O(delta): the constant
/// level never enters the difference stencils, which keeps their round-off
/// proportional to the increment rather than to the full bracket.
fn bracket_increment(r0: f64, delta: f64, k: f64, mu_sq: f64) -> Result<f64, LpaError> {
    let r = r0 + delta;
    if r <= EPS_SING_FACTOR * mu_sq {
        return Err(LpaError::LogDomain { k, i: 0, j: 0, argument: r, threshold: EPS_SING_FACTOR * mu_sq });
    }
    Ok(k / (8.0 * PI * PI) * (delta * (r / mu_sq).ln() + r0 * (delta / r0).ln_1p()))
}

/// Two-level Richardson extrapolation of a central stencil evaluated at h,
/// h/2 and h/4: removes the h^2 and h^4 error terms.
fn richardson(mut d: impl FnMut(f64) -> Result<f64, LpaError>, h: f64) -> Result<f64, LpaError> {
    let (d1, d2, d4) = (d(h)?, d(0.5 * h)?, d(0.25 * h)?);
    let a1 = (4.0 * d2 - d1) / 3.0;
    let a2 = (4.0 * d4 - d2) / 3.0;
    Ok((16.0 * a2 - a1) / 15.0)
}

fn first_diff(f: &mut impl FnMut(f64) -> Result<f64, LpaError>, h: f64) -> Result<f64, LpaError> {
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

fn second_diff(f: &mut impl FnMut(f64) -> Result<f64, LpaError>, h: f64) -> Result<f64, LpaError> {
    Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
}

fn fourth_diff(f: &mut impl FnMut(f64) -> Result<f64, LpaError>, h: f64) -> Result<f64, LpaError> {
    Ok((f(2.0 * h)? - 4.0 * f(h)? + 6.0 * f(0.0)? - 4.0 * f(-h)? + f(-2.0 * h)?) / h.powi(4))
}

fn cross_diff(
    g: &mut impl FnMut(f64, f64) -> Result<f64, LpaError>,
    h: f64,
) -> Result<f64, LpaError> {
    let w = [1.0, -2.0, 1.0];
    let mut acc = 0.0;
    for (a, wa) in [-1.0, 0.0, 1.0].iter().zip(w) {
        for (b, wb) in [-1.0, 0.0, 1.0].iter().zip(w) {
            acc += wa * wb * g(a * h, b * h)?;
        }
    }
    Ok(acc / h.powi(4))
}

/// Scale derivative of the two-scalar couplings read off from origin-centered
/// finite differences of the bracket. Component order matches the coupling
/// flow in `flows`; the normalization point never moves.
pub fn project_betas_scalar_fd(c: &ScalarCouplings, k: f64) -> Result<ScalarCouplings, LpaError> {
    if !(k > 0.0) {
        return Err(LpaError::Invalid(format!("scale k = {k} must be positive")));
    }
    let (r01, r02) = (k * k + c.m1_sq, k * k + c.m2_sq);
    let u0 = guarded_bracket(r01, k, c.mu_sq)? + guarded_bracket(r02, k, c.mu_sq)?;
    // Increment of the bracket relative to the origin of field space; its
    // origin-centered differences are the coupling derivatives.
    let mut g = |p1: f64, p2: f64| -> Result<f64, LpaError> {
        let (rho1, rho2) = (0.5 * p1 * p1, 0.5 * p2 * p2);
        let d1 = c.lambda1 / 6.0 * rho1 + c.lambda3 / 2.0 * rho2;
        let d2 = c.lambda2 / 6.0 * rho2 + c.lambda3 / 2.0 * rho1;
        Ok(bracket_increment(r01, d1, k, c.mu_sq)? + bracket_increment(r02, d2, k, c.mu_sq)?)
    };
    let mut g1 = |p: f64| g(p, 0.0);
    let m1 = richardson(|s| second_diff(&mut g1, s), FD_STEP)?;
    let l1 = richardson(|s| fourth_diff(&mut g1, s), FD_STEP_QUARTIC)?;
    let mut g2 = |p: f64| g(0.0, p);
    let m2 = richardson(|s| second_diff(&mut g2, s), FD_STEP)?;
    let l2 = richardson(|s| fourth_diff(&mut g2, s), FD_STEP_QUARTIC)?;
    let l3 = richardson(|s| cross_diff(&mut g, s), FD_STEP_QUARTIC)?;
    Ok(ScalarCouplings {
        u0,
        m1_sq: m1,
        m2_sq: m2,
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        mu_sq: 0.0,
    })
}

/// Scale derivative of the stochastic couplings from finite differences of
/// the half-sector bracket; the noise coupling and normalization point are
/// exactly conserved.
pub fn project_betas_msr_fd(c: &MsrCouplings, k: f64) -> Result<MsrCouplings, LpaError> {
    if !(k > 0.0) {
        return Err(LpaError::Invalid(format!("scale k = {k} must be positive")));
    }
    let r0 = k * k + c.m_sq;
    let u0 = match c.dimension {
        MsrDimension::D4 => guarded_bracket(r0, k, c.mu_sq)?,
        MsrDimension::D3 => k / (4.0 * PI) * r0,
    };
    let mut b = |p: f64| -> Result<f64, LpaError> {
        match c.dimension {
            MsrDimension::D4 => bracket_increment(r0, c.lambda * p, k, c.mu_sq),
            MsrDimension::D3 => Ok(k / (4.0 * PI) * c.lambda * p),
        }
    };
    let m = 0.5 * richardson(|s| first_diff(&mut b, s), FD_STEP)?;
    let lam = 0.5 * richardson(|s| second_diff(&mut b, s), FD_STEP)?;
    Ok(MsrCouplings {
        u0,
        m_sq: m,
        lambda: lam,
        noise_d: 0.0,
        mu_sq: 0.0,
        dimension: c.dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{beta_msr, beta_two_scalar};
    use crate::lpa::{msr_ansatz, scalar_ansatz, FieldGrid};

    fn sample_scalar() -> ScalarCouplings {
        ScalarCouplings {
            u0: 0.3,
            m1_sq: 0.2,
            m2_sq: 0.5,
            lambda1: 1.1,
            lambda2: 0.8,
            lambda3: 0.15,
            mu_sq: 1.0,
        }
    }

    fn sample_msr(dimension: MsrDimension) -> MsrCouplings {
        MsrCouplings { u0: 0.1, m_sq: 0.3, lambda: 0.7, noise_d: 0.25, mu_sq: 1.0, dimension }
    }

    fn unit_grid(n: usize) -> FieldGrid {
        FieldGrid::new([(-0.5, 0.5), (-0.5, 0.5)], [n, n]).unwrap()
    }

    #[test]
    fn recovers_planted_scalar_ansatz() {
        let c = sample_scalar();
        let u = PotentialSurface::from_fn(unit_grid(41), 1.0, |x, y| scalar_ansatz(&c, x, y))
            .unwrap();
        let model = LpaModel::TwoScalar { mu_sq: 1.0 };
        let fit = fit_couplings(&model, &u).unwrap();
        let got = fit.as_two_scalar().unwrap();
        for (g, w) in got.to_array().iter().zip(c.to_array()) {
            assert!((g - w).abs() < 1e-9, "{g} vs {w}");
        }
        assert!(fit.residual_max < 1e-10);
        assert!(fit.condition < CONDITION_LIMIT, "condition {}", fit.condition);
    }

    #[test]
    fn recovers_planted_msr_ansatz() {
        for dim in [MsrDimension::D4, MsrDimension::D3] {
            let c = sample_msr(dim);
            let u = PotentialSurface::from_fn(unit_grid(41), 1.0, |x, y| msr_ansatz(&c, x, y))
                .unwrap();
            let model = match dim {
                MsrDimension::D4 => LpaModel::MsrD4 { mu_sq: 1.0 },
                MsrDimension::D3 => LpaModel::MsrD3,
            };
            let fit = fit_couplings(&model, &u).unwrap();
            let got = fit.as_msr().unwrap();
            assert!((got.u0 - c.u0).abs() < 1e-12);
            assert!((got.m_sq - c.m_sq).abs() < 1e-11);
            assert!((got.lambda - c.lambda).abs() < 1e-10);
            assert!((got.noise_d - c.noise_d).abs() < 1e-11);
            assert!(fit.residual_max < 1e-12);
        }
    }

    #[test]
    fn constant_surface_fits_pure_u0() {
        let u = PotentialSurface::constant(unit_grid(21), 1.0, 0.8).unwrap();
        let fit = fit_couplings(&LpaModel::TwoScalar { mu_sq: 1.0 }, &u).unwrap();
        let got = fit.as_two_scalar().unwrap();
        assert!((got.u0 - 0.8).abs() < 1e-12);
        // The quartic columns of the normal matrix are nearly collinear on
        // the small window, so zero couplings are recovered only to the
        // conditioning-limited accuracy.
        for v in &got.to_array()[1..6] {
            assert!(v.abs() < 1e-8, "{v:e}");
        }
    }

    #[test]
    fn minimal_grid_is_ill_conditioned() {
        // Five points leave a single stencil node; the normal matrix is then
        // rank one and the factorization must flag it.
        let u = PotentialSurface::constant(unit_grid(5), 1.0, 0.0).unwrap();
        let err = fit_couplings(&LpaModel::TwoScalar { mu_sq: 1.0 }, &u).unwrap_err();
        assert!(matches!(err, LpaError::IllConditionedFit { .. }), "{err}");
    }

    #[test]
    fn perturbed_surface_reports_residual() {
        let c = sample_msr(MsrDimension::D4);
        let u = PotentialSurface::from_fn(unit_grid(41), 1.0, |x, y| {
            msr_ansatz(&c, x, y) + 1e-3 * (17.0 * x).sin() * (19.0 * y).sin()
        })
        .unwrap();
        let fit = fit_couplings(&LpaModel::MsrD4 { mu_sq: 1.0 }, &u).unwrap();
        assert!(fit.residual_max > 1e-5);
        assert!(fit.residual_rms > 1e-6);
        assert!((fit.as_msr().unwrap().m_sq - c.m_sq).abs() < 0.05);
    }

    #[test]
    fn scalar_projection_matches_coupling_flow() {
        let mut c = sample_scalar();
        c.mu_sq = 0.7;
        for k in [0.4, 1.0, 2.5] {
            let fd = project_betas_scalar_fd(&c, k).unwrap();
            let ode = beta_two_scalar(&c, k).unwrap();
            for (name, (f, o)) in ScalarCouplings::NAMES
                .iter()
                .zip(fd.to_array().iter().zip(ode.to_array()))
            {
                // Stencil round-off leaves a small absolute floor.
                assert!((f - o).abs() < 1e-7 * o.abs() + 1e-10, "{name} at k={k}: {f} vs {o}");
            }
        }
    }

    #[test]
    fn msr_projection_matches_coupling_flow() {
        for dim in [MsrDimension::D4, MsrDimension::D3] {
            let c = sample_msr(dim);
            for k in [0.5, 1.0, 3.0] {
                let fd = project_betas_msr_fd(&c, k).unwrap();
                let ode = beta_msr(&c, k).unwrap();
                for (name, (f, o)) in
                    MsrCouplings::NAMES.iter().zip(fd.to_array().iter().zip(ode.to_array()))
                {
                    assert!((f - o).abs() < 1e-7 * o.abs() + 1e-10, "{name} at k={k}: {f} vs {o}");
                }
            }
        }
    }

    #[test]
    fn decoupled_scalars_keep_cross_coupling_flat() {
        let mut c = sample_scalar();
        c.lambda3 = 0.0;
        let fd = project_betas_scalar_fd(&c, 1.2).unwrap();
        assert!(fd.lambda3.abs() < 1e-9, "{}", fd.lambda3);
    }

    #[test]
    fn symmetric_scalars_project_symmetrically() {
        let c = ScalarCouplings {
            u0: 0.0,
            m1_sq: 0.3,
            m2_sq: 0.3,
            lambda1: 0.9,
            lambda2: 0.9,
            lambda3: 0.2,
            mu_sq: 1.0,
        };
        let fd = project_betas_scalar_fd(&c, 0.8).unwrap();
        assert!((fd.m1_sq - fd.m2_sq).abs() < 1e-13);
        assert!((fd.lambda1 - fd.lambda2).abs() < 1e-13);
    }

    #[test]
    fn deep_negative_mass_hits_log_domain() {
        let mut c = sample_msr(MsrDimension::D4);
        c.m_sq = -1.0;
        let err = project_betas_msr_fd(&c, 1.0).unwrap_err();
        assert!(matches!(err, LpaError::LogDomain { .. }), "{err}");
    }
}
