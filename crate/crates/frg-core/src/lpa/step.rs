//! Explicit marching of the potential surface with parabolicity guards.
//!
//! A single step is classical fourth-order Runge-Kutta on the interior
//! nodes; boundary nodes are overwritten from the boundary datum at the
//! scale of each internal stage and again, exactly, at the landing scale.
//! The step size obeys an explicit-diffusion guard
//! dk <= safety * h_min^2 / max |sigma|, with sigma the effective diffusion
//! coefficient of the frozen-coefficient linearization.
//!
//! `solve_flow` marches from the scale of the initial surface to a target
//! scale, records diagnostics after every accepted step, lands exactly on
//! requested checkpoint scales, and converts guard trips into an `Aborted`
//! termination that still carries the partial results.

use std::cell::RefCell;

use serde::Serialize;

use super::rhs::{evaluate, MassFields, RhsData};
use super::seminorm::seminorm_profile;
use super::{BoundaryData, FieldGrid, LpaError, LpaModel, PotentialSurface};
use crate::flows::{
    beta_msr, beta_two_scalar, integrate_flow, FlowOptions, MsrCouplings, ScalarCouplings,
    Termination,
};

/// Fraction of the explicit-diffusion limit a step may use.
pub const DEFAULT_SAFETY: f64 = 0.2;
/// Cap on the quasi-linear sensitivity ratio.
pub const DEFAULT_EPS_PRIME: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub safety: f64,
    pub eps_prime: f64,
    /// Floor on dk; a guard demanding less aborts the march.
    pub min_step: f64,
    pub max_step: Option<f64>,
    /// Scales at which to snapshot the surface; the march lands on each
    /// exactly.
    pub checkpoints: Vec<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            safety: DEFAULT_SAFETY,
            eps_prime: DEFAULT_EPS_PRIME,
            min_step: 1e-9,
            max_step: None,
            checkpoints: Vec::new(),
        }
    }
}

/// Per-step health record, taken after the step is accepted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    /// Scale after the step.
    pub k: f64,
    pub dk: f64,
    /// Minimum diffusion coefficient over all evaluations of the step.
    pub sigma_min: f64,
    pub k_ratio_max: f64,
    /// Discrete seminorms of the stepped surface, orders 0..=4.
    pub seminorms: [f64; 5],
}

#[derive(Debug, Clone, Default)]
pub struct FlowDiagnostics {
    pub records: Vec<DiagnosticsRecord>,
}

impl FlowDiagnostics {
    /// Smallest diffusion coefficient seen over the whole march.
    pub fn sigma_floor(&self) -> Option<f64> {
        self.records.iter().map(|r| r.sigma_min).reduce(f64::min)
    }

    pub fn ratio_ceiling(&self) -> Option<f64> {
        self.records.iter().map(|r| r.k_ratio_max).reduce(f64::max)
    }
}

#[derive(Debug)]
pub enum SolveTermination {
    ReachedEnd,
    Aborted(LpaError),
}

impl SolveTermination {
    pub fn label(&self) -> &'static str {
        match self {
            SolveTermination::ReachedEnd => "reached-end",
            SolveTermination::Aborted(e) => match e {
                LpaError::LogDomain { .. } => "log-domain",
                LpaError::StabilityGuard { .. } => "stability-guard",
                LpaError::SigmaNonPositive { .. } => "sigma-non-positive",
                LpaError::KRatioExceeded { .. } => "k-ratio-exceeded",
                LpaError::IllConditionedFit { .. } => "ill-conditioned-fit",
                LpaError::Invalid(_) | LpaError::Boundary(_) => "invalid",
            },
        }
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, SolveTermination::ReachedEnd)
    }
}

#[derive(Debug)]
pub struct SolveOutcome {
    /// Surface at the final scale reached, complete or not.
    pub surface: PotentialSurface,
    pub diagnostics: FlowDiagnostics,
    /// Snapshots at the requested checkpoint scales, in march order.
    pub checkpoints: Vec<PotentialSurface>,
    pub termination: SolveTermination,
}

fn guard_limit(grid: &FieldGrid, safety: f64, sigma_abs_max: f64) -> f64 {
    let h = grid.spacing(0).min(grid.spacing(1));
    if sigma_abs_max > 0.0 {
        safety * h * h / sigma_abs_max
    } else {
        f64::INFINITY
    }
}

/// Errors that abort a march but leave its partial results meaningful.
fn is_abort(e: &LpaError) -> bool {
    matches!(
        e,
        LpaError::LogDomain { .. }
            | LpaError::StabilityGuard { .. }
            | LpaError::SigmaNonPositive { .. }
            | LpaError::KRatioExceeded { .. }
    )
}

/// Builds one stage surface: interior advanced along `slope`, boundary drawn
/// from the datum at the stage scale.
fn stage_surface(
    u: &PotentialSurface,
    slope: &[f64],
    frac_dk: f64,
    k_stage: f64,
    boundary: &BoundaryData,
) -> Result<PotentialSurface, LpaError> {
    let grid = u.grid;
    let mut values = Vec::with_capacity(grid.node_count());
    for (i, j) in grid.nodes() {
        let v = if grid.is_boundary(i, j) {
            (boundary.beta)(grid.coord(0, i), grid.coord(1, j), k_stage)?
        } else {
            u.value(i, j) + frac_dk * slope[grid.index(i, j)]
        };
        if !v.is_finite() {
            return Err(LpaError::Invalid(format!("non-finite surface value at ({i}, {j})")));
        }
        values.push(v);
    }
    Ok(PotentialSurface::from_values(grid, k_stage, values))
}

struct SigmaWitness {
    sigma: f64,
    node: (usize, usize),
    k: f64,
}

impl SigmaWitness {
    fn absorb(&mut self, data: &RhsData, k: f64) {
        if data.sigma_min < self.sigma {
            self.sigma = data.sigma_min;
            self.node = data.sigma_min_node;
            self.k = k;
        }
    }
}

/// One Runge-Kutta step from `u` given its already-evaluated slope data.
/// Returns the stepped surface and the weakest diffusion coefficient seen
/// across all four stage evaluations.
fn rk4_advance(
    model: &LpaModel,
    u: &PotentialSurface,
    first: &RhsData,
    dk: f64,
    k_new: f64,
    boundary: &BoundaryData,
) -> Result<(PotentialSurface, SigmaWitness), LpaError> {
    let grid = u.grid;
    let k = u.k;
    let mut witness =
        SigmaWitness { sigma: first.sigma_min, node: first.sigma_min_node, k };
    let k_half = k + 0.5 * dk;

    let s2 = stage_surface(u, &first.dudk, 0.5 * dk, k_half, boundary)?;
    let d2 = evaluate(model, &s2, k_half)?;
    witness.absorb(&d2, k_half);

    let s3 = stage_surface(u, &d2.dudk, 0.5 * dk, k_half, boundary)?;
    let d3 = evaluate(model, &s3, k_half)?;
    witness.absorb(&d3, k_half);

    let s4 = stage_surface(u, &d3.dudk, dk, k_new, boundary)?;
    let d4 = evaluate(model, &s4, k_new)?;
    witness.absorb(&d4, k_new);

    let mut values = Vec::with_capacity(grid.node_count());
    for (i, j) in grid.nodes() {
        let v = if grid.is_boundary(i, j) {
            (boundary.beta)(grid.coord(0, i), grid.coord(1, j), k_new)?
        } else {
            let idx = grid.index(i, j);
            u.value(i, j)
                + dk / 6.0
                    * (first.dudk[idx] + 2.0 * d2.dudk[idx] + 2.0 * d3.dudk[idx] + d4.dudk[idx])
        };
        if !v.is_finite() {
            return Err(LpaError::Invalid(format!("non-finite surface value at ({i}, {j})")));
        }
        values.push(v);
    }
    Ok((PotentialSurface::from_values(grid, k_new, values), witness))
}

/// Advances the surface by one guarded step. The requested dk must respect
/// the diffusion guard at the current surface.
pub fn step_flow(
    model: &LpaModel,
    u: &PotentialSurface,
    dk: f64,
    boundary: &BoundaryData,
) -> Result<PotentialSurface, LpaError> {
    if !(dk > 0.0 && dk.is_finite()) {
        return Err(LpaError::Invalid(format!("step dk = {dk} must be positive")));
    }
    let data = evaluate(model, u, u.k)?;
    let limit = guard_limit(&u.grid, DEFAULT_SAFETY, data.sigma_abs_max);
    if dk > limit {
        return Err(LpaError::StabilityGuard { k: u.k, required_dk: limit, min_step: dk });
    }
    rk4_advance(model, u, &data, dk, u.k + dk, boundary).map(|(s, _)| s)
}

/// Largest relative sensitivity of the diffusion coefficient to the change
/// of the regularized mass, over scale and field directions. Nodes where
/// the coefficient has already lost positivity are skipped; the sigma check
/// owns those.
fn k_ratio_max(
    model: &LpaModel,
    grid: &FieldGrid,
    before: &MassFields,
    after: &MassFields,
    dk: f64,
    k: f64,
) -> (f64, (usize, usize)) {
    let mut best = (0.0_f64, (0usize, 0usize));
    let mut offer = |num: f64, r: f64, mu_sq: f64, node: (usize, usize)| {
        let denom = r * ((r / mu_sq).ln() + 1.0);
        if denom > 0.0 {
            let ratio = num.abs() / denom;
            if ratio > best.0 {
                best = (ratio, node);
            }
        }
    };
    let (n0, n1) = (grid.points(0), grid.points(1));
    match (model, before, after) {
        (
            LpaModel::TwoScalar { mu_sq },
            MassFields::Scalar { m1: b1, m2: b2 },
            MassFields::Scalar { m1: a1, m2: a2 },
        ) => {
            // Channel 1: valid at interior i; channel 2 mirrors with axes
            // swapped.
            for i in 1..n0 - 1 {
                for j in 1..n1 - 1 {
                    let idx = grid.index(i, j);
                    let r1 = k * k + a1[idx];
                    offer((a1[idx] - b1[idx]) / dk, r1, *mu_sq, (i, j));
                    if i >= 2 && i + 2 < n0 {
                        let d = (a1[grid.index(i + 1, j)] - a1[grid.index(i - 1, j)])
                            / (2.0 * grid.spacing(0));
                        offer(d, r1, *mu_sq, (i, j));
                    }
                    let d = (a1[grid.index(i, j + 1)] - a1[grid.index(i, j - 1)])
                        / (2.0 * grid.spacing(1));
                    offer(d, r1, *mu_sq, (i, j));

                    let r2 = k * k + a2[idx];
                    offer((a2[idx] - b2[idx]) / dk, r2, *mu_sq, (i, j));
                    if j >= 2 && j + 2 < n1 {
                        let d = (a2[grid.index(i, j + 1)] - a2[grid.index(i, j - 1)])
                            / (2.0 * grid.spacing(1));
                        offer(d, r2, *mu_sq, (i, j));
                    }
                    let d = (a2[grid.index(i + 1, j)] - a2[grid.index(i - 1, j)])
                        / (2.0 * grid.spacing(0));
                    offer(d, r2, *mu_sq, (i, j));
                }
            }
        }
        (
            LpaModel::MsrD4 { mu_sq },
            MassFields::MsrColumns { m: b },
            MassFields::MsrColumns { m: a },
        ) => {
            let mid = n1 / 2;
            for i in 1..n0 - 1 {
                let r = k * k + a[i];
                offer((a[i] - b[i]) / dk, r, *mu_sq, (i, mid));
                if i >= 2 && i + 2 < n0 {
                    let d = (a[i + 1] - a[i - 1]) / (2.0 * grid.spacing(0));
                    offer(d, r, *mu_sq, (i, mid));
                }
            }
        }
        // The cubic model's coefficient is independent of the mass, so the
        // sensitivity vanishes identically.
        (LpaModel::MsrD3, _, _) => {}
        _ => unreachable!("mass fields always match their model"),
    }
    best
}

/// Marches the boundary-value problem from the initial surface's scale up to
/// `k_end`. Guard trips terminate with `Aborted` and partial results; `Err`
/// is reserved for unusable setup.
pub fn solve_flow(
    model: &LpaModel,
    boundary: &BoundaryData,
    k_end: f64,
    opts: &SolveOptions,
) -> Result<SolveOutcome, LpaError> {
    if !(opts.safety > 0.0 && opts.eps_prime > 0.0 && opts.min_step > 0.0) {
        return Err(LpaError::Invalid("guard parameters must be positive".into()));
    }
    let mut u = boundary.init.clone();
    let k_start = u.k;
    if !(k_end >= k_start) {
        return Err(LpaError::Invalid(format!(
            "target scale {k_end} below the initial scale {k_start}; the surface flow is \
             diffusive only toward larger scales"
        )));
    }
    boundary.check_compatibility()?;
    let span = (k_end - k_start).max(1.0);
    let tol_k = 1e-12 * span;
    let mut cps: Vec<f64> = opts
        .checkpoints
        .iter()
        .copied()
        .filter(|&c| c > k_start + tol_k && c <= k_end + tol_k)
        .collect();
    cps.sort_by(|a, b| a.partial_cmp(b).expect("finite checkpoints"));
    cps.dedup_by(|a, b| (*a - *b).abs() <= tol_k);

    let mut diagnostics = FlowDiagnostics::default();
    let mut checkpoints = Vec::new();
    let mut cp_idx = 0usize;

    let abort = |surface: PotentialSurface,
                 diagnostics: FlowDiagnostics,
                 checkpoints: Vec<PotentialSurface>,
                 e: LpaError| {
        Ok(SolveOutcome {
            surface,
            diagnostics,
            checkpoints,
            termination: SolveTermination::Aborted(e),
        })
    };

    let mut data = match evaluate(model, &u, u.k) {
        Ok(d) => d,
        Err(e) if is_abort(&e) => return abort(u, diagnostics, checkpoints, e),
        Err(e) => return Err(e),
    };
    if data.sigma_min <= 0.0 {
        let (i, j) = data.sigma_min_node;
        let e = LpaError::SigmaNonPositive { k: u.k, i, j, sigma: data.sigma_min };
        return abort(u, diagnostics, checkpoints, e);
    }

    loop {
        let remaining = k_end - u.k;
        if remaining <= tol_k {
            break;
        }
        let mut dk = guard_limit(&u.grid, opts.safety, data.sigma_abs_max);
        if let Some(cap) = opts.max_step {
            dk = dk.min(cap);
        }
        let mut landing = None;
        if dk >= remaining {
            dk = remaining;
            landing = Some(k_end);
        }
        if let Some(&cp) = cps.get(cp_idx) {
            if cp - u.k <= dk + tol_k {
                dk = cp - u.k;
                landing = Some(cp);
            }
        }
        if dk < opts.min_step && landing.is_none() {
            let e = LpaError::StabilityGuard { k: u.k, required_dk: dk, min_step: opts.min_step };
            return abort(u, diagnostics, checkpoints, e);
        }
        let k_new = landing.unwrap_or(u.k + dk);

        let (u_new, witness) = match rk4_advance(model, &u, &data, dk, k_new, boundary) {
            Ok(pair) => pair,
            Err(e) if is_abort(&e) => return abort(u, diagnostics, checkpoints, e),
            Err(e) => return Err(e),
        };
        let data_new = match evaluate(model, &u_new, k_new) {
            Ok(d) => d,
            Err(e) if is_abort(&e) => return abort(u_new, diagnostics, checkpoints, e),
            Err(e) => return Err(e),
        };
        let mut witness = witness;
        witness.absorb(&data_new, k_new);
        let (ratio, ratio_node) =
            k_ratio_max(model, &u_new.grid, &data.masses, &data_new.masses, dk, k_new);

        diagnostics.records.push(DiagnosticsRecord {
            k: k_new,
            dk,
            sigma_min: witness.sigma,
            k_ratio_max: ratio,
            seminorms: seminorm_profile(&u_new),
        });

        if witness.sigma <= 0.0 {
            let (i, j) = witness.node;
            let e = LpaError::SigmaNonPositive { k: witness.k, i, j, sigma: witness.sigma };
            return abort(u_new, diagnostics, checkpoints, e);
        }
        if ratio > opts.eps_prime {
            let (i, j) = ratio_node;
            let e = LpaError::KRatioExceeded { k: k_new, i, j, ratio, cap: opts.eps_prime };
            return abort(u_new, diagnostics, checkpoints, e);
        }

        if let Some(&cp) = cps.get(cp_idx) {
            if (k_new - cp).abs() <= tol_k {
                checkpoints.push(u_new.clone());
                cp_idx += 1;
            }
        }
        u = u_new;
        data = data_new;
    }

    Ok(SolveOutcome {
        surface: u,
        diagnostics,
        checkpoints,
        termination: SolveTermination::ReachedEnd,
    })
}

fn flow_failure(context: &str, e: crate::flows::FlowError) -> LpaError {
    LpaError::Boundary(format!("{context}: {e}"))
}

fn halted(context: &str, termination: &Termination, k: f64) -> LpaError {
    LpaError::Boundary(format!("{context} halted ({}) at k = {k}", termination.label()))
}

/// Boundary datum that follows the two-scalar coupling flow: the couplings
/// are integrated from the anchor scale and evaluated through the ansatz.
/// Successive requests extend the cached trajectory; a request below the
/// cache restarts from the anchor.
pub fn scalar_ode_boundary(
    init: ScalarCouplings,
    k0: f64,
) -> Box<dyn Fn(f64, f64, f64) -> Result<f64, LpaError>> {
    let cache = RefCell::new((k0, init));
    Box::new(move |x, y, k| {
        let c = advance_scalar(&cache, init, k0, k)?;
        Ok(super::scalar_ansatz(&c, x, y))
    })
}

/// Response-field counterpart of [`scalar_ode_boundary`].
pub fn msr_ode_boundary(
    init: MsrCouplings,
    k0: f64,
) -> Box<dyn Fn(f64, f64, f64) -> Result<f64, LpaError>> {
    let cache = RefCell::new((k0, init));
    Box::new(move |x, y, k| {
        let c = advance_msr(&cache, init, k0, k)?;
        Ok(super::msr_ansatz(&c, x, y))
    })
}

fn boundary_ode_opts() -> FlowOptions {
    FlowOptions { rel_tol: 1e-12, abs_tol: 1e-14, min_step: 1e-12, ..FlowOptions::default() }
}

fn advance_scalar(
    cache: &RefCell<(f64, ScalarCouplings)>,
    init: ScalarCouplings,
    k0: f64,
    k: f64,
) -> Result<ScalarCouplings, LpaError> {
    let (kc, yc) = *cache.borrow();
    if (k - kc).abs() <= 1e-13 * k.abs().max(1.0) {
        return Ok(yc);
    }
    let (from_k, from_y) = if k > kc { (kc, yc) } else { (k0, init) };
    let ctx = "two-scalar boundary flow";
    let rhs = |kk: f64, y: &[f64]| {
        let c = ScalarCouplings::from_array(y.try_into().expect("seven couplings"));
        beta_two_scalar(&c, kk).map(|b| b.to_array().to_vec())
    };
    let traj = integrate_flow(
        rhs,
        &ScalarCouplings::NAMES,
        &from_y.to_array(),
        from_k,
        k,
        &boundary_ode_opts(),
    )
    .map_err(|e| flow_failure(ctx, e))?;
    if !matches!(traj.termination, Termination::ReachedEnd) {
        return Err(halted(ctx, &traj.termination, traj.final_k()));
    }
    let c = ScalarCouplings::from_array(
        traj.final_state().try_into().expect("seven couplings"),
    );
    *cache.borrow_mut() = (k, c);
    Ok(c)
}

fn advance_msr(
    cache: &RefCell<(f64, MsrCouplings)>,
    init: MsrCouplings,
    k0: f64,
    k: f64,
) -> Result<MsrCouplings, LpaError> {
    let (kc, yc) = *cache.borrow();
    if (k - kc).abs() <= 1e-13 * k.abs().max(1.0) {
        return Ok(yc);
    }
    let (from_k, from_y) = if k > kc { (kc, yc) } else { (k0, init) };
    let ctx = "response-field boundary flow";
    let dim = init.dimension;
    let rhs = |kk: f64, y: &[f64]| {
        let c = MsrCouplings::from_array(y.try_into().expect("five couplings"), dim);
        beta_msr(&c, kk).map(|b| b.to_array().to_vec())
    };
    let traj = integrate_flow(
        rhs,
        &MsrCouplings::NAMES,
        &from_y.to_array(),
        from_k,
        k,
        &boundary_ode_opts(),
    )
    .map_err(|e| flow_failure(ctx, e))?;
    if !matches!(traj.termination, Termination::ReachedEnd) {
        return Err(halted(ctx, &traj.termination, traj.final_k()));
    }
    let c = MsrCouplings::from_array(
        traj.final_state().try_into().expect("five couplings"),
        dim,
    );
    *cache.borrow_mut() = (k, c);
    Ok(c)
}
