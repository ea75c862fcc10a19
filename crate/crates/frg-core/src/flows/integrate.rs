//! Adaptive scale integration with singular-locus event capture.
//!
//! One embedded Runge-Kutta pair of orders 4(5) drives everything: the
//! fifth-order solution only furnishes the error estimate, the fourth-order
//! solution is propagated, so observed convergence is order four. Step
//! control follows the standard proportional rule with safety 0.9, growth
//! clamped to [0.2, 5], and the scaled error taken in the max norm. The max
//! norm is deliberate: it is exactly permutation invariant, which keeps
//! species-swapped runs bitwise identical step for step.
//!
//! A right-hand side reporting a singular log argument is not an error of
//! the integrator. The step is halved until either the stage points clear
//! the locus (and the step is accepted, moving the state closer) or the
//! step floor is reached, at which point the trajectory terminates with
//! `Termination::SingularLocus`. The final sample then sits within a couple
//! of step floors of the crossing, on the safe side.

use super::{FlowError, FlowTrajectory, Termination};

/// Tolerances and step bounds for [`integrate_flow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Absolute floor on |dk|; reaching it terminates the trajectory.
    pub min_step: f64,
    /// Optional cap on |dk|.
    pub max_step: Option<f64>,
    /// Optional starting |dk|; a span-based heuristic otherwise.
    pub initial_step: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            min_step: 1e-9,
            max_step: None,
            initial_step: None,
        }
    }
}

// Dormand-Prince 5(4) tableau. Row seven of A doubles as the fifth-order
// weight vector; B4 is the fourth-order weight vector that gets propagated.
const STAGE_NODES: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const STAGE_COEFFS: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

enum StepAttempt {
    Done { y_new: Vec<f64>, err_ratio: f64 },
    Singular,
}

fn attempt_step<R>(rhs: &R, k: f64, y: &[f64], h: f64, opts: &FlowOptions) -> Result<StepAttempt, FlowError>
where
    R: Fn(f64, &[f64]) -> Result<Vec<f64>, FlowError>,
{
    let n = y.len();
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(7);
    let eval = |kk: f64, ys: &[f64]| -> Result<Option<Vec<f64>>, FlowError> {
        match rhs(kk, ys) {
            Ok(v) => {
                debug_assert_eq!(v.len(), n, "rhs changed the state dimension");
                Ok(Some(v))
            }
            Err(FlowError::SingularLocus { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };

    match eval(k, y)? {
        Some(v) => stages.push(v),
        None => return Ok(StepAttempt::Singular),
    }
    let mut y5 = Vec::new();
    for s in 0..6 {
        let mut ys = y.to_vec();
        for (j, kj) in stages.iter().enumerate() {
            let a = STAGE_COEFFS[s][j];
            if a != 0.0 {
                for i in 0..n {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        if s == 5 {
            y5 = ys.clone();
        }
        match eval(k + STAGE_NODES[s] * h, &ys)? {
            Some(v) => stages.push(v),
            None => return Ok(StepAttempt::Singular),
        }
    }

    let mut y4 = y.to_vec();
    for (j, kj) in stages.iter().enumerate() {
        let b = B4[j];
        for i in 0..n {
            y4[i] += h * b * kj[i];
        }
    }

    let mut err_ratio: f64 = 0.0;
    for i in 0..n {
        if !y4[i].is_finite() || !y5[i].is_finite() {
            err_ratio = f64::INFINITY;
            break;
        }
        let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y4[i].abs());
        err_ratio = err_ratio.max((y5[i] - y4[i]).abs() / scale);
    }
    Ok(StepAttempt::Done { y_new: y4, err_ratio })
}

fn validate_setup(
    names: &[&str],
    initial: &[f64],
    k_start: f64,
    k_end: f64,
    opts: &FlowOptions,
) -> Result<(), FlowError> {
    if initial.is_empty() {
        return Err(FlowError::InvalidInput("empty initial state".into()));
    }
    if names.len() != initial.len() {
        return Err(FlowError::InvalidInput(format!(
            "{} component names for a state of dimension {}",
            names.len(),
            initial.len()
        )));
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(FlowError::InvalidInput("non-finite initial state".into()));
    }
    if !(k_start > 0.0 && k_end > 0.0) {
        return Err(FlowError::InvalidInput(format!(
            "scale range [{k_start}, {k_end}] must stay positive"
        )));
    }
    if k_start == k_end {
        return Err(FlowError::InvalidInput("empty scale range".into()));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0 && opts.min_step > 0.0) {
        return Err(FlowError::InvalidInput("tolerances and step floor must be positive".into()));
    }
    Ok(())
}

/// Integrates `d(state)/dk = rhs(k, state)` from `k_start` to `k_end` in
/// either direction. Every accepted step appends a sample; the trajectory
/// reports how it ended instead of erroring on singular loci or step
/// underflow. `Err` is reserved for unusable setup or a right-hand side
/// failing for reasons other than the singular guard.
pub fn integrate_flow<R>(
    rhs: R,
    names: &'static [&'static str],
    initial: &[f64],
    k_start: f64,
    k_end: f64,
    opts: &FlowOptions,
) -> Result<FlowTrajectory, FlowError>
where
    R: Fn(f64, &[f64]) -> Result<Vec<f64>, FlowError>,
{
    validate_setup(names, initial, k_start, k_end, opts)?;

    let dir = if k_end > k_start { 1.0 } else { -1.0 };
    let span = (k_end - k_start).abs();
    let cap = |mag: f64| -> f64 {
        match opts.max_step {
            Some(m) => mag.min(m),
            None => mag,
        }
    };
    let mut h = dir * cap(opts.initial_step.unwrap_or(1e-3 * span).max(opts.min_step).min(span));

    let mut k = k_start;
    let mut y = initial.to_vec();
    let mut samples = vec![(k, y.clone())];
    let mut singular_pending = false;

    let termination = loop {
        let remaining = (k_end - k) * dir;
        if remaining <= 0.0 {
            break Termination::ReachedEnd;
        }
        let clipped = h.abs() >= remaining;
        if clipped {
            h = remaining * dir;
        } else if h.abs() < opts.min_step {
            break if singular_pending {
                Termination::SingularLocus
            } else {
                Termination::StepUnderflow
            };
        }

        match attempt_step(&rhs, k, &y, h, opts)? {
            StepAttempt::Singular => {
                singular_pending = true;
                h *= 0.5;
            }
            StepAttempt::Done { y_new, err_ratio } => {
                if err_ratio <= 1.0 {
                    k = if clipped { k_end } else { k + h };
                    y = y_new;
                    samples.push((k, y.clone()));
                    singular_pending = false;
                    let grow = (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 5.0);
                    h = dir * cap((h * grow).abs());
                } else {
                    let shrink = if err_ratio.is_finite() {
                        (0.9 * err_ratio.powf(-0.2)).clamp(0.2, 1.0)
                    } else {
                        0.2
                    };
                    h *= shrink;
                }
            }
        }
    };

    Ok(FlowTrajectory { names, samples, termination })
}

/// Propagates the same fourth-order formula with a uniform step, no error
/// control. Diagnostic entry point for convergence-order measurements; a
/// singular stage is a hard error here.
pub fn integrate_fixed_step<R>(
    rhs: R,
    initial: &[f64],
    k_start: f64,
    k_end: f64,
    steps: usize,
) -> Result<Vec<f64>, FlowError>
where
    R: Fn(f64, &[f64]) -> Result<Vec<f64>, FlowError>,
{
    if steps == 0 {
        return Err(FlowError::InvalidInput("need at least one step".into()));
    }
    let h = (k_end - k_start) / steps as f64;
    let opts = FlowOptions::default();
    let mut y = initial.to_vec();
    for i in 0..steps {
        let k = k_start + i as f64 * h;
        match attempt_step(&rhs, k, &y, h, &opts)? {
            StepAttempt::Done { y_new, .. } => y = y_new,
            StepAttempt::Singular => {
                return Err(FlowError::InvalidInput(format!(
                    "singular locus inside fixed-step run near k = {k}"
                )))
            }
        }
    }
    Ok(y)
}
