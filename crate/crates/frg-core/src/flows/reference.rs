//! Fixed-step classical Runge-Kutta, kept as an independent cross-check for
//! the adaptive integrator. Different tableau, no step control, no event
//! handling: a singular right-hand side simply propagates as an error.

use super::FlowError;

/// Classical fourth-order Runge-Kutta with `steps` uniform steps from
/// `k_start` to `k_end` (either direction). Returns every node including
/// the initial one.
pub fn rk4_fixed<R>(
    rhs: R,
    initial: &[f64],
    k_start: f64,
    k_end: f64,
    steps: usize,
) -> Result<Vec<(f64, Vec<f64>)>, FlowError>
where
    R: Fn(f64, &[f64]) -> Result<Vec<f64>, FlowError>,
{
    if steps == 0 {
        return Err(FlowError::InvalidInput("need at least one step".into()));
    }
    let n = initial.len();
    let h = (k_end - k_start) / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut y = initial.to_vec();
    samples.push((k_start, y.clone()));
    for step in 0..steps {
        let k = k_start + step as f64 * h;
        let f1 = rhs(k, &y)?;
        let mut y2 = y.clone();
        for i in 0..n {
            y2[i] += 0.5 * h * f1[i];
        }
        let f2 = rhs(k + 0.5 * h, &y2)?;
        let mut y3 = y.clone();
        for i in 0..n {
            y3[i] += 0.5 * h * f2[i];
        }
        let f3 = rhs(k + 0.5 * h, &y3)?;
        let mut y4 = y.clone();
        for i in 0..n {
            y4[i] += h * f3[i];
        }
        let f4 = rhs(k + h, &y4)?;
        for i in 0..n {
            y[i] += h / 6.0 * (f1[i] + 2.0 * f2[i] + 2.0 * f3[i] + f4[i]);
        }
        let k_next = if step + 1 == steps { k_end } else { k_start + (step + 1) as f64 * h };
        samples.push((k_next, y.clone()));
    }
    Ok(samples)
}
