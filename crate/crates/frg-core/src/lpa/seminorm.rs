//! Discrete sup-norm seminorms of a potential surface.
//!
//! ||u||_n is the sup over all grid nodes and all derivative multi-indices
//! of total order at most n of |D^alpha u|, with each derivative realized
//! by repeated first differences: central in the interior, second-order
//! one-sided at the two boundary nodes of each line. Orders up to four are
//! supported on any admissible grid (at least five points per axis).

use super::PotentialSurface;

/// One first-derivative sweep along `axis`.
fn differentiate_axis(values: &[f64], n0: usize, n1: usize, axis: usize, h: f64) -> Vec<f64> {
    let idx = |i: usize, j: usize| i * n1 + j;
    let mut out = vec![0.0; values.len()];
    let len = if axis == 0 { n0 } else { n1 };
    let lines = if axis == 0 { n1 } else { n0 };
    for line in 0..lines {
        let at = |p: usize| {
            if axis == 0 {
                values[idx(p, line)]
            } else {
                values[idx(line, p)]
            }
        };
        let mut put = |p: usize, v: f64| {
            let slot = if axis == 0 { idx(p, line) } else { idx(line, p) };
            out[slot] = v;
        };
        put(0, (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h));
        for p in 1..len - 1 {
            put(p, (at(p + 1) - at(p - 1)) / (2.0 * h));
        }
        put(len - 1, (3.0 * at(len - 1) - 4.0 * at(len - 2) + at(len - 3)) / (2.0 * h));
    }
    out
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Seminorms for all orders 0..=4 in one pass; entry n is ||u||_n.
pub fn seminorm_profile(u: &PotentialSurface) -> [f64; 5] {
    let g = u.grid;
    let (n0, n1) = (g.points(0), g.points(1));
    let (h0, h1) = (g.spacing(0), g.spacing(1));
    // per_order[t] collects sup |D^alpha u| over |alpha| = t.
    let mut per_order = [0.0_f64; 5];
    let mut d_axis0 = u.values().to_vec();
    for a in 0..=4 {
        if a > 0 {
            d_axis0 = differentiate_axis(&d_axis0, n0, n1, 0, h0);
        }
        let mut d = d_axis0.clone();
        per_order[a] = per_order[a].max(sup(&d));
        for b in 1..=(4 - a) {
            d = differentiate_axis(&d, n0, n1, 1, h1);
            per_order[a + b] = per_order[a + b].max(sup(&d));
        }
    }
    let mut norms = [0.0_f64; 5];
    let mut acc = 0.0_f64;
    for (n, slot) in norms.iter_mut().enumerate() {
        acc = acc.max(per_order[n]);
        *slot = acc;
    }
    norms
}

/// Discrete ||u||_n for one order n <= 4.
pub fn seminorm_estimate(u: &PotentialSurface, n: usize) -> f64 {
    assert!(n <= 4, "seminorm order {n} out of range");
    seminorm_profile(u)[n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpa::FieldGrid;

    fn grid(n: usize) -> FieldGrid {
        FieldGrid::new([(-0.5, 0.5), (-0.5, 0.5)], [n, n]).unwrap()
    }

    #[test]
    fn constant_surface() {
        let u = PotentialSurface::constant(grid(7), 1.0, -2.5).unwrap();
        for n in 0..=4 {
            assert_eq!(seminorm_estimate(&u, n), 2.5);
        }
    }

    #[test]
    fn linear_surface_takes_the_slope() {
        // Slope 3 along axis 0 dominates sup |u| = 1.5 from order one on.
        let u = PotentialSurface::from_fn(grid(9), 1.0, |x, _| 3.0 * x).unwrap();
        assert_eq!(seminorm_estimate(&u, 0), 1.5);
        for n in 1..=4 {
            let v = seminorm_estimate(&u, n);
            assert!((v - 3.0).abs() < 1e-12, "order {n}: {v}");
        }
    }

    #[test]
    fn norms_are_monotone_in_order() {
        let u = PotentialSurface::from_fn(grid(11), 1.0, |x, y| (x * x - y).sin()).unwrap();
        let p = seminorm_profile(&u);
        for w in p.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn planted_quadratic_is_captured_exactly() {
        // u = x^2 + x y: first differences are exact on quadratics, second
        // differences on their linear results; sup |D^(2,0)| = 2,
        // sup |D^(1,1)| = 1, sup |D^(1,0)| = |2x + y| <= 1.5.
        let u = PotentialSurface::from_fn(grid(9), 1.0, |x, y| x * x + x * y).unwrap();
        assert!((seminorm_estimate(&u, 2) - 2.0).abs() < 1e-12);
        assert!((seminorm_estimate(&u, 1) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn refinement_shrinks_the_error() {
        // Gaussian bump: ||u||_2 is dominated by the curvature at the
        // center, far from the one-sided boundary stencils, so refinement
        // improves the estimate at close to second order.
        let f = |x: f64, _: f64| (-25.0 * x * x).exp();
        let exact = 50.0;
        let err = |n: usize| {
            let u = PotentialSurface::from_fn(grid(n), 1.0, f).unwrap();
            (seminorm_estimate(&u, 2) - exact).abs()
        };
        let (e1, e2) = (err(21), err(41));
        let ratio = e1 / e2;
        assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio} (e1 = {e1:e}, e2 = {e2:e})");
    }
}
