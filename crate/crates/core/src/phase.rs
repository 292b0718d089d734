//! Angle arithmetic on the unit circle: branch logarithms, arc distances and
//! the nearest-integer selections used by the phase ledger.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

/// Wrap an angle to the principal interval (-pi, pi].
pub fn wrap_principal(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Arc distance between two angles, in [0, pi].
pub fn arc_distance(a: f64, b: f64) -> f64 {
    wrap_principal(a - b).abs()
}

/// Phase of a unimodular number on the branch whose cut sits at angle `cut`,
/// with values in (cut - 2*pi, cut]. The default ledger uses `cut = pi`,
/// i.e. the principal logarithm with its cut through -1.
pub fn branch_phase(d: Complex64, cut: f64) -> f64 {
    let r = (d.arg() - cut).rem_euclid(TAU);
    if r == 0.0 {
        cut
    } else {
        cut + r - TAU
    }
}

/// Phase of a unimodular number for the logarithm with cut through `xi`,
/// with values in [xi - 2*pi, xi). This is the branch that rotates every
/// eigenvalue clockwise back to one without crossing `xi`.
pub fn xi_phase(d: Complex64, xi_angle: f64) -> f64 {
    xi_angle + (d.arg() - xi_angle).rem_euclid(TAU) - TAU
}

/// The unique integer m with |x + 2*pi*m| < pi, together with the leftover
/// residual x + 2*pi*m. `None` when x sits on the boundary (residual within
/// `boundary_tol` of +-pi), which the caller must treat as a too-coarse grid.
pub fn ledger_integer(x: f64, boundary_tol: f64) -> Option<(i64, f64)> {
    let m = -(x / TAU).round();
    let residual = x + TAU * m;
    if residual.abs() > PI - boundary_tol {
        None
    } else {
        Some((m as i64, residual))
    }
}

/// Round to the nearest integer, returning the rounding residual as well.
pub fn nearest_integer(x: f64) -> (i64, f64) {
    let k = x.round();
    (k as i64, x - k)
}
