//! Adaptive quadrature on finite intervals and on `[a, inf)`.
//!
//! Finite pieces use double-exponential quadrature and are bisected until
//! each reports an error below its share of the budget. Half-lines are cut
//! into doubling segments `[a, a+h], [a+h, a+3h], ...` and summed until a
//! segment falls below the tolerance.

use quadrature::double_exponential;

use crate::error::{Error, Result};

/// Absolute tolerance used by every oracle integral.
pub const ABS_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 40;
const MAX_SEGMENTS: u32 = 400;

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("finite integration limits required, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    adapt(&f, a, b, tol, tol, 0)
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, root_tol: f64, depth: u32) -> Result<f64> {
    let out = double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol {
        return Ok(out.integral);
    }
    if depth >= MAX_DEPTH || b - a <= 1e-12 * a.abs().max(b.abs()).max(1e-300) {
        // a shrunken piece next to a singularity; its own error is what matters
        if out.error_estimate <= 1e-3 * root_tol {
            return Ok(out.integral);
        }
        return Err(Error::Numerical(format!(
            "quadrature on [{a}, {b}] stuck at error {:.3e}",
            out.error_estimate
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adapt(f, a, m, 0.5 * tol, root_tol, depth + 1)? + adapt(f, m, b, 0.5 * tol, root_tol, depth + 1)?)
}

/// `int_a^inf f`, with the first segment of length `scale`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> Result<f64> {
    let mut lo = a;
    let mut h = scale;
    let mut total = 0.0;
    let mut quiet = 0;
    for _ in 0..MAX_SEGMENTS {
        let piece = adapt(&f, lo, lo + h, 0.25 * tol, tol, 0)?;
        total += piece;
        // two consecutive negligible segments before stopping, so that an
        // integrand that is still ramping up is not cut off
        if piece.abs() <= 0.1 * tol {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo += h;
        h *= 2.0;
        if !lo.is_finite() {
            break;
        }
    }
    Err(Error::Numerical(format!("integral from {a} to infinity did not settle")))
}
