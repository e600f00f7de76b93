//! Principal branch of the Lambert W function.

use std::f64::consts::{E, LN_2};

use super::OperatorError;

/// `-1/e`, the branch point of `W`.
pub const BRANCH_POINT: f64 = -1.0 / E;

const MAX_ITER: usize = 50;
const REL_STEP_TOL: f64 = 1e-15;
// Above this, `exp(z)` is evaluated in log space instead.
const EXP_SWITCH: f64 = 700.0 * LN_2;

/// Principal-branch Lambert W: the `w >= -1` with `w * exp(w) = x`.
///
/// Halley iteration started from a branch-point series, a Padé
/// approximant, or the asymptotic `ln x - ln ln x`, depending on `x`.
pub fn lambert_w(x: f64) -> Result<f64, OperatorError> {
    if x.is_nan() || x < BRANCH_POINT {
        return Err(OperatorError::LambertDomain(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x > 1e300 {
        return Ok(w_of_exp_newton(x.ln()));
    }
    Ok(halley(x, initial_guess(x)))
}

/// `W(exp(z))`, stable for arguments whose exponential overflows.
pub fn lambert_w_of_exp(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z > EXP_SWITCH {
        return w_of_exp_newton(z);
    }
    let x = z.exp();
    if x == 0.0 {
        return 0.0;
    }
    halley(x, initial_guess(x))
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.25 {
        // Series in p = sqrt(2(ex + 1)) around the branch point.
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0))
    } else if x <= E {
        x * (1.0 + 4.0 / 3.0 * x) / (1.0 + x * (7.0 / 3.0 + 5.0 / 6.0 * x))
    } else {
        let l = x.ln();
        l - l.ln()
    }
}

fn halley(x: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let w1 = w + 1.0;
        if w1 == 0.0 {
            break;
        }
        let denom = ew * w1 - (w + 2.0) * f / (2.0 * w1);
        let dw = f / denom;
        if !dw.is_finite() {
            break;
        }
        w -= dw;
        if w < -1.0 {
            w = -1.0;
        }
        if dw.abs() <= REL_STEP_TOL * (1.0 + w.abs()) {
            break;
        }
    }
    w
}

// Newton on w + ln w = z, for large z.
fn w_of_exp_newton(z: f64) -> f64 {
    let mut w = z - z.ln();
    for _ in 0..MAX_ITER {
        let g = w + w.ln() - z;
        let dw = g / (1.0 + 1.0 / w);
        w -= dw;
        if dw.abs() <= REL_STEP_TOL * (1.0 + w.abs()) {
            break;
        }
    }
    w
}
