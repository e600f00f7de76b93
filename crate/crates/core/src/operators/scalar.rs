//! Scalar capacity operators `c: R -> 2^R` and their resolvents `J_{γc}`.

use super::lambert::lambert_w_of_exp;
use super::root::newton_bisect;
use super::OperatorError;

const BPR_MAX_ITER: usize = 200;
const BPR_ABS_TOL: f64 = 1e-12;

/// Convex function whose proximity operator has a closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFunction {
    /// `φ = 0`.
    Zero,
    /// `φ(ξ) = slope·ξ + offset`.
    Affine { slope: f64, offset: f64 },
    /// `φ(ξ) = ½·curvature·ξ²`, `curvature >= 0`.
    Quadratic { curvature: f64 },
    /// `φ(ξ) = weight·|ξ|^exponent` with exponent in {1, 3/2, 2}.
    Power { weight: f64, exponent: f64 },
}

impl ScalarFunction {
    pub fn validate(&self) -> Result<(), OperatorError> {
        match *self {
            ScalarFunction::Zero => Ok(()),
            ScalarFunction::Affine { slope, offset } => {
                finite("affine", "slope", slope)?;
                finite("affine", "offset", offset)
            }
            ScalarFunction::Quadratic { curvature } => {
                nonnegative("quadratic", "curvature", curvature)
            }
            ScalarFunction::Power { weight, exponent } => {
                nonnegative("power", "weight", weight)?;
                if exponent == 1.0 || exponent == 1.5 || exponent == 2.0 {
                    Ok(())
                } else {
                    Err(OperatorError::UnsupportedExponent(exponent))
                }
            }
        }
    }

    /// `prox_{γφ}(ξ)`.
    pub fn prox(&self, gamma: f64, xi: f64) -> f64 {
        match *self {
            ScalarFunction::Zero => xi,
            ScalarFunction::Affine { slope, .. } => xi - gamma * slope,
            ScalarFunction::Quadratic { curvature } => xi / (1.0 + gamma * curvature),
            ScalarFunction::Power { weight, exponent } => {
                let gw = gamma * weight;
                if exponent == 1.0 {
                    xi.signum() * (xi.abs() - gw).max(0.0)
                } else if exponent == 2.0 {
                    xi / (1.0 + 2.0 * gw)
                } else {
                    // t = sqrt|s| solves t² + (3/2)γw·t - |ξ| = 0.
                    let b = 1.5 * gw;
                    let t = 2.0 * xi.abs() / (b + (b * b + 4.0 * xi.abs()).sqrt());
                    if t == 0.0 {
                        0.0
                    } else {
                        xi.signum() * t * t
                    }
                }
            }
        }
    }

    /// Subdifferential `∂φ(ξ)` as a closed interval.
    pub fn subdifferential(&self, xi: f64) -> (f64, f64) {
        match *self {
            ScalarFunction::Zero => (0.0, 0.0),
            ScalarFunction::Affine { slope, .. } => (slope, slope),
            ScalarFunction::Quadratic { curvature } => (curvature * xi, curvature * xi),
            ScalarFunction::Power { weight, exponent } => {
                if exponent == 1.0 {
                    if xi == 0.0 {
                        (-weight, weight)
                    } else {
                        (weight * xi.signum(), weight * xi.signum())
                    }
                } else {
                    let g = weight * exponent * xi.signum() * xi.abs().powf(exponent - 1.0);
                    (g, g)
                }
            }
        }
    }
}

/// Scalar capacity operator families with closed-form or root-found
/// resolvents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarCapacity {
    /// Bureau of Public Roads cost `θ(1 + α(ξ/ϱ)^p)` for `ξ >= 0`, `θ` below.
    Bpr {
        alpha: f64,
        rho: f64,
        theta: f64,
        p: f64,
    },
    /// `θ + ln(ω/(ω - ξ))` on `ξ < ω`, empty beyond.
    Logarithmic { omega: f64, theta: f64 },
    /// Traffic Research Corporation cost
    /// `δ + α(ξ - ω) + sqrt(α²(ξ - ω)² + β)`.
    Trc {
        alpha: f64,
        beta: f64,
        delta: f64,
        omega: f64,
    },
    /// `θ·α^{pξ}` with `α > 1`.
    PowerExp { alpha: f64, theta: f64, p: f64 },
    /// `∂(φ + ι_Ω)` for a closed interval `Ω = [lo, hi]`.
    IntervalProx {
        phi: ScalarFunction,
        lo: f64,
        hi: f64,
    },
}

impl ScalarCapacity {
    pub fn family(&self) -> &'static str {
        match self {
            ScalarCapacity::Bpr { .. } => "bpr",
            ScalarCapacity::Logarithmic { .. } => "logarithmic",
            ScalarCapacity::Trc { .. } => "trc",
            ScalarCapacity::PowerExp { .. } => "powerexp",
            ScalarCapacity::IntervalProx { .. } => "interval_prox",
        }
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        let fam = self.family();
        match *self {
            ScalarCapacity::Bpr {
                alpha,
                rho,
                theta,
                p,
            } => {
                positive(fam, "alpha", alpha)?;
                positive(fam, "rho", rho)?;
                positive(fam, "theta", theta)?;
                positive(fam, "p", p)
            }
            ScalarCapacity::Logarithmic { omega, theta } => {
                positive(fam, "omega", omega)?;
                nonnegative(fam, "theta", theta)
            }
            ScalarCapacity::Trc {
                alpha,
                beta,
                delta,
                omega,
            } => {
                positive(fam, "alpha", alpha)?;
                positive(fam, "beta", beta)?;
                positive(fam, "delta", delta)?;
                positive(fam, "omega", omega)
            }
            ScalarCapacity::PowerExp { alpha, theta, p } => {
                if !(alpha.is_finite() && alpha > 1.0) {
                    return Err(OperatorError::InvalidParameter {
                        family: fam,
                        name: "alpha",
                        value: alpha,
                        requirement: "> 1",
                    });
                }
                positive(fam, "theta", theta)?;
                positive(fam, "p", p)
            }
            ScalarCapacity::IntervalProx { phi, lo, hi } => {
                phi.validate()?;
                if lo.is_nan()
                    || hi.is_nan()
                    || lo > hi
                    || lo == f64::INFINITY
                    || hi == f64::NEG_INFINITY
                {
                    return Err(OperatorError::InvalidInterval { lo, hi });
                }
                Ok(())
            }
        }
    }

    /// `J_{γc}(ξ)`.
    pub fn resolvent(&self, gamma: f64, xi: f64) -> f64 {
        match *self {
            ScalarCapacity::Bpr {
                alpha,
                rho,
                theta,
                p,
            } => resolvent_bpr(alpha, rho, theta, p, gamma, xi),
            ScalarCapacity::Logarithmic { omega, theta } => resolvent_log(omega, theta, gamma, xi),
            ScalarCapacity::Trc {
                alpha,
                beta,
                delta,
                omega,
            } => resolvent_trc(alpha, beta, delta, omega, gamma, xi),
            ScalarCapacity::PowerExp { alpha, theta, p } => {
                resolvent_powerexp(alpha, theta, p, gamma, xi)
            }
            ScalarCapacity::IntervalProx { phi, lo, hi } => phi.prox(gamma, xi).clamp(lo, hi),
        }
    }

    /// The set `c(ξ)` as a closed interval (possibly unbounded), or `None`
    /// when `ξ` lies outside the domain.
    pub fn subdifferential(&self, xi: f64) -> Option<(f64, f64)> {
        match *self {
            ScalarCapacity::IntervalProx { phi, lo, hi } => {
                if xi < lo || xi > hi {
                    return None;
                }
                let (mut a, mut b) = phi.subdifferential(xi);
                if xi == lo {
                    a = f64::NEG_INFINITY;
                }
                if xi == hi {
                    b = f64::INFINITY;
                }
                Some((a, b))
            }
            _ => self.value(xi).map(|v| (v, v)),
        }
    }

    /// `c(ξ)` for the single-valued families; `None` outside the domain or
    /// where the operator is set-valued.
    pub fn value(&self, xi: f64) -> Option<f64> {
        match *self {
            ScalarCapacity::Bpr {
                alpha,
                rho,
                theta,
                p,
            } => Some(if xi >= 0.0 {
                theta * (1.0 + alpha * (xi / rho).powf(p))
            } else {
                theta
            }),
            ScalarCapacity::Logarithmic { omega, theta } => {
                (xi < omega).then(|| theta + (omega / (omega - xi)).ln())
            }
            ScalarCapacity::Trc {
                alpha,
                beta,
                delta,
                omega,
            } => {
                let d = xi - omega;
                Some(delta + alpha * d + (alpha * alpha * d * d + beta).sqrt())
            }
            ScalarCapacity::PowerExp { alpha, theta, p } => {
                Some(theta * (p * xi * alpha.ln()).exp())
            }
            ScalarCapacity::IntervalProx { .. } => match self.subdifferential(xi) {
                Some((a, b)) if a == b => Some(a),
                _ => None,
            },
        }
    }
}

/// BPR resolvent. Below `γθ` the cost is the constant `θ`; otherwise the
/// root of `(αγθ/ϱ^p)s^p + s + γθ - ξ = 0` on `[0, ξ - γθ]`.
pub fn resolvent_bpr(alpha: f64, rho: f64, theta: f64, p: f64, gamma: f64, xi: f64) -> f64 {
    let shift = gamma * theta;
    if xi < shift {
        return xi - shift;
    }
    let upper = xi - shift;
    if upper == 0.0 {
        return 0.0;
    }
    let coef = alpha * gamma * theta / rho.powf(p);
    let eval = |s: f64| {
        let sp = s.powf(p);
        let f = coef * sp + s - upper;
        let df = if s > 0.0 {
            coef * p * sp / s + 1.0
        } else if p >= 1.0 {
            1.0 + if p == 1.0 { coef } else { 0.0 }
        } else {
            f64::INFINITY
        };
        (f, df)
    };
    let tol = BPR_ABS_TOL.max(4.0 * f64::EPSILON * upper);
    newton_bisect(eval, 0.0, upper, tol, BPR_MAX_ITER)
}

/// Logarithmic-capacity resolvent `ω - γW((ω/γ)exp(θ - ξ/γ + ω/γ))`.
///
/// The exponential is never formed; `W(exp(z))` is evaluated directly. The
/// result is kept strictly inside the domain `]-∞, ω[`.
pub fn resolvent_log(omega: f64, theta: f64, gamma: f64, xi: f64) -> f64 {
    let z = (omega / gamma).ln() + theta - xi / gamma + omega / gamma;
    let s = omega - gamma * lambert_w_of_exp(z);
    s.min(next_down(omega))
}

/// TRC resolvent, closed form.
pub fn resolvent_trc(alpha: f64, beta: f64, delta: f64, omega: f64, gamma: f64, xi: f64) -> f64 {
    let ga = gamma * alpha;
    let w = xi - gamma * delta;
    let root =
        (ga * ga * (w - omega) * (w - omega) + (2.0 * ga + 1.0) * gamma * gamma * beta).sqrt();
    (-root + ga * (w + omega) + w) / (2.0 * ga + 1.0)
}

/// Exponential-capacity resolvent `ξ - W(γθα^{pξ}p ln α)/(p ln α)`.
pub fn resolvent_powerexp(alpha: f64, theta: f64, p: f64, gamma: f64, xi: f64) -> f64 {
    let k = p * alpha.ln();
    let z = (gamma * theta * k).ln() + k * xi;
    xi - lambert_w_of_exp(z) / k
}

fn next_down(v: f64) -> f64 {
    if v.is_nan() || v == f64::NEG_INFINITY {
        return v;
    }
    if v == 0.0 {
        return -f64::from_bits(1);
    }
    let bits = v.to_bits();
    if v > 0.0 {
        f64::from_bits(bits - 1)
    } else {
        f64::from_bits(bits + 1)
    }
}

fn finite(family: &'static str, name: &'static str, value: f64) -> Result<(), OperatorError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(OperatorError::InvalidParameter {
            family,
            name,
            value,
            requirement: "finite",
        })
    }
}

fn positive(family: &'static str, name: &'static str, value: f64) -> Result<(), OperatorError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(OperatorError::InvalidParameter {
            family,
            name,
            value,
            requirement: "> 0",
        })
    }
}

fn nonnegative(family: &'static str, name: &'static str, value: f64) -> Result<(), OperatorError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(OperatorError::InvalidParameter {
            family,
            name,
            value,
            requirement: ">= 0",
        })
    }
}
