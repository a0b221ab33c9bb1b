//! Special functions: the exponential integral, the ergodic-rate map of a
//! Rayleigh link, and the Gauss hypergeometric function on the real axis.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;

/// Power series of `E₁` around the origin; accurate for `0 < z ≤ 1`.
fn e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -z / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < EPS * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}

/// Continued fraction for `e^z E₁(z)` (modified Lentz); accurate for `z > 1`.
fn e1_scaled_cf(z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Exponential integral `E₁(z) = ∫_z^∞ e^{-t}/t dt` for `z > 0`.
pub fn exp_integral_e1(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            function: "exp_integral_e1",
            arg: z,
        });
    }
    Ok(if z <= 1.0 {
        e1_series(z)
    } else {
        e1_scaled_cf(z) * (-z).exp()
    })
}

/// `e^z E₁(z)`, evaluated without under/overflow for large `z`.
pub fn exp_integral_e1_scaled(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain {
            function: "exp_integral_e1_scaled",
            arg: z,
        });
    }
    Ok(if z <= 1.0 {
        z.exp() * e1_series(z)
    } else {
        e1_scaled_cf(z)
    })
}

/// Ergodic rate (bit/s/Hz) of a Rayleigh-faded link with mean SINR `mean_sinr`:
/// `E{log₂(1 + mean_sinr·|h|²)} = e^{1/s} E₁(1/s) / ln 2`.
pub fn ergodic_rate(mean_sinr: f64) -> Result<f64> {
    if mean_sinr == 0.0 {
        return Ok(0.0);
    }
    if !(mean_sinr > 0.0) {
        return Err(Error::Domain {
            function: "ergodic_rate",
            arg: mean_sinr,
        });
    }
    Ok(exp_integral_e1_scaled(1.0 / mean_sinr)? / LN_2)
}

/// Mean SINR that gives a Rayleigh link the ergodic rate `rate` (bit/s/Hz).
///
/// The forward map is strictly increasing, and
/// `log₂(1+2s)/2 < rate(s) < s/ln 2`, which brackets the root before a
/// log-domain bisection.
pub fn invert_ergodic_rate(rate: f64) -> Result<f64> {
    if rate == 0.0 {
        return Ok(0.0);
    }
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::Domain {
            function: "invert_ergodic_rate",
            arg: rate,
        });
    }
    let mut lo = (rate * LN_2).ln();
    let mut hi = (0.5 * ((2.0 * rate * LN_2).exp_m1())).ln().max(lo);
    // bracket guard for rounding at the ends
    while ergodic_rate(lo.exp())? > rate {
        lo -= 1.0;
    }
    while ergodic_rate(hi.exp())? < rate {
        hi += 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ergodic_rate(mid.exp())? < rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Option<f64> {
    const MAX_TERMS: usize = 200_000;
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut small = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            small += 1;
            if small >= 3 {
                return Some(sum);
            }
        } else {
            small = 0;
        }
        if !sum.is_finite() {
            return None;
        }
    }
    None
}

/// Gauss hypergeometric function `₂F₁(a, b; c; z)` for real `z < 1`.
///
/// Uses the defining series for `|z| ≤ 1/2` and the Pfaff transformation
/// `(1−z)^{−a} ₂F₁(a, c−b; c; z/(z−1))` for `z < −1/2`. Returns
/// [`Error::NotConverged`] when the series does not settle, so callers can
/// fall back to another route.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(z < 1.0) || !z.is_finite() {
        return Err(Error::Domain {
            function: "hyp2f1",
            arg: z,
        });
    }
    if c <= 0.0 && c.fract() == 0.0 {
        return Err(Error::Domain {
            function: "hyp2f1 (c at a pole)",
            arg: c,
        });
    }
    let value = if z >= -0.5 {
        hyp2f1_series(a, b, c, z)
    } else {
        let w = z / (z - 1.0);
        hyp2f1_series(a, c - b, c, w).map(|f| (1.0 - z).powf(-a) * f)
    };
    value.ok_or(Error::NotConverged {
        iterations: 200_000,
        residual: f64::NAN,
    })
}
