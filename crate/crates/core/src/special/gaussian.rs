//! Standard normal tail `Q(z) = P(Z > z)` and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Complementary error function for `x >= 0`.
fn erfc_nonneg(x: f64) -> f64 {
    if x < 2.0 {
        // erf Maclaurin series: 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            let nf = n as f64;
            term *= -x2 / nf;
            let add = term / (2.0 * nf + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        1.0 - 2.0 * FRAC_1_SQRT_PI * sum
    } else {
        // Continued fraction erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
        // evaluated with the modified Lentz algorithm.
        let tiny = 1e-300;
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for n in 1..500 {
            let an = 0.5 * n as f64;
            d = x + an * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = x + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() * FRAC_1_SQRT_PI / f
    }
}

/// `Q(z) = P(Z > z)` for a standard normal `Z`.
pub fn gaussian_q(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        0.5 * erfc_nonneg(z * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * erfc_nonneg(-z * FRAC_1_SQRT_2)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    gaussian_q(-z)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `z` such that `Q(z) = p`.
pub fn gaussian_q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("Q^-1 needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        // 1 - p is exact for p in [1/2, 1]
        return Ok(-tail_quantile(1.0 - p));
    }
    Ok(tail_quantile(p))
}

/// Solves `Q(z) = tail` for `0 < tail < 1/2`.
fn tail_quantile(tail: f64) -> f64 {
    // Abramowitz & Stegun 26.2.23 starting point (|error| < 4.5e-4)
    let t = (-2.0 * tail.ln()).sqrt();
    let mut z = t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
        / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t);
    for _ in 0..50 {
        let pdf = normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        // Newton step on Q(z) - tail (dQ/dz = -pdf) with Halley's correction
        let err = (gaussian_q(z) - tail) / pdf;
        let step = err / (1.0 + 0.5 * z * err);
        z += step;
        if step.abs() <= 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    z
}
