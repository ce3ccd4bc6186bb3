//! Bessel functions of the first kind for real arguments.
//!
//! `J0` and `J1` use three regimes:
//!
//! * `|x| <= 8`: the ascending power series (cancellation stays below ~1e-13);
//! * `8 < |x| <= 25`: Miller's backward recurrence normalized by
//!   `J0 + 2 (J2 + J4 + ...) = 1`;
//! * `|x| > 25`: Hankel's asymptotic expansion, whose optimally truncated
//!   remainder is far below `e^{-2|x|}` there.
//!
//! Higher orders (needed only by the disk propagator) come from the same
//! backward recurrence and are crate-private.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("Bessel argument must be finite, got {x}")))
    }
}

/// `J0(x)`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(j0(x))
}

/// `J1(x)`; odd in `x`.
pub fn bessel_j1(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(j1(x))
}

/// `J1'(x) = J0(x) - J1(x)/x`, with the limit `1/2` at the origin.
pub fn bessel_j1_prime(x: f64) -> Result<f64> {
    check_finite(x)?;
    Ok(j1_prime(x))
}

pub(crate) fn j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        series(0, ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller_j01(ax).0
    } else {
        hankel(0, ax)
    }
}

pub(crate) fn j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        series(1, ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        miller_j01(ax).1
    } else {
        hankel(1, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

pub(crate) fn j1_prime(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        // J1'(x) = 1/2 - 3x^2/16 + O(x^4)
        return 0.5 - 3.0 * x * x / 16.0;
    }
    j0(x) - j1(x) / x
}

/// Ascending series for order 0 or 1 at `x >= 0`.
fn series(order: u32, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let (mut term, scale) = match order {
        0 => (1.0, 1.0),
        _ => (1.0, 0.5 * x),
    };
    let mut sum = term;
    let nu = order as f64;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    scale * sum
}

fn miller_start(order: usize, x: f64) -> usize {
    let m = order as f64;
    let top = x.max(m);
    let start = top + 20.0 + (40.0 * top).sqrt() * 2.0;
    // even start keeps the normalization sum aligned
    let s = start.ceil() as usize;
    s + (s & 1)
}

/// Backward recurrence returning `(J0, J1)` for `x > 0`.
fn miller_j01(x: f64) -> (f64, f64) {
    let orders = miller_orders(x, 1);
    (orders[0], orders[1])
}

/// `J_0(x) .. J_max(x)` for `x > 0` by Miller's algorithm.
fn miller_orders(x: f64, max_order: usize) -> Vec<f64> {
    let start = miller_start(max_order, x);
    let mut out = vec![0.0; max_order + 1];
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-30; // J_k, unnormalized
    let mut norm = 0.0;
    let mut k = start;
    loop {
        if k <= max_order {
            out[k] = cur;
        }
        if k.is_multiple_of(2) {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = (k as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Hankel asymptotic expansion of `J_order(x)` for large positive `x`.
fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0; // a_k(nu) / x^k
    let mut last = f64::INFINITY;
    for k in 1..200u32 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        let mag = a.abs();
        if mag > last {
            break;
        }
        last = mag;
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            p += sign * a;
        } else {
            q += sign * a;
        }
        if mag < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * order as f64 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// `J_order(x)` for any non-negative integer order.
pub(crate) fn bessel_jn(order: usize, x: f64) -> f64 {
    match order {
        0 => return j0(x),
        1 => return j1(x),
        _ => {}
    }
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let v = miller_orders(ax, order)[order];
    if x < 0.0 && order % 2 == 1 {
        -v
    } else {
        v
    }
}

/// `J_order'(x)`; `J0' = -J1`, otherwise `(J_{m-1} - J_{m+1}) / 2`.
pub(crate) fn bessel_jn_prime(order: usize, x: f64) -> f64 {
    if order == 0 {
        return -j1(x);
    }
    if x == 0.0 {
        return if order == 1 { 0.5 } else { 0.0 };
    }
    let ax = x.abs();
    let all = miller_orders(ax, order + 1);
    let v = 0.5 * (all[order - 1] - all[order + 1]);
    // J_m' has parity opposite to J_m
    if x < 0.0 && order.is_multiple_of(2) {
        -v
    } else {
        v
    }
}
