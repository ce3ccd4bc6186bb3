use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use super::bessel::{bessel_jn_prime, j1, j1_prime};
use crate::error::{Error, Result};

/// Which family of Bessel zeros indexes the radial modes.
///
/// `ZerosOfJ1` are the roots of `J0' = -J1`, i.e. the radial Neumann
/// eigenvalues of the unit disk. `ZerosOfJ1Prime` are the roots of `J1'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroKind {
    ZerosOfJ1,
    ZerosOfJ1Prime,
}

impl ZeroKind {
    pub fn target(self, x: f64) -> f64 {
        match self {
            ZeroKind::ZerosOfJ1 => j1(x),
            ZeroKind::ZerosOfJ1Prime => j1_prime(x),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ZeroKind::ZerosOfJ1 => "zeros_of_j1",
            ZeroKind::ZerosOfJ1Prime => "zeros_of_j1_prime",
        }
    }
}

impl std::str::FromStr for ZeroKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zeros_of_j1" | "j1" => Ok(ZeroKind::ZerosOfJ1),
            "zeros_of_j1_prime" | "j1_prime" | "j1prime" => Ok(ZeroKind::ZerosOfJ1Prime),
            other => Err(format!(
                "unknown zero kind `{other}` (expected zeros_of_j1 or zeros_of_j1_prime)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselZeroTable {
    pub kind: ZeroKind,
    pub zeros: Vec<f64>,
    /// Largest `|target(z)|` over the stored zeros.
    pub achieved_tolerance: f64,
}

impl BesselZeroTable {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }
}

const SCAN_STEP: f64 = FRAC_PI_4;
const SCAN_ORIGIN: f64 = 0.1;

/// First `count` positive zeros of `J1` or `J1'`.
///
/// Sign changes are located on a grid of step `pi/4` and each bracket is
/// bisected until its width is below `tol`.
pub fn find_bessel_zeros(kind: ZeroKind, count: usize, tol: f64) -> Result<BesselZeroTable> {
    if count == 0 {
        return Err(Error::invalid("zero count must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("zero tolerance must be positive, got {tol}")));
    }
    let bound = (count as f64 + 2.0) * PI;
    let target = |x: f64| kind.target(x);
    let zeros = scan_zeros(target, count, SCAN_ORIGIN, bound, tol);
    if zeros.len() < count {
        return Err(Error::ZeroBracketing {
            kind,
            found: zeros.len(),
            requested: count,
            bound,
        });
    }
    let achieved_tolerance = zeros
        .iter()
        .map(|&z| target(z).abs())
        .fold(0.0, f64::max);
    Ok(BesselZeroTable {
        kind,
        zeros,
        achieved_tolerance,
    })
}

/// Positive roots of `J_m'` below `max_value` (at most `count` of them) for
/// the angular order `m`; for `m = 0` these coincide with
/// `ZeroKind::ZerosOfJ1`.
pub(crate) fn neumann_zeros(order: usize, count: usize, max_value: f64, tol: f64) -> Vec<f64> {
    // J_m' has no positive root below m
    let origin = if order == 0 { SCAN_ORIGIN } else { order as f64 * 0.9 + SCAN_ORIGIN };
    let bound = (order as f64 + (count as f64 + 3.0) * PI).min(max_value);
    scan_zeros(|x| bessel_jn_prime(order, x), count, origin, bound, tol)
}

fn scan_zeros<F: Fn(f64) -> f64>(f: F, count: usize, origin: f64, bound: f64, tol: f64) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    let mut lo = origin;
    let mut f_lo = f(lo);
    while zeros.len() < count && lo < bound {
        let hi = lo + SCAN_STEP;
        let f_hi = f(hi);
        if f_lo == 0.0 {
            zeros.push(lo);
        } else if f_lo.signum() != f_hi.signum() && f_hi != 0.0 {
            zeros.push(bisect(&f, lo, hi, f_lo, tol));
        }
        lo = hi;
        f_lo = f_hi;
    }
    zeros
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
