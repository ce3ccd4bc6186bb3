use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::bessel::j0;
use crate::error::{Error, Result};

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Upper bound on the width of the initial panels. Oscillatory
    /// integrands such as `J0(k t)` need at most `pi / k`.
    pub max_panel_width: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 200_000,
            max_panel_width: None,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            abs_tol,
            rel_tol,
            max_subdivisions,
            max_panel_width: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_max_panel_width(mut self, width: f64) -> Self {
        self.max_panel_width = Some(width);
        self
    }

    /// Panel bound suited to an integrand oscillating like `J0(k t)`.
    pub fn for_frequency(self, k: f64) -> Self {
        if k > 0.0 {
            self.with_max_panel_width(std::f64::consts::PI / k)
        } else {
            self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::invalid("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::invalid("max_subdivisions must be at least 1"));
        }
        if let Some(w) = self.max_panel_width {
            if !(w > 0.0) {
                return Err(Error::invalid("max_panel_width must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    // left and right quarter-point values
    fl: f64,
    fr: f64,
    estimate: f64,
    error: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> Panel {
        let m = 0.5 * (a + b);
        let fl = f(0.5 * (a + m));
        let fr = f(0.5 * (m + b));
        let h = b - a;
        let coarse = h / 6.0 * (fa + 4.0 * fm + fb);
        let fine = h / 12.0 * (fa + 4.0 * fl + 2.0 * fm + 4.0 * fr + fb);
        Panel {
            a,
            b,
            fa,
            fm,
            fb,
            fl,
            fr,
            estimate: fine + (fine - coarse) / 15.0,
            error: (fine - coarse).abs() / 15.0,
        }
    }

    fn split<F: Fn(f64) -> f64>(&self, f: &F) -> (Panel, Panel) {
        let m = 0.5 * (self.a + self.b);
        (
            Panel::new(f, self.a, m, self.fa, self.fl, self.fm),
            Panel::new(f, m, self.b, self.fm, self.fr, self.fb),
        )
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MIN_PANELS: usize = 4;

/// Globally adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The panel with the largest Richardson error estimate is bisected until the
/// summed estimate satisfies `abs_tol` or `rel_tol`. Exceeding
/// `max_subdivisions` returns [`Error::QuadratureNotConverged`] with the best
/// estimate so far.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid(format!("integration bounds must satisfy a < b, got [{a}, {b}]")));
    }
    let width = b - a;
    let mut n0 = MIN_PANELS;
    if let Some(w) = spec.max_panel_width {
        n0 = n0.max((width / w).ceil() as usize);
    }
    let h = width / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(2 * n0);
    let mut fa = f(a);
    for i in 0..n0 {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == n0 { b } else { a + (i + 1) as f64 * h };
        let fm = f(0.5 * (lo + hi));
        let fb = f(hi);
        heap.push(Panel::new(&f, lo, hi, fa, fm, fb));
        fa = fb;
    }

    let mut subdivisions = 0;
    loop {
        let (total, error) = heap
            .iter()
            .fold((0.0, 0.0), |(s, e), p| (s + p.estimate, e + p.error));
        if !total.is_finite() {
            return Err(Error::invalid("integrand produced a non-finite value"));
        }
        if error <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::QuadratureNotConverged {
                estimate: total,
                error_estimate: error,
                subdivisions,
            });
        }
        // Split a batch of the worst panels per pass so the O(n) re-summation
        // above stays cheap relative to the work done.
        let batch = (heap.len() / 8).max(1);
        for _ in 0..batch {
            let Some(worst) = heap.pop() else { break };
            let (l, r) = worst.split(&f);
            heap.push(l);
            heap.push(r);
            subdivisions += 1;
        }
    }
}

/// `2 * integral_0^1 J0(k t) t^(beta+1) dt`.
pub fn phi_coefficient(k: f64, beta: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("phi coefficient needs k > 0, got {k}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::invalid(format!("phi coefficient needs beta >= 0, got {beta}")));
    }
    let power = beta + 1.0;
    let integral = integrate(|t| j0(k * t) * t.powf(power), 0.0, 1.0, &spec.for_frequency(k))?;
    Ok(2.0 * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel::j1;
    use proptest::prelude::*;

    fn tight() -> QuadratureSpec {
        QuadratureSpec::new(1e-13, 1e-12, 1_000_000).unwrap()
    }

    #[test]
    fn polynomial() {
        let v = integrate(|t| t, 0.0, 1.0, &tight()).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bessel_closed_form() {
        for k in [0.5, 3.0, 17.3, 120.0] {
            let v = integrate(|t| 2.0 * j0(k * t) * t, 0.0, 1.0, &tight().for_frequency(k)).unwrap();
            assert!((v - 2.0 * j1(k) / k).abs() < 1e-11, "k = {k}");
        }
    }

    #[test]
    fn squared_relaxation_integral() {
        let v = integrate(|t| (1.0 - (-t).exp()).powi(2), 0.0, 1.0, &tight()).unwrap();
        let a = 1.0f64;
        let exact = 1.0 - 2.0 * (1.0 - (-a).exp()) / a + (1.0 - (-2.0 * a).exp()) / (2.0 * a);
        assert!((v - exact).abs() < 1e-12);
        assert!((v - 0.168091).abs() < 1e-6);
    }

    #[test]
    fn reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-15, 1e-15, 3).unwrap();
        match integrate(|t| (40.0 * t).sin() * t.sqrt(), 0.0, 1.0, &spec) {
            Err(Error::QuadratureNotConverged { estimate, subdivisions, .. }) => {
                assert!(estimate.is_finite());
                assert!(subdivisions >= 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(integrate(|t| t, 1.0, 1.0, &tight()).is_err());
        assert!(integrate(|t| t, 2.0, 1.0, &tight()).is_err());
        assert!(QuadratureSpec::new(0.0, 1e-3, 10).is_err());
        assert!(QuadratureSpec::new(1e-3, 1e-3, 0).is_err());
    }

    #[test]
    fn phi_at_beta_zero_is_closed_form() {
        for k in [1.0, 3.8317059702075, 7.0155866698156, 25.0] {
            let phi = phi_coefficient(k, 0.0, &tight()).unwrap();
            assert!((phi - 2.0 * j1(k) / k).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_small_k_limit() {
        for beta in [0.0, 2.0, 4.0, 6.5] {
            let phi = phi_coefficient(1e-7, beta, &tight()).unwrap();
            assert!((phi - 2.0 / (beta + 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_matches_trapezoid_oracle() {
        let k = 3.8317060;
        let beta = 4.0;
        let n = 1_000_000;
        let h = 1.0 / n as f64;
        let f = |t: f64| j0(k * t) * t.powf(beta + 1.0);
        let mut s = 0.5 * (f(0.0) + f(1.0));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        let oracle = 2.0 * s * h;
        let phi = phi_coefficient(k, beta, &tight()).unwrap();
        assert!((phi - oracle).abs() < 1e-9, "{phi} vs {oracle}");
    }

    #[test]
    fn phi_rejects_bad_arguments() {
        assert!(phi_coefficient(0.0, 4.0, &tight()).is_err());
        assert!(phi_coefficient(2.0, -1.0, &tight()).is_err());
    }

    proptest! {
        #[test]
        fn integration_is_linear(alpha in -5.0f64..5.0, w in 0.5f64..30.0, c in -2.0f64..2.0) {
            let spec = tight();
            let f = |t: f64| (w * t).cos() * t * t;
            let g = |t: f64| (c * t).exp();
            let lhs = integrate(|t| alpha * f(t) + g(t), 0.0, 2.0, &spec).unwrap();
            let rhs = alpha * integrate(f, 0.0, 2.0, &spec).unwrap() + integrate(g, 0.0, 2.0, &spec).unwrap();
            let scale = 1.0 + lhs.abs() + rhs.abs();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }
}
