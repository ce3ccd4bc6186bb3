//! Large-system mean and variance of the transmit energy, the outage
//! probability they imply, and battery dimensioning.

use serde::{Deserialize, Serialize};

use crate::cell::{phi_spec, CellGeometry};
use crate::channel::{achievable_rate, SystemConfig};
use crate::error::{Error, Result};
use crate::special::{find_bessel_zeros, gaussian_q, gaussian_q_inv, j0, phi_coefficient, ZeroKind};

/// Tolerance used for the series when callers do not pick one.
pub const DEFAULT_THETA_TOL: f64 = 1e-10;
/// Hard cap on the number of series terms.
pub const MAX_THETA_TERMS: usize = 500;

/// `E[(1/g)^order]` for a user uniform in the disk, `1/g = r^beta + r0^beta`.
pub fn inverse_gain_moment(order: u32, geom: &CellGeometry) -> f64 {
    let (big_r, r0, beta) = (geom.radius, geom.cutoff, geom.beta);
    // binomial expansion with E[r^a] = 2 R^a / (a + 2)
    let mut total = 0.0;
    let mut binom = 1.0;
    for j in 0..=order {
        let a = beta * j as f64;
        let radial = 2.0 * big_r.powf(a) / (a + 2.0);
        total += binom * radial * r0.powf(beta * (order - j) as f64);
        binom = binom * (order - j) as f64 / (j + 1) as f64;
    }
    total
}

/// The order-2 moment with the first term written as `R^(2 beta) / (2 beta + 2)`.
pub fn inverse_gain_square_alternative(geom: &CellGeometry) -> f64 {
    let (big_r, r0, beta) = (geom.radius, geom.cutoff, geom.beta);
    big_r.powf(2.0 * beta) / (2.0 * beta + 2.0) + 4.0 * r0.powf(beta) * big_r.powf(beta) / (beta + 2.0) + r0.powf(2.0 * beta)
}

fn power_scale(cfg: &SystemConfig) -> f64 {
    let c = cfg.load();
    cfg.rho * c / (1.0 - c)
}

/// `E[E_T] = T (rho c / (1 - c)) E[1/g]`.
pub fn mean_energy(cfg: &SystemConfig) -> f64 {
    cfg.horizon * power_scale(cfg) * inverse_gain_moment(1, &cfg.geom)
}

/// `int_0^1 (1 - exp(-a t))^2 dt`.
pub fn theta_time_integral(a: f64) -> f64 {
    if a < 0.5 {
        // sum_{n>=2} (-1)^n (2^n - 2) a^n / ((n + 1) n!)
        let mut sum = 0.0;
        let mut pow_fact = a; // a^n / n!
        let mut two_n = 2.0;
        for n in 2..40 {
            pow_fact *= a / n as f64;
            two_n *= 2.0;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let term = sign * (two_n - 2.0) * pow_fact / (n + 1) as f64;
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 + 2.0 * (-a).exp_m1() / a - (-2.0 * a).exp_m1() / (2.0 * a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaTerm {
    pub k: f64,
    pub phi: f64,
    pub time_integral: f64,
    pub term: f64,
}

/// Truncated mode sum for the mobility variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSeries {
    pub zero_kind: ZeroKind,
    pub terms: Vec<ThetaTerm>,
    pub total: f64,
    /// Estimated size of the discarded tail.
    pub truncation_bound: f64,
}

impl ThetaSeries {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Evaluates the series with the zero family from `cfg.propagator`.
pub fn theta(cfg: &SystemConfig, rel_tol: f64) -> Result<ThetaSeries> {
    theta_with_kind(cfg, cfg.propagator.zero_kind, rel_tol)
}

/// Mode sum `sum_i 2 phi_i^2 / (k_i^2 J0(k_i)^2) int_0^1 (1 - exp(-a_i t))^2 dt`
/// with `a_i = k_i^2 D T / R^2`.
///
/// The tail after term `n` is estimated from the local power-law decay of
/// the terms, `tail ~ term_n k_n / ((p - 1) (k_n - k_{n-1}))`; summation
/// stops once that estimate stays below `rel_tol * partial` for three
/// consecutive terms.
pub fn theta_with_kind(cfg: &SystemConfig, zero_kind: ZeroKind, rel_tol: f64) -> Result<ThetaSeries> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid(format!("rel_tol must be positive, got {rel_tol}")));
    }
    let beta = cfg.geom.beta;
    let scale = cfg.mob.diffusion * cfg.horizon / (cfg.geom.radius * cfg.geom.radius);
    let spec = phi_spec();
    let mut terms: Vec<ThetaTerm> = Vec::new();
    let mut total = 0.0;
    let mut quiet = 0;
    let mut tail = f64::INFINITY;
    let mut zeros: Vec<f64> = Vec::new();
    while terms.len() < MAX_THETA_TERMS {
        let i = terms.len();
        if i == zeros.len() {
            let want = (2 * zeros.len()).clamp(64, MAX_THETA_TERMS);
            zeros = find_bessel_zeros(zero_kind, want, 1e-13)?.zeros;
        }
        let k = zeros[i];
        let phi = phi_coefficient(k, beta, &spec)?;
        let time_integral = theta_time_integral(k * k * scale);
        let term = 2.0 * phi * phi / (k * k * j0(k).powi(2)) * time_integral;
        total += term;
        terms.push(ThetaTerm { k, phi, time_integral, term });
        if total == 0.0 {
            // D = 0 or T = 0: every time integral vanishes
            if i >= 2 {
                return Ok(ThetaSeries { zero_kind, terms, total, truncation_bound: 0.0 });
            }
            continue;
        }
        if i == 0 {
            continue;
        }
        let prev = &terms[i - 1];
        tail = tail_estimate(prev.k, prev.term, k, term);
        if tail < rel_tol * total {
            quiet += 1;
            if quiet == 3 {
                return Ok(ThetaSeries { zero_kind, terms, total, truncation_bound: tail });
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::SeriesNotConverged {
        terms: terms.len(),
        partial: total,
        last_term: tail,
    })
}

fn tail_estimate(k_prev: f64, t_prev: f64, k: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    // terms behave like k^-p; the sum over a grid of spacing dk beyond k is
    // about t k / ((p - 1) dk)
    let p = ((t_prev / t).ln() / (k / k_prev).ln()).max(2.0);
    t * k / ((p - 1.0) * (k - k_prev))
}

/// `A2 = (T R^2 / (D K)) (rho^2 c^2 R^(2 beta) / (1 - c)^2) Theta`.
pub fn variance_mobility(cfg: &SystemConfig) -> Result<f64> {
    variance_mobility_from(cfg, &theta(cfg, DEFAULT_THETA_TOL)?)
}

pub fn variance_mobility_from(cfg: &SystemConfig, series: &ThetaSeries) -> Result<f64> {
    let d = cfg.mob.diffusion;
    if d == 0.0 || cfg.horizon == 0.0 {
        return Ok(0.0);
    }
    let r = cfg.geom.radius;
    let s = power_scale(cfg);
    Ok(cfg.horizon * r * r / (d * cfg.users as f64) * s * s * r.powf(2.0 * cfg.geom.beta) * series.total)
}

/// `A1 = T tau_d (rho^2 c^3 / (1 - c)^3) E[1/g^2] / K^2`.
pub fn variance_fading(cfg: &SystemConfig) -> f64 {
    let c = cfg.load();
    let k = cfg.users as f64;
    cfg.horizon * cfg.tau_d * cfg.rho * cfg.rho * c.powi(3) / (1.0 - c).powi(3) * inverse_gain_moment(2, &cfg.geom) / (k * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean_energy: f64,
    pub variance_mobility: f64,
    pub variance_fading: f64,
    pub variance_total: f64,
}

impl MomentPair {
    pub fn new(mean_energy: f64, variance_mobility: f64, variance_fading: f64) -> Result<Self> {
        if !mean_energy.is_finite() {
            return Err(Error::invalid(format!("mean energy must be finite, got {mean_energy}")));
        }
        for (name, v) in [("variance_mobility", variance_mobility), ("variance_fading", variance_fading)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(MomentPair {
            mean_energy,
            variance_mobility,
            variance_fading,
            variance_total: variance_mobility + variance_fading,
        })
    }

    /// Externally supplied mean and total variance.
    pub fn from_totals(mean_energy: f64, variance_total: f64) -> Result<Self> {
        Self::new(mean_energy, variance_total, 0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance_total.sqrt()
    }
}

pub fn moments(cfg: &SystemConfig) -> Result<MomentPair> {
    cfg.validate()?;
    MomentPair::new(mean_energy(cfg), variance_mobility(cfg)?, variance_fading(cfg))
}

/// `Pr(E_T > eta) = Q((eta - mean) / std)`.
pub fn outage_probability(eta: f64, moments: &MomentPair) -> Result<f64> {
    if !(moments.variance_total > 0.0) {
        return Err(Error::Degenerate("outage probability needs a positive variance".into()));
    }
    Ok(gaussian_q((eta - moments.mean_energy) / moments.std_dev()))
}

/// Smallest battery level `eta` with `Pr(E_T > eta) <= epsilon`.
pub fn battery_requirement(epsilon: f64, moments: &MomentPair) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(moments.std_dev() * gaussian_q_inv(epsilon)? + moments.mean_energy)
}

/// Published operating points for the toy cell (R = 1, r0 = 0.1, rho = 1,
/// K = 16) next to the values this crate computes for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub label: String,
    pub horizon: f64,
    pub antennas: usize,
    pub beta: f64,
    pub published_mean: f64,
    pub published_variance: f64,
    pub model_mean: f64,
    pub model_variance: f64,
}

/// Rows for `T in {2, 10}` at `N in {32, 64}` (beta = 4) and `beta in {4, 6}`
/// (N = 64), evaluated with the mobility of `template`.
pub fn reference_table(template: &SystemConfig) -> Result<Vec<ReferenceRow>> {
    const ROWS: [(&str, f64, usize, f64, f64, f64); 8] = [
        ("T=2, N=32", 2.0, 32, 4.0, 1.33, 0.015),
        ("T=2, N=64", 2.0, 64, 4.0, 0.889, 0.0067),
        ("T=10, N=32", 10.0, 32, 4.0, 6.668, 0.0891),
        ("T=10, N=64", 10.0, 64, 4.0, 4.445, 0.0396),
        ("T=2, beta=4", 2.0, 64, 4.0, 0.889, 0.0067),
        ("T=2, beta=6", 2.0, 64, 6.0, 1.0, 0.0029),
        ("T=10, beta=4", 10.0, 64, 4.0, 4.445, 0.0396),
        ("T=10, beta=6", 10.0, 64, 6.0, 5.0, 0.0169),
    ];
    ROWS.iter()
        .map(|&(label, horizon, antennas, beta, mean, var)| {
            let mut cfg = template.clone();
            cfg.users = 16;
            cfg.antennas = antennas;
            cfg.rho = 1.0;
            cfg.geom = CellGeometry::new(1.0, 0.1, beta)?;
            cfg.horizon = horizon;
            let m = moments(&cfg)?;
            Ok(ReferenceRow {
                label: label.to_string(),
                horizon,
                antennas,
                beta,
                published_mean: mean,
                published_variance: var,
                model_mean: m.mean_energy,
                model_variance: m.variance_total,
            })
        })
        .collect()
}

/// Everything `analyze` reports about one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub toolkit_version: String,
    pub config: SystemConfig,
    pub load: f64,
    pub diffusion: f64,
    pub inverse_gain_mean: f64,
    pub inverse_gain_second_moment: f64,
    pub moments: MomentPair,
    /// Spectral efficiency per user in bit/s/Hz.
    pub rate: f64,
    pub theta: ThetaSeries,
    pub notes: Vec<String>,
}

pub fn theory_report(cfg: &SystemConfig, rel_tol: f64) -> Result<TheoryReport> {
    cfg.validate()?;
    let series = theta(cfg, rel_tol)?;
    let moments = MomentPair::new(mean_energy(cfg), variance_mobility_from(cfg, &series)?, variance_fading(cfg))?;
    let second = inverse_gain_moment(2, &cfg.geom);
    let alt = inverse_gain_square_alternative(&cfg.geom);
    let mut notes = vec![format!(
        "E[1/g^2] = {second:.6e} by direct integration against 2r/R^2; \
         writing its first term as R^(2 beta)/(2 beta + 2) would give {alt:.6e}"
    )];
    notes.push(
        "variance_fading keeps the diagonal fading term only; cross-user fading covariance is O(K^-3)".to_string(),
    );
    if cfg.tau_d == 0.0 {
        notes.push("tau_d = 0: fading variance term is zero".to_string());
    }
    if cfg.propagator.zero_kind != ZeroKind::ZerosOfJ1 {
        notes.push(format!(
            "theta uses {} for the radial modes; the reflecting-boundary eigenvalues are the zeros of J1",
            cfg.propagator.zero_kind.as_str()
        ));
    }
    let dtr = cfg.mob.diffusion * cfg.horizon / cfg.geom.radius.powi(2);
    if dtr < 5.0 {
        notes.push(format!("D T / R^2 = {dtr:.3}: mean and variance are not yet linear in T"));
    }
    Ok(TheoryReport {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        config: cfg.clone(),
        load: cfg.load(),
        diffusion: cfg.mob.diffusion,
        inverse_gain_mean: inverse_gain_moment(1, &cfg.geom),
        inverse_gain_second_moment: second,
        moments,
        rate: achievable_rate(cfg.rho, cfg.sigma2)?,
        theta: series,
        notes,
    })
}
