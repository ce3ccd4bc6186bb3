//! Circular cell geometry, path loss, reflected random-walk mobility and the
//! diffusion propagator with a zero-flux boundary.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{bessel_jn, find_bessel_zeros, j0, neumann_zeros, phi_coefficient, QuadratureSpec, ZeroKind};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Point { x: r * c, y: r * s }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `r^beta` evaluated from `r^2`, with fast paths for even integer exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RadialPower {
    EvenInt(i32),
    General(f64),
}

impl RadialPower {
    pub(crate) fn new(beta: f64) -> Self {
        let half = 0.5 * beta;
        if half.fract() == 0.0 && half.abs() <= 16.0 {
            RadialPower::EvenInt(half as i32)
        } else {
            RadialPower::General(half)
        }
    }

    #[inline]
    pub(crate) fn of_norm_sq(self, r2: f64) -> f64 {
        match self {
            RadialPower::EvenInt(h) => r2.powi(h),
            RadialPower::General(h) => r2.powf(h),
        }
    }
}

/// Disk of radius `R` with the path loss `g(x) = 1 / (|x|^beta + r0^beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub radius: f64,
    pub cutoff: f64,
    pub beta: f64,
}

impl CellGeometry {
    pub fn new(radius: f64, cutoff: f64, beta: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::config("R", format!("cell radius must be positive, got {radius}")));
        }
        if !(cutoff.is_finite() && cutoff >= 0.0 && cutoff < radius) {
            return Err(Error::config("r0", format!("cutoff must satisfy 0 <= r0 < R, got {cutoff}")));
        }
        if !(beta.is_finite() && beta > 2.0) {
            return Err(Error::config("beta", format!("path-loss exponent must exceed 2, got {beta}")));
        }
        Ok(CellGeometry { radius, cutoff, beta })
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    pub fn contains(&self, p: Point) -> bool {
        p.norm() <= self.radius * (1.0 + 1e-12)
    }

    /// `1 / g(x) = |x|^beta + r0^beta`.
    pub fn inverse_gain(&self, p: Point) -> f64 {
        p.norm().powf(self.beta) + self.cutoff.powf(self.beta)
    }
}

/// `1 / (r^beta + r0^beta)` for a distance `r >= 0`.
pub fn gain_at_distance(r: f64, cutoff: f64, beta: f64) -> f64 {
    1.0 / (r.powf(beta) + cutoff.powf(beta))
}

/// Path gain at a position inside the cell.
pub fn path_gain(position: Point, geom: &CellGeometry) -> Result<f64> {
    if !geom.contains(position) {
        return Err(Error::invalid(format!(
            "position ({}, {}) lies outside the cell of radius {}",
            position.x, position.y, geom.radius
        )));
    }
    Ok(gain_at_distance(position.norm(), geom.cutoff, geom.beta))
}

/// Step length `ell` taken every `xi` time units; diffusion constant
/// `D = ell^2 / (4 xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub step_length: f64,
    pub step_time: f64,
    pub diffusion: f64,
}

impl MobilityParams {
    pub fn new(step_length: f64, step_time: f64) -> Result<Self> {
        if !(step_length.is_finite() && step_length > 0.0) {
            return Err(Error::config("ell", format!("step length must be positive, got {step_length}")));
        }
        Self::checked(step_length, step_time)
    }

    /// Users that never move; the diffusion constant is zero.
    pub fn frozen(step_time: f64) -> Result<Self> {
        Self::checked(0.0, step_time)
    }

    fn checked(step_length: f64, step_time: f64) -> Result<Self> {
        if !(step_time.is_finite() && step_time > 0.0) {
            return Err(Error::config("xi", format!("step time must be positive, got {step_time}")));
        }
        Ok(MobilityParams {
            step_length,
            step_time,
            diffusion: step_length * step_length / (4.0 * step_time),
        })
    }

    pub fn is_frozen(&self) -> bool {
        self.step_length == 0.0
    }
}

/// Uniform point in the disk of radius `radius`.
pub fn sample_uniform_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Point {
    let u: f64 = rng.random();
    let angle: f64 = rng.random::<f64>() * TAU;
    Point::polar(radius * u.sqrt(), angle)
}

/// Moves `pos` a path length `step` along `angle`, reflecting specularly off
/// the circle of radius `radius` as often as needed.
pub fn advance_with_reflection(pos: Point, angle: f64, step: f64, radius: f64) -> Point {
    let (mut uy, mut ux) = angle.sin_cos();
    let (mut px, mut py) = (pos.x, pos.y);
    let mut remaining = step;
    let r2 = radius * radius;
    for _ in 0..1024 {
        // distance to the boundary along (ux, uy): positive root of |p + s u| = R
        let b = px * ux + py * uy;
        let c = px * px + py * py - r2;
        let disc = (b * b - c).max(0.0);
        let to_wall = (-b + disc.sqrt()).max(0.0);
        if to_wall >= remaining {
            px += remaining * ux;
            py += remaining * uy;
            break;
        }
        px += to_wall * ux;
        py += to_wall * uy;
        remaining -= to_wall;
        // reflect the direction about the tangent at the hit point
        let norm = (px * px + py * py).sqrt();
        let (nx, ny) = (px / norm, py / norm);
        let dot = ux * nx + uy * ny;
        ux -= 2.0 * dot * nx;
        uy -= 2.0 * dot * ny;
    }
    let n2 = px * px + py * py;
    if n2 > r2 {
        let s = radius / n2.sqrt();
        px *= s;
        py *= s;
        // rounding can leave the rescaled point one ulp outside
        while px * px + py * py > r2 {
            px *= 1.0 - f64::EPSILON;
            py *= 1.0 - f64::EPSILON;
        }
    }
    Point::new(px, py)
}

/// One step of the reflected random walk in a uniformly random direction.
pub fn step_random_walk<R: Rng + ?Sized>(pos: Point, rng: &mut R, mob: &MobilityParams, radius: f64) -> Point {
    let angle: f64 = rng.random::<f64>() * TAU;
    if mob.step_length == 0.0 {
        return pos;
    }
    advance_with_reflection(pos, angle, mob.step_length, radius)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub ue_id: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Point>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// `n_steps` walk steps from `start`; sample `j` sits at time `j * xi`.
pub fn make_trajectory<R: Rng + ?Sized>(
    ue_id: usize,
    start: Point,
    n_steps: usize,
    mob: &MobilityParams,
    radius: f64,
    rng: &mut R,
) -> Trajectory {
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut positions = Vec::with_capacity(n_steps + 1);
    let mut pos = start;
    times.push(0.0);
    positions.push(pos);
    for j in 1..=n_steps {
        pos = step_random_walk(pos, rng, mob, radius);
        times.push(j as f64 * mob.step_time);
        positions.push(pos);
    }
    Trajectory { ue_id, times, positions }
}

/// CSV with columns `ue_id,t,x,y`.
pub fn write_trajectories_csv<W: Write>(mut out: W, trajectories: &[Trajectory]) -> Result<()> {
    writeln!(out, "ue_id,t,x,y")?;
    for tr in trajectories {
        for (t, p) in tr.times.iter().zip(&tr.positions) {
            writeln!(out, "{},{},{},{}", tr.ue_id, t, p.x, p.y)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorParams {
    /// Radial modes retained per angular order.
    pub mode_count: usize,
    /// Zero family used for the rotationally symmetric (m = 0) modes.
    pub zero_kind: ZeroKind,
}

impl Default for PropagatorParams {
    fn default() -> Self {
        PropagatorParams {
            mode_count: 60,
            zero_kind: ZeroKind::ZerosOfJ1,
        }
    }
}

impl PropagatorParams {
    pub fn new(mode_count: usize, zero_kind: ZeroKind) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::config("mode_count", "at least one mode is required"));
        }
        Ok(PropagatorParams { mode_count, zero_kind })
    }

    /// Enough radial modes that the last one has decayed below `1e-10` of the
    /// leading one at the dimensionless time `s = D t / R^2`.
    pub fn for_time(s: f64, zero_kind: ZeroKind) -> Self {
        let k_needed = (10.0 * std::f64::consts::LN_10 / s.max(1e-9)).sqrt();
        let mode_count = ((k_needed / PI).ceil() as usize + 2).max(1);
        PropagatorParams { mode_count, zero_kind }
    }
}

/// Modes below this relative weight are dropped from the propagator sum.
const MODE_CUTOFF: f64 = 1e-14;
const MAX_ANGULAR_ORDER: usize = 400;

#[derive(Debug, Clone)]
struct DiskMode {
    order: usize,
    /// `k / R`
    wavenumber: f64,
    /// `epsilon_m exp(-k^2 D t / R^2) / (pi R^2 norm)`
    weight: f64,
}

/// Transition density `F(x, x0; t)` of diffusion in the disk with zero
/// radial flux at the rim, evaluated from its eigenfunction expansion.
#[derive(Debug, Clone)]
pub struct DiskPropagator {
    radius: f64,
    modes: Vec<DiskMode>,
}

impl DiskPropagator {
    pub fn new(geom: &CellGeometry, mob: &MobilityParams, pp: &PropagatorParams, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("propagator time must be positive, got {t}")));
        }
        if pp.mode_count == 0 {
            return Err(Error::invalid("mode_count must be at least 1"));
        }
        let radius = geom.radius;
        let s = mob.diffusion * t / (radius * radius);
        let area = geom.area();
        // exp(-k^2 s) < MODE_CUTOFF beyond this wavenumber
        let k_max = if s > 0.0 {
            (-MODE_CUTOFF.ln() / s).sqrt()
        } else {
            f64::INFINITY
        };
        let mut modes = Vec::new();
        let radial_zeros = match pp.zero_kind {
            ZeroKind::ZerosOfJ1 => neumann_zeros(0, pp.mode_count, k_max, 1e-13),
            kind => find_bessel_zeros(kind, pp.mode_count, 1e-13)?
                .zeros
                .into_iter()
                .filter(|&k| k <= k_max)
                .collect(),
        };
        for k in radial_zeros {
            let norm = j0(k).powi(2);
            modes.push(DiskMode {
                order: 0,
                wavenumber: k / radius,
                weight: (-k * k * s).exp() / (area * norm),
            });
        }
        for order in 1..=MAX_ANGULAR_ORDER {
            // j'_{m,1} > m, so no mode of this or any higher order survives
            if (order as f64) > k_max {
                break;
            }
            let zeros = neumann_zeros(order, pp.mode_count, k_max, 1e-13);
            if zeros.is_empty() {
                break;
            }
            let m2 = (order * order) as f64;
            for k in zeros {
                let norm = (1.0 - m2 / (k * k)) * bessel_jn(order, k).powi(2);
                modes.push(DiskMode {
                    order,
                    wavenumber: k / radius,
                    weight: 2.0 * (-k * k * s).exp() / (area * norm),
                });
            }
        }
        Ok(DiskPropagator { radius, modes })
    }

    /// Number of eigenmodes retained besides the uniform one.
    pub fn mode_total(&self) -> usize {
        self.modes.len()
    }

    pub fn density(&self, x: Point, x0: Point) -> f64 {
        let (r, r0) = (x.norm(), x0.norm());
        let dtheta = x.y.atan2(x.x) - x0.y.atan2(x0.x);
        let mut f = 1.0 / (PI * self.radius * self.radius);
        for m in &self.modes {
            let angular = if m.order == 0 { 1.0 } else { (m.order as f64 * dtheta).cos() };
            f += m.weight
                * angular
                * bessel_jn(m.order, m.wavenumber * r)
                * bessel_jn(m.order, m.wavenumber * r0);
        }
        f
    }
}

/// `F(x, x0; t)`, the density of a walker started at `x0` being at `x` after
/// time `t`.
pub fn propagator(
    x: Point,
    x0: Point,
    t: f64,
    geom: &CellGeometry,
    mob: &MobilityParams,
    pp: &PropagatorParams,
) -> Result<f64> {
    if !geom.contains(x) || !geom.contains(x0) {
        return Err(Error::invalid("propagator points must lie inside the cell"));
    }
    Ok(DiskPropagator::new(geom, mob, pp, t)?.density(x, x0))
}

/// Radial eigenmode `i` contributes `coefficient_i * R^(2 beta)` to the
/// covariance of `|x|^beta`, relaxing at rate `k_i^2 D / R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialMode {
    pub k: f64,
    pub phi: f64,
    /// `phi^2 / J0(k)^2`
    pub coefficient: f64,
}

/// Covariance of `|x(t)|^beta` for a walker with a uniform initial position,
/// averaged over that position, from the rotationally symmetric modes.
#[derive(Debug, Clone)]
pub struct RadialCovariance {
    modes: Vec<RadialMode>,
    scale: f64,
    rate: f64,
}

pub(crate) fn phi_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        max_subdivisions: 2_000_000,
        max_panel_width: None,
    }
}

pub(crate) fn radial_modes(zeros: &[f64], beta: f64) -> Result<Vec<RadialMode>> {
    let spec = phi_spec();
    zeros
        .iter()
        .map(|&k| {
            let phi = phi_coefficient(k, beta, &spec)?;
            Ok(RadialMode {
                k,
                phi,
                coefficient: phi * phi / j0(k).powi(2),
            })
        })
        .collect()
}

impl RadialCovariance {
    pub fn new(geom: &CellGeometry, mob: &MobilityParams, pp: &PropagatorParams) -> Result<Self> {
        let zeros = find_bessel_zeros(pp.zero_kind, pp.mode_count, 1e-13)?;
        let modes = radial_modes(&zeros.zeros, geom.beta)?;
        Ok(RadialCovariance {
            modes,
            scale: geom.radius.powf(2.0 * geom.beta),
            rate: mob.diffusion / (geom.radius * geom.radius),
        })
    }

    pub fn modes(&self) -> &[RadialMode] {
        &self.modes
    }

    /// `cov[|x(t)|^beta, |x(t')|^beta]`.
    pub fn covariance(&self, t: f64, t_prime: f64) -> Result<f64> {
        if !(t >= 0.0 && t_prime >= 0.0) {
            return Err(Error::invalid(format!("covariance times must be non-negative, got ({t}, {t_prime})")));
        }
        Ok(self.covariance_unchecked(t, t_prime))
    }

    pub(crate) fn covariance_unchecked(&self, t: f64, t_prime: f64) -> f64 {
        let lag = (t - t_prime).abs();
        let early = t.min(t_prime);
        self.scale
            * self
                .modes
                .iter()
                .map(|m| {
                    let lambda = m.k * m.k * self.rate;
                    m.coefficient * (-lambda * lag).exp() * (-(-2.0 * lambda * early).exp_m1())
                })
                .sum::<f64>()
    }

    /// Limit of `covariance(t, t)` as `t -> infinity`.
    pub fn stationary_variance(&self) -> f64 {
        self.scale * self.modes.iter().map(|m| m.coefficient).sum::<f64>()
    }
}

pub fn radial_moment_covariance(
    t: f64,
    t_prime: f64,
    geom: &CellGeometry,
    mob: &MobilityParams,
    pp: &PropagatorParams,
) -> Result<f64> {
    RadialCovariance::new(geom, mob, pp)?.covariance(t, t_prime)
}

/// Variance of `|x|^beta` for `x` uniform in the disk.
pub fn uniform_disk_radial_variance(radius: f64, beta: f64) -> f64 {
    radius.powf(2.0 * beta) * (1.0 / (beta + 1.0) - 4.0 / (beta + 2.0).powi(2))
}
