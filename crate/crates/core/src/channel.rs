//! Rayleigh-faded channels, zero-forcing transmit power and the energy
//! accumulated along user trajectories.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cell::{sample_uniform_disk, step_random_walk, CellGeometry, MobilityParams, Point, PropagatorParams, RadialPower, Trajectory};
use crate::error::{Error, Result};

/// Condition estimates above this are treated as a singular Gram matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// Fresh fading draw and exact ZF power at every step.
    Exact,
    /// Deterministic-equivalent power; no fading is drawn.
    Hardened,
}

impl FadingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FadingMode::Exact => "exact",
            FadingMode::Hardened => "hardened",
        }
    }
}

impl std::str::FromStr for FadingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(FadingMode::Exact),
            "hardened" => Ok(FadingMode::Hardened),
            other => Err(format!("unknown fading mode `{other}` (expected exact or hardened)")),
        }
    }
}

/// Physical and model parameters of one simulated cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of single-antenna users `K`.
    pub users: usize,
    /// Number of base-station antennas `N`.
    pub antennas: usize,
    /// Per-stream power design parameter.
    pub rho: f64,
    pub sigma2: f64,
    pub geom: CellGeometry,
    pub mob: MobilityParams,
    /// Horizon `T` over which energy is accumulated.
    pub horizon: f64,
    pub time_step: f64,
    pub fading_mode: FadingMode,
    /// Fading decorrelation time; only enters the fading variance term.
    pub tau_d: f64,
    pub propagator: PropagatorParams,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::config("K", "at least one user is required"));
        }
        if self.users >= self.antennas {
            return Err(Error::config(
                "K",
                format!("requires K < N (got K = {}, N = {})", self.users, self.antennas),
            ));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::config("rho", format!("must be positive, got {}", self.rho)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::config("sigma2", format!("must be positive, got {}", self.sigma2)));
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return Err(Error::config("time_step", format!("must be positive, got {}", self.time_step)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.time_step) {
            return Err(Error::config(
                "T",
                format!("horizon must be at least time_step ({}), got {}", self.time_step, self.horizon),
            ));
        }
        if !(self.tau_d.is_finite() && self.tau_d >= 0.0) {
            return Err(Error::config("tau_d", format!("must be non-negative, got {}", self.tau_d)));
        }
        if self.propagator.mode_count == 0 {
            return Err(Error::config("mode_count", "at least one mode is required"));
        }
        // re-run the component checks for hand-built configs
        CellGeometry::new(self.geom.radius, self.geom.cutoff, self.geom.beta)?;
        if !self.mob.is_frozen() {
            MobilityParams::new(self.mob.step_length, self.mob.step_time)?;
        }
        Ok(())
    }

    /// Load ratio `c = K / N`.
    pub fn load(&self) -> f64 {
        self.users as f64 / self.antennas as f64
    }

    /// Number of slots in the left Riemann sum, `ceil(T / time_step)`.
    pub fn slot_count(&self) -> usize {
        ((self.horizon / self.time_step) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    pub per_ue_gains: Vec<f64>,
}

/// `K x N` matrix of i.i.d. `CN(0, 1)` entries, drawn row by row.
pub fn sample_fading<R: Rng + ?Sized>(rng: &mut R, users: usize, antennas: usize) -> DMatrix<Complex64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut w = DMatrix::zeros(users, antennas);
    for k in 0..users {
        for n in 0..antennas {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            w[(k, n)] = Complex64::new(scale * re, scale * im);
        }
    }
    w
}

/// Scales row `k` of the fading by `sqrt(g(x_k))`.
pub fn channel_matrix(fading: &DMatrix<Complex64>, positions: &[Point], geom: &CellGeometry) -> Result<ChannelMatrix> {
    if fading.nrows() != positions.len() {
        return Err(Error::invalid(format!(
            "fading has {} rows but {} positions were given",
            fading.nrows(),
            positions.len()
        )));
    }
    let gains = positions
        .iter()
        .map(|&p| crate::cell::path_gain(p, geom))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelMatrix::from_gains(fading.clone(), gains))
}

impl ChannelMatrix {
    /// Builds `diag(sqrt(g)) W`.
    pub fn from_gains(mut fading: DMatrix<Complex64>, gains: Vec<f64>) -> Self {
        for (k, &g) in gains.iter().enumerate() {
            let s = g.sqrt();
            fading.row_mut(k).iter_mut().for_each(|v| *v *= s);
        }
        ChannelMatrix {
            entries: fading,
            per_ue_gains: gains,
        }
    }

    pub fn users(&self) -> usize {
        self.entries.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.entries.ncols()
    }
}

/// `rho * tr((H H^H)^-1)` via a Cholesky factor of the Gram matrix.
pub fn zf_power(h: &ChannelMatrix, rho: f64) -> Result<f64> {
    trace_gram_inverse(&h.entries).map(|t| rho * t)
}

fn trace_gram_inverse(h: &DMatrix<Complex64>) -> Result<f64> {
    let k = h.nrows();
    let gram = h * h.adjoint();
    let chol = gram.cholesky().ok_or(Error::Singular { condition: f64::INFINITY })?;
    let l = chol.l();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for i in 0..k {
        let d = l[(i, i)].re;
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    // cond(G) >= (max L_ii / min L_ii)^2
    let condition = (dmax / dmin).powi(2);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { condition });
    }
    // tr(G^-1) = ||L^-1||_F^2, one forward substitution per column
    let inv = l
        .solve_lower_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::Singular { condition })?;
    Ok(inv.iter().map(|v| v.norm_sqr()).sum())
}

/// `log2(1 + rho / sigma2)` in bit/s/Hz, the same for every user.
pub fn achievable_rate(rho: f64, sigma2: f64) -> Result<f64> {
    if !(rho >= 0.0) || !(sigma2 > 0.0) {
        return Err(Error::invalid("rate needs rho >= 0 and sigma2 > 0"));
    }
    Ok((rho / sigma2).ln_1p() / std::f64::consts::LN_2)
}

/// Deterministic equivalent `(rho c / (1 - c)) (1/K) sum_k 1/g(x_k)`.
pub fn hardened_power(positions: &[Point], cfg: &SystemConfig) -> f64 {
    let c = cfg.load();
    let mean_inv_gain = positions.iter().map(|&p| cfg.geom.inverse_gain(p)).sum::<f64>() / positions.len() as f64;
    cfg.rho * c / (1.0 - c) * mean_inv_gain
}

/// Energy of one trial and the power at each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRun {
    pub energy: f64,
    pub power_trace: Vec<f64>,
    pub time_step: f64,
    /// Recorded only when requested; one per user, sampled at the slots.
    pub trajectories: Option<Vec<Trajectory>>,
}

impl EnergyRun {
    pub fn slot_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.power_trace.len()).map(move |j| j as f64 * self.time_step)
    }
}

struct HardenedKernel {
    pow: RadialPower,
    cutoff_pow: f64,
    prefactor: f64,
}

impl HardenedKernel {
    fn new(cfg: &SystemConfig) -> Self {
        let c = cfg.load();
        HardenedKernel {
            pow: RadialPower::new(cfg.geom.beta),
            cutoff_pow: cfg.geom.cutoff.powf(cfg.geom.beta),
            prefactor: cfg.rho * c / (1.0 - c) / cfg.users as f64,
        }
    }

    #[inline]
    fn power(&self, positions: &[Point]) -> f64 {
        let s: f64 = positions
            .iter()
            .map(|p| self.pow.of_norm_sq(p.norm_sq()) + self.cutoff_pow)
            .sum();
        self.prefactor * s
    }
}

/// Simulates `E_T` for one trial: uniform initial positions, one reflected
/// walk step per user every `xi`, and the power evaluated at the start of
/// each slot.
pub fn simulate_energy<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<EnergyRun> {
    simulate_energy_with(cfg, rng, false)
}

pub fn simulate_energy_with<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R, record_trajectories: bool) -> Result<EnergyRun> {
    cfg.validate()?;
    let k = cfg.users;
    let radius = cfg.geom.radius;
    let slots = cfg.slot_count();
    let dt = cfg.time_step;
    let mut positions: Vec<Point> = (0..k).map(|_| sample_uniform_disk(rng, radius)).collect();
    let mut trajectories = record_trajectories.then(|| {
        (0..k)
            .map(|ue_id| Trajectory {
                ue_id,
                times: Vec::with_capacity(slots),
                positions: Vec::with_capacity(slots),
            })
            .collect::<Vec<_>>()
    });
    let kernel = HardenedKernel::new(cfg);
    let mut walk_steps = 0usize;
    let mut trace = Vec::with_capacity(slots);
    let mut energy = 0.0;
    for j in 0..slots {
        let t = j as f64 * dt;
        let due = (t / cfg.mob.step_time + 1e-9).floor() as usize;
        while walk_steps < due {
            for p in positions.iter_mut() {
                *p = step_random_walk(*p, rng, &cfg.mob, radius);
            }
            walk_steps += 1;
        }
        if let Some(trs) = trajectories.as_mut() {
            for (tr, &p) in trs.iter_mut().zip(&positions) {
                tr.times.push(t);
                tr.positions.push(p);
            }
        }
        let p = match cfg.fading_mode {
            FadingMode::Hardened => kernel.power(&positions),
            FadingMode::Exact => exact_power(cfg, &positions, rng)?,
        };
        trace.push(p);
        energy += p * dt;
    }
    Ok(EnergyRun {
        energy,
        power_trace: trace,
        time_step: dt,
        trajectories,
    })
}

fn exact_power<R: Rng + ?Sized>(cfg: &SystemConfig, positions: &[Point], rng: &mut R) -> Result<f64> {
    let gains: Vec<f64> = positions.iter().map(|&p| 1.0 / cfg.geom.inverse_gain(p)).collect();
    let mut attempt = 0;
    loop {
        let w = sample_fading(rng, cfg.users, cfg.antennas);
        let h = ChannelMatrix::from_gains(w, gains.clone());
        match zf_power(&h, cfg.rho) {
            Err(Error::Singular { .. }) if attempt == 0 => attempt += 1,
            other => return other,
        }
    }
}
