//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit
//! status if any criterion fails. Tolerances and runtime budgets are fixed
//! below.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use zfenergy::analytics::{battery_requirement, mean_energy, moments, variance_mobility, MomentPair};
use zfenergy::cell::{sample_uniform_disk, step_random_walk, RadialCovariance};
use zfenergy::channel::{channel_matrix, hardened_power, sample_fading, zf_power};
use zfenergy::config::parse_config;
use zfenergy::montecarlo::{run_trials, summarize, trial_rng};
use zfenergy::special::{
    bessel_j1, find_bessel_zeros, gaussian_q, gaussian_q_inv, integrate, mean_variance, phi_coefficient, QuadratureSpec,
};
use zfenergy::{MobilityParams, Point, PropagatorParams, SystemConfig, ZeroKind};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);

const TOY: &str = "K = 16\nN = 32\nrho = 1\nbeta = 4\nr0 = 0.1\nR = 1\nell = 0.05\nxi = 0.0025\nT = 10\n";

fn toy() -> SystemConfig {
    parse_config(TOY).unwrap().system
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac1_special_functions() -> Outcome {
    let mut worst_zero = 0.0f64;
    for kind in [ZeroKind::ZerosOfJ1, ZeroKind::ZerosOfJ1Prime] {
        let t = find_bessel_zeros(kind, 10, 1e-14).map_err(|e| e.to_string())?;
        for &z in &t.zeros {
            worst_zero = worst_zero.max(kind.target(z).abs());
        }
    }
    let spec = QuadratureSpec::new(1e-15, 1e-13, 200_000).unwrap();
    let mut worst_phi = 0.0f64;
    for k in [0.5, 1.8411837813406593, 3.8317059702075125, 10.0, 25.0] {
        let phi = phi_coefficient(k, 0.0, &spec).map_err(|e| e.to_string())?;
        worst_phi = worst_phi.max((phi - 2.0 * bessel_j1(k).unwrap() / k).abs());
    }
    let mut worst_q = 0.0f64;
    for i in 1..200 {
        let p = i as f64 / 200.0;
        let x = gaussian_q_inv(p).map_err(|e| e.to_string())?;
        worst_q = worst_q.max((gaussian_q(x) - p).abs());
    }
    for p in [1e-12, 1e-8, 1e-4, 1.0 - 1e-4] {
        let x = gaussian_q_inv(p).map_err(|e| e.to_string())?;
        worst_q = worst_q.max((gaussian_q(x) - p).abs());
    }
    check(
        worst_zero <= 1e-10 && worst_phi <= 1e-10 && worst_q <= 1e-9,
        format!("max |target(zero)| = {worst_zero:.2e}, max phi error = {worst_phi:.2e}, max Q round-trip = {worst_q:.2e}"),
    )
}

fn ac2_hardening() -> Outcome {
    let cfg = toy();
    let mut rng = trial_rng(2024, 0);
    let positions: Vec<Point> = (0..16).map(|_| sample_uniform_disk(&mut rng, 1.0)).collect();
    let mut draws = Vec::with_capacity(5000);
    for _ in 0..5000 {
        let h = channel_matrix(&sample_fading(&mut rng, 16, 32), &positions, &cfg.geom).map_err(|e| e.to_string())?;
        draws.push(zf_power(&h, cfg.rho).map_err(|e| e.to_string())?);
    }
    let (m, _) = mean_variance(&draws);
    let exact = cfg.rho * positions.iter().map(|&p| cfg.geom.inverse_gain(p)).sum::<f64>() / (32 - 16) as f64;
    let hardened = hardened_power(&positions, &cfg);
    let (e1, e2) = ((m / exact - 1.0).abs(), (m / hardened - 1.0).abs());
    check(
        e1 < 0.02 && e2 < 0.08,
        format!("mean {m:.6e}: {:.3}% from finite-K expectation, {:.3}% from hardened power", 100.0 * e1, 100.0 * e2),
    )
}

/// Walk pairs sharing a uniform start; returns (mean, standard error) of the
/// covariance estimator for every pair of recording times.
fn walk_pair_covariance(times: &[f64], mob: &MobilityParams, replicas: usize) -> Vec<(f64, f64)> {
    let steps: Vec<usize> = times.iter().map(|t| (t / mob.step_time).round() as usize).collect();
    let last = *steps.iter().max().unwrap();
    let n = times.len();
    let mut sums = vec![(0.0f64, 0.0f64); n * n];
    let (mut fx, mut fy) = (vec![0.0; n], vec![0.0; n]);
    for rep in 0..replicas {
        let mut rng = trial_rng(77, rep);
        let start = sample_uniform_disk(&mut rng, 1.0);
        let (mut x, mut y) = (start, start);
        for step in 1..=last {
            x = step_random_walk(x, &mut rng, mob, 1.0);
            y = step_random_walk(y, &mut rng, mob, 1.0);
            if let Some(j) = steps.iter().position(|&s| s == step) {
                fx[j] = x.norm_sq().powi(2);
                fy[j] = y.norm_sq().powi(2);
            }
        }
        for a in 0..n {
            for b in 0..n {
                let v = 0.5 * (fx[a] * fx[b] + fy[a] * fy[b]) - 0.5 * (fx[a] * fy[b] + fy[a] * fx[b]);
                sums[a * n + b].0 += v;
                sums[a * n + b].1 += v * v;
            }
        }
    }
    let r = replicas as f64;
    sums.iter()
        .map(|&(s, s2)| {
            let mean = s / r;
            let var = (s2 - r * mean * mean) / (r - 1.0);
            (mean, (var / r).sqrt())
        })
        .collect()
}

fn ac3_covariance_oracle() -> Outcome {
    // R = 1, D = 1, so t equals D t / R^2
    let mob = MobilityParams::new(0.05, 0.000625).unwrap();
    let times = [0.05, 0.2, 1.0];
    let est = walk_pair_covariance(&times, &mob, 100_000);
    let geom = zfenergy::CellGeometry::new(1.0, 0.1, 4.0).unwrap();
    let model = |kind| RadialCovariance::new(&geom, &mob, &PropagatorParams::new(60, kind).unwrap());
    let j1 = model(ZeroKind::ZerosOfJ1).map_err(|e| e.to_string())?;
    let j1p = model(ZeroKind::ZerosOfJ1Prime).map_err(|e| e.to_string())?;
    let (mut worst, mut worst_other) = (0.0f64, 0.0f64);
    for a in 0..3 {
        for b in a..3 {
            let (m, se) = est[a * 3 + b];
            worst = worst.max((j1.covariance(times[a], times[b]).unwrap() - m).abs() / se);
            worst_other = worst_other.max((j1p.covariance(times[a], times[b]).unwrap() - m).abs() / se);
        }
    }
    check(
        worst < 3.0,
        format!(
            "zeros_of_j1: max |z| = {worst:.2} over 6 time pairs; zeros_of_j1_prime would give max |z| = {worst_other:.1}"
        ),
    )
}

fn ac4_route_equivalence() -> Outcome {
    let cfg = toy();
    let a2 = variance_mobility(&cfg).map_err(|e| e.to_string())?;
    let cov = RadialCovariance::new(&cfg.geom, &cfg.mob, &cfg.propagator).map_err(|e| e.to_string())?;
    let inner_spec = QuadratureSpec::new(1e-14, 1e-9, 200_000).unwrap();
    let outer_spec = QuadratureSpec::new(1e-14, 1e-8, 20_000).unwrap();
    let inner = |t: f64| {
        if t == 0.0 {
            0.0
        } else {
            integrate(|s| cov.covariance(t, s).unwrap(), 0.0, t, &inner_spec).unwrap()
        }
    };
    let double = 2.0 * integrate(inner, 0.0, cfg.horizon, &outer_spec).map_err(|e| e.to_string())?;
    let c = cfg.load();
    let route = (cfg.rho * c / (1.0 - c)).powi(2) / cfg.users as f64 * double;
    let err = (a2 / route - 1.0).abs();
    check(err < 0.01, format!("mode sum {a2:.6e}, double integral {route:.6e}, difference {:.4}%", 100.0 * err))
}

fn ac5_theorem_at_desk_scale() -> Outcome {
    let mut cfg = toy();
    cfg.users = 64;
    cfg.antennas = 128;
    let theory = moments(&cfg).map_err(|e| e.to_string())?;
    let s = summarize(&run_trials(&cfg, 2000, 20240).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let em = (s.mean / theory.mean_energy - 1.0).abs();
    let ev = (s.variance / theory.variance_total - 1.0).abs();
    check(
        em < 0.05 && ev < 0.15 && s.ks_pvalue > 0.01,
        format!(
            "mean {:.5} vs {:.5} ({:.2}%), variance {:.4e} vs {:.4e} ({:.2}%), KS p = {:.3}",
            s.mean,
            theory.mean_energy,
            100.0 * em,
            s.variance,
            theory.variance_total,
            100.0 * ev,
            s.ks_pvalue
        ),
    )
}

fn ac6_battery() -> Outcome {
    let m = MomentPair::from_totals(1.73e3, 5.65e4).map_err(|e| e.to_string())?;
    let eta = battery_requirement(0.01, &m).map_err(|e| e.to_string())?;
    check((2.27e3..=2.29e3).contains(&eta), format!("eta = {eta:.2} J"))
}

fn simulate_csv(bin: &str, config: &Path, out: &Path, workers: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(bin)
        .args(["simulate", "--trials", "200", "--seed", "31", "--workers", &workers.to_string()])
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    std::fs::read(out.join("samples.csv")).map_err(|e| e.to_string())
}

fn ac7_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_zfenergy");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("toy.conf");
    std::fs::write(&config, TOY.replace("T = 10", "T = 1")).map_err(|e| e.to_string())?;
    let max = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut runs = Vec::new();
    for (i, w) in [1, 1, max, max, 4].into_iter().enumerate() {
        runs.push((w, simulate_csv(bin, &config, &dir.path().join(format!("run{i}")), w)?));
    }
    let replay = Command::new(bin)
        .arg("replay")
        .arg("--manifest")
        .arg(dir.path().join("run0/manifest.json"))
        .arg("--out")
        .arg(dir.path().join("replay"))
        .output()
        .map_err(|e| e.to_string())?;
    if !replay.status.success() {
        return Err(String::from_utf8_lossy(&replay.stderr).into_owned());
    }
    let replayed = std::fs::read(dir.path().join("replay/samples.csv")).map_err(|e| e.to_string())?;
    let identical = runs.iter().all(|(_, csv)| csv == &runs[0].1) && replayed == runs[0].1;
    check(
        identical && runs[0].1.len() > 200,
        format!("200-trial samples.csv identical across workers {{1, {max}, 4}}, repeats and manifest replay: {identical}"),
    )
}

fn ac8_linear_in_t() -> Outcome {
    let mut cfg = toy();
    cfg.mob = MobilityParams::new(0.1, 0.005).unwrap();
    let dtr = cfg.mob.diffusion * cfg.horizon / cfg.geom.radius.powi(2);
    let (m1, v1) = (mean_energy(&cfg), variance_mobility(&cfg).map_err(|e| e.to_string())?);
    cfg.horizon = 20.0;
    cfg.time_step = cfg.mob.step_time;
    let (m2, v2) = (mean_energy(&cfg), variance_mobility(&cfg).map_err(|e| e.to_string())?);
    let (rm, rv) = (m2 / m1, v2 / v1);
    check(
        dtr >= 5.0 && (rm / 2.0 - 1.0).abs() < 0.02 && (rv / 2.0 - 1.0).abs() < 0.02,
        format!("D T / R^2 = {dtr}: mean ratio {rm:.6}, A2 ratio {rv:.6}"),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1", "special functions", Duration::from_secs(1), ac1_special_functions),
        ("AC2", "inverse-Wishart hardening", Duration::from_secs(30), ac2_hardening),
        ("AC3", "mobility covariance vs walk pairs", Duration::from_secs(120), ac3_covariance_oracle),
        ("AC4", "mode sum vs double time integral", Duration::from_secs(10), ac4_route_equivalence),
        ("AC5", "Gaussian limit at K = 64", Duration::from_secs(300), ac5_theorem_at_desk_scale),
        ("AC6", "battery dimensioning", Duration::from_secs(1), ac6_battery),
        ("AC7", "determinism across workers", Duration::from_secs(60), ac7_determinism),
        ("AC8", "linear growth in T", Duration::from_secs(5), ac8_linear_in_t),
    ];
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over runtime budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {id} {name}: {detail} ({:.2} s, budget {} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of 8 acceptance criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
