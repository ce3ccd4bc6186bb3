//! Flat `key = value` configuration files.
//!
//! ```text
//! # toy cell
//! K = 16
//! N = 32
//! rho = 1
//! beta = 4
//! r0 = 0.1
//! R = 1
//! ell = 0.05
//! xi = 0.0025
//! T = 10
//! ```
//!
//! Required keys: `K N rho beta r0 R ell xi T`. Optional: `sigma2` (1),
//! `time_step` (`xi`), `fading_mode` (`hardened`), `tau_d` (0), `zero_kind`
//! (`zeros_of_j1`), `mode_count` (60) and `bandwidth`, which only annotates
//! reports. `ell = 0` gives users that never move.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cell::{CellGeometry, MobilityParams, PropagatorParams};
use crate::channel::{FadingMode, SystemConfig};
use crate::error::{Error, Result};
use crate::special::ZeroKind;

const REQUIRED: [&str; 9] = ["K", "N", "rho", "beta", "r0", "R", "ell", "xi", "T"];
const OPTIONAL: [&str; 7] = ["sigma2", "time_step", "fading_mode", "tau_d", "zero_kind", "mode_count", "bandwidth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub system: SystemConfig,
    /// Bandwidth in Hz, if given.
    pub bandwidth: Option<f64>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let mut values: BTreeMap<&str, &str> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !REQUIRED.contains(&key) && !OPTIONAL.contains(&key) {
            return Err(Error::config(key, format!("line {}: unknown key", lineno + 1)));
        }
        if value.is_empty() {
            return Err(Error::config(key, format!("line {}: missing value", lineno + 1)));
        }
        if values.insert(key, value).is_some() {
            return Err(Error::config(key, format!("line {}: duplicate key", lineno + 1)));
        }
    }
    if let Some(missing) = REQUIRED.iter().find(|k| !values.contains_key(*k)) {
        return Err(Error::config(missing, "required field is missing"));
    }

    let num = |key: &str| -> Result<f64> {
        let v = values[key];
        let x: f64 = v
            .parse()
            .map_err(|_| Error::config(key, format!("`{v}` is not a number")))?;
        if !x.is_finite() {
            return Err(Error::config(key, format!("`{v}` is not finite")));
        }
        Ok(x)
    };
    let int = |key: &str| -> Result<usize> {
        let v = values[key];
        v.parse()
            .map_err(|_| Error::config(key, format!("`{v}` is not a non-negative integer")))
    };
    let opt_num = |key: &str, default: f64| if values.contains_key(key) { num(key) } else { Ok(default) };

    let users = int("K")?;
    let antennas = int("N")?;
    let geom = CellGeometry::new(num("R")?, num("r0")?, num("beta")?)?;
    let (ell, xi) = (num("ell")?, num("xi")?);
    let mob = if ell == 0.0 {
        MobilityParams::frozen(xi)?
    } else {
        MobilityParams::new(ell, xi)?
    };
    let fading_mode = match values.get("fading_mode") {
        Some(v) => FadingMode::from_str(v).map_err(|e| Error::config("fading_mode", e))?,
        None => FadingMode::Hardened,
    };
    let zero_kind = match values.get("zero_kind") {
        Some(v) => ZeroKind::from_str(v).map_err(|e| Error::config("zero_kind", e))?,
        None => ZeroKind::ZerosOfJ1,
    };
    let mode_count = if values.contains_key("mode_count") { int("mode_count")? } else { 60 };
    let bandwidth = if values.contains_key("bandwidth") {
        let b = num("bandwidth")?;
        if b <= 0.0 {
            return Err(Error::config("bandwidth", format!("must be positive, got {b}")));
        }
        Some(b)
    } else {
        None
    };
    let system = SystemConfig {
        users,
        antennas,
        rho: num("rho")?,
        sigma2: opt_num("sigma2", 1.0)?,
        geom,
        mob,
        horizon: num("T")?,
        time_step: opt_num("time_step", xi)?,
        fading_mode,
        tau_d: opt_num("tau_d", 0.0)?,
        propagator: PropagatorParams::new(mode_count, zero_kind)?,
    };
    system.validate()?;
    Ok(ConfigFile { system, bandwidth })
}

/// Canonical text form: every key, fixed order, shortest round-trip floats.
pub fn render_config(cfg: &SystemConfig, bandwidth: Option<f64>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "K = {}", cfg.users);
    let _ = writeln!(s, "N = {}", cfg.antennas);
    let _ = writeln!(s, "rho = {:?}", cfg.rho);
    let _ = writeln!(s, "sigma2 = {:?}", cfg.sigma2);
    let _ = writeln!(s, "beta = {:?}", cfg.geom.beta);
    let _ = writeln!(s, "r0 = {:?}", cfg.geom.cutoff);
    let _ = writeln!(s, "R = {:?}", cfg.geom.radius);
    let _ = writeln!(s, "ell = {:?}", cfg.mob.step_length);
    let _ = writeln!(s, "xi = {:?}", cfg.mob.step_time);
    let _ = writeln!(s, "T = {:?}", cfg.horizon);
    let _ = writeln!(s, "time_step = {:?}", cfg.time_step);
    let _ = writeln!(s, "fading_mode = {}", cfg.fading_mode.as_str());
    let _ = writeln!(s, "tau_d = {:?}", cfg.tau_d);
    let _ = writeln!(s, "zero_kind = {}", cfg.propagator.zero_kind.as_str());
    let _ = writeln!(s, "mode_count = {}", cfg.propagator.mode_count);
    if let Some(b) = bandwidth {
        let _ = writeln!(s, "bandwidth = {b:?}");
    }
    s
}

/// SHA-256 of the canonical rendering, hex encoded.
pub fn cfg_digest(cfg: &SystemConfig) -> String {
    let hash = Sha256::digest(render_config(cfg, None).as_bytes());
    hash.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
# toy cell
K = 16
N = 32
rho = 1
beta = 4
r0 = 0.1
R = 1
ell = 0.05   # step length
xi = 0.0025
T = 10
";

    fn field_of(err: Error) -> String {
        match err {
            Error::Config { field, .. } => field,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn parses_with_defaults() {
        let c = parse_config(TOY).unwrap();
        let s = &c.system;
        assert_eq!((s.users, s.antennas), (16, 32));
        assert_eq!(s.time_step, 0.0025);
        assert_eq!(s.fading_mode, FadingMode::Hardened);
        assert_eq!(s.propagator, PropagatorParams::default());
        assert_eq!(s.tau_d, 0.0);
        assert!((s.mob.diffusion - 0.25).abs() < 1e-15);
        assert_eq!(c.bandwidth, None);
    }

    #[test]
    fn render_round_trips() {
        let text = format!("{TOY}fading_mode = exact\nzero_kind = j1_prime\nmode_count = 80\nbandwidth = 1e7\ntau_d = 0.01\n");
        let c = parse_config(&text).unwrap();
        let again = parse_config(&render_config(&c.system, c.bandwidth)).unwrap();
        assert_eq!(again, c);
        assert_eq!(cfg_digest(&again.system), cfg_digest(&c.system));
        assert_eq!(cfg_digest(&c.system).len(), 64);
    }

    #[test]
    fn digest_tracks_content() {
        let a = parse_config(TOY).unwrap().system;
        let b = parse_config(&TOY.replace("T = 10", "T = 10.5")).unwrap().system;
        assert_ne!(cfg_digest(&a), cfg_digest(&b));
        // formatting differences do not matter
        let c = parse_config(&TOY.replace("rho = 1", "rho=1.0")).unwrap().system;
        assert_eq!(cfg_digest(&a), cfg_digest(&c));
    }

    #[test]
    fn missing_field_is_named() {
        let err = parse_config(&TOY.replace("r0 = 0.1\n", "")).unwrap_err();
        assert!(err.to_string().contains("r0"));
        assert_eq!(field_of(err), "r0");
    }

    #[test]
    fn rejects_k_not_below_n() {
        let err = parse_config(&TOY.replace("N = 32", "N = 16")).unwrap_err();
        assert!(err.to_string().contains("requires K < N"), "{err}");
    }

    #[test]
    fn field_level_errors() {
        assert_eq!(field_of(parse_config(&format!("{TOY}colour = red\n")).unwrap_err()), "colour");
        assert_eq!(field_of(parse_config(&format!("{TOY}K = 3\n")).unwrap_err()), "K");
        assert_eq!(field_of(parse_config(&TOY.replace("rho = 1", "rho = abc")).unwrap_err()), "rho");
        assert_eq!(field_of(parse_config(&TOY.replace("beta = 4", "beta = 2")).unwrap_err()), "beta");
        assert_eq!(field_of(parse_config(&TOY.replace("xi = 0.0025", "xi = 0")).unwrap_err()), "xi");
        assert_eq!(field_of(parse_config(&format!("{TOY}fading_mode = fast\n")).unwrap_err()), "fading_mode");
        assert_eq!(field_of(parse_config(&format!("{TOY}mode_count = 0\n")).unwrap_err()), "mode_count");
        assert!(parse_config(&format!("{TOY}just words\n")).is_err());
    }

    #[test]
    fn frozen_users() {
        let c = parse_config(&TOY.replace("ell = 0.05", "ell = 0")).unwrap();
        assert!(c.system.mob.is_frozen());
        assert_eq!(c.system.mob.diffusion, 0.0);
    }
}
