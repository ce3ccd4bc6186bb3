//! Energy consumption of a zero-forcing multi-user MIMO base station whose
//! users move inside a circular cell.
//!
//! The crate covers both sides of the problem:
//!
//! * simulation: reflected random-walk mobility ([`cell`]), Rayleigh fading
//!   and zero-forcing transmit power ([`channel`]), and a deterministic,
//!   parallel Monte-Carlo harness ([`montecarlo`]);
//! * closed-form asymptotics: mean and variance of the energy over a horizon,
//!   outage probability and battery dimensioning ([`analytics`]), built on the
//!   Bessel/quadrature primitives in [`special`].

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cell;
pub mod channel;
pub mod config;
mod error;
pub mod montecarlo;
pub mod special;

pub use analytics::{MomentPair, ThetaSeries};
pub use cell::{CellGeometry, MobilityParams, Point, PropagatorParams, Trajectory};
pub use channel::{ChannelMatrix, FadingMode, SystemConfig};
pub use error::{Error, Result};
pub use montecarlo::{EnergySamples, MomentSummary, ValidationReport};
pub use special::{BesselZeroTable, QuadratureSpec, ZeroKind};

/// Crate version recorded in reports and manifests.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
