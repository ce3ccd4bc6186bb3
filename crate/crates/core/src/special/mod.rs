//! Special functions and numerical primitives: Bessel `J0`/`J1` and their
//! zeros, adaptive quadrature, the Gaussian tail and its inverse, and the
//! sample statistics used to check normality.

mod bessel;
mod gaussian;
mod quadrature;
mod stats;
mod zeros;

pub use bessel::{bessel_j0, bessel_j1, bessel_j1_prime};
pub use gaussian::{gaussian_q, gaussian_q_inv, normal_cdf};
pub use quadrature::{integrate, phi_coefficient, QuadratureSpec};
pub use stats::{kolmogorov_survival, ks_normality, mean_variance, KsResult};
pub use zeros::{find_bessel_zeros, BesselZeroTable, ZeroKind};

pub(crate) use bessel::{bessel_jn, j0};
pub(crate) use zeros::neumann_zeros;
