//! Numerical laboratory for the radially symmetric parabolic-elliptic
//! chemotaxis system on the unit disk.
//!
//! The system `u_t = Δu − ∇·(u∇v)`, `0 = Δv − μ + u` with no-flux boundary
//! conditions is studied through the cumulative mass
//! `M(ξ, t) = 2π∫₀^√ξ u(r, t) r dr`, which turns it into one degenerate scalar
//! parabolic problem
//!
//! ```text
//! M_t = 4ξ M_ξξ + (M − mξ) M_ξ / π,   M(0) = 0,  M(1) = m.
//! ```
//!
//! Modules:
//!
//! * [`radial`] grids, the mass transform, density/potential reconstruction, presets.
//! * [`barriers`] the stationary operator `Q` and the closed-form barrier families.
//! * [`solver`] the monotone IMEX scheme, adaptive driver and blowup detection.
//! * [`energy`] free energy, dissipation, decay audit and the log-HLS check.
//! * [`steady`] stationary residuals, Newton, the uniqueness sweep and long-time reports.

pub mod barriers;
pub mod energy;
pub mod radial;
pub mod solver;
pub mod steady;

pub mod csv;

pub use std::f64::consts::PI;

/// The critical mass `8π`.
pub const CRITICAL_MASS: f64 = 8.0 * PI;
