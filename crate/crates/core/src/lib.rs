//! Verification toolkit for twistor (conformal Killing) forms on Kähler
//! manifolds.
//!
//! * [`exterior`]: exact alternating algebra on a bitmask basis.
//! * [`kaehler`]: `L`, `Λ`, `J`, type projections and Lefschetz decomposition.
//! * [`twistor`]: covariant jets, the twistor operator and the pointwise
//!   classification residuals.
//! * [`curvature`]: `q(R)`, Weitzenböck and integrability residuals, and the
//!   curvature of complex projective space.
//! * [`chart`]: finite-difference geometry on the Fubini–Study chart and the
//!   flat torus.
//! * [`suites`] and [`report`]: batch checks and their machine-readable output.

pub mod chart;
pub mod curvature;
pub mod exterior;
pub mod kaehler;
pub mod report;
pub mod suites;
pub mod twistor;
