//! Solver and verification toolkit for the radial Dirichlet problem
//!
//! ```text
//! -Delta u = lambda u + |u|^{p-2} u + theta u log u^2   on B_R in R^N,
//! ```
//!
//! with `theta > 0` and `2 < p <= 2N/(N-2)`: radial-measure quadrature,
//! the energy functional and its Nehari projections, concentration-bubble
//! asymptotics, nodal shooting, annulus gluing with node optimization, and
//! the energy-level gap checks built on top of them.

pub mod bubbles;
pub mod error;
pub mod estimates;
pub mod glue;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod shoot;

pub use bubbles::{AsymptoticFit, BubbleSpec, SweepQuantity};
pub use error::{Error, Result};
pub use estimates::{EnergyReport, GapCheck, MirandaPair};
pub use glue::{AnnulusSolution, GluedSolution};
pub use model::{Params, RadialFn};
pub use quadrature::RadialGrid;
pub use shoot::{ShootOptions, ShootingResult};
