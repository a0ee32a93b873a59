//! Distributed guiding-vector-field (DGVF) control for spontaneous-ordering
//! multi-robot platoons on closed and self-intersecting parametric paths.
//!
//! The crate is organised bottom-up:
//!
//! - [`paths`]: parametric desired paths with analytic derivatives.
//! - [`gvf`]: the singularity-free higher-dimensional guiding vector field.
//! - [`coordination`]: per-robot control laws and the virtual-coordinate repulsion.
//! - [`estimator`]: distributed estimation of the virtual target coordinate.
//! - [`dynamics`]: single-integrator and surface-vessel robot models.
//! - [`sim`]: scenario configuration, fixed-step engine and trajectory logs.
//! - [`analysis`]: post-hoc platoon verification and Lyapunov diagnostics.
//! - [`presets`] and [`cli`]: bundled scenarios and the `dgvf` command line.

pub mod analysis;
pub mod cli;
pub mod coordination;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod gvf;
pub mod linalg;
pub mod paths;
pub mod presets;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
