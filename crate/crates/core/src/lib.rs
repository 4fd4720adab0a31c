//! Simulation and verification toolkit for the anisotropic fast diffusion
//! equation `u_t = sum_i (u^{m_i})_{x_i x_i}` with `0 < m_i <= 1`.

pub mod analysis;
pub mod barriers;
pub mod config;
pub mod contour;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod io;
mod linsolve;
pub mod quadrature;
pub mod rescaled;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{compute_exponents, ExponentSet, ModelParams};
pub use grid::{Field, Grid};
