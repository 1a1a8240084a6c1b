//! Inverse homogenization of periodic fluid/solid unit cells.
//!
//! A solid inclusion is described by a level set on a periodic grid. Brinkman-penalized
//! Stokes cell problems give the permeability tensor, a corrector problem gives the
//! diffusion tensor, and an augmented-Lagrangian loop evolves the level set to maximize the
//! interface perimeter under hydraulic-diameter and permeability constraints.

pub mod diffusion;
pub mod error;
pub mod grid;
pub mod io;
pub mod levelset;
pub mod optimizer;
pub mod shape_gradient;
mod spectral;
pub mod stokes;

pub use error::{Error, Result};
