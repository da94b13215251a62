//! Spectral stability toolkit for strong detonations of the viscous Majda
//! model: traveling-wave profiles, Evans function evaluation, winding-number
//! certification and the zero activation-energy limit.

pub mod error;
pub mod linalg;
pub mod model;
pub mod profile;
pub mod spectral;
pub mod winding;
pub mod zero_ea;

pub use error::{Error, Result};
pub use model::ModelParams;
