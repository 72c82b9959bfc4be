//! Probability of a cylindrical coin coming to rest on its side.
//!
//! - [`analytic`]: closed-form probabilities for perfectly inelastic landings.
//! - [`impact`]: the single-impact spin/energy exchange model.
//! - [`sim2d`]: flat-rotation bounce simulator built on [`impact`].
//! - [`sim3d`]: rigid-body simulator with restitution and Coulomb friction.
//! - [`montecarlo`]: seeded trial fan-out and probability estimates.
//! - [`sweep`]: parameter sweeps and the fair-ratio search.
//! - [`config`]: TOML run configuration.

pub mod analytic;
pub mod coin;
pub mod config;
pub mod error;
pub mod impact;
pub mod montecarlo;
pub mod sim2d;
pub mod sim3d;
pub mod sweep;

pub use coin::{aspect_ratio, inertia_of, CoinSpec, ImpactConstant, Inertia, Material, Outcome};
pub use error::{Error, Result};
