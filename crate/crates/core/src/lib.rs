//! Self-similar substitution tilings: spectral data of the incidence matrix,
//! windows with their supertile hierarchy, finitely additive measures,
//! deviation of ergodic integrals and the scaling of spectral measures at zero.

pub mod builtins;
pub mod config;
pub mod ergodic;
pub mod error;
pub mod experiment;
pub mod measures;
pub mod spectral;
pub mod spectrum;
pub mod stats;
pub mod subst;
pub mod tiling;

pub use error::{Error, Result};
