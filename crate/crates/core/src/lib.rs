//! Giant unidirectional emitters in waveguide QED: single-node models,
//! cascaded networks, photon scattering and protocol simulation.

pub mod circuit;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gue;
pub mod ode;
pub mod protocols;
pub mod qops;
pub mod scatter;
pub mod slh;

pub use error::{QnetError, Result};
