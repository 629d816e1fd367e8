//! Equilibrium magnetization with uniaxial anisotropy for magnetic particle
//! imaging: series evaluation, quadrature oracles, a Néel Fokker-Planck
//! reference solver, system-matrix assembly, the reduced Chebyshev model,
//! Kaczmarz reconstruction, error measures and file I/O.

pub mod error;
pub mod fp;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod physics;
pub mod quadrature;
pub mod recon;
pub mod reduced;
pub mod series;
pub mod special;
pub mod sysfn;
pub mod trace;
pub mod vec3;

pub use error::{Error, Result};
