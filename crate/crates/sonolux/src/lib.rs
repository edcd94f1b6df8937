//! Photoacoustic simulation and inversion with plasmonic nanoparticle
//! contrast agents.
//!
//! A nanoparticle swept through a heterogeneous medium is excited by a plane
//! wave; the absorbed energy launches a pressure wave recorded at a single
//! boundary point. The time-and-frequency behavior of that one trace,
//! `p*(x, s, omega)`, determines the sound speed, the background permittivity
//! and the mass density inside the imaging domain:
//!
//! 1. the arrival-time jump of the trace gives the travel time, and the
//!    eikonal equation `|grad tau| = 1/c` gives the speed;
//! 2. the resonance peak of the frequency sweep gives the permittivity
//!    through the Lorentz dispersion relation;
//! 3. the post-exit plateau gives the wavefront amplitude of the acoustic
//!    Green's kernel, whose geometric factorization yields the geodesic
//!    integral of `grad log rho` and hence the density.
//!
//! The crate implements both the forward synthesis (travel times, geodesic
//! kernel coefficients, regime formulas, an independent volume-quadrature
//! oracle) and the three-stage inversion, plus file formats and a CLI for
//! reproducible experiments. All quantities are nondimensional.

pub mod eikonal;
pub mod error;
pub mod forward;
pub mod geodesic;
pub mod grid;
pub mod kernel;
pub mod levelset;
pub mod media;
pub mod plasmonics;
pub mod rng;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
