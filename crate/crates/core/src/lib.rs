//! Barycenters of probability measures on Gromov hyperbolic spaces.
//!
//! The crate provides exact metric trees, the Poincaré disk and the
//! Euclidean plane as geodesic spaces, four-point hyperbolicity estimates,
//! exact discrete optimal transport, barycenter solvers, two stochastic
//! proximal schemes with their running error bounds, and a randomized
//! checker for the metric inequalities the bounds rely on.

pub mod barycenter;
pub mod error;
pub mod hyperbolicity;
pub mod rng;
pub mod schemes;
pub mod spaces;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
