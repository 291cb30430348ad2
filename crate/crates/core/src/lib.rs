//! Numerical laboratory for Wigner random matrices.
//!
//! The crate builds symmetric and hermitian Wigner ensembles, verifies the
//! local spectral laws of the bulk (local semicircle law, eigenvector
//! delocalization, level repulsion, sine-kernel correlations, gap
//! universality) by Monte Carlo, and simulates Dyson Brownian motion together
//! with the regularized local relaxation flow that explains why those
//! statistics equilibrate fast. Independent oracles (2x2 closed forms,
//! Metropolis samplers of the log-gas, a small Fokker-Planck solver) back
//! every Monte Carlo claim.

pub mod ensembles;
pub mod error;
pub mod flows;
pub mod harness;
pub mod linalg;
pub mod numeric;
pub mod oracles;
pub mod rng;
pub mod pool;
pub mod spectral;
pub mod statistics;

pub use error::{Error, Result};
