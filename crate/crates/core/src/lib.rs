//! Stochastic flows of kernels solving Tanaka's equation dX = sgn(X) dW.
//!
//! Each flow `K^m` is indexed by a probability measure `m` on [0, 1] with
//! mean 1/2. This crate builds `K^m` exactly on a time grid from one
//! Brownian path plus an i.i.d. weight per excursion, simulates its n-point
//! motions and the skew Brownian motions they induce, and checks the
//! classification, generator and decomposition results by Monte Carlo.

pub mod error;
pub mod flow;
pub mod generator;
pub mod measures;
pub mod motion;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod skewbm;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use flow::{coalescing_map, flow_compose, kernel_km, kernel_wiener, ExcursionRegistry, KernelAtoms};
pub use measures::Measure;
pub use motion::{sample_npoint, sign_product_process, NPointPath};
pub use paths::{generate_brownian, BrownianPath, MinStructure, TimeGrid};
pub use rng::{stream, Domain, Stream};
pub use skewbm::{Construction, SkewPath};
