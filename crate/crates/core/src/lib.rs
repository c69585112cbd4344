//! Simulation toolkit for the frog model on `Z^d` with Bernoulli initial
//! configurations: passage times, activation fronts, chain decompositions,
//! renormalization events and Monte Carlo estimators of the time constant.

pub mod chain;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod lattice;
pub mod randomness;
pub mod renorm;
pub mod stats;
pub mod walkstats;

pub use chain::{build_chain, extract_minimizing_chain, ChainSpec, ChainTrace};
pub use dynamics::{
    activation_front, default_horizon, passage_time, tau, visited_region, ActivationFront, ExtendedTime, FrontEngine,
    PassageResult,
};
pub use error::{FrogError, Result};
pub use estimator::{delta, estimate_mu, phi, scaling_sweep, HorizonPolicy, MuEstimate};
pub use lattice::{neighbors, norm, BoxRegion, BoxUnion, Everywhere, NormKind, SitePoint, SiteSet};
pub use randomness::{closest_occupied, sample_configuration, Configuration, KeyedStream, MasterSeed, WalkOracle};
pub use renorm::{is_r_good, BoxGeometry, RenormParams};
