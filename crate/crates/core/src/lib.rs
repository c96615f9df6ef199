//! Consensus-based distributed particle filtering for wireless sensor networks.
//!
//! Every sensor runs a local particle filter whose weights use an approximation
//! of the joint (all-sensor) likelihood. The approximation is obtained by
//! fitting a polynomial expansion of each local log-likelihood and summing the
//! expansion coefficients over the network with average consensus
//! (likelihood consensus). The proposal density of each local filter is a
//! Gaussian obtained by fusing per-sensor pseudoposteriors, again by consensus.
//!
//! Module map:
//!
//! - [`models`]: target motion, random-walk filter model, acoustic amplitude sensors
//! - [`network`]: deployment, communication graph, Metropolis weights, consensus engine
//! - [`polybasis`]: monomial basis, whitening map, least-squares coefficient fitting
//! - [`lc`]: likelihood consensus and the approximate joint log-likelihood
//! - [`gaussfilter`]: Gaussian beliefs and the unscented measurement update
//! - [`proposal`]: predicted-posterior moments and distributed proposal fusion
//! - [`pf`]: local particle filter recursion and the centralized baseline
//! - [`harness`]: scenario configuration, Monte Carlo runs, metrics, result files

pub mod error;
pub mod gaussfilter;
pub mod harness;
pub mod lc;
pub mod models;
pub mod network;
pub mod pf;
pub mod polybasis;
pub mod proposal;
pub mod streams;

pub use error::{Error, Result};
pub use gaussfilter::{GaussianBelief, UtParams};
pub use models::State;
pub use network::{ConsensusMode, ConsensusReport, Network, Topology};
pub use pf::FilterVariant;
