//! Likelihood consensus: per-sensor polynomial expansions of the local
//! log-likelihood, summed over the network, give every sensor an expansion
//! of the joint log-likelihood.
//!
//! The constant coefficient is fitted but not transmitted. A constant offset
//! of the joint log-likelihood cancels when importance weights are
//! normalized, so every sensor ends up with the joint expansion up to an
//! additive constant.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::models::{MeasurementModel, State};
use crate::network::{ConsensusMode, ConsensusReport, Network};
use crate::polybasis::{fit_least_squares, CoefficientVector, LsFit, MonomialBasis};

/// Least-squares expansion of `log f(z | x)` for one sensor over its particles.
pub fn local_coefficients(
    z: f64,
    sensor: usize,
    particles: &[State],
    basis: &MonomialBasis,
    model: &dyn MeasurementModel,
) -> Result<LsFit> {
    let targets: Vec<f64> = particles.iter().map(|x| model.log_likelihood(sensor, z, x)).collect();
    fit_least_squares(basis, particles, &targets)
}

/// Entries of a coefficient vector that go on the air.
pub fn transmitted_len(basis_len: usize, include_constant: bool) -> usize {
    if include_constant {
        basis_len
    } else {
        basis_len.saturating_sub(1)
    }
}

/// Consensus summation of all sensors' coefficient vectors.
///
/// With `include_constant == false` the constant entry is dropped from the
/// payload and set to zero in the result.
pub fn likelihood_consensus(
    network: &Network,
    mode: ConsensusMode,
    local: &[CoefficientVector],
    include_constant: bool,
) -> Result<(Vec<CoefficientVector>, ConsensusReport)> {
    let len = local.first().map_or(0, CoefficientVector::len);
    for c in local {
        if c.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: c.len(),
            });
        }
    }
    let skip = usize::from(!include_constant && len > 0);
    let payloads: Vec<DVector<f64>> = local
        .iter()
        .map(|c| c.values().rows(skip, len - skip).into_owned())
        .collect();
    let (sums, report) = network.sum(mode, &payloads)?;
    let out = sums
        .into_iter()
        .map(|s| {
            let mut full = DVector::zeros(len);
            full.rows_mut(skip, len - skip).copy_from(&s);
            CoefficientVector(full)
        })
        .collect();
    Ok((out, report))
}

/// A sensor's approximation of the joint log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct JlfApprox {
    pub coefficients: CoefficientVector,
    pub basis: MonomialBasis,
}

impl JlfApprox {
    pub fn new(coefficients: CoefficientVector, basis: MonomialBasis) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coefficients.len(),
            });
        }
        Ok(Self { coefficients, basis })
    }

    /// `Σ_r a_r φ_r(x)`, the approximate log joint likelihood.
    pub fn log_value(&self, x: &State) -> f64 {
        self.coefficients.values().dot(&self.basis.eval(x))
    }
}

pub fn log_jlf(approx: &JlfApprox, x: &State) -> f64 {
    approx.log_value(x)
}
