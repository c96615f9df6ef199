//! Distributed adaptation of the Gaussian proposal density.
//!
//! Each sensor approximates the predicted posterior by the moments of its
//! transition-propagated particles, performs an unscented update of the
//! `K`-fold inflated prediction with its own measurement (a local
//! pseudoposterior), and the network fuses the pseudoposteriors in
//! information form: the fused precision is the sum of local precisions and
//! the fused information vector the sum of local information vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussfilter::{unscented_update, GaussianBelief, UtParams};
use crate::network::{ConsensusMode, ConsensusReport, Network};

/// The adapted proposal `q(x) = N(x; μ, C)` held by one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalDensity {
    pub belief: GaussianBelief,
}

/// Sample mean and `1/J` covariance of the temporary particles, floored.
pub fn predicted_moments(particles: &[DVector<f64>]) -> Result<GaussianBelief> {
    let j = particles.len();
    if j < 2 {
        return Err(Error::TooFewParticles { needed: 2, got: j });
    }
    let m = particles[0].len();
    let mut mean = DVector::zeros(m);
    let mut second = DMatrix::zeros(m, m);
    for x in particles {
        mean += x;
        second.ger(1.0, x, x, 1.0);
    }
    mean /= j as f64;
    second /= j as f64;
    second.ger(-1.0, &mean, &mean, 1.0);
    GaussianBelief::new_floored(mean, second)
}

/// Unscented update of `N(μ′, K·C′)` with this sensor's measurement.
pub fn local_pseudoposterior<H>(
    pred: &GaussianBelief,
    z: f64,
    sensors: usize,
    h: H,
    noise_var: f64,
    ut: UtParams,
) -> Result<GaussianBelief>
where
    H: Fn(&DVector<f64>) -> f64,
{
    if sensors == 0 {
        return Err(Error::InvalidConfig("sensor count must be positive".into()));
    }
    let inflated = GaussianBelief::new(pred.mean().clone(), pred.cov() * sensors as f64)?;
    unscented_update(&inflated, z, h, noise_var, ut)
}

/// Scalars per fusion consensus iteration: `M` information entries,
/// `M(M+1)/2` unique precision entries and one round-synchronization scalar.
pub fn fusion_payload_len(dim: usize) -> usize {
    dim + dim * (dim + 1) / 2 + 1
}

/// Synchronization scalar carried as the last payload entry. Every sensor
/// contributes the same value, so consensus leaves it unchanged.
const SYNC_SCALAR: f64 = 1.0;

/// `[upper(C⁻¹) row-major, C⁻¹μ, sync]`.
pub fn pack_information(b: &GaussianBelief) -> DVector<f64> {
    let m = b.dim();
    let precision = b.precision();
    let info = &precision * b.mean();
    let mut out = Vec::with_capacity(fusion_payload_len(m));
    for i in 0..m {
        for j in i..m {
            out.push(precision[(i, j)]);
        }
    }
    out.extend(info.iter());
    out.push(SYNC_SCALAR);
    DVector::from_vec(out)
}

/// Inverse of [`pack_information`] applied to a summed payload.
pub fn unpack_information(payload: &DVector<f64>, dim: usize) -> Result<GaussianBelief> {
    if payload.len() != fusion_payload_len(dim) {
        return Err(Error::DimensionMismatch {
            expected: fusion_payload_len(dim),
            found: payload.len(),
        });
    }
    let mut precision = DMatrix::zeros(dim, dim);
    let mut idx = 0;
    for i in 0..dim {
        for j in i..dim {
            precision[(i, j)] = payload[idx];
            precision[(j, i)] = payload[idx];
            idx += 1;
        }
    }
    let info = payload.rows(idx, dim).into_owned();
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("summed precision"))?;
    let cov = chol.inverse();
    let mean = chol.solve(&info);
    GaussianBelief::new_floored(mean, cov)
}

/// Consensus fusion of the local pseudoposteriors into each sensor's proposal.
pub fn fuse_pseudoposteriors(
    network: &Network,
    mode: ConsensusMode,
    locals: &[GaussianBelief],
) -> Result<(Vec<ProposalDensity>, ConsensusReport)> {
    let dim = locals
        .first()
        .map(GaussianBelief::dim)
        .ok_or_else(|| Error::InvalidConfig("no pseudoposteriors to fuse".into()))?;
    let payloads: Vec<DVector<f64>> = locals.iter().map(pack_information).collect();
    let (sums, report) = network.sum(mode, &payloads)?;
    let proposals = sums
        .iter()
        .map(|s| unpack_information(s, dim).map(|belief| ProposalDensity { belief }))
        .collect::<Result<Vec<_>>>()?;
    Ok((proposals, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussfilter::COV_FLOOR;
    use crate::models::SensorSite;
    use crate::network::Topology;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sites(k: usize) -> Vec<SensorSite> {
        (0..k)
            .map(|index| SensorSite {
                index,
                position: Vector2::new(index as f64, 0.0),
            })
            .collect()
    }

    fn random_spd(m: usize, rng: &mut ChaCha8Rng) -> GaussianBelief {
        let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let c = &a * a.transpose() + DMatrix::identity(m, m) * 0.2;
        let mean = DVector::from_fn(m, |_, _| rng.random_range(-3.0..3.0));
        GaussianBelief::new(mean, (&c + c.transpose()) * 0.5).unwrap()
    }

    #[test]
    fn two_point_moments_use_one_over_j() {
        let pts = vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![2.0, 0.0])];
        let b = predicted_moments(&pts).unwrap();
        assert_eq!(b.mean(), &DVector::from_vec(vec![1.0, 0.0]));
        assert_relative_eq!(b.cov()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.cov()[(1, 1)], COV_FLOOR, epsilon = 1e-18);
        assert_eq!(b.cov()[(0, 1)], 0.0);
    }

    #[test]
    fn identical_particles_give_floor() {
        let p = DVector::from_vec(vec![3.0, -1.0]);
        let b = predicted_moments(&vec![p.clone(); 10]).unwrap();
        assert_eq!(b.mean(), &p);
        assert!((b.cov() - DMatrix::identity(2, 2) * COV_FLOOR).amax() < 1e-18);
        assert!(matches!(predicted_moments(&[p]), Err(Error::TooFewParticles { .. })));
    }

    #[test]
    fn standard_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let std = GaussianBelief::isotropic(DVector::zeros(2), 1.0).unwrap();
        let pts: Vec<DVector<f64>> = (0..100_000).map(|_| std.sample(&mut rng)).collect();
        let b = predicted_moments(&pts).unwrap();
        assert!(b.mean().amax() < 0.05);
        assert!((b.cov() - DMatrix::identity(2, 2)).amax() < 0.05);
    }

    #[test]
    fn pseudoposterior_reductions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pred = random_spd(2, &mut rng);
        let h = DVector::from_vec(vec![1.0, 0.5]);
        let ut = UtParams::classic(2);

        let one = local_pseudoposterior(&pred, 0.7, 1, |x| h.dot(x), 0.3, ut).unwrap();
        let plain = unscented_update(&pred, 0.7, |x| h.dot(x), 0.3, ut).unwrap();
        assert_eq!(one, plain);

        let flat = local_pseudoposterior(&pred, 0.7, 4, |x| h.dot(x), 1e12, ut).unwrap();
        assert!((flat.mean() - pred.mean()).amax() < 1e-6);
        assert!((flat.cov() - pred.cov() * 4.0).amax() < 1e-6 * 4.0 * pred.cov().amax());

        // Conjugate update of N(μ′, K C′) with z = hᵀx + v.
        let k = 5.0;
        let c = pred.cov() * k;
        let ch = &c * &h;
        let s = h.dot(&ch) + 0.3;
        let mean = pred.mean() + &ch * ((0.7 - h.dot(pred.mean())) / s);
        let cov = &c - &ch * ch.transpose() / s;
        let got = local_pseudoposterior(&pred, 0.7, 5, |x| h.dot(x), 0.3, ut).unwrap();
        assert!((got.mean() - mean).amax() < 1e-10);
        assert!((got.cov() - cov).amax() < 1e-10);
    }

    /// Direct evaluation of `C = (Σ C̃ₖ⁻¹)⁻¹`, `μ = C Σ C̃ₖ⁻¹ μ̃ₖ` with general inverses.
    fn central_fusion(locals: &[GaussianBelief]) -> (DVector<f64>, DMatrix<f64>) {
        let m = locals[0].dim();
        let mut p = DMatrix::zeros(m, m);
        let mut info = DVector::zeros(m);
        for b in locals {
            let inv = b.cov().clone().try_inverse().unwrap();
            info += &inv * b.mean();
            p += inv;
        }
        let c = p.try_inverse().unwrap();
        (&c * info, c)
    }

    #[test]
    fn identical_inputs_fuse_to_scaled_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = random_spd(2, &mut rng);
        let net = Network::new(Topology::complete(sites(4)));
        let (out, report) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &vec![b.clone(); 4]).unwrap();
        for q in out {
            assert!((q.belief.mean() - b.mean()).amax() < 1e-12);
            assert!((q.belief.cov() - b.cov() / 4.0).amax() < 1e-12);
        }
        assert_eq!(report.payload_dim, 6);
    }

    #[test]
    fn exact_fusion_matches_central_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = Network::new(Topology::complete(sites(3)));
        for _ in 0..100 {
            let locals: Vec<GaussianBelief> = (0..3).map(|_| random_spd(2, &mut rng)).collect();
            let (out, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();
            let (mean, cov) = central_fusion(&locals);
            assert!((out[0].belief.mean() - &mean).amax() < 1e-10);
            assert!((out[0].belief.cov() - &cov).amax() < 1e-10);

            // fused precision is the sum of input precisions
            let summed = locals.iter().fold(DMatrix::zeros(2, 2), |a, b| a + b.precision());
            assert!((out[0].belief.precision() - summed).amax() < 1e-9 * out[0].belief.precision().amax());
        }
    }

    #[test]
    fn fusion_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::new(Topology::complete(sites(5)));
        let locals: Vec<GaussianBelief> = (0..5).map(|_| random_spd(3, &mut rng)).collect();
        let mut rev = locals.clone();
        rev.reverse();
        let (a, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();
        let (b, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &rev).unwrap();
        assert!((a[0].belief.mean() - b[0].belief.mean()).amax() < 1e-12);
        assert!((a[0].belief.cov() - b[0].belief.cov()).amax() < 1e-12);
    }

    #[test]
    fn one_dimensional_product_quadrature() {
        let locals: Vec<GaussianBelief> = [(0.3, 0.5), (-0.4, 1.2), (1.1, 2.0)]
            .iter()
            .map(|&(m, v)| GaussianBelief::isotropic(DVector::from_element(1, m), v).unwrap())
            .collect();
        let net = Network::new(Topology::complete(sites(3)));
        let (out, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();

        let (lo, hi, n) = (-10.0, 10.0, 200_000);
        let h = (hi - lo) / n as f64;
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            let p: f64 = locals
                .iter()
                .map(|b| b.log_pdf(&DVector::from_element(1, x)))
                .sum::<f64>()
                .exp();
            z += p * h;
            m1 += x * p * h;
            m2 += x * x * p * h;
        }
        let mean = m1 / z;
        let var = m2 / z - mean * mean;
        assert!((out[0].belief.mean()[0] - mean).abs() < 1e-3);
        assert!((out[0].belief.cov()[(0, 0)] - var).abs() < 1e-3);
    }

    #[test]
    fn shared_covariance_fusion_is_tighter() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let base = random_spd(2, &mut rng);
        let locals: Vec<GaussianBelief> = (0..4)
            .map(|_| {
                let mean = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                GaussianBelief::new(mean, base.cov().clone()).unwrap()
            })
            .collect();
        let net = Network::new(Topology::complete(sites(4)));
        let (out, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();
        for b in &locals {
            let diff = b.cov() - out[0].belief.cov();
            assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-12);
        }
    }

    #[test]
    fn linear_gaussian_fusion_equals_central_kalman() {
        // With exact consensus and a linear model the fused proposal is the
        // exact posterior over all K measurements.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let k = 6;
        let pred = random_spd(2, &mut rng);
        let rows: Vec<DVector<f64>> = (0..k)
            .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let zs: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let r = 0.2;
        let ut = UtParams::classic(2);
        let locals: Vec<GaussianBelief> = (0..k)
            .map(|i| local_pseudoposterior(&pred, zs[i], k, |x| rows[i].dot(x), r, ut).unwrap())
            .collect();
        let net = Network::new(Topology::complete(sites(k)));
        let (out, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();

        let mut post = pred.clone();
        for i in 0..k {
            post = unscented_update(&post, zs[i], |x| rows[i].dot(x), r, ut).unwrap();
        }
        assert!((out[0].belief.mean() - post.mean()).amax() < 1e-6);
        assert!((out[0].belief.cov() - post.cov()).amax() < 1e-6);
    }

    #[test]
    fn iterative_fusion_reports_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let net = Network::new(Topology::complete(sites(4)));
        let locals: Vec<GaussianBelief> = (0..4).map(|_| random_spd(2, &mut rng)).collect();
        let (out, report) = fuse_pseudoposteriors(&net, ConsensusMode::Iterative(15), &locals).unwrap();
        assert_eq!(report.scalars_sent_per_sensor, 15 * 6);
        let (exact, _) = fuse_pseudoposteriors(&net, ConsensusMode::Exact, &locals).unwrap();
        // complete graph: one Metropolis round already averages exactly
        assert!((out[2].belief.mean() - exact[0].belief.mean()).amax() < 1e-10);
        assert_eq!(fusion_payload_len(2), 6);
    }
}
