//! Local particle filters of the distributed tracker, plus the centralized
//! reference filter.
//!
//! One time step at sensor `k`:
//!
//! 1. systematic resampling of the previous weighted particles;
//! 2. temporary particles from the random-walk transition and their Gaussian
//!    moments (the predicted posterior);
//! 3. proposal adaptation by consensus fusion of local pseudoposteriors
//!    (adapted variant only);
//! 4. `J` draws from the proposal (or the temporary particles themselves when
//!    adaptation is off);
//! 5. likelihood consensus on the local log-likelihood expansions;
//! 6. importance weights `f̃(z|x) f(x|x̄) / q(x)` normalized in the log domain;
//! 7. the weighted-mean state estimate.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfilter::{unscented_update, GaussianBelief, UtParams};
use crate::lc::{likelihood_consensus, local_coefficients, JlfApprox};
use crate::models::{sample_transition, transition_logpdf, MeasurementModel, MotionConfig, State};
use crate::network::{CommTally, ConsensusMode, ConsensusReport, Network};
use crate::polybasis::{MonomialBasis, Whitening};
use crate::proposal::{fuse_pseudoposteriors, local_pseudoposterior, predicted_moments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterVariant {
    /// Distributed filter with consensus-adapted Gaussian proposal.
    #[serde(rename = "lcdpf")]
    LcDpf,
    /// Distributed filter proposing from the transition density.
    #[serde(rename = "lcdpf-na")]
    LcDpfNa,
    /// Centralized filter with exact joint likelihood.
    #[serde(rename = "cpf")]
    Cpf,
}

impl FilterVariant {
    pub const ALL: [FilterVariant; 3] = [FilterVariant::LcDpf, FilterVariant::LcDpfNa, FilterVariant::Cpf];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterVariant::LcDpf => "lcdpf",
            FilterVariant::LcDpfNa => "lcdpf-na",
            FilterVariant::Cpf => "cpf",
        }
    }

    pub fn is_distributed(self) -> bool {
        !matches!(self, FilterVariant::Cpf)
    }
}

impl fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FilterVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant `{s}` (expected lcdpf, lcdpf-na or cpf)")))
    }
}

/// Particles with log-weights normalized so that `log Σ exp(w) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<State>,
    log_weights: Vec<f64>,
}

impl ParticleSet {
    pub fn uniform(particles: Vec<State>) -> Self {
        let lw = -(particles.len() as f64).ln();
        let log_weights = vec![lw; particles.len()];
        Self { particles, log_weights }
    }

    /// Normalizes `raw_log_weights`. The flag is set when no weight is finite
    /// and the set falls back to uniform weights.
    pub fn from_log_weights(particles: Vec<State>, raw_log_weights: &[f64]) -> (Self, bool) {
        match normalize_log_weights(raw_log_weights) {
            Some(log_weights) => (Self { particles, log_weights }, false),
            None => (Self::uniform(particles), true),
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[State] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Weighted mean `Σ w x`.
    pub fn estimate(&self) -> State {
        let m = self.particles[0].len();
        self.particles
            .iter()
            .zip(&self.log_weights)
            .fold(DVector::zeros(m), |acc, (x, lw)| acc + x * lw.exp())
    }
}

/// Log-sum-exp normalization. `None` when every entry is `-∞` or NaN.
pub fn normalize_log_weights(raw: &[f64]) -> Option<Vec<f64>> {
    let clean: Vec<f64> = raw
        .iter()
        .map(|&w| if w.is_nan() { f64::NEG_INFINITY } else { w })
        .collect();
    let max = clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let sum: f64 = clean.iter().map(|w| (w - max).exp()).sum();
    let log_norm = max + sum.ln();
    Some(clean.iter().map(|w| w - log_norm).collect())
}

/// `J` draws from the prior with uniform weights.
pub fn initialize<R: Rng + ?Sized>(prior: &GaussianBelief, j: usize, rng: &mut R) -> ParticleSet {
    ParticleSet::uniform((0..j).map(|_| prior.sample(rng)).collect())
}

/// Systematic resampling with offset `u0 ∈ [0, 1)` measured in strata:
/// the `i`-th pointer sits at `(i + u0) / J`.
pub fn resample_systematic_with_offset(ps: &ParticleSet, u0: f64) -> Vec<State> {
    let j = ps.len();
    let mut out = Vec::with_capacity(j);
    let mut cumulative = 0.0;
    let mut idx = 0;
    for i in 0..j {
        let pointer = (i as f64 + u0) / j as f64;
        while idx + 1 < j && cumulative + ps.log_weights[idx].exp() <= pointer {
            cumulative += ps.log_weights[idx].exp();
            idx += 1;
        }
        out.push(ps.particles[idx].clone());
    }
    out
}

pub fn resample_systematic<R: Rng + ?Sized>(ps: &ParticleSet, rng: &mut R) -> Vec<State> {
    let u0: f64 = rng.random();
    resample_systematic_with_offset(ps, u0)
}

/// Unnormalized log importance weights. With a proposal, the weight of draw
/// `j` is `log f̃(x_j) + log f(x_j | x̄_j) − log q(x_j)`, pairing draw `j`
/// with resampled particle `j`. Without one (draws from the transition) it is
/// the log-likelihood alone.
pub fn importance_log_weights<L>(
    particles: &[State],
    ancestors: &[State],
    log_likelihood: L,
    proposal: Option<&GaussianBelief>,
    motion: &MotionConfig,
) -> Vec<f64>
where
    L: Fn(&State) -> f64,
{
    particles
        .iter()
        .zip(ancestors)
        .map(|(x, anc)| {
            let mut w = log_likelihood(x);
            if let Some(q) = proposal {
                w += transition_logpdf(x, anc, motion) - q.log_pdf(x);
            }
            w
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub variant: FilterVariant,
    pub particles: usize,
    pub degree: u32,
    pub consensus: ConsensusMode,
    /// Transmit the constant expansion coefficient too.
    pub include_constant: bool,
    pub ut: UtParams,
    pub motion: MotionConfig,
    /// Basis whitening when no fused proposal is available.
    pub region_whitening: Whitening,
}

#[derive(Debug, Clone)]
pub struct SensorFilterState {
    pub sensor: usize,
    pub particles: ParticleSet,
    pub rng: ChaCha8Rng,
}

impl SensorFilterState {
    pub fn new(sensor: usize, prior: &GaussianBelief, j: usize, mut rng: ChaCha8Rng) -> Self {
        let particles = initialize(prior, j, &mut rng);
        Self { sensor, particles, rng }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Likelihood fits that hit a rank-deficient design matrix.
    pub rank_deficient_fits: u64,
    /// Steps whose weights all vanished and were reset to uniform.
    pub degenerate_weight_resets: u64,
}

impl StepDiagnostics {
    pub fn merge(&mut self, other: &StepDiagnostics) {
        self.rank_deficient_fits += other.rank_deficient_fits;
        self.degenerate_weight_resets += other.degenerate_weight_resets;
    }
}

#[derive(Debug, Clone)]
pub struct DpfStepOutput {
    pub estimates: Vec<State>,
    pub reports: Vec<ConsensusReport>,
    pub comm: CommTally,
    pub diagnostics: StepDiagnostics,
}

/// One time step of every local filter of the distributed tracker.
pub fn dpf_step(
    states: &mut [SensorFilterState],
    measurements: &[f64],
    network: &Network,
    model: &dyn MeasurementModel,
    cfg: &FilterConfig,
) -> Result<DpfStepOutput> {
    if !cfg.variant.is_distributed() {
        return Err(Error::InvalidConfig("dpf_step requires a distributed variant".into()));
    }
    let k = states.len();
    if measurements.len() != k || network.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: measurements.len().min(network.len()),
        });
    }
    let adapted = cfg.variant == FilterVariant::LcDpf;
    let mut reports = Vec::new();
    let mut diagnostics = StepDiagnostics::default();

    // Steps 1-2.
    let mut ancestors = Vec::with_capacity(k);
    let mut temporary = Vec::with_capacity(k);
    for s in states.iter_mut() {
        let anc = resample_systematic(&s.particles, &mut s.rng);
        let tmp: Vec<State> = anc
            .iter()
            .map(|x| sample_transition(x, &cfg.motion, &mut s.rng))
            .collect();
        ancestors.push(anc);
        temporary.push(tmp);
    }

    // Steps 3-4.
    let (proposals, drawn): (Vec<Option<GaussianBelief>>, Vec<Vec<State>>) = if adapted {
        let locals = temporary
            .iter()
            .enumerate()
            .map(|(i, tmp)| {
                let pred = predicted_moments(tmp)?;
                local_pseudoposterior(
                    &pred,
                    measurements[i],
                    k,
                    |x| model.predict(i, x),
                    model.noise_var(),
                    cfg.ut,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let (fused, report) = fuse_pseudoposteriors(network, cfg.consensus, &locals)?;
        reports.push(report);
        let drawn = states
            .iter_mut()
            .zip(&fused)
            .map(|(s, q)| (0..cfg.particles).map(|_| q.belief.sample(&mut s.rng)).collect())
            .collect();
        (fused.into_iter().map(|q| Some(q.belief)).collect(), drawn)
    } else {
        (vec![None; k], temporary)
    };

    // Step 5.
    let bases: Vec<MonomialBasis> = proposals
        .iter()
        .map(|q| {
            let w = match q {
                Some(q) => Whitening::from_belief(q),
                None => cfg.region_whitening.clone(),
            };
            MonomialBasis::new(cfg.degree, w)
        })
        .collect();
    let mut local = Vec::with_capacity(k);
    for i in 0..k {
        let fit = local_coefficients(measurements[i], i, &drawn[i], &bases[i], model)?;
        diagnostics.rank_deficient_fits += u64::from(fit.rank_deficient);
        local.push(fit.coefficients);
    }
    let (sums, report) = likelihood_consensus(network, cfg.consensus, &local, cfg.include_constant)?;
    reports.push(report);

    // Steps 6-7.
    let mut estimates = Vec::with_capacity(k);
    for (i, ((s, particles), sum)) in states.iter_mut().zip(drawn).zip(sums).enumerate() {
        let jlf = JlfApprox::new(sum, bases[i].clone())?;
        let raw = importance_log_weights(
            &particles,
            &ancestors[i],
            |x| jlf.log_value(x),
            proposals[i].as_ref(),
            &cfg.motion,
        );
        let (ps, degenerate) = ParticleSet::from_log_weights(particles, &raw);
        diagnostics.degenerate_weight_resets += u64::from(degenerate);
        estimates.push(ps.estimate());
        s.particles = ps;
    }

    let mut comm = CommTally::default();
    for r in &reports {
        comm.record(r);
    }
    Ok(DpfStepOutput {
        estimates,
        reports,
        comm,
        diagnostics,
    })
}

/// Fusion-center filter processing all measurements with the exact joint likelihood.
#[derive(Debug, Clone)]
pub struct CentralFilterState {
    pub particles: ParticleSet,
    pub rng: ChaCha8Rng,
}

impl CentralFilterState {
    pub fn new(prior: &GaussianBelief, j: usize, mut rng: ChaCha8Rng) -> Self {
        let particles = initialize(prior, j, &mut rng);
        Self { particles, rng }
    }
}

/// Sequential scalar unscented updates over the sensors in index order.
pub fn central_proposal(
    pred: &GaussianBelief,
    measurements: &[f64],
    model: &dyn MeasurementModel,
    ut: UtParams,
) -> Result<GaussianBelief> {
    let mut belief = pred.clone();
    for (k, &z) in measurements.iter().enumerate() {
        belief = unscented_update(&belief, z, |x| model.predict(k, x), model.noise_var(), ut)?;
    }
    Ok(belief)
}

pub fn cpf_step(
    state: &mut CentralFilterState,
    measurements: &[f64],
    model: &dyn MeasurementModel,
    cfg: &FilterConfig,
) -> Result<(State, StepDiagnostics)> {
    let mut diagnostics = StepDiagnostics::default();
    let rng = &mut state.rng;
    let ancestors = resample_systematic(&state.particles, rng);
    let temporary: Vec<State> = ancestors
        .iter()
        .map(|x| sample_transition(x, &cfg.motion, rng))
        .collect();
    let pred = predicted_moments(&temporary)?;
    let q = central_proposal(&pred, measurements, model, cfg.ut)?;
    let particles: Vec<State> = (0..cfg.particles).map(|_| q.sample(rng)).collect();
    let exact_jlf = |x: &State| -> f64 {
        measurements
            .iter()
            .enumerate()
            .map(|(k, &z)| model.log_likelihood(k, z, x))
            .sum()
    };
    let raw = importance_log_weights(&particles, &ancestors, exact_jlf, Some(&q), &cfg.motion);
    let (ps, degenerate) = ParticleSet::from_log_weights(particles, &raw);
    diagnostics.degenerate_weight_resets += u64::from(degenerate);
    let estimate = ps.estimate();
    state.particles = ps;
    Ok((estimate, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{LinearGaussianModel, SensorSite};
    use crate::network::{Region, Topology};
    use nalgebra::{DMatrix, Vector2};
    use rand::SeedableRng;

    fn sites(k: usize) -> Vec<SensorSite> {
        (0..k)
            .map(|index| SensorSite {
                index,
                position: Vector2::new(index as f64, 0.0),
            })
            .collect()
    }

    fn config(variant: FilterVariant, degree: u32, consensus: ConsensusMode) -> FilterConfig {
        FilterConfig {
            variant,
            particles: 100,
            degree,
            consensus,
            include_constant: false,
            ut: UtParams::classic(2),
            motion: MotionConfig::default(),
            region_whitening: Whitening::from_region(Region {
                width: 40.0,
                height: 40.0,
            }),
        }
    }

    fn prior() -> GaussianBelief {
        GaussianBelief::isotropic(DVector::from_vec(vec![10.0, 10.0]), 1.0).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in FilterVariant::ALL {
            assert_eq!(v.as_str().parse::<FilterVariant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
        assert!("pf".parse::<FilterVariant>().is_err());
    }

    #[test]
    fn initialize_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = initialize(&prior(), 1, &mut rng);
        assert_eq!(one.len(), 1);
        assert_eq!(one.log_weights()[0], 0.0);

        let std = GaussianBelief::isotropic(DVector::zeros(2), 1.0).unwrap();
        let ps = initialize(&std, 10_000, &mut rng);
        let pred = predicted_moments(ps.particles()).unwrap();
        assert!(pred.mean().amax() < 0.05);
        assert!((pred.cov() - DMatrix::identity(2, 2)).amax() < 0.05);

        let a = initialize(&prior(), 50, &mut ChaCha8Rng::seed_from_u64(4));
        let b = initialize(&prior(), 50, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    fn line(j: usize) -> Vec<State> {
        (0..j).map(|i| DVector::from_vec(vec![i as f64, 0.0])).collect()
    }

    #[test]
    fn systematic_uniform_and_degenerate() {
        let ps = ParticleSet::uniform(line(8));
        for u in [0.01, 0.3, 0.999] {
            assert_eq!(resample_systematic_with_offset(&ps, u), line(8));
        }
        let mut raw = vec![f64::NEG_INFINITY; 8];
        raw[5] = 0.0;
        let (ps, degenerate) = ParticleSet::from_log_weights(line(8), &raw);
        assert!(!degenerate);
        let out = resample_systematic_with_offset(&ps, 0.42);
        assert!(out.iter().all(|x| x[0] == 5.0));
    }

    #[test]
    fn systematic_copy_counts_match_weights() {
        let j = 10;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<f64> = (0..j).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (ps, _) = ParticleSet::from_log_weights(line(j), &raw);
        let w = ps.weights();
        let trials = 10_000;
        let mut counts = vec![0.0; j];
        for _ in 0..trials {
            for x in resample_systematic(&ps, &mut rng) {
                counts[x[0] as usize] += 1.0;
            }
        }
        for i in 0..j {
            let mean = counts[i] / trials as f64;
            let expect = j as f64 * w[i];
            // systematic copies are floor(Jw) or ceil(Jw): variance ≤ 1/4
            let se = 0.5 / (trials as f64).sqrt();
            assert!(
                (mean - expect).abs() < 3.0 * se + 1e-12,
                "particle {i}: {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn normalization_and_constant_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..50).map(|_| rng.random_range(-900.0..-100.0)).collect();
        let (a, _) = ParticleSet::from_log_weights(line(50), &raw);
        let lse = a.log_weights().iter().map(|w| w.exp()).sum::<f64>().ln();
        assert!(lse.abs() < 1e-10);
        let shifted: Vec<f64> = raw.iter().map(|w| w + 12345.678).collect();
        let (b, _) = ParticleSet::from_log_weights(line(50), &shifted);
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
        let (c, degenerate) = ParticleSet::from_log_weights(line(3), &[f64::NEG_INFINITY, f64::NAN, f64::NEG_INFINITY]);
        assert!(degenerate);
        assert_eq!(c, ParticleSet::uniform(line(3)));
    }

    #[test]
    fn estimate_cases() {
        let ps = ParticleSet::uniform(line(5));
        assert_eq!(ps.estimate(), DVector::from_vec(vec![2.0, 0.0]));
        let mut raw = vec![f64::NEG_INFINITY; 5];
        raw[3] = -4.0;
        let (ps, _) = ParticleSet::from_log_weights(line(5), &raw);
        assert_eq!(ps.estimate(), DVector::from_vec(vec![3.0, 0.0]));
    }

    #[test]
    fn estimate_matches_quadrature_mean() {
        // Posterior ∝ N(x; 0, 1) · exp(−(x − 1)⁴): importance sample from the
        // Gaussian, compare against a midpoint-rule mean.
        let target = |x: f64| -0.5 * x * x - (x - 1.0).powi(4);
        let (lo, hi, n) = (-8.0, 8.0, 100_000);
        let h = (hi - lo) / n as f64;
        let (mut z, mut m) = (0.0, 0.0);
        for i in 0..n {
            let x = lo + (i as f64 + 0.5) * h;
            z += target(x).exp();
            m += x * target(x).exp();
        }
        let mean = m / z;

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = GaussianBelief::isotropic(DVector::zeros(1), 1.0).unwrap();
        let pts: Vec<State> = (0..200_000).map(|_| q.sample(&mut rng)).collect();
        let raw: Vec<f64> = pts.iter().map(|x| target(x[0]) - q.log_pdf(x)).collect();
        let (ps, _) = ParticleSet::from_log_weights(pts, &raw);
        assert!((ps.estimate()[0] - mean).abs() < 1e-2);
    }

    fn linear_model(k: usize, rng: &mut ChaCha8Rng) -> LinearGaussianModel {
        LinearGaussianModel {
            rows: (0..k)
                .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
            noise_var: 0.1,
        }
    }

    #[test]
    fn single_sensor_reduces_to_central_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = linear_model(1, &mut rng);
        let net = Network::new(Topology::build(sites(1), 18.0));
        let cfg = config(FilterVariant::LcDpf, 2, ConsensusMode::Exact);
        let mut dpf = vec![SensorFilterState::new(0, &prior(), 100, ChaCha8Rng::seed_from_u64(99))];
        let mut cpf = CentralFilterState::new(&prior(), 100, ChaCha8Rng::seed_from_u64(99));
        for n in 0..5 {
            let z = [0.5 + 0.1 * n as f64];
            let out = dpf_step(&mut dpf, &z, &net, &model, &cfg).unwrap();
            let (est, _) = cpf_step(&mut cpf, &z, &model, &cfg).unwrap();
            for (a, b) in dpf[0].particles.weights().iter().zip(cpf.particles.weights()) {
                assert!((a - b).abs() < 1e-8, "step {n}: {a} vs {b}");
            }
            assert!((&out.estimates[0] - est).amax() < 1e-6);
        }
    }

    #[test]
    fn complete_graph_with_shared_streams_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = linear_model(2, &mut rng);
        let net = Network::new(Topology::complete(sites(2)));
        let cfg = config(FilterVariant::LcDpf, 2, ConsensusMode::Iterative(200));
        let mut states: Vec<SensorFilterState> = (0..2)
            .map(|k| SensorFilterState::new(k, &prior(), 100, ChaCha8Rng::seed_from_u64(5)))
            .collect();
        for n in 0..10 {
            let z = [0.2 * n as f64, -0.1 * n as f64];
            let out = dpf_step(&mut states, &z, &net, &model, &cfg).unwrap();
            assert!((&out.estimates[0] - &out.estimates[1]).amax() < 1e-4);
        }
    }

    #[test]
    fn particle_count_is_conserved_and_weights_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = linear_model(4, &mut rng);
        let net = Network::new(Topology::complete(sites(4)));
        for variant in [FilterVariant::LcDpf, FilterVariant::LcDpfNa] {
            let cfg = config(variant, 3, ConsensusMode::Iterative(5));
            let mut states: Vec<SensorFilterState> = (0..4)
                .map(|k| SensorFilterState::new(k, &prior(), 100, ChaCha8Rng::seed_from_u64(k as u64)))
                .collect();
            for _ in 0..5 {
                dpf_step(&mut states, &[0.1, 0.2, 0.3, 0.4], &net, &model, &cfg).unwrap();
                for s in &states {
                    assert_eq!(s.particles.len(), 100);
                    let lse = s.particles.weights().iter().sum::<f64>().ln();
                    assert!(lse.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn communication_per_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let model = linear_model(4, &mut rng);
        let net = Network::new(Topology::complete(sites(4)));
        let mut states: Vec<SensorFilterState> = (0..4)
            .map(|k| SensorFilterState::new(k, &prior(), 50, ChaCha8Rng::seed_from_u64(k as u64)))
            .collect();
        let mut cfg = config(FilterVariant::LcDpf, 6, ConsensusMode::Iterative(15));
        cfg.particles = 50;
        let out = dpf_step(&mut states, &[0.0; 4], &net, &model, &cfg).unwrap();
        assert_eq!(out.comm.per_sensor, 15 * 27 + 15 * 6);
        cfg.variant = FilterVariant::LcDpfNa;
        let out = dpf_step(&mut states, &[0.0; 4], &net, &model, &cfg).unwrap();
        assert_eq!(out.comm.per_sensor, 15 * 27);
    }

    #[test]
    fn cpf_tracks_prior_under_uninformative_measurements() {
        let model = LinearGaussianModel {
            rows: vec![DVector::from_vec(vec![1.0, 0.0]); 3],
            noise_var: 1e12,
        };
        let cfg = config(FilterVariant::Cpf, 2, ConsensusMode::Exact);
        let tight = GaussianBelief::isotropic(DVector::from_vec(vec![10.0, 10.0]), 0.01).unwrap();
        let mut state = CentralFilterState::new(&tight, 500, ChaCha8Rng::seed_from_u64(14));
        let start = state.particles.estimate();
        let sigma = 3.0 * (10.0 * cfg.motion.filter_driving_var[0]).sqrt();
        for _ in 0..10 {
            let (est, _) = cpf_step(&mut state, &[0.0; 3], &model, &cfg).unwrap();
            assert!((&est - &start).amax() < sigma);
        }
    }

    #[test]
    fn cpf_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let model = linear_model(3, &mut rng);
        let cfg = config(FilterVariant::Cpf, 2, ConsensusMode::Exact);
        let run = || {
            let mut s = CentralFilterState::new(&prior(), 80, ChaCha8Rng::seed_from_u64(3));
            (0..5)
                .map(|_| cpf_step(&mut s, &[0.3, 0.1, -0.2], &model, &cfg).unwrap().0)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dpf_rejects_central_variant() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let model = linear_model(1, &mut rng);
        let net = Network::new(Topology::build(sites(1), 18.0));
        let cfg = config(FilterVariant::Cpf, 2, ConsensusMode::Exact);
        let mut states = vec![SensorFilterState::new(0, &prior(), 10, ChaCha8Rng::seed_from_u64(1))];
        assert!(dpf_step(&mut states, &[0.0], &net, &model, &cfg).is_err());
    }
}
