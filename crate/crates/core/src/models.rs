//! Target motion, filter motion model and the acoustic amplitude sensor.
//!
//! The ground truth moves under a discretized constant-velocity model driven by
//! acceleration noise. The filters do not know this model and use a random
//! walk on the 2-D position instead.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix4, Matrix4x2, Vector2, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filter state: the target position. Kept dynamically sized so the generic
/// Gaussian machinery (which is exercised in 1-D and 3-D too) can share it.
pub type State = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
}

impl TargetState {
    pub fn new(position: Vector2<f64>, velocity: Vector2<f64>) -> Self {
        Self { position, velocity }
    }

    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.velocity.x, self.velocity.y)
    }

    fn from_vector(v: Vector4<f64>) -> Self {
        Self {
            position: Vector2::new(v[0], v[1]),
            velocity: Vector2::new(v[2], v[3]),
        }
    }
}

/// Diagonal driving-noise variances for truth and filter, plus the step period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub truth_driving_var: Vector2<f64>,
    pub filter_driving_var: Vector2<f64>,
    pub step_period: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            truth_driving_var: Vector2::new(0.0033, 0.0033),
            filter_driving_var: Vector2::new(0.0528, 0.0528),
            step_period: 1.0,
        }
    }
}

impl MotionConfig {
    pub fn validate(&self) -> Result<()> {
        let all = self.truth_driving_var.iter().chain(self.filter_driving_var.iter());
        for &v in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "driving-noise variances must be positive, got {v}"
                )));
            }
        }
        if !(self.step_period > 0.0 && self.step_period.is_finite()) {
            return Err(Error::InvalidConfig("step period must be positive".into()));
        }
        Ok(())
    }

    /// Constant-velocity transition `G` and noise gain `W` for period `T`.
    pub fn cv_matrices(&self) -> (Matrix4<f64>, Matrix4x2<f64>) {
        let t = self.step_period;
        let h = 0.5 * t * t;
        #[rustfmt::skip]
        let g = Matrix4::new(
            1.0, 0.0, t,   0.0,
            0.0, 1.0, 0.0, t,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let w = Matrix4x2::new(
            h,   0.0,
            0.0, h,
            t,   0.0,
            0.0, t,
        );
        (g, w)
    }
}

/// `G τ + W u` for an explicit acceleration input `u`.
pub fn propagate_truth_with(prev: TargetState, cfg: &MotionConfig, u: Vector2<f64>) -> TargetState {
    let (g, w) = cfg.cv_matrices();
    TargetState::from_vector(g * prev.to_vector() + w * u)
}

pub fn propagate_truth<R: Rng + ?Sized>(prev: TargetState, cfg: &MotionConfig, rng: &mut R) -> TargetState {
    let u = sample_diag_gaussian(&cfg.truth_driving_var, rng);
    propagate_truth_with(prev, cfg, u)
}

/// Mirrors a state that left the box `[0, width] × [0, height]` back inside,
/// negating the velocity component normal to each wall it crossed.
pub fn reflect_into_box(state: TargetState, width: f64, height: f64) -> TargetState {
    let mut out = state;
    for (axis, extent) in [(0, width), (1, height)] {
        let p = state.position[axis];
        let crossings = (p / extent).floor() as i64;
        let folded = p.rem_euclid(2.0 * extent);
        out.position[axis] = if folded > extent { 2.0 * extent - folded } else { folded };
        if crossings.rem_euclid(2) == 1 {
            out.velocity[axis] = -state.velocity[axis];
        }
    }
    out
}

fn sample_diag_gaussian<R: Rng + ?Sized>(var: &Vector2<f64>, rng: &mut R) -> Vector2<f64> {
    let n0: f64 = rng.sample(StandardNormal);
    let n1: f64 = rng.sample(StandardNormal);
    Vector2::new(var[0].sqrt() * n0, var[1].sqrt() * n1)
}

/// Random-walk draw `prev + u`, `u ~ N(0, C_u)`.
pub fn sample_transition<R: Rng + ?Sized>(prev: &State, cfg: &MotionConfig, rng: &mut R) -> State {
    debug_assert_eq!(prev.len(), 2);
    let u = sample_diag_gaussian(&cfg.filter_driving_var, rng);
    DVector::from_vec(vec![prev[0] + u[0], prev[1] + u[1]])
}

/// `log N(x; x_prev, C_u)`.
pub fn transition_logpdf(x: &State, x_prev: &State, cfg: &MotionConfig) -> f64 {
    (0..2)
        .map(|i| {
            let var = cfg.filter_driving_var[i];
            let d = x[i] - x_prev[i];
            -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSite {
    pub index: usize,
    pub position: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub value: f64,
    pub sensor: usize,
    pub time: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorConfig {
    pub amplitude: f64,
    pub noise_var: f64,
    /// Lower clamp on the squared sensor distance; keeps the likelihood finite at the sensor.
    pub min_dist_sq: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            noise_var: 5e-5,
            min_dist_sq: 1e-4,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        check("amplitude", self.amplitude)?;
        check("noise_var", self.noise_var)?;
        check("min_dist_sq", self.min_dist_sq)
    }
}

/// Noise-free amplitude `A / max(‖x − ξ‖², d²_min)`.
pub fn amplitude_at(x: &[f64], site: &SensorSite, cfg: &SensorConfig) -> f64 {
    let dx = x[0] - site.position.x;
    let dy = x[1] - site.position.y;
    cfg.amplitude / (dx * dx + dy * dy).max(cfg.min_dist_sq)
}

pub fn sense<R: Rng + ?Sized>(
    target_pos: &Vector2<f64>,
    site: &SensorSite,
    cfg: &SensorConfig,
    time: usize,
    rng: &mut R,
) -> Measurement {
    let noise: f64 = rng.sample(StandardNormal);
    Measurement {
        value: amplitude_at(target_pos.as_slice(), site, cfg) + cfg.noise_var.sqrt() * noise,
        sensor: site.index,
        time,
    }
}

pub fn gaussian_logpdf_scalar(residual: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * residual * residual / var
}

pub fn local_log_likelihood(z: f64, x: &State, site: &SensorSite, cfg: &SensorConfig) -> f64 {
    gaussian_logpdf_scalar(z - amplitude_at(x.as_slice(), site, cfg), cfg.noise_var)
}

/// Scalar measurement with additive Gaussian noise, as seen by the filters.
///
/// Sensor `k` only ever evaluates its own `predict(k, ·)`; the trait bundles all
/// sensors so the simulator and the centralized baseline can share it.
pub trait MeasurementModel: Sync {
    fn sensor_count(&self) -> usize;

    /// Noise-free measurement of `sensor` for state `x`.
    fn predict(&self, sensor: usize, x: &State) -> f64;

    fn noise_var(&self) -> f64;

    fn log_likelihood(&self, sensor: usize, z: f64, x: &State) -> f64 {
        gaussian_logpdf_scalar(z - self.predict(sensor, x), self.noise_var())
    }
}

/// The acoustic amplitude sensor network.
#[derive(Debug, Clone)]
pub struct AcousticModel {
    pub sites: Vec<SensorSite>,
    pub cfg: SensorConfig,
}

impl AcousticModel {
    pub fn new(sites: Vec<SensorSite>, cfg: SensorConfig) -> Self {
        Self { sites, cfg }
    }
}

impl MeasurementModel for AcousticModel {
    fn sensor_count(&self) -> usize {
        self.sites.len()
    }

    fn predict(&self, sensor: usize, x: &State) -> f64 {
        amplitude_at(x.as_slice(), &self.sites[sensor], &self.cfg)
    }

    fn noise_var(&self) -> f64 {
        self.cfg.noise_var
    }
}

/// Linear-Gaussian surrogate `z_k = h_kᵀ x + v_k`. Its log-likelihood is an
/// exact quadratic in `x`, which makes the polynomial expansion exact at
/// degree two; used for reduction checks.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    pub rows: Vec<DVector<f64>>,
    pub noise_var: f64,
}

impl MeasurementModel for LinearGaussianModel {
    fn sensor_count(&self) -> usize {
        self.rows.len()
    }

    fn predict(&self, sensor: usize, x: &State) -> f64 {
        self.rows[sensor].dot(x)
    }

    fn noise_var(&self) -> f64 {
        self.noise_var
    }
}
