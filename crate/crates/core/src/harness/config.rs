use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussfilter::UtParams;
use crate::models::{MotionConfig, SensorConfig};
use crate::network::{ConsensusMode, Region};
use crate::pf::{FilterConfig, FilterVariant};
use crate::polybasis::Whitening;

/// Scenario and experiment parameters. Read from a flat TOML table whose keys
/// are the field names; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of sensors `K` (a perfect square).
    pub sensors: usize,
    pub region_width: f64,
    pub region_height: f64,
    pub comm_range: f64,
    /// Grid jitter as a fraction of the cell size, in `[0, 0.5)`.
    pub jitter_frac: f64,
    pub amplitude: f64,
    pub noise_var: f64,
    pub min_dist_sq: f64,
    /// Per-axis driving noise variance of the filters' random walk.
    pub filter_driving_var: [f64; 2],
    /// Per-axis driving noise variance of the simulated target.
    pub truth_driving_var: [f64; 2],
    pub step_period: f64,
    /// Total polynomial degree `R_p`.
    pub degree: u32,
    /// Consensus rounds `I` per consensus call.
    pub iterations: usize,
    /// Particles per local filter `J`.
    pub particles: usize,
    pub steps: usize,
    pub runs: usize,
    pub variant: FilterVariant,
    /// Per-axis prior variance around the true initial position.
    pub prior_var: f64,
    pub ut_kappa: f64,
    pub seed: u64,
    /// Side of the centered square from which the initial position is drawn.
    pub init_box: f64,
    pub initial_velocity: [f64; 2],
    /// Reflect the simulated target at the region boundary.
    pub reflect_truth: bool,
    pub include_constant: bool,
    /// Redeploy the sensors for every run instead of once per seed.
    pub rejitter_per_run: bool,
    /// Replace iterative consensus by exact network sums.
    pub exact_consensus: bool,
    /// All local filters draw from one common random stream.
    pub shared_filter_streams: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let motion = MotionConfig::default();
        let sensor = SensorConfig::default();
        Self {
            sensors: 25,
            region_width: 40.0,
            region_height: 40.0,
            comm_range: 18.0,
            jitter_frac: 0.4,
            amplitude: sensor.amplitude,
            noise_var: sensor.noise_var,
            min_dist_sq: sensor.min_dist_sq,
            filter_driving_var: motion.filter_driving_var.into(),
            truth_driving_var: motion.truth_driving_var.into(),
            step_period: motion.step_period,
            degree: 6,
            iterations: 15,
            particles: 200,
            steps: 50,
            runs: 20,
            variant: FilterVariant::LcDpf,
            prior_var: 1.0,
            ut_kappa: 1.0,
            seed: 1,
            init_box: 20.0,
            initial_velocity: [0.2, 0.2],
            reflect_truth: true,
            include_constant: false,
            rejitter_per_run: false,
            exact_consensus: false,
            shared_filter_streams: false,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable in TOML")
    }

    pub fn region(&self) -> Region {
        Region {
            width: self.region_width,
            height: self.region_height,
        }
    }

    pub fn motion(&self) -> MotionConfig {
        MotionConfig {
            truth_driving_var: Vector2::from(self.truth_driving_var),
            filter_driving_var: Vector2::from(self.filter_driving_var),
            step_period: self.step_period,
        }
    }

    pub fn sensor(&self) -> SensorConfig {
        SensorConfig {
            amplitude: self.amplitude,
            noise_var: self.noise_var,
            min_dist_sq: self.min_dist_sq,
        }
    }

    pub fn consensus(&self) -> ConsensusMode {
        if self.exact_consensus {
            ConsensusMode::Exact
        } else {
            ConsensusMode::Iterative(self.iterations)
        }
    }

    pub fn ut(&self) -> UtParams {
        UtParams { kappa: self.ut_kappa }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            variant: self.variant,
            particles: self.particles,
            degree: self.degree,
            consensus: self.consensus(),
            include_constant: self.include_constant,
            ut: self.ut(),
            motion: self.motion(),
            region_whitening: Whitening::from_region(self.region()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let side = (self.sensors as f64).sqrt().round() as usize;
        if self.sensors == 0 || side * side != self.sensors {
            return Err(Error::NonSquareSensorCount(self.sensors));
        }
        let positive = [
            ("region_width", self.region_width),
            ("region_height", self.region_height),
            ("comm_range", self.comm_range),
            ("prior_var", self.prior_var),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(0.0..0.5).contains(&self.jitter_frac) {
            return Err(Error::InvalidConfig(format!(
                "jitter_frac must lie in [0, 0.5), got {}",
                self.jitter_frac
            )));
        }
        if !(0.0..=self.region_width.min(self.region_height)).contains(&self.init_box) {
            return Err(Error::InvalidConfig(format!(
                "init_box must lie in [0, region side], got {}",
                self.init_box
            )));
        }
        if self.particles < 2 {
            return Err(Error::TooFewParticles {
                needed: 2,
                got: self.particles,
            });
        }
        if self.steps == 0 || self.runs == 0 {
            return Err(Error::InvalidConfig("steps and runs must be at least 1".into()));
        }
        self.motion().validate()?;
        self.sensor().validate()?;
        self.ut().check(2)?;
        Ok(())
    }
}
