//! Monte Carlo choice of the alarm threshold `h`.
//!
//! Null streams are simulated from the model itself; for each run the
//! largest `S̄_i^{(t)}` over all variables and time steps is recorded, and the
//! threshold is the empirical `1 − target_fa` quantile of those maxima.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detect::{DetectorBank, DetectorConfig, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::model::{MixedModel, DEFAULT_CLAMP_EPS};
use crate::sample::{JointSampler, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub delta: f64,
    pub clamp_eps: f64,
    pub horizon: usize,
    pub target_fa: f64,
    pub n_runs: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            clamp_eps: DEFAULT_CLAMP_EPS,
            horizon: 50,
            target_fa: 0.05,
            n_runs: 1000,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_fa > 0.0 && self.target_fa < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target false-alarm probability must lie in (0, 1), got {}",
                self.target_fa
            )));
        }
        if self.n_runs < 100 {
            return Err(Error::InvalidConfig(format!(
                "calibration needs at least 100 runs, got {}",
                self.n_runs
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        Ok(())
    }

    /// Detector configuration with no finite threshold, for null simulation.
    fn unbounded_detector(&self) -> DetectorConfig {
        DetectorConfig {
            delta: self.delta,
            h: f64::INFINITY,
            clamp_eps: self.clamp_eps,
            reset_on_alarm: false,
        }
    }
}

/// Per-run maxima of `S̄` over every variable and `horizon` null steps.
pub fn null_maxima<R: Rng + ?Sized>(
    model: &MixedModel,
    config: &CalibrationConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let detector = config.unbounded_detector();
    let mut sampler = JointSampler::new(model, SamplerConfig::for_model(model, 0))?;
    let mut maxima = Vec::with_capacity(config.n_runs);
    for _ in 0..config.n_runs {
        let mut bank = DetectorBank::new(model, detector)?;
        let mut max = 0.0_f64;
        for t in 1..=config.horizon as u64 {
            let obs = sampler.draw(t, rng)?;
            bank.update(model, &obs)?;
            max = bank.s_bar().fold(max, f64::max);
        }
        maxima.push(max);
    }
    Ok(maxima)
}

/// Smallest sample value `v` such that at most a fraction `1 − level` of the
/// samples lie strictly above it.
pub fn empirical_quantile(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = (level * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Fraction of runs whose maximum exceeds `h`.
pub fn exceedance_rate(maxima: &[f64], h: f64) -> f64 {
    maxima.iter().filter(|&&m| m > h).count() as f64 / maxima.len() as f64
}

pub fn calibrate_threshold<R: Rng + ?Sized>(
    model: &MixedModel,
    config: &CalibrationConfig,
    rng: &mut R,
) -> Result<f64> {
    config.validate()?;
    let maxima = null_maxima(model, config, rng)?;
    Ok(empirical_quantile(&maxima, 1.0 - config.target_fa))
}
