//! Per-variable two-sided CUSUM on conditional log-likelihood ratios.
//!
//! Every variable `i` carries two accumulators updated with
//! `S ← max(S + s, 0)`: `s_up` with an alternative that raises the
//! conditional mean and `s_down` with one that lowers it. Both alternatives
//! are tuned so that the null drift of `s` is `−δ²/2`. An alarm is raised the
//! first time `S̄ = s_up + s_down` exceeds `h`.

use serde::{Deserialize, Serialize};

use crate::alternative::{cat_llr_logit, clamped_logit, solve_alternative_logits, SOLVER_TOL};
use crate::error::{Error, Result};
use crate::model::{ConditionalGaussian, MixedModel, Observation, VariableKind, DEFAULT_CLAMP_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub delta: f64,
    pub h: f64,
    #[serde(default = "default_clamp_eps")]
    pub clamp_eps: f64,
    #[serde(default)]
    pub reset_on_alarm: bool,
}

fn default_clamp_eps() -> f64 {
    DEFAULT_CLAMP_EPS
}

pub const DEFAULT_DELTA: f64 = 1.0;

impl DetectorConfig {
    pub fn new(delta: f64, h: f64) -> Self {
        Self {
            delta,
            h,
            clamp_eps: DEFAULT_CLAMP_EPS,
            reset_on_alarm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.h > 0.0) {
            return Err(Error::InvalidConfig(format!("threshold must be > 0, got {}", self.h)));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "clamp_eps must lie in (0, 0.5), got {}",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

/// `((x − e)/σ)·δ − δ²/2`; the sign of `delta_signed` selects the direction.
pub fn quant_llr(x: f64, cond: &ConditionalGaussian, delta_signed: f64) -> f64 {
    (x - cond.e) / cond.sigma * delta_signed - 0.5 * delta_signed * delta_signed
}

/// Positive-part CUSUM recursion.
pub fn cusum_step(s_prev: f64, s: f64) -> f64 {
    (s_prev + s).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDetector {
    pub kind: VariableKind,
    pub index: usize,
    s_up: f64,
    s_down: f64,
    first_alarm_t: Option<u64>,
}

impl VariableDetector {
    fn new(kind: VariableKind, index: usize) -> Self {
        Self {
            kind,
            index,
            s_up: 0.0,
            s_down: 0.0,
            first_alarm_t: None,
        }
    }

    pub fn s_up(&self) -> f64 {
        self.s_up
    }

    pub fn s_down(&self) -> f64 {
        self.s_down
    }

    pub fn s_bar(&self) -> f64 {
        self.s_up + self.s_down
    }

    pub fn first_alarm_t(&self) -> Option<u64> {
        self.first_alarm_t
    }

    fn push(&mut self, llr_up: f64, llr_down: f64) {
        self.s_up = cusum_step(self.s_up, llr_up);
        self.s_down = cusum_step(self.s_down, llr_down);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub t: u64,
    pub kind: VariableKind,
    pub index: usize,
    pub statistic: f64,
    pub threshold: f64,
}

/// Detector state for every variable of one model; categorical variables
/// come first, then quantitative ones.
#[derive(Debug, Clone)]
pub struct DetectorBank {
    config: DetectorConfig,
    n_cat: usize,
    n_quant: usize,
    detectors: Vec<VariableDetector>,
    steps: u64,
}

impl DetectorBank {
    pub fn new(model: &MixedModel, config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let detectors = (0..model.n_cat())
            .map(|i| VariableDetector::new(VariableKind::Categorical, i))
            .chain((0..model.n_quant()).map(|i| VariableDetector::new(VariableKind::Quantitative, i)))
            .collect();
        Ok(Self {
            config,
            n_cat: model.n_cat(),
            n_quant: model.n_quant(),
            detectors,
            steps: 0,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn detectors(&self) -> &[VariableDetector] {
        &self.detectors
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Current `S̄` of every variable, in bank order.
    pub fn s_bar(&self) -> impl Iterator<Item = f64> + '_ {
        self.detectors.iter().map(VariableDetector::s_bar)
    }

    /// Processes one observation and returns the alarms it triggered.
    ///
    /// Without `reset_on_alarm` only the first crossing of each variable is
    /// reported; with it, both accumulators restart from zero after every
    /// crossing and each crossing is reported.
    pub fn update(&mut self, model: &MixedModel, obs: &Observation) -> Result<Vec<AlarmEvent>> {
        if model.n_cat() != self.n_cat || model.n_quant() != self.n_quant {
            return Err(Error::DimensionMismatch {
                what: "model variables vs detector bank".into(),
                expected: self.n_cat + self.n_quant,
                got: model.n_cat() + model.n_quant(),
            });
        }
        model.check_observation(obs)?;
        let DetectorConfig {
            delta,
            h,
            clamp_eps,
            reset_on_alarm,
        } = self.config;

        // Conditionals first, against the unmodified observation; accumulator
        // updates are independent of each other.
        let mut increments = Vec::with_capacity(self.detectors.len());
        for i in 0..self.n_cat {
            let q = clamped_logit(model.conditional_logit(obs, i)?, clamp_eps);
            let pair = solve_alternative_logits(q, delta, SOLVER_TOL);
            let x = obs.x_cat()[i];
            increments.push((
                cat_llr_logit(x, q, pair.logit_up),
                cat_llr_logit(x, q, pair.logit_down),
            ));
        }
        for i in 0..self.n_quant {
            let cond = model.conditional_gaussian(obs, i)?;
            let x = obs.x_quant()[i];
            increments.push((quant_llr(x, &cond, delta), quant_llr(x, &cond, -delta)));
        }

        let mut events = Vec::new();
        for (det, (up, down)) in self.detectors.iter_mut().zip(increments) {
            det.push(up, down);
            let statistic = det.s_bar();
            if statistic > h && (det.first_alarm_t.is_none() || reset_on_alarm) {
                det.first_alarm_t.get_or_insert(obs.t());
                events.push(AlarmEvent {
                    t: obs.t(),
                    kind: det.kind,
                    index: det.index,
                    statistic,
                    threshold: h,
                });
                if reset_on_alarm {
                    det.s_up = 0.0;
                    det.s_down = 0.0;
                }
            }
        }
        self.steps += 1;
        Ok(events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableTrace {
    pub kind: VariableKind,
    pub index: usize,
    pub name: String,
    pub s_bar: Vec<f64>,
    pub first_alarm_t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub config: DetectorConfig,
    pub times: Vec<u64>,
    pub variables: Vec<VariableTrace>,
    pub events: Vec<AlarmEvent>,
}

impl DetectionReport {
    pub fn variable(&self, kind: VariableKind, index: usize) -> Option<&VariableTrace> {
        self.variables
            .iter()
            .find(|v| v.kind == kind && v.index == index)
    }
}

/// Runs a fresh bank over a batch of observations, recording every `S̄`.
pub fn run_detection(model: &MixedModel, config: DetectorConfig, observations: &[Observation]) -> Result<DetectionReport> {
    let mut bank = DetectorBank::new(model, config)?;
    let mut variables: Vec<VariableTrace> = bank
        .detectors()
        .iter()
        .map(|d| VariableTrace {
            kind: d.kind,
            index: d.index,
            name: model.variable_name(d.kind, d.index).to_string(),
            s_bar: Vec::with_capacity(observations.len()),
            first_alarm_t: None,
        })
        .collect();
    let mut events = Vec::new();
    let mut times = Vec::with_capacity(observations.len());
    for obs in observations {
        events.extend(bank.update(model, obs)?);
        times.push(obs.t());
        for (trace, s) in variables.iter_mut().zip(bank.s_bar()) {
            trace.s_bar.push(s);
        }
    }
    for (trace, det) in variables.iter_mut().zip(bank.detectors()) {
        trace.first_alarm_t = det.first_alarm_t();
    }
    Ok(DetectionReport {
        config,
        times,
        variables,
        events,
    })
}
