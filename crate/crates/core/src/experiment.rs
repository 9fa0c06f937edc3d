//! Synthetic change experiments: a normal segment sampled from a reference
//! model followed by an anomalous segment sampled from a copy with one
//! parameter changed, monitored by a detector built on the reference model.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_report, RankScan, ThresholdMethod, DEFAULT_ALPHA};
use crate::calibrate::{calibrate_threshold, CalibrationConfig};
use crate::detect::{run_detection, DetectionReport, DetectorConfig, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::io::{write_baseline_csv, write_data_csv, write_event, write_model, write_trajectory_row, EventRecord, TRAJECTORY_HEADER};
use crate::model::{MixedModel, ModelParams, Observation, DEFAULT_CLAMP_EPS};
use crate::sample::{rng_from_seed, JointSampler, SamplerConfig, SimRng};
use crate::stream::event_record;

/// Four binary and four continuous variables on two coupled chains.
///
/// `θ` has 0.5 on the first off-diagonals and `θ_ii = −Σ_{j≠i} θ_ij`;
/// `Δ` is tridiagonal with unit diagonal and 0.25 off-diagonals; `μ = 0`;
/// `Φ = 0.5·I`.
pub fn reference_chain_model() -> MixedModel {
    const N: usize = 4;
    let mut theta = vec![vec![0.0; N]; N];
    let mut delta = vec![vec![0.0; N]; N];
    for i in 0..N - 1 {
        theta[i][i + 1] = 0.5;
        theta[i + 1][i] = 0.5;
        delta[i][i + 1] = 0.25;
        delta[i + 1][i] = 0.25;
    }
    for i in 0..N {
        theta[i][i] = -(0..N).filter(|&j| j != i).map(|j| theta[i][j]).sum::<f64>();
        delta[i][i] = 1.0;
    }
    let phi = (0..N)
        .map(|i| (0..N).map(|u| if i == u { 0.5 } else { 0.0 }).collect())
        .collect();
    ModelParams {
        theta,
        mu: vec![0.0; N],
        delta,
        phi,
        cat_names: None,
        quant_names: None,
    }
    .validate()
    .expect("reference chain model is valid")
}

/// Address of one model parameter, written `theta[i][j]`, `mu[i]`,
/// `delta[u][v]` or `phi[i][u]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParameterPath {
    Theta(usize, usize),
    Mu(usize),
    Delta(usize, usize),
    Phi(usize, usize),
}

impl FromStr for ParameterPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidModification(format!("cannot parse parameter path `{s}`"));
        let s = s.trim();
        let open = s.find('[').ok_or_else(bad)?;
        let (name, mut rest) = s.split_at(open);
        let mut indices = Vec::new();
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            indices.push(rest[1..close].trim().parse::<usize>().map_err(|_| bad())?);
            rest = &rest[close + 1..];
        }
        match (name, indices.as_slice()) {
            ("theta", &[i, j]) => Ok(Self::Theta(i, j)),
            ("mu", &[i]) => Ok(Self::Mu(i)),
            ("delta", &[u, v]) => Ok(Self::Delta(u, v)),
            ("phi", &[i, u]) => Ok(Self::Phi(i, u)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ParameterPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Theta(i, j) => write!(f, "theta[{i}][{j}]"),
            Self::Mu(i) => write!(f, "mu[{i}]"),
            Self::Delta(u, v) => write!(f, "delta[{u}][{v}]"),
            Self::Phi(i, u) => write!(f, "phi[{i}][{u}]"),
        }
    }
}

impl Serialize for ParameterPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParameterPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub parameter: ParameterPath,
    pub value: f64,
}

impl Modification {
    pub fn new(parameter: ParameterPath, value: f64) -> Self {
        Self { parameter, value }
    }

    /// The model with this one parameter replaced; symmetric entries are set
    /// on both sides and the result is re-validated.
    pub fn apply(&self, model: &MixedModel) -> Result<MixedModel> {
        fn set(m: &mut [Vec<f64>], i: usize, j: usize, v: f64, what: &str) -> Result<()> {
            let cell = m
                .get_mut(i)
                .and_then(|row| row.get_mut(j))
                .ok_or_else(|| Error::InvalidModification(format!("{what}[{i}][{j}] is out of range")))?;
            *cell = v;
            Ok(())
        }
        if !self.value.is_finite() {
            return Err(Error::InvalidModification("new value is not finite".into()));
        }
        let mut params = model.to_params();
        let v = self.value;
        match self.parameter {
            ParameterPath::Theta(i, j) => {
                set(&mut params.theta, i, j, v, "theta")?;
                set(&mut params.theta, j, i, v, "theta")?;
            }
            ParameterPath::Delta(u, w) => {
                set(&mut params.delta, u, w, v, "delta")?;
                set(&mut params.delta, w, u, v, "delta")?;
            }
            ParameterPath::Phi(i, u) => set(&mut params.phi, i, u, v, "phi")?,
            ParameterPath::Mu(i) => {
                let len = params.mu.len();
                *params
                    .mu
                    .get_mut(i)
                    .ok_or_else(|| Error::InvalidModification(format!("mu[{i}] is out of range (size {len})")))? = v;
            }
        }
        params
            .validate()
            .map_err(|e| Error::InvalidModification(format!("{}: {e}", self.parameter)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorSettings {
    pub delta: f64,
    /// Alarm threshold; calibrated on the reference model when absent.
    pub threshold: Option<f64>,
    pub clamp_eps: f64,
    pub reset_on_alarm: bool,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            threshold: None,
            clamp_eps: DEFAULT_CLAMP_EPS,
            reset_on_alarm: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    pub horizon: usize,
    pub target_fa: f64,
    pub n_runs: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        let c = CalibrationConfig::default();
        Self {
            horizon: c.horizon,
            target_fa: c.target_fa,
            n_runs: c.n_runs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineSettings {
    pub alpha: f64,
    pub threshold: ThresholdMethod,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            threshold: ThresholdMethod::Asymptotic,
        }
    }
}

fn default_segment() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path to a model file; the reference chain model when absent.
    #[serde(default)]
    pub model: Option<PathBuf>,
    pub modification: Modification,
    #[serde(default = "default_segment")]
    pub n_normal: usize,
    #[serde(default = "default_segment")]
    pub n_anomalous: usize,
    #[serde(default)]
    pub detector: DetectorSettings,
    #[serde(default)]
    pub calibration: CalibrationSettings,
    #[serde(default)]
    pub baseline: BaselineSettings,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn new(modification: Modification) -> Self {
        Self {
            model: None,
            modification,
            n_normal: default_segment(),
            n_anomalous: default_segment(),
            detector: DetectorSettings::default(),
            calibration: CalibrationSettings::default(),
            baseline: BaselineSettings::default(),
            seed: None,
        }
    }

    /// Reads a JSON config; a relative `model` path is resolved against the
    /// config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut config: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if let (Some(model), Some(dir)) = (config.model.as_mut(), path.parent()) {
            if model.is_relative() {
                *model = dir.join(&*model);
            }
        }
        Ok(config)
    }

    pub fn load_base_model(&self) -> Result<MixedModel> {
        match &self.model {
            Some(path) => crate::io::read_model(path),
            None => Ok(reference_chain_model()),
        }
    }

    pub fn calibration_config(&self) -> CalibrationConfig {
        CalibrationConfig {
            delta: self.detector.delta,
            clamp_eps: self.detector.clamp_eps,
            horizon: self.calibration.horizon,
            target_fa: self.calibration.target_fa,
            n_runs: self.calibration.n_runs,
        }
    }

    pub fn detector_config(&self, h: f64) -> DetectorConfig {
        DetectorConfig {
            delta: self.detector.delta,
            h,
            clamp_eps: self.detector.clamp_eps,
            reset_on_alarm: self.detector.reset_on_alarm,
        }
    }
}

/// Data stream for a seed; the calibration stream of the same seed is
/// independent of it.
pub fn data_rng(seed: u64) -> SimRng {
    rng_from_seed(seed)
}

pub fn calibration_rng(seed: u64) -> SimRng {
    let mut rng = rng_from_seed(seed);
    rng.set_stream(1);
    rng
}

#[derive(Debug, Clone)]
pub struct Experiment {
    base: MixedModel,
    modified: MixedModel,
    config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub threshold: f64,
    pub observations: Vec<Observation>,
    pub report: DetectionReport,
    pub baseline: Vec<RankScan>,
}

impl Experiment {
    pub fn new(base: MixedModel, config: ExperimentConfig) -> Result<Self> {
        let modified = config.modification.apply(&base)?;
        config.detector_config(1.0).validate()?;
        Ok(Self {
            base,
            modified,
            config,
        })
    }

    pub fn base(&self) -> &MixedModel {
        &self.base
    }

    pub fn modified(&self) -> &MixedModel {
        &self.modified
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    pub fn calibrate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        calibrate_threshold(&self.base, &self.config.calibration_config(), rng)
    }

    /// The configured threshold, or one calibrated on the calibration stream.
    pub fn threshold(&self) -> Result<f64> {
        match self.config.detector.threshold {
            Some(h) => Ok(h),
            None => self.calibrate(&mut calibration_rng(self.seed())),
        }
    }

    /// `n_normal` draws from the base model then `n_anomalous` from the
    /// modified one, on one random stream, with times `1..=n`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Observation>> {
        let n = self.config.n_normal + self.config.n_anomalous;
        let mut out = Vec::with_capacity(n);
        let mut normal = JointSampler::new(&self.base, SamplerConfig::for_model(&self.base, self.seed()))?;
        for t in 1..=self.config.n_normal as u64 {
            out.push(normal.draw(t, rng)?);
        }
        let mut anomalous = JointSampler::new(&self.modified, SamplerConfig::for_model(&self.modified, self.seed()))?;
        for t in (self.config.n_normal as u64 + 1)..=n as u64 {
            out.push(anomalous.draw(t, rng)?);
        }
        Ok(out)
    }

    pub fn run_with<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> Result<ExperimentOutcome> {
        let observations = self.simulate(rng)?;
        let report = run_detection(&self.base, self.config.detector_config(h), &observations)?;
        let baseline = if self.base.n_quant() > 0 {
            baseline_report(&observations, self.config.baseline.alpha, self.config.baseline.threshold)?
        } else {
            Vec::new()
        };
        Ok(ExperimentOutcome {
            threshold: h,
            observations,
            report,
            baseline,
        })
    }

    pub fn run(&self) -> Result<ExperimentOutcome> {
        let h = self.threshold()?;
        self.run_with(h, &mut data_rng(self.seed()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub model: PathBuf,
    pub data: PathBuf,
    pub trajectory: PathBuf,
    pub events: PathBuf,
    pub baseline: PathBuf,
}

impl ArtifactPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            model: dir.join("model.json"),
            data: dir.join("data.csv"),
            trajectory: dir.join("trajectory.csv"),
            events: dir.join("events.jsonl"),
            baseline: dir.join("baseline.csv"),
        }
    }
}

pub fn write_trajectory_csv<W: Write>(mut w: W, report: &DetectionReport) -> Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (k, &t) in report.times.iter().enumerate() {
        for var in &report.variables {
            write_trajectory_row(&mut w, t, &var.name, var.s_bar[k])?;
        }
    }
    Ok(())
}

/// Writes the reference model, the data, the `S̄` trajectories, the alarm
/// events and the rank-scan statistics into `dir`.
pub fn write_artifacts(experiment: &Experiment, outcome: &ExperimentOutcome, dir: &Path) -> Result<ArtifactPaths> {
    fs::create_dir_all(dir)?;
    let paths = ArtifactPaths::in_dir(dir);
    let base = experiment.base();

    write_model(&paths.model, base)?;

    let mut w = BufWriter::new(File::create(&paths.data)?);
    write_data_csv(&mut w, base.n_cat(), base.n_quant(), &outcome.observations)?;
    w.flush()?;

    let mut w = BufWriter::new(File::create(&paths.trajectory)?);
    write_trajectory_csv(&mut w, &outcome.report)?;
    w.flush()?;

    let mut w = BufWriter::new(File::create(&paths.events)?);
    for event in &outcome.report.events {
        let record: EventRecord = event_record(base, event);
        write_event(&mut w, &record)?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(&paths.baseline)?);
    write_baseline_csv(&mut w, base.quant_names(), &outcome.baseline)?;
    w.flush()?;

    Ok(paths)
}
