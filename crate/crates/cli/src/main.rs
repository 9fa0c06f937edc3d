use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mgm::baseline::{baseline_report, ThresholdMethod};
use mgm::calibrate::{calibrate_threshold, CalibrationConfig};
use mgm::detect::DetectorConfig;
use mgm::experiment::{write_artifacts, Experiment, ExperimentConfig};
use mgm::io::{read_data_csv, read_model, write_baseline_csv, write_data_csv};
use mgm::model::DEFAULT_CLAMP_EPS;
use mgm::sample::{rng_from_seed, sample_joint, SamplerConfig, SamplerMethod};
use mgm::stream::detect_stream;
use mgm::{Error, MixedModel};

const SEED_ENV: &str = "MGM_SEED";

#[derive(Debug, Parser)]
#[command(name = "mgm", version, about = "Anomaly detection and localisation with a mixed graphical model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Gibbs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a model file (dimensions, symmetry, positive definiteness).
    Validate { model: PathBuf },

    /// Draw i.i.d. observations from a model into a data CSV.
    Sample {
        model: PathBuf,
        #[arg(short = 'n', long = "count")]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 10)]
        thin: usize,
    },

    /// Run the per-variable CUSUM over a data CSV, emitting alarm events as JSON lines.
    Detect {
        model: PathBuf,
        /// Data CSV, or `-` for standard input.
        #[arg(long, default_value = "-")]
        input: String,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Alarm threshold; calibrated (horizon 50, 5%) when omitted.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        reset_on_alarm: bool,
        /// Also write every S̄ value as `t,variable,S_bar`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Monte Carlo threshold for a target false-alarm probability over a horizon.
    Calibrate {
        model: PathBuf,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Normal-then-anomalous simulation with detection and rank-scan baseline.
    Experiment {
        config: PathBuf,
        #[arg(long, default_value = "experiment-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Rank-based change-point scan of each quantitative variable.
    Baseline {
        model: PathBuf,
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Use a Monte Carlo threshold with this many null runs instead of the asymptotic one.
        #[arg(long)]
        monte_carlo: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Parse {
            line: 0,
            message: format!("{SEED_ENV}={v} is not an unsigned integer"),
        }),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    Ok(flag.or(env_seed()?).unwrap_or(0))
}

fn open_input(input: &str) -> Result<Box<dyn BufRead>, Error> {
    if input == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        Ok(Box::new(BufReader::new(File::open(input)?)))
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p)?))),
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn default_threshold(model: &MixedModel, delta: f64, seed: u64) -> Result<f64, Error> {
    let config = CalibrationConfig {
        delta,
        ..CalibrationConfig::default()
    };
    calibrate_threshold(model, &config, &mut rng_from_seed(seed))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Validate { model } => {
            let m = read_model(&model)?;
            println!(
                "{}: valid model with {} categorical and {} quantitative variables",
                model.display(),
                m.n_cat(),
                m.n_quant()
            );
        }

        Command::Sample {
            model,
            n,
            seed,
            output,
            method,
            burn_in,
            thin,
        } => {
            let m = read_model(&model)?;
            let mut config = SamplerConfig::for_model(&m, resolve_seed(seed)?);
            if let Some(method) = method {
                config.method = match method {
                    Method::Exact => SamplerMethod::ExactEnumeration,
                    Method::Gibbs => SamplerMethod::Gibbs,
                };
            }
            config.gibbs_burn_in = burn_in;
            config.gibbs_thin = thin;
            let data = sample_joint(&m, n, &config, &mut config.rng())?;
            let mut out = open_output(output.as_deref())?;
            write_data_csv(&mut out, m.n_cat(), m.n_quant(), &data)?;
            out.flush()?;
        }

        Command::Detect {
            model,
            input,
            delta,
            threshold,
            reset_on_alarm,
            trajectory,
            output,
            seed,
        } => {
            let m = read_model(&model)?;
            let h = match threshold {
                Some(h) => h,
                None => {
                    let h = default_threshold(&m, delta, resolve_seed(seed)?)?;
                    eprintln!("calibrated threshold h = {h}");
                    h
                }
            };
            let config = DetectorConfig {
                delta,
                h,
                clamp_eps: DEFAULT_CLAMP_EPS,
                reset_on_alarm,
            };
            config.validate()?;
            let reader = open_input(&input)?;
            let mut events = open_output(output.as_deref())?;
            let mut traj = match trajectory {
                Some(p) => Some(BufWriter::new(File::create(p)?)),
                None => None,
            };
            let summary = detect_stream(
                &m,
                reader,
                config,
                &mut events,
                traj.as_mut().map(|w| w as &mut dyn Write),
            )?;
            eprintln!(
                "processed {} observations, {} alarm events",
                summary.observations, summary.events
            );
        }

        Command::Calibrate {
            model,
            horizon,
            alpha,
            runs,
            delta,
            seed,
        } => {
            let m = read_model(&model)?;
            let config = CalibrationConfig {
                delta,
                clamp_eps: DEFAULT_CLAMP_EPS,
                horizon,
                target_fa: alpha,
                n_runs: runs,
            };
            let h = calibrate_threshold(&m, &config, &mut rng_from_seed(resolve_seed(seed)?))?;
            println!("{h}");
        }

        Command::Experiment { config, out, seed } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            cfg.seed = Some(match (seed, cfg.seed) {
                (Some(s), _) => s,
                (None, Some(s)) => s,
                (None, None) => resolve_seed(None)?,
            });
            let base = cfg.load_base_model()?;
            let experiment = Experiment::new(base, cfg)?;
            let outcome = experiment.run()?;
            let paths = write_artifacts(&experiment, &outcome, &out)?;
            println!("threshold h = {}", outcome.threshold);
            for var in &outcome.report.variables {
                match var.first_alarm_t {
                    Some(t) => println!("{}: first alarm at t = {t}", var.name),
                    None => println!("{}: no alarm", var.name),
                }
            }
            for (name, scan) in experiment.base().quant_names().iter().zip(&outcome.baseline) {
                println!(
                    "{name}: rank scan max |U| = {} at k = {} (threshold {}, detected: {})",
                    scan.max_abs(),
                    scan.argmax_k,
                    scan.threshold,
                    scan.detected
                );
            }
            println!(
                "wrote {}, {}, {}, {}, {}",
                paths.model.display(),
                paths.data.display(),
                paths.trajectory.display(),
                paths.events.display(),
                paths.baseline.display()
            );
        }

        Command::Baseline {
            model,
            input,
            alpha,
            monte_carlo,
            seed,
            output,
        } => {
            let m = read_model(&model)?;
            let data = read_data_csv(open_input(&input)?, m.n_cat(), m.n_quant())?;
            let method = match monte_carlo {
                Some(n_runs) => ThresholdMethod::MonteCarlo {
                    n_runs,
                    seed: resolve_seed(seed)?,
                },
                None => ThresholdMethod::Asymptotic,
            };
            let scans = baseline_report(&data, alpha, method)?;
            let mut out = open_output(output.as_deref())?;
            write_baseline_csv(&mut out, m.quant_names(), &scans)?;
            out.flush()?;
            for (name, scan) in m.quant_names().iter().zip(&scans) {
                eprintln!(
                    "{name}: max |U| = {} at k = {} (threshold {}, detected: {})",
                    scan.max_abs(),
                    scan.argmax_k,
                    scan.threshold,
                    scan.detected
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
