//! Command-line front end: composable pipeline stages plus an end-to-end
//! runner. Every failure exits nonzero with the stage it happened in.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use echomap::config::{
    load_config, preset, preset_names, preset_summary, ExperimentConfig, IndicatorKind,
};
use echomap::io;
use echomap::noise::{add_snr_noise, NoiseParams};
use echomap::pipeline;
use echomap::{Error, Result};

#[derive(Parser)]
#[command(
    name = "echomap",
    about = "Synthesize acoustic wave data and reconstruct its initial source",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize clean measured data and write it under the output directory
    Synthesize(RunArgs),
    /// Add SNR-calibrated noise to a time-series file
    AddNoise {
        /// input .ts file
        input: PathBuf,
        /// target signal-to-noise ratio in dB
        #[arg(long)]
        snr: f64,
        /// generator seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// output .ts file
        #[arg(long)]
        out: PathBuf,
    },
    /// Transform a time-series file onto the configured wavenumber band
    Transform {
        /// input .ts file
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// output .sd file
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the source image from a data file
    Reconstruct {
        /// input .ts or .sd file
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// output .grid file
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a reconstruction grid against the exact source
    Evaluate {
        /// reconstruction .grid file
        recon: PathBuf,
        /// reference .grid file; defaults to the config's source raster
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// optional report file; the report always prints to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and write every artifact
    Run(RunArgs),
    /// Inspect the built-in experiment presets
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names with a one-line summary
    List,
}

/// Experiment selection shared by the pipeline subcommands: a config file or
/// a named preset, with field overrides on top.
#[derive(Args)]
struct ConfigArgs {
    /// experiment config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// built-in preset name (see `preset list`)
    #[arg(long)]
    preset: Option<String>,
    /// override the noise level in dB
    #[arg(long)]
    snr: Option<f64>,
    /// override the generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// override the indicator: near_time, near_freq, or far
    #[arg(long)]
    indicator: Option<String>,
}

/// Config selection plus the output-directory override of the directory
/// writing subcommands.
#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = self.config.resolve()?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn parse_indicator(name: &str) -> Result<IndicatorKind> {
    match name {
        "near_time" => Ok(IndicatorKind::NearTime),
        "near_freq" => Ok(IndicatorKind::NearFreq),
        "far" => Ok(IndicatorKind::Far),
        other => Err(Error::Validation {
            field: "indicator".into(),
            msg: format!("unknown indicator `{other}`; use near_time, near_freq, or far"),
        }),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            _ => {
                return Err(Error::Validation {
                    field: "config".into(),
                    msg: "pass exactly one of --config or --preset".into(),
                });
            }
        };
        if let Some(snr) = self.snr {
            cfg.snr_db = Some(snr);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(name) = &self.indicator {
            cfg.indicator = parse_indicator(name)?;
        }
        Ok(cfg)
    }
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::staged(stage, e))
}

fn configure(args: &ConfigArgs) -> Result<ExperimentConfig> {
    staged("configure", args.resolve())
}

/// Reads a data file, telling the two formats apart by their first line.
enum AnyData {
    Time(echomap::forward::TimeSeriesData),
    Spectral(echomap::spectral::SpectralData),
}

fn read_any_data(path: &Path) -> Result<AnyData> {
    let text = std::fs::read_to_string(path)?;
    match text.lines().next() {
        Some("# echomap timeseries") => Ok(AnyData::Time(io::parse_timeseries(&text)?)),
        Some("# echomap spectral") => Ok(AnyData::Spectral(io::parse_spectral(&text)?)),
        _ => Err(Error::Parse {
            line: 1,
            msg: format!("{} is neither a time-series nor a spectral file", path.display()),
        }),
    }
}

fn run_cli(cli: Cli) -> Result<()> {
    match cli.cmd {
        Command::Synthesize(args) => {
            let cfg = staged("configure", args.resolve())?;
            let sets = staged("synthesize", pipeline::synthesize_all(&cfg))?;
            staged("write", std::fs::create_dir_all(&cfg.out_dir).map_err(Error::from))?;
            let many = sets.len() > 1;
            for (i, data) in sets.iter().enumerate() {
                let name = if many { format!("data_g{i}.ts") } else { "data.ts".to_string() };
                let path = cfg.out_dir.join(name);
                staged("write", io::write_timeseries(data, &path))?;
                println!("{}", path.display());
            }
        }
        Command::AddNoise { input, snr, seed, out } => {
            let data = staged("read", io::read_timeseries(&input))?;
            let noisy = add_snr_noise(&data, &NoiseParams { snr_db: snr, seed });
            staged("write", io::write_timeseries(&noisy, &out))?;
            println!("{}", out.display());
        }
        Command::Transform { input, config, out } => {
            let cfg = configure(&config)?;
            let data = staged("read", io::read_timeseries(&input))?;
            let spectrum = staged("transform", pipeline::transform(&cfg, &data))?;
            staged("write", io::write_spectral(&spectrum, &out))?;
            println!("{}", out.display());
        }
        Command::Reconstruct { input, config, out } => {
            let cfg = configure(&config)?;
            let result = match staged("read", read_any_data(&input))? {
                AnyData::Time(data) => {
                    if cfg.indicator == IndicatorKind::NearFreq {
                        return Err(Error::staged(
                            "reconstruct",
                            Error::Validation {
                                field: "indicator".into(),
                                msg: "near_freq needs spectral input; run `echomap transform` first"
                                    .into(),
                            },
                        ));
                    }
                    staged("reconstruct", pipeline::reconstruct_time(&cfg, &data))?
                }
                AnyData::Spectral(data) => {
                    staged("reconstruct", pipeline::reconstruct_spectral(&cfg, &data))?
                }
            };
            staged("write", io::write_grid(&result.grid, &out))?;
            println!("{}", out.display());
        }
        Command::Evaluate { recon, truth, config, out } => {
            let recon_grid = staged("read", io::read_grid(&recon))?;
            let truth_grid = match truth {
                Some(path) => staged("read", io::read_grid(&path))?,
                None => staged("evaluate", pipeline::ground_truth(&configure(&config)?))?,
            };
            let meta = recon.display().to_string();
            let report = staged(
                "evaluate",
                echomap::metrics::error_report(&recon_grid, &truth_grid, &meta),
            )?;
            print!("{}", io::render_error_report(&report));
            if let Some(path) = out {
                staged("write", io::write_error_report(&report, &path))?;
            }
        }
        Command::Run(args) => {
            let cfg = staged("configure", args.resolve())?;
            let outcome = pipeline::run_experiment(&cfg)?;
            for run in &outcome.runs {
                let label = if run.label.is_empty() { "recon" } else { &run.label };
                println!(
                    "{label}: relative_l2 {:.6} max_abs {:.6} peak_offset {} {} {}",
                    run.report.relative_l2,
                    run.report.max_abs,
                    run.report.peak_offset[0],
                    run.report.peak_offset[1],
                    run.report.peak_offset[2],
                );
            }
            println!("artifacts in {}", outcome.out_dir.display());
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for name in preset_names() {
                    println!("{name:8} {}", preset_summary(name));
                }
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run_cli(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
