//! End-to-end experiments: synthesis, noise, reconstruction, evaluation,
//! artifact emission.
//!
//! Every stage is deterministic given the config and seed, so a rerun
//! produces bitwise-identical grids. Errors carry the stage they surfaced
//! in.

use std::fs;
use std::path::PathBuf;

use crate::config::{render_config, DataGeometry, ExperimentConfig, FilterSetting, IndicatorKind};
use crate::error::{Error, Result};
use crate::forward::{
    far_field_2d, far_field_3d, far_field_displacement_3d, near_field_2d, near_field_3d,
    near_field_displacement_3d, Excitation, TimeSeriesData,
};
use crate::geometry::{make_circle_array, make_direction_grid, make_sphere_array, ImageGrid};
use crate::indicators::{
    indicator_disp_far, indicator_disp_near_freq, indicator_far, indicator_near_freq,
    indicator_near_time_3d, indicator_near_time_disp_3d, FilterParams, ReconstructionResult,
};
use crate::metrics::{error_report, ErrorReport};
use crate::noise::{add_snr_noise, NoiseParams};
use crate::sources::rasterize;
use crate::spectral::{time_to_freq, SpectralData, WavenumberAxis};

/// One reconstruction of an experiment; far runs carry a `g<i>` label per
/// direction grid, single-geometry runs an empty label.
#[derive(Debug)]
pub struct RunOutput {
    pub label: String,
    pub result: ReconstructionResult,
    pub report: ErrorReport,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub truth: ImageGrid,
    pub runs: Vec<RunOutput>,
    pub out_dir: PathBuf,
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::staged(stage, e))
}

/// Synthesizes clean data, one set per configured geometry (the far presets
/// may carry several direction grids).
pub fn synthesize_all(cfg: &ExperimentConfig) -> Result<Vec<TimeSeriesData>> {
    let sets = match &cfg.geometry {
        DataGeometry::SensorCircle { count, radius } => {
            let sensors = make_circle_array(*count, *radius)?;
            match cfg.excitation {
                Excitation::Velocity => vec![near_field_2d(&cfg.source, &sensors, &cfg.time, &cfg.quad)?],
                Excitation::Displacement => {
                    return Err(Error::validation(
                        "excitation",
                        "displacement synthesis is only available in 3D",
                    ));
                }
            }
        }
        DataGeometry::SensorSphere { count, radius } => {
            let sensors = make_sphere_array(*count, *radius)?;
            let data = match cfg.excitation {
                Excitation::Velocity => near_field_3d(&cfg.source, &sensors, &cfg.time, &cfg.quad)?,
                Excitation::Displacement => {
                    near_field_displacement_3d(&cfg.source, &sensors, &cfg.time, &cfg.quad)?
                }
            };
            vec![data]
        }
        DataGeometry::DirectionGrids(grids) => {
            let mut sets = Vec::with_capacity(grids.len());
            for params in grids {
                let grid = make_direction_grid(cfg.dim, params.extent, params.n_per_axis)?;
                let data = match (cfg.dim, cfg.excitation) {
                    (3, Excitation::Velocity) => {
                        far_field_3d(&cfg.source, &grid, &cfg.time, &cfg.quad)?
                    }
                    (3, Excitation::Displacement) => {
                        far_field_displacement_3d(&cfg.source, &grid, &cfg.time, &cfg.quad)?
                    }
                    (2, Excitation::Velocity) => {
                        far_field_2d(&cfg.source, &grid, &cfg.time, &cfg.quad)?
                    }
                    _ => {
                        return Err(Error::validation(
                            "excitation",
                            "displacement synthesis is only available in 3D",
                        ));
                    }
                };
                sets.push(data);
            }
            sets
        }
    };
    Ok(sets)
}

/// Adds calibrated noise when the config carries an SNR; a clean run passes
/// through untouched.
pub fn apply_noise(cfg: &ExperimentConfig, data: TimeSeriesData) -> TimeSeriesData {
    match cfg.snr_db {
        Some(snr_db) => add_snr_noise(&data, &NoiseParams { snr_db, seed: cfg.seed }),
        None => data,
    }
}

/// Time-to-frequency transform on the configured wavenumber band.
pub fn transform(cfg: &ExperimentConfig, data: &TimeSeriesData) -> Result<SpectralData> {
    let params = cfg.wavenumbers.as_ref().ok_or_else(|| {
        Error::validation("wavenumbers", "the frequency indicator needs a wavenumber band")
    })?;
    let k_axis = WavenumberAxis::new(params.k_min, params.k_max, params.steps)?;
    time_to_freq(data, &k_axis)
}

fn resolved_filter(cfg: &ExperimentConfig, snr_db: Option<f64>) -> Result<FilterParams> {
    match cfg.filter {
        FilterSetting::Auto => Ok(FilterParams::auto(snr_db)),
        FilterSetting::Off => Ok(FilterParams::none()),
        FilterSetting::Window(w) => FilterParams::new(w),
    }
}

/// Reconstruction from time-domain data (retarded-time and far indicators).
pub fn reconstruct_time(
    cfg: &ExperimentConfig,
    data: &TimeSeriesData,
) -> Result<ReconstructionResult> {
    let grid = cfg.image.grid()?;
    match (cfg.indicator, cfg.excitation) {
        (IndicatorKind::NearTime, Excitation::Velocity) => {
            let filter = resolved_filter(cfg, data.snr_db)?;
            indicator_near_time_3d(data, &grid, &filter)
        }
        (IndicatorKind::NearTime, Excitation::Displacement) => {
            let filter = resolved_filter(cfg, data.snr_db)?;
            indicator_near_time_disp_3d(data, &grid, &filter)
        }
        (IndicatorKind::Far, Excitation::Velocity) => indicator_far(data, &grid, cfg.dim),
        (IndicatorKind::Far, Excitation::Displacement) => indicator_disp_far(data, &grid),
        (IndicatorKind::NearFreq, _) => Err(Error::validation(
            "indicator",
            "near_freq reconstructs from transformed data, not time data",
        )),
    }
}

/// Reconstruction from frequency data (the near-field frequency indicator).
pub fn reconstruct_spectral(
    cfg: &ExperimentConfig,
    data: &SpectralData,
) -> Result<ReconstructionResult> {
    let grid = cfg.image.grid()?;
    match (cfg.indicator, cfg.excitation) {
        (IndicatorKind::NearFreq, Excitation::Velocity) => {
            indicator_near_freq(data, &grid, cfg.dim)
        }
        (IndicatorKind::NearFreq, Excitation::Displacement) => {
            indicator_disp_near_freq(data, &grid)
        }
        _ => Err(Error::validation(
            "indicator",
            format!("{} reconstructs from time data, not a spectrum", cfg.indicator.name()),
        )),
    }
}

/// The exact source rastered onto the configured image grid.
pub fn ground_truth(cfg: &ExperimentConfig) -> Result<ImageGrid> {
    rasterize(&cfg.source, &cfg.image.grid()?)
}

fn run_meta(cfg: &ExperimentConfig, label: &str) -> String {
    let mut meta = format!("{} {}", cfg.name, cfg.indicator.name());
    if !label.is_empty() {
        meta.push_str(&format!(" {label}"));
    }
    match cfg.snr_db {
        Some(snr) => meta.push_str(&format!(" snr {snr}")),
        None => meta.push_str(" clean"),
    }
    meta.push_str(&format!(" seed {}", cfg.seed));
    meta
}

fn artifact(base: &str, label: &str, ext: &str) -> String {
    if label.is_empty() {
        format!("{base}.{ext}")
    } else {
        format!("{base}_{label}.{ext}")
    }
}

/// Middle slice of the last axis for 3D grids; 2D grids render whole.
fn heatmap_slice(grid: &ImageGrid) -> Option<(usize, usize)> {
    (grid.dim == 3).then(|| (2, grid.shape[2] / 2))
}

/// Runs the full pipeline and writes every artifact under the config's
/// output directory: the resolved config, the ground-truth raster and its
/// heatmap, and per geometry the measured data, the spectrum when the
/// indicator works in frequency, the reconstruction grid, its heatmap, and
/// an error report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let out_dir = cfg.out_dir.clone();
    staged("write", fs::create_dir_all(&out_dir).map_err(Error::from))?;
    staged("write", fs::write(out_dir.join("config.txt"), render_config(cfg)).map_err(Error::from))?;

    let truth = staged("evaluate", ground_truth(cfg))?;
    staged("write", crate::io::write_grid(&truth, &out_dir.join("truth.grid")))?;
    staged(
        "write",
        crate::io::write_heatmap(&truth, &out_dir.join("truth.pgm"), heatmap_slice(&truth)),
    )?;

    let clean_sets = staged("synthesize", synthesize_all(cfg))?;
    let many = clean_sets.len() > 1;

    let mut runs = Vec::with_capacity(clean_sets.len());
    for (i, clean) in clean_sets.into_iter().enumerate() {
        let label = if many { format!("g{i}") } else { String::new() };
        let data = apply_noise(cfg, clean);
        staged(
            "write",
            crate::io::write_timeseries(&data, &out_dir.join(artifact("data", &label, "ts"))),
        )?;

        let result = if cfg.indicator == IndicatorKind::NearFreq {
            let spectrum = staged("transform", transform(cfg, &data))?;
            staged(
                "write",
                crate::io::write_spectral(
                    &spectrum,
                    &out_dir.join(artifact("data", &label, "sd")),
                ),
            )?;
            staged("reconstruct", reconstruct_spectral(cfg, &spectrum))?
        } else {
            staged("reconstruct", reconstruct_time(cfg, &data))?
        };

        staged(
            "write",
            crate::io::write_grid(&result.grid, &out_dir.join(artifact("recon", &label, "grid"))),
        )?;
        staged(
            "write",
            crate::io::write_heatmap(
                &result.grid,
                &out_dir.join(artifact("recon", &label, "pgm")),
                heatmap_slice(&result.grid),
            ),
        )?;

        let report =
            staged("evaluate", error_report(&result.grid, &truth, &run_meta(cfg, &label)))?;
        staged(
            "write",
            crate::io::write_error_report(
                &report,
                &out_dir.join(artifact("report", &label, "txt")),
            ),
        )?;

        runs.push(RunOutput { label, result, report });
    }

    Ok(ExperimentOutcome { truth, runs, out_dir })
}
