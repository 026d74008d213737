//! Experiment configuration: named presets, a line-oriented config format,
//! and the resolved-config echo used for reproducibility.
//!
//! The config format is plain text, one `key = value` per line, `#` comments
//! and blank lines ignored. Keys:
//!
//! ```text
//! preset         = near2d | near3d | far2d | far3d   (first line only)
//! dimension      = 2 | 3
//! excitation     = velocity | displacement
//! support_radius = positive real
//! source         = <kind> key=value...               (repeatable)
//! sensors        = <count> <radius>
//! direction_grid = <extent> <n_per_axis>             (repeatable)
//! time           = <t0> <t_end> <steps>
//! wavenumbers    = <k_min> <k_max> <steps>
//! snr_db         = real | none
//! seed           = unsigned integer
//! indicator      = near_time | near_freq | far
//! image_grid     = <lo> <hi> <n> / <lo> <hi> <n> [/ <lo> <hi> <n>]
//! filter_window  = auto | none | odd integer
//! quad           = <n_theta> <n_phi> <n_gauss> <scan>
//! out_dir        = path
//! ```
//!
//! Source kinds: `gaussian amplitude= center=(..) sharpness=`,
//! `polygaussian amplitude= sharpness=`, `ball center=(..) radius= level=`,
//! `star center=(..) base= harmonics=m:b,m:b level=`, and
//! `axicurve axis= level= axial=a0,a1,.. perp=b1,b2,.. [samples=]` whose
//! generating curve is (sum a_m cos(m t), sum b_m sin(m t)) for t in [0, pi],
//! rotated about the given coordinate axis.
//!
//! Starting from a preset, the first `source` or `direction_grid` line
//! replaces the preset's list; further lines append. Scalar keys overwrite.
//! Unknown keys are rejected with their line number.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forward::{Excitation, QuadratureParams, TimeAxis};
use crate::geometry::{make_image_grid, ImageGrid};
use crate::sources::{SourceSpec, SourceTerm};

/// Which indicator family the reconstruction stage uses. With the
/// displacement excitation the same names select the displacement variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorKind {
    NearTime,
    NearFreq,
    Far,
}

impl IndicatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            IndicatorKind::NearTime => "near_time",
            IndicatorKind::NearFreq => "near_freq",
            IndicatorKind::Far => "far",
        }
    }
}

/// One observation-direction grid: n_per_axis^dim points over
/// [-extent, extent]^dim with the origin excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub extent: f64,
    pub n_per_axis: usize,
}

/// Measurement geometry of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum DataGeometry {
    /// near field, 2D: uniformly spaced sensors on a circle
    SensorCircle { count: usize, radius: f64 },
    /// near field, 3D: pseudo-equidistant sensors on a sphere
    SensorSphere { count: usize, radius: f64 },
    /// far field: one or more direction grids, reconstructed independently
    DirectionGrids(Vec<GridParams>),
}

/// Image-grid parameters; `grid()` builds the zero-valued raster.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageParams {
    pub bounds: Vec<[f64; 2]>,
    pub shape: Vec<usize>,
}

impl ImageParams {
    pub fn grid(&self) -> Result<ImageGrid> {
        make_image_grid(self.bounds.len(), &self.bounds, &self.shape)
    }
}

/// Wavenumber sampling of the frequency-domain paths: `steps` midpoint nodes
/// strictly inside (k_min, k_max).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavenumberParams {
    pub k_min: f64,
    pub k_max: f64,
    pub steps: usize,
}

/// Noise filtering before indicator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSetting {
    /// window 5 when the data is noisy at 20 dB or below, otherwise off
    Auto,
    Off,
    Window(usize),
}

/// Config-level source term descriptors. They render back to config lines
/// exactly, which the compiled `SourceSpec` cannot (the axisymmetric curve is
/// sampled during compilation).
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigTerm {
    Gaussian { amplitude: f64, center: Vec<f64>, sharpness: f64 },
    PolyGaussian { amplitude: f64, sharpness: f64 },
    Ball { center: Vec<f64>, radius: f64, level: f64 },
    Star { center: Vec<f64>, base: f64, harmonics: Vec<(u32, f64)>, level: f64 },
    AxiCurve { axis: usize, level: f64, axial: Vec<f64>, perp: Vec<f64>, samples: usize },
}

impl ConfigTerm {
    pub(crate) fn to_source_term(&self, dim: usize) -> Result<SourceTerm> {
        let center3 = |c: &Vec<f64>| -> Result<[f64; 3]> {
            if c.len() != dim {
                return Err(Error::validation(
                    "center",
                    format!("{} components for a {dim}D source", c.len()),
                ));
            }
            let mut p = [0.0; 3];
            p[..c.len()].copy_from_slice(c);
            Ok(p)
        };
        match self {
            ConfigTerm::Gaussian { amplitude, center, sharpness } => Ok(SourceTerm::Gaussian {
                amplitude: *amplitude,
                center: center3(center)?,
                sharpness: *sharpness,
            }),
            ConfigTerm::PolyGaussian { amplitude, sharpness } => {
                Ok(SourceTerm::PolyGaussian { amplitude: *amplitude, sharpness: *sharpness })
            }
            ConfigTerm::Ball { center, radius, level } => Ok(SourceTerm::BallIndicator {
                center: center3(center)?,
                radius: *radius,
                level: *level,
            }),
            ConfigTerm::Star { center, base, harmonics, level } => {
                Ok(SourceTerm::RadialStarIndicator {
                    center: center3(center)?,
                    base: *base,
                    harmonics: harmonics.iter().map(|&(m, b)| (b, m)).collect(),
                    level: *level,
                })
            }
            ConfigTerm::AxiCurve { axis, level, axial, perp, samples } => {
                let n = (*samples).max(3);
                let curve = (0..n)
                    .map(|i| {
                        let t = std::f64::consts::PI * i as f64 / (n - 1) as f64;
                        let a: f64 = axial
                            .iter()
                            .enumerate()
                            .map(|(m, &c)| c * (m as f64 * t).cos())
                            .sum();
                        let p: f64 = perp
                            .iter()
                            .enumerate()
                            .map(|(m, &c)| c * ((m + 1) as f64 * t).sin())
                            .sum();
                        [a, p]
                    })
                    .collect();
                Ok(SourceTerm::AxisymmetricCurveIndicator { curve, axis: *axis, level: *level })
            }
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// preset name, or "custom"
    pub name: String,
    pub dim: usize,
    pub excitation: Excitation,
    pub terms: Vec<ConfigTerm>,
    pub support_radius: f64,
    /// compiled from `terms` and `support_radius`
    pub source: SourceSpec,
    pub geometry: DataGeometry,
    pub time: TimeAxis,
    pub wavenumbers: Option<WavenumberParams>,
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub indicator: IndicatorKind,
    pub image: ImageParams,
    pub filter: FilterSetting,
    pub quad: QuadratureParams,
    pub out_dir: PathBuf,
}

pub fn preset_names() -> &'static [&'static str] {
    &["near2d", "near3d", "far2d", "far3d"]
}

pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "near2d" => "2D near field, smooth two-feature source, frequency indicator, SNR 15 dB",
        "near3d" => "3D near field, peanut-shaped indicator source, time-domain indicator",
        "far2d" => "2D far field, odd Gaussian pair, three direction grids, SNR -1 dB",
        "far3d" => "3D far field, ball plus pear at two levels, SNR -1 dB",
        _ => "",
    }
}

/// The four built-in experiments.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut d = Draft::new();
    d.name = name.to_string();
    match name {
        "near2d" => {
            d.dim = Some(2);
            d.support_radius = Some(1.0);
            d.terms = vec![
                ConfigTerm::Gaussian {
                    amplitude: 1.1,
                    center: vec![0.01, 0.12],
                    sharpness: 30.0,
                },
                ConfigTerm::PolyGaussian { amplitude: -100.0, sharpness: 20.0 },
            ];
            d.geometry = Some(DataGeometry::SensorCircle { count: 80, radius: 1.0 });
            d.time = Some(TimeAxis::new(0.0, 10.0, 1000)?);
            d.wavenumbers = Some(WavenumberParams { k_min: 0.0, k_max: 30.0, steps: 100 });
            d.snr_db = Some(15.0);
            d.indicator = Some(IndicatorKind::NearFreq);
            d.image = Some(ImageParams {
                bounds: vec![[-1.0, 1.0], [-1.0, 1.0]],
                shape: vec![40, 40],
            });
        }
        "near3d" => {
            d.dim = Some(3);
            d.support_radius = Some(1.8);
            d.terms = vec![ConfigTerm::AxiCurve {
                axis: 0,
                level: 1.0,
                axial: vec![-0.2, 1.0, 0.65],
                perp: vec![1.5],
                samples: 2048,
            }];
            d.geometry = Some(DataGeometry::SensorSphere { count: 200, radius: 3.0 });
            d.time = Some(TimeAxis::new(0.0, 6.0, 150)?);
            d.wavenumbers = Some(WavenumberParams { k_min: 0.0, k_max: 30.0, steps: 100 });
            d.snr_db = Some(100.0);
            d.indicator = Some(IndicatorKind::NearTime);
            d.image = Some(ImageParams {
                bounds: vec![[-1.6, 1.6], [-1.6, 1.6], [-1.6, 1.6]],
                shape: vec![48, 48, 48],
            });
        }
        "far2d" => {
            d.dim = Some(2);
            d.support_radius = Some(1.0);
            d.terms = vec![
                ConfigTerm::Gaussian { amplitude: 0.5, center: vec![0.0, 0.2], sharpness: 20.0 },
                ConfigTerm::Gaussian { amplitude: -0.5, center: vec![0.0, -0.2], sharpness: 20.0 },
            ];
            d.geometry = Some(DataGeometry::DirectionGrids(vec![
                GridParams { extent: 8.0, n_per_axis: 40 },
                GridParams { extent: 10.0, n_per_axis: 60 },
                GridParams { extent: 15.0, n_per_axis: 80 },
            ]));
            d.time = Some(TimeAxis::new(-3.0, 18.0, 350)?);
            d.snr_db = Some(-1.0);
            d.indicator = Some(IndicatorKind::Far);
            d.image = Some(ImageParams {
                bounds: vec![[-1.0, 1.0], [-1.0, 1.0]],
                shape: vec![40, 40],
            });
        }
        "far3d" => {
            d.dim = Some(3);
            d.support_radius = Some(1.1);
            d.terms = vec![
                ConfigTerm::Ball { center: vec![-0.4, -0.4, -0.4], radius: 0.4, level: 1.0 },
                ConfigTerm::Star {
                    center: vec![0.0, 0.0, 0.2],
                    base: 0.4,
                    harmonics: vec![(3, 0.12)],
                    level: 0.5,
                },
            ];
            d.geometry = Some(DataGeometry::DirectionGrids(vec![GridParams {
                extent: 20.0,
                n_per_axis: 40,
            }]));
            d.time = Some(TimeAxis::new(-1.2, 1.2, 60)?);
            d.snr_db = Some(-1.0);
            d.indicator = Some(IndicatorKind::Far);
            d.image = Some(ImageParams {
                bounds: vec![[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
                shape: vec![60, 60, 60],
            });
        }
        _ => {
            return Err(Error::validation(
                "preset",
                format!("unknown preset `{name}`; available: {}", preset_names().join(", ")),
            ));
        }
    }
    d.out_dir = Some(PathBuf::from(format!("out/{name}")));
    d.finalize()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses the documented config format. Public entry point for untrusted
/// text; never panics on malformed input.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut draft: Option<Draft> = None;
    let mut saw_any_key = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if key == "preset" {
            if saw_any_key {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "`preset` must be the first key in the file".into(),
                });
            }
            let base = preset(value).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            })?;
            draft = Some(Draft::from_config(base));
            saw_any_key = true;
            continue;
        }
        saw_any_key = true;
        draft
            .get_or_insert_with(Draft::new)
            .apply(key, value, line_no)?;
    }
    draft
        .ok_or_else(|| Error::Parse { line: 1, msg: "empty configuration".into() })?
        .finalize()
}

/// Renders a config so that parsing the output reproduces it; used to echo
/// the resolved experiment next to its artifacts.
pub fn render_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    s.push_str(&format!("# resolved experiment: {}\n", cfg.name));
    s.push_str(&format!("dimension = {}\n", cfg.dim));
    s.push_str(&format!("excitation = {}\n", cfg.excitation));
    s.push_str(&format!("support_radius = {}\n", cfg.support_radius));
    for t in &cfg.terms {
        s.push_str(&format!("source = {}\n", render_term(t)));
    }
    match &cfg.geometry {
        DataGeometry::SensorCircle { count, radius }
        | DataGeometry::SensorSphere { count, radius } => {
            s.push_str(&format!("sensors = {count} {radius}\n"));
        }
        DataGeometry::DirectionGrids(grids) => {
            for g in grids {
                s.push_str(&format!("direction_grid = {} {}\n", g.extent, g.n_per_axis));
            }
        }
    }
    s.push_str(&format!(
        "time = {} {} {}\n",
        cfg.time.t0,
        cfg.time.t_end(),
        cfg.time.n - 1
    ));
    if let Some(w) = &cfg.wavenumbers {
        s.push_str(&format!("wavenumbers = {} {} {}\n", w.k_min, w.k_max, w.steps));
    }
    match cfg.snr_db {
        Some(snr) => s.push_str(&format!("snr_db = {snr}\n")),
        None => s.push_str("snr_db = none\n"),
    }
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("indicator = {}\n", cfg.indicator.name()));
    let axes: Vec<String> = cfg
        .image
        .bounds
        .iter()
        .zip(&cfg.image.shape)
        .map(|(b, n)| format!("{} {} {n}", b[0], b[1]))
        .collect();
    s.push_str(&format!("image_grid = {}\n", axes.join(" / ")));
    match cfg.filter {
        FilterSetting::Auto => s.push_str("filter_window = auto\n"),
        FilterSetting::Off => s.push_str("filter_window = none\n"),
        FilterSetting::Window(w) => s.push_str(&format!("filter_window = {w}\n")),
    }
    s.push_str(&format!(
        "quad = {} {} {} {}\n",
        cfg.quad.n_theta, cfg.quad.n_phi, cfg.quad.n_gauss, cfg.quad.scan
    ));
    s.push_str(&format!("out_dir = {}\n", cfg.out_dir.display()));
    s
}

fn render_term(t: &ConfigTerm) -> String {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    match t {
        ConfigTerm::Gaussian { amplitude, center, sharpness } => format!(
            "gaussian amplitude={amplitude} center=({}) sharpness={sharpness}",
            list(center)
        ),
        ConfigTerm::PolyGaussian { amplitude, sharpness } => {
            format!("polygaussian amplitude={amplitude} sharpness={sharpness}")
        }
        ConfigTerm::Ball { center, radius, level } => {
            format!("ball center=({}) radius={radius} level={level}", list(center))
        }
        ConfigTerm::Star { center, base, harmonics, level } => {
            let h = harmonics
                .iter()
                .map(|(m, b)| format!("{m}:{b}"))
                .collect::<Vec<_>>()
                .join(",");
            format!("star center=({}) base={base} harmonics={h} level={level}", list(center))
        }
        ConfigTerm::AxiCurve { axis, level, axial, perp, samples } => format!(
            "axicurve axis={axis} level={level} axial={} perp={} samples={samples}",
            list(axial),
            list(perp)
        ),
    }
}

// ---------------------------------------------------------------------------
// parsing internals

struct Draft {
    name: String,
    dim: Option<usize>,
    excitation: Excitation,
    support_radius: Option<f64>,
    terms: Vec<ConfigTerm>,
    geometry: Option<DataGeometry>,
    time: Option<TimeAxis>,
    wavenumbers: Option<WavenumberParams>,
    snr_db: Option<f64>,
    seed: u64,
    indicator: Option<IndicatorKind>,
    image: Option<ImageParams>,
    filter: FilterSetting,
    quad: QuadratureParams,
    out_dir: Option<PathBuf>,
    /// true until the first `source` line of this file, which replaces any
    /// preset terms instead of appending
    terms_pristine: bool,
    grids_pristine: bool,
}

impl Draft {
    fn new() -> Draft {
        Draft {
            name: "custom".into(),
            dim: None,
            excitation: Excitation::Velocity,
            support_radius: None,
            terms: Vec::new(),
            geometry: None,
            time: None,
            wavenumbers: None,
            snr_db: None,
            seed: 1,
            indicator: None,
            image: None,
            filter: FilterSetting::Auto,
            quad: QuadratureParams::default(),
            out_dir: None,
            terms_pristine: true,
            grids_pristine: true,
        }
    }

    fn from_config(cfg: ExperimentConfig) -> Draft {
        Draft {
            name: cfg.name,
            dim: Some(cfg.dim),
            excitation: cfg.excitation,
            support_radius: Some(cfg.support_radius),
            terms: cfg.terms,
            geometry: Some(cfg.geometry),
            time: Some(cfg.time),
            wavenumbers: cfg.wavenumbers,
            snr_db: cfg.snr_db,
            seed: cfg.seed,
            indicator: Some(cfg.indicator),
            image: Some(cfg.image),
            filter: cfg.filter,
            quad: cfg.quad,
            out_dir: Some(cfg.out_dir),
            terms_pristine: true,
            grids_pristine: true,
        }
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let perr = |msg: String| Error::Parse { line, msg };
        match key {
            "dimension" => {
                let d = parse_usize(value, line, "dimension")?;
                if d != 2 && d != 3 {
                    return Err(perr(format!("dimension must be 2 or 3, got {d}")));
                }
                self.dim = Some(d);
            }
            "excitation" => {
                self.excitation = match value {
                    "velocity" => Excitation::Velocity,
                    "displacement" => Excitation::Displacement,
                    other => return Err(perr(format!("unknown excitation `{other}`"))),
                };
            }
            "support_radius" => self.support_radius = Some(parse_f64(value, line, key)?),
            "source" => {
                if self.terms_pristine {
                    self.terms.clear();
                    self.terms_pristine = false;
                }
                self.terms.push(parse_term(value, line)?);
            }
            "sensors" => {
                let parts = split_numbers(value, line, 2)?;
                let count = parts[0] as usize;
                if parts[0].fract() != 0.0 || count == 0 {
                    return Err(perr("sensor count must be a positive integer".into()));
                }
                // circle or sphere is decided by the dimension at finalize
                self.geometry = Some(DataGeometry::SensorCircle { count, radius: parts[1] });
            }
            "direction_grid" => {
                let parts = split_numbers(value, line, 2)?;
                let n = parts[1] as usize;
                if parts[1].fract() != 0.0 || n < 2 {
                    return Err(perr("grid point count must be an integer >= 2".into()));
                }
                let g = GridParams { extent: parts[0], n_per_axis: n };
                match &mut self.geometry {
                    Some(DataGeometry::DirectionGrids(v)) if !self.grids_pristine => v.push(g),
                    _ => {
                        self.geometry = Some(DataGeometry::DirectionGrids(vec![g]));
                        self.grids_pristine = false;
                    }
                }
            }
            "time" => {
                let parts = split_numbers(value, line, 3)?;
                let steps = parts[2] as usize;
                if parts[2].fract() != 0.0 || steps == 0 {
                    return Err(perr("time steps must be a positive integer".into()));
                }
                self.time =
                    Some(TimeAxis::new(parts[0], parts[1], steps).map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })?);
            }
            "wavenumbers" => {
                let parts = split_numbers(value, line, 3)?;
                let steps = parts[2] as usize;
                if parts[2].fract() != 0.0 || steps == 0 {
                    return Err(perr("wavenumber steps must be a positive integer".into()));
                }
                self.wavenumbers =
                    Some(WavenumberParams { k_min: parts[0], k_max: parts[1], steps });
            }
            "snr_db" => {
                self.snr_db = if value == "none" {
                    None
                } else {
                    Some(parse_f64(value, line, key)?)
                };
            }
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| perr(format!("seed must be an unsigned integer, got `{value}`")))?;
            }
            "indicator" => {
                self.indicator = Some(match value {
                    "near_time" => IndicatorKind::NearTime,
                    "near_freq" => IndicatorKind::NearFreq,
                    "far" => IndicatorKind::Far,
                    other => return Err(perr(format!("unknown indicator `{other}`"))),
                });
            }
            "image_grid" => {
                let mut bounds = Vec::new();
                let mut shape = Vec::new();
                for part in value.split('/') {
                    let nums = split_numbers(part.trim(), line, 3)?;
                    let n = nums[2] as usize;
                    if nums[2].fract() != 0.0 || n < 2 {
                        return Err(perr("image grid axis count must be an integer >= 2".into()));
                    }
                    bounds.push([nums[0], nums[1]]);
                    shape.push(n);
                }
                self.image = Some(ImageParams { bounds, shape });
            }
            "filter_window" => {
                self.filter = match value {
                    "auto" => FilterSetting::Auto,
                    "none" => FilterSetting::Off,
                    _ => {
                        let w = parse_usize(value, line, key)?;
                        if w < 2 {
                            return Err(perr("filter window must be at least 2".into()));
                        }
                        FilterSetting::Window(w)
                    }
                };
            }
            "quad" => {
                let parts = split_numbers(value, line, 4)?;
                let sizes: Vec<usize> = parts.iter().map(|&x| x as usize).collect();
                if parts.iter().any(|x| x.fract() != 0.0) || sizes.iter().any(|&s| s < 4) {
                    return Err(perr("quadrature sizes must be integers >= 4".into()));
                }
                self.quad = QuadratureParams {
                    n_theta: sizes[0],
                    n_phi: sizes[1],
                    n_gauss: sizes[2],
                    scan: sizes[3],
                };
            }
            "out_dir" => {
                if value.is_empty() {
                    return Err(perr("out_dir must not be empty".into()));
                }
                self.out_dir = Some(PathBuf::from(value));
            }
            other => return Err(perr(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    fn finalize(self) -> Result<ExperimentConfig> {
        let need = |name: &str| Error::validation(name, "required but not set");
        let dim = self.dim.ok_or_else(|| need("dimension"))?;
        let support_radius = self.support_radius.ok_or_else(|| need("support_radius"))?;
        if self.terms.is_empty() {
            return Err(need("source"));
        }
        let time = self.time.ok_or_else(|| need("time"))?;
        let indicator = self.indicator.ok_or_else(|| need("indicator"))?;
        let image = self.image.ok_or_else(|| need("image_grid"))?;
        let mut geometry = self.geometry.ok_or_else(|| need("sensors/direction_grid"))?;
        // sensors parse as circles; lift to the sphere in 3D
        if let DataGeometry::SensorCircle { count, radius } = geometry {
            if !(radius > 0.0) {
                return Err(Error::validation("sensors", "radius must be positive"));
            }
            if dim == 3 {
                geometry = DataGeometry::SensorSphere { count, radius };
            }
        }
        if let DataGeometry::DirectionGrids(grids) = &geometry {
            if grids.is_empty() {
                return Err(need("direction_grid"));
            }
            if let Some(g) = grids.iter().find(|g| !(g.extent > 0.0)) {
                return Err(Error::validation(
                    "direction_grid",
                    format!("extent must be positive, got {}", g.extent),
                ));
            }
        }
        match indicator {
            IndicatorKind::Far => {
                if !matches!(geometry, DataGeometry::DirectionGrids(_)) {
                    return Err(Error::validation(
                        "indicator",
                        "the far indicator needs direction_grid geometry",
                    ));
                }
            }
            IndicatorKind::NearTime | IndicatorKind::NearFreq => {
                if matches!(geometry, DataGeometry::DirectionGrids(_)) {
                    return Err(Error::validation(
                        "indicator",
                        "near indicators need sensor geometry",
                    ));
                }
            }
        }
        if indicator == IndicatorKind::NearFreq && self.wavenumbers.is_none() {
            return Err(Error::validation(
                "wavenumbers",
                "the frequency-domain indicator needs a wavenumber axis",
            ));
        }
        if let Some(w) = &self.wavenumbers {
            if !(w.k_min >= 0.0) || !(w.k_max > w.k_min) {
                return Err(Error::validation(
                    "wavenumbers",
                    "need 0 <= k_min < k_max",
                ));
            }
        }
        if self.excitation == Excitation::Displacement && dim != 3 {
            return Err(Error::validation(
                "excitation",
                "the displacement excitation is implemented for 3D experiments",
            ));
        }
        if image.bounds.len() != dim {
            return Err(Error::validation(
                "image_grid",
                format!("{} axes for a {dim}D experiment", image.bounds.len()),
            ));
        }
        image.grid()?;
        let source_terms = self
            .terms
            .iter()
            .map(|t| t.to_source_term(dim))
            .collect::<Result<Vec<_>>>()?;
        let source = SourceSpec::new(dim, source_terms, support_radius)?;
        let out_dir = self
            .out_dir
            .unwrap_or_else(|| PathBuf::from(format!("out/{}", self.name)));
        Ok(ExperimentConfig {
            name: self.name,
            dim,
            excitation: self.excitation,
            terms: self.terms,
            support_radius,
            source,
            geometry,
            time,
            wavenumbers: self.wavenumbers,
            snr_db: self.snr_db,
            seed: self.seed,
            indicator,
            image,
            filter: self.filter,
            quad: self.quad,
            out_dir,
        })
    }
}

fn parse_f64(s: &str, line: usize, field: &str) -> Result<f64> {
    let v = s
        .parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("`{field}` expects a number, got `{s}`") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("`{field}` must be finite") });
    }
    Ok(v)
}

fn parse_usize(s: &str, line: usize, field: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Parse { line, msg: format!("`{field}` expects an integer, got `{s}`") })
}

fn split_numbers(s: &str, line: usize, want: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != want {
        return Err(Error::Parse {
            line,
            msg: format!("expected {want} numbers, got {}", parts.len()),
        });
    }
    parts.iter().map(|p| parse_f64(p, line, "value")).collect()
}

fn parse_number_list(s: &str, line: usize, field: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Err(Error::Parse { line, msg: format!("`{field}` must not be empty") });
    }
    s.split(',').map(|p| parse_f64(p.trim(), line, field)).collect()
}

fn parse_term(value: &str, line: usize) -> Result<ConfigTerm> {
    let perr = |msg: String| Error::Parse { line, msg };
    let mut tokens = value.split_whitespace();
    let kind = tokens.next().ok_or_else(|| perr("empty source line".into()))?;
    let mut args: Vec<(&str, &str)> = Vec::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| perr(format!("source argument `{tok}` is not key=value")))?;
        args.push((k, v));
    }
    let take = |name: &str| -> Result<&str> {
        args.iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| perr(format!("source kind `{kind}` needs `{name}=`")))
    };
    let take_opt = |name: &str| args.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
    let known = |allowed: &[&str]| -> Result<()> {
        for (k, _) in &args {
            if !allowed.contains(k) {
                return Err(perr(format!("unknown source argument `{k}` for kind `{kind}`")));
            }
        }
        Ok(())
    };
    let center = |v: &str| -> Result<Vec<f64>> {
        let inner = v
            .strip_prefix('(')
            .and_then(|x| x.strip_suffix(')'))
            .ok_or_else(|| perr(format!("center `{v}` must look like (a,b) or (a,b,c)")))?;
        parse_number_list(inner, line, "center")
    };
    match kind {
        "gaussian" => {
            known(&["amplitude", "center", "sharpness"])?;
            Ok(ConfigTerm::Gaussian {
                amplitude: parse_f64(take("amplitude")?, line, "amplitude")?,
                center: center(take("center")?)?,
                sharpness: parse_f64(take("sharpness")?, line, "sharpness")?,
            })
        }
        "polygaussian" => {
            known(&["amplitude", "sharpness"])?;
            Ok(ConfigTerm::PolyGaussian {
                amplitude: parse_f64(take("amplitude")?, line, "amplitude")?,
                sharpness: parse_f64(take("sharpness")?, line, "sharpness")?,
            })
        }
        "ball" => {
            known(&["center", "radius", "level"])?;
            Ok(ConfigTerm::Ball {
                center: center(take("center")?)?,
                radius: parse_f64(take("radius")?, line, "radius")?,
                level: parse_f64(take("level")?, line, "level")?,
            })
        }
        "star" => {
            known(&["center", "base", "harmonics", "level"])?;
            let mut harmonics = Vec::new();
            for item in take("harmonics")?.split(',') {
                let (m, b) = item
                    .split_once(':')
                    .ok_or_else(|| perr(format!("harmonic `{item}` must look like m:b")))?;
                let m = m.parse::<u32>().map_err(|_| {
                    perr(format!("harmonic order `{m}` must be an unsigned integer"))
                })?;
                harmonics.push((m, parse_f64(b, line, "harmonics")?));
            }
            Ok(ConfigTerm::Star {
                center: center(take("center")?)?,
                base: parse_f64(take("base")?, line, "base")?,
                harmonics,
                level: parse_f64(take("level")?, line, "level")?,
            })
        }
        "axicurve" => {
            known(&["axis", "level", "axial", "perp", "samples"])?;
            let samples = match take_opt("samples") {
                Some(v) => parse_usize(v, line, "samples")?,
                None => 2048,
            };
            if samples < 3 {
                return Err(perr("axicurve needs at least 3 samples".into()));
            }
            Ok(ConfigTerm::AxiCurve {
                axis: parse_usize(take("axis")?, line, "axis")?,
                level: parse_f64(take("level")?, line, "level")?,
                axial: parse_number_list(take("axial")?, line, "axial")?,
                perp: parse_number_list(take("perp")?, line, "perp")?,
                samples,
            })
        }
        other => Err(perr(format!("unknown source kind `{other}`"))),
    }
}
