//! Text serialization of grids and measured data, plus graymap emission.
//!
//! All formats are line-oriented: `#` header lines carry structure, data
//! lines carry full-precision doubles that round-trip bitwise. Parsers are
//! strict — unknown header keys, trailing values, and non-finite numbers are
//! rejected — and they cap sizes before allocating, so arbitrary input
//! cannot force runaway memory.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::forward::{ChannelMeta, Excitation, TimeAxis, TimeSeriesData};
use crate::geometry::{make_direction_grid, make_image_grid, ImageGrid, SensorArray};
use crate::metrics::ErrorReport;
use crate::spectral::{SpectralData, WavenumberAxis};

/// Hard ceiling on total nodes or samples a file may declare.
const MAX_TOTAL: usize = 100_000_000;
/// Hard ceiling on declared channels or sensor points.
const MAX_CHANNELS: usize = 1_000_000;
/// Hard ceiling on direction-grid nodes per axis.
const MAX_PER_AXIS: usize = 1024;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Finite double at a 1-based source line.
fn num(tok: &str, line: usize) -> Result<f64> {
    let v: f64 =
        tok.parse().map_err(|_| parse_err(line, format!("expected a number, got {tok:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {tok:?}")));
    }
    Ok(v)
}

fn count(tok: &str, line: usize, cap: usize, what: &str) -> Result<usize> {
    let v: usize =
        tok.parse().map_err(|_| parse_err(line, format!("expected a count, got {tok:?}")))?;
    if v > cap {
        return Err(parse_err(line, format!("{what} {v} exceeds the format cap {cap}")));
    }
    Ok(v)
}

/// Header line split into key and value tokens; None for a data line.
fn header_tokens(raw: &str) -> Option<Vec<&str>> {
    let rest = raw.strip_prefix('#')?;
    Some(rest.split_whitespace().collect())
}

// ---------------------------------------------------------------- grids

/// Renders an image grid to the text format: `#` headers with the dimension
/// and per-axis bounds and counts, then one value per line, row-major with
/// the last axis fastest.
pub fn render_grid(grid: &ImageGrid) -> String {
    let mut out = String::new();
    out.push_str("# echomap grid\n");
    out.push_str(&format!("# dim {}\n", grid.dim));
    for a in 0..grid.dim {
        out.push_str(&format!(
            "# axis {a} {} {} {}\n",
            grid.bounds[a][0], grid.bounds[a][1], grid.shape[a]
        ));
    }
    for v in &grid.values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn write_grid(grid: &ImageGrid, path: &Path) -> Result<()> {
    fs::write(path, render_grid(grid))?;
    Ok(())
}

/// Parses the grid text format; the inverse of [`render_grid`].
pub fn parse_grid(text: &str) -> Result<ImageGrid> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    if header_tokens(magic).as_deref() != Some(&["echomap", "grid"]) {
        return Err(parse_err(1, "expected the header line '# echomap grid'"));
    }

    let mut dim: Option<usize> = None;
    let mut bounds: Vec<[f64; 2]> = Vec::new();
    let mut shape: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut expected: Option<usize> = None;

    for (i, raw) in lines {
        let line = i + 1;
        if let Some(toks) = header_tokens(raw) {
            match toks.as_slice() {
                ["dim", d] => {
                    if dim.is_some() {
                        return Err(parse_err(line, "duplicate dim header"));
                    }
                    let d = count(d, line, 3, "dimension")?;
                    if d != 2 && d != 3 {
                        return Err(parse_err(line, format!("dimension must be 2 or 3, got {d}")));
                    }
                    dim = Some(d);
                }
                ["axis", idx, lo, hi, n] => {
                    let d = dim.ok_or_else(|| parse_err(line, "axis before dim"))?;
                    let idx = count(idx, line, 3, "axis index")?;
                    if idx != bounds.len() || idx >= d {
                        return Err(parse_err(line, format!("unexpected axis index {idx}")));
                    }
                    bounds.push([num(lo, line)?, num(hi, line)?]);
                    shape.push(count(n, line, MAX_TOTAL, "axis node count")?);
                    if bounds.len() == d {
                        let total = shape
                            .iter()
                            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
                            .filter(|&t| t <= MAX_TOTAL)
                            .ok_or_else(|| parse_err(line, "grid is too large"))?;
                        expected = Some(total);
                        values.reserve_exact(total);
                    }
                }
                _ => return Err(parse_err(line, format!("unknown header {raw:?}"))),
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let expected =
            expected.ok_or_else(|| parse_err(line, "value line before the axis headers"))?;
        if values.len() >= expected {
            return Err(parse_err(line, format!("more than {expected} values")));
        }
        values.push(num(raw.trim(), line)?);
    }

    let dim = dim.ok_or_else(|| parse_err(1, "missing dim header"))?;
    let expected = expected.ok_or_else(|| parse_err(1, "missing axis headers"))?;
    if values.len() != expected {
        return Err(parse_err(
            0,
            format!("value count mismatch: grid declares {expected}, file has {}", values.len()),
        ));
    }
    make_image_grid(dim, &bounds, &shape)?.with_values(values)
}

pub fn read_grid(path: &Path) -> Result<ImageGrid> {
    parse_grid(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- meta

fn render_meta(meta: &ChannelMeta, out: &mut String) {
    match meta {
        ChannelMeta::Sensors(s) => {
            out.push_str(&format!(
                "# sensors {} {} {}\n",
                s.points.len(),
                s.radius,
                s.weight
            ));
            for (p, n) in s.points.iter().zip(&s.normals) {
                out.push_str(&format!(
                    "# p {} {} {} {} {} {}\n",
                    p[0], p[1], p[2], n[0], n[1], n[2]
                ));
            }
        }
        ChannelMeta::Directions(dirs) => {
            out.push_str(&format!("# directions {}\n", dirs.len()));
            for d in dirs {
                out.push_str(&format!("# p {} {} {}\n", d[0], d[1], d[2]));
            }
        }
        ChannelMeta::Grid(g) => {
            out.push_str(&format!("# dgrid {} {} {}\n", g.dim, g.extent, g.n_per_axis));
        }
    }
}

/// Incremental meta parser shared by the time-series and spectral formats.
#[derive(Default)]
struct MetaBuilder {
    pending_points: usize,
    sensors: Option<(f64, f64, Vec<[f64; 3]>, Vec<[f64; 3]>)>,
    directions: Option<Vec<[f64; 3]>>,
    dgrid: Option<(usize, f64, usize)>,
}

impl MetaBuilder {
    fn start(&mut self, toks: &[&str], line: usize) -> Result<bool> {
        if self.sensors.is_some() || self.directions.is_some() || self.dgrid.is_some() {
            if matches!(toks.first(), Some(&"sensors" | &"directions" | &"dgrid")) {
                return Err(parse_err(line, "duplicate geometry header"));
            }
        }
        match toks {
            ["sensors", n, radius, weight] => {
                let n = count(n, line, MAX_CHANNELS, "sensor count")?;
                self.pending_points = n;
                self.sensors = Some((
                    num(radius, line)?,
                    num(weight, line)?,
                    Vec::with_capacity(n),
                    Vec::with_capacity(n),
                ));
                Ok(true)
            }
            ["directions", n] => {
                let n = count(n, line, MAX_CHANNELS, "direction count")?;
                self.pending_points = n;
                self.directions = Some(Vec::with_capacity(n));
                Ok(true)
            }
            ["dgrid", d, extent, n] => {
                self.dgrid = Some((
                    count(d, line, 3, "dimension")?,
                    num(extent, line)?,
                    count(n, line, MAX_PER_AXIS, "nodes per axis")?,
                ));
                Ok(true)
            }
            ["p", rest @ ..] => {
                if self.pending_points == 0 {
                    return Err(parse_err(line, "point line outside a geometry block"));
                }
                self.pending_points -= 1;
                if let Some((_, _, points, normals)) = &mut self.sensors {
                    let [a, b, c, d, e, f] = rest else {
                        return Err(parse_err(line, "sensor points need six numbers"));
                    };
                    points.push([num(a, line)?, num(b, line)?, num(c, line)?]);
                    normals.push([num(d, line)?, num(e, line)?, num(f, line)?]);
                } else if let Some(dirs) = &mut self.directions {
                    let [a, b, c] = rest else {
                        return Err(parse_err(line, "directions need three numbers"));
                    };
                    dirs.push([num(a, line)?, num(b, line)?, num(c, line)?]);
                }
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finish(self, dim: usize, line: usize) -> Result<ChannelMeta> {
        if self.pending_points > 0 {
            return Err(parse_err(line, "geometry block ends before all declared points"));
        }
        match (self.sensors, self.directions, self.dgrid) {
            (Some((radius, weight, points, normals)), None, None) => {
                Ok(ChannelMeta::Sensors(SensorArray { dim, radius, points, normals, weight }))
            }
            (None, Some(dirs), None) => Ok(ChannelMeta::Directions(dirs)),
            (None, None, Some((d, extent, n))) => {
                if d != dim {
                    return Err(parse_err(
                        line,
                        format!("direction grid dimension {d} differs from the data dimension {dim}"),
                    ));
                }
                Ok(ChannelMeta::Grid(make_direction_grid(d, extent, n)?))
            }
            _ => Err(parse_err(line, "missing geometry header")),
        }
    }
}

// ---------------------------------------------------------------- time data

/// Renders measured time data: headers for dimension, excitation, axis,
/// optional SNR, and geometry, then one whitespace-separated row per
/// channel.
pub fn render_timeseries(data: &TimeSeriesData) -> String {
    let mut out = String::new();
    out.push_str("# echomap timeseries\n");
    out.push_str(&format!("# dim {}\n", data.dim));
    out.push_str(&format!("# excitation {}\n", data.excitation));
    out.push_str(&format!("# axis {} {} {}\n", data.axis.t0, data.axis.dt, data.axis.n));
    if let Some(snr) = data.snr_db {
        out.push_str(&format!("# snr {snr}\n"));
    }
    render_meta(&data.meta, &mut out);
    for row in &data.channels {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_timeseries(data: &TimeSeriesData, path: &Path) -> Result<()> {
    fs::write(path, render_timeseries(data))?;
    Ok(())
}

fn parse_excitation(tok: &str, line: usize) -> Result<Excitation> {
    match tok {
        "velocity" => Ok(Excitation::Velocity),
        "displacement" => Ok(Excitation::Displacement),
        other => Err(parse_err(line, format!("unknown excitation {other:?}"))),
    }
}

/// Parses the time-series text format; the inverse of [`render_timeseries`].
pub fn parse_timeseries(text: &str) -> Result<TimeSeriesData> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    if header_tokens(magic).as_deref() != Some(&["echomap", "timeseries"]) {
        return Err(parse_err(1, "expected the header line '# echomap timeseries'"));
    }

    let mut dim: Option<usize> = None;
    let mut excitation: Option<Excitation> = None;
    let mut axis: Option<TimeAxis> = None;
    let mut snr: Option<f64> = None;
    let mut meta = MetaBuilder::default();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut last = 1;

    for (i, raw) in lines {
        let line = i + 1;
        last = line;
        if let Some(toks) = header_tokens(raw) {
            if meta.start(&toks, line)? {
                continue;
            }
            match toks.as_slice() {
                ["dim", d] => {
                    let d = count(d, line, 3, "dimension")?;
                    if d != 2 && d != 3 {
                        return Err(parse_err(line, format!("dimension must be 2 or 3, got {d}")));
                    }
                    dim = Some(d);
                }
                ["excitation", e] => excitation = Some(parse_excitation(e, line)?),
                ["axis", t0, dt, n] => {
                    let n = count(n, line, MAX_TOTAL, "sample count")?;
                    axis = Some(TimeAxis::from_parts(num(t0, line)?, num(dt, line)?, n)?);
                }
                ["snr", v] => snr = Some(num(v, line)?),
                _ => return Err(parse_err(line, format!("unknown header {raw:?}"))),
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let axis = axis.as_ref().ok_or_else(|| parse_err(line, "data row before axis header"))?;
        if rows.len() >= MAX_CHANNELS || (rows.len() + 1).saturating_mul(axis.n) > MAX_TOTAL {
            return Err(parse_err(line, "data exceeds the format cap"));
        }
        let row = raw
            .split_whitespace()
            .map(|t| num(t, line))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != axis.n {
            return Err(parse_err(
                line,
                format!("row has {} samples, axis declares {}", row.len(), axis.n),
            ));
        }
        rows.push(row);
    }

    let dim = dim.ok_or_else(|| parse_err(last, "missing dim header"))?;
    let excitation = excitation.ok_or_else(|| parse_err(last, "missing excitation header"))?;
    let axis = axis.ok_or_else(|| parse_err(last, "missing axis header"))?;
    let meta = meta.finish(dim, last)?;
    let mut data = TimeSeriesData::new(dim, Excitation::Velocity, axis, meta, rows)?;
    data.excitation = excitation;
    data.snr_db = snr;
    Ok(data)
}

pub fn read_timeseries(path: &Path) -> Result<TimeSeriesData> {
    parse_timeseries(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- spectra

/// Renders frequency data; rows carry interleaved re/im pairs.
pub fn render_spectral(data: &SpectralData) -> String {
    let mut out = String::new();
    out.push_str("# echomap spectral\n");
    out.push_str(&format!("# dim {}\n", data.dim));
    out.push_str(&format!("# excitation {}\n", data.excitation));
    out.push_str(&format!(
        "# kband {} {} {}\n",
        data.k_axis.k_min, data.k_axis.k_max, data.k_axis.n
    ));
    if let Some(snr) = data.snr_db {
        out.push_str(&format!("# snr {snr}\n"));
    }
    render_meta(&data.meta, &mut out);
    for row in &data.channels {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{} {}", v.re, v.im));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn write_spectral(data: &SpectralData, path: &Path) -> Result<()> {
    fs::write(path, render_spectral(data))?;
    Ok(())
}

/// Parses the spectral text format; the inverse of [`render_spectral`].
pub fn parse_spectral(text: &str) -> Result<SpectralData> {
    let mut lines = text.lines().enumerate();
    let (_, magic) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    if header_tokens(magic).as_deref() != Some(&["echomap", "spectral"]) {
        return Err(parse_err(1, "expected the header line '# echomap spectral'"));
    }

    let mut dim: Option<usize> = None;
    let mut excitation: Option<Excitation> = None;
    let mut k_axis: Option<WavenumberAxis> = None;
    let mut snr: Option<f64> = None;
    let mut meta = MetaBuilder::default();
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    let mut last = 1;

    for (i, raw) in lines {
        let line = i + 1;
        last = line;
        if let Some(toks) = header_tokens(raw) {
            if meta.start(&toks, line)? {
                continue;
            }
            match toks.as_slice() {
                ["dim", d] => {
                    let d = count(d, line, 3, "dimension")?;
                    if d != 2 && d != 3 {
                        return Err(parse_err(line, format!("dimension must be 2 or 3, got {d}")));
                    }
                    dim = Some(d);
                }
                ["excitation", e] => excitation = Some(parse_excitation(e, line)?),
                ["kband", lo, hi, n] => {
                    let n = count(n, line, MAX_TOTAL, "wavenumber count")?;
                    k_axis = Some(WavenumberAxis::new(num(lo, line)?, num(hi, line)?, n)?);
                }
                ["snr", v] => snr = Some(num(v, line)?),
                _ => return Err(parse_err(line, format!("unknown header {raw:?}"))),
            }
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let k_axis =
            k_axis.as_ref().ok_or_else(|| parse_err(line, "data row before kband header"))?;
        if rows.len() >= MAX_CHANNELS || (rows.len() + 1).saturating_mul(k_axis.n) > MAX_TOTAL {
            return Err(parse_err(line, "data exceeds the format cap"));
        }
        let nums = raw
            .split_whitespace()
            .map(|t| num(t, line))
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != 2 * k_axis.n {
            return Err(parse_err(
                line,
                format!(
                    "row has {} numbers, the band needs {} re/im pairs",
                    nums.len(),
                    k_axis.n
                ),
            ));
        }
        rows.push(nums.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect());
    }

    let dim = dim.ok_or_else(|| parse_err(last, "missing dim header"))?;
    let excitation = excitation.ok_or_else(|| parse_err(last, "missing excitation header"))?;
    let k_axis = k_axis.ok_or_else(|| parse_err(last, "missing kband header"))?;
    let meta = meta.finish(dim, last)?;
    let mut data = SpectralData::new(dim, Excitation::Velocity, k_axis, meta, rows)?;
    data.excitation = excitation;
    data.snr_db = snr;
    Ok(data)
}

pub fn read_spectral(path: &Path) -> Result<SpectralData> {
    parse_spectral(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- reports

/// Flat key-value rendering of an error report.
pub fn render_error_report(report: &ErrorReport) -> String {
    format!(
        "relative_l2 {}\nmax_abs {}\npeak_offset {} {} {}\nmeta {}\n",
        report.relative_l2,
        report.max_abs,
        report.peak_offset[0],
        report.peak_offset[1],
        report.peak_offset[2],
        report.meta
    )
}

pub fn write_error_report(report: &ErrorReport, path: &Path) -> Result<()> {
    fs::write(path, render_error_report(report))?;
    Ok(())
}

// ---------------------------------------------------------------- heatmaps

/// Writes an 8-bit binary graymap of a 2D grid, or of an axis-aligned slice
/// `(axis, index)` of a 3D grid. Values map linearly with min at black and
/// max at white; a constant plane maps to mid-gray 128. The value range
/// lands in a `.range` sidecar next to the image.
pub fn write_heatmap(
    grid: &ImageGrid,
    path: &Path,
    slice_spec: Option<(usize, usize)>,
) -> Result<()> {
    let (rows, cols, plane): (usize, usize, Vec<f64>) = match (grid.dim, slice_spec) {
        (2, None) => (grid.shape[0], grid.shape[1], grid.values.clone()),
        (2, Some(_)) => {
            return Err(Error::invalid("slice specs only apply to 3D grids"));
        }
        (3, None) => {
            return Err(Error::invalid("3D heatmaps need a slice spec (axis, index)"));
        }
        (3, Some((axis, index))) => {
            if axis > 2 {
                return Err(Error::invalid(format!("slice axis must be 0..3, got {axis}")));
            }
            if index >= grid.shape[axis] {
                return Err(Error::invalid(format!(
                    "slice index {index} outside axis of {} nodes",
                    grid.shape[axis]
                )));
            }
            let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
            let (r, c) = (grid.shape[others[0]], grid.shape[others[1]]);
            let mut plane = Vec::with_capacity(r * c);
            for i in 0..r {
                for j in 0..c {
                    let mut idx = [0usize; 3];
                    idx[axis] = index;
                    idx[others[0]] = i;
                    idx[others[1]] = j;
                    plane.push(grid.values[grid.flat_index(idx)]);
                }
            }
            (r, c, plane)
        }
        _ => return Err(Error::DimensionMismatch { expected: 2, got: grid.dim }),
    };

    let min = plane.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = plane.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pixels: Vec<u8> = if max > min {
        plane.iter().map(|&v| ((v - min) / (max - min) * 255.0).round() as u8).collect()
    } else {
        vec![128; plane.len()]
    };

    let mut file = fs::File::create(path)?;
    write!(file, "P5\n{cols} {rows}\n255\n")?;
    file.write_all(&pixels)?;

    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".range");
    fs::write(sidecar, format!("min {min}\nmax {max}\n"))?;
    Ok(())
}
