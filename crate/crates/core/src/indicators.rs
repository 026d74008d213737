//! Direct-sampling indicator functions.
//!
//! Each indicator maps measured data to values on an [`ImageGrid`] in a
//! single pass, no iteration and no forward solves. Near-field indicators
//! sample retarded times or integrate a Hankel kernel against frequency
//! data; far-field indicators evaluate a frequency-space integral over the
//! direction grid, factorized one axis at a time.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{ChannelMeta, Excitation, TimeAxis, TimeSeriesData};
use crate::geometry::{DirectionGrid, ImageGrid, SensorArray};
use crate::specfun::{kernel_normal_derivative, KernelFamily};
use crate::spectral::{transform_at, SpectralData};

/// Grid nodes closer to a sensor than this fraction of the array radius are
/// rejected as degenerate.
const DEGENERATE_FRACTION: f64 = 1e-12;

/// Fraction of the Nyquist rate pi/dt up to which a direction node's |x| is
/// accepted as a trustworthy wavenumber.
const NYQUIST_FRACTION: f64 = 0.8;

/// Zero-phase smoothing applied to time data before differentiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterParams {
    /// Centered moving-average length in samples; 1 disables smoothing.
    pub window: usize,
}

impl FilterParams {
    /// No smoothing.
    pub fn none() -> FilterParams {
        FilterParams { window: 1 }
    }

    /// A centered window of `window` samples; must be odd so the filter has
    /// zero phase.
    pub fn new(window: usize) -> Result<FilterParams> {
        if window == 0 || window % 2 == 0 {
            return Err(Error::validation(
                "filter",
                format!("smoothing window must be odd and positive, got {window}"),
            ));
        }
        Ok(FilterParams { window })
    }

    /// Default rule: five samples once the data is noisy (SNR at or below
    /// 20 dB), none on clean data.
    pub fn auto(snr_db: Option<f64>) -> FilterParams {
        match snr_db {
            Some(snr) if snr <= 20.0 => FilterParams { window: 5 },
            _ => FilterParams { window: 1 },
        }
    }
}

/// Provenance and parameters of a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMeta {
    /// Which indicator produced the image.
    pub indicator: String,
    /// Excitation the input data realized.
    pub excitation: Excitation,
    /// Noise level carried by the input, None for clean data.
    pub snr_db: Option<f64>,
    /// Smoothing window applied before differentiation, when one was.
    pub filter_window: Option<usize>,
    /// Wavenumber band integrated over, for the frequency-domain paths.
    pub k_band: Option<(f64, f64)>,
    /// Mean |Im| discarded by the far indicators; zero for exact data.
    pub imag_residue: Option<f64>,
}

/// Indicator values on an image grid plus how they were obtained.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub grid: ImageGrid,
    pub meta: ReconstructionMeta,
}

impl ReconstructionResult {
    fn checked(grid: ImageGrid, meta: ReconstructionMeta) -> Result<ReconstructionResult> {
        if let Some(i) = grid.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "indicator {} produced a non-finite value at node {i}",
                meta.indicator
            )));
        }
        Ok(ReconstructionResult { grid, meta })
    }
}

fn require_excitation(got: Excitation, required: Excitation) -> Result<()> {
    if got != required {
        return Err(Error::ExcitationMismatch {
            required: required.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

fn sensor_meta(meta: &ChannelMeta) -> Result<&SensorArray> {
    match meta {
        ChannelMeta::Sensors(s) => Ok(s),
        _ => Err(Error::invalid("near-field indicators need sensor-array data")),
    }
}

fn direction_meta(meta: &ChannelMeta) -> Result<&DirectionGrid> {
    match meta {
        ChannelMeta::Grid(g) => Ok(g),
        _ => Err(Error::invalid("far-field indicators need direction-grid data")),
    }
}

/// Every image node must lie strictly inside the sensor surface.
fn check_nodes_inside(grid: &ImageGrid, sensors: &SensorArray) -> Result<()> {
    for flat in 0..grid.len() {
        let p = grid.position(flat);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r >= sensors.radius {
            return Err(Error::geometry(format!(
                "image node {flat} lies on or outside the sensor surface: |y| = {r:.4}, radius {:.4}",
                sensors.radius
            )));
        }
    }
    Ok(())
}

/// Centered moving average; the window shrinks symmetrically near the ends
/// so the filter stays zero-phase everywhere.
fn moving_average(row: &[f64], window: usize) -> Vec<f64> {
    let n = row.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let slice = &row[i - h..=i + h];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

/// Fourth-order centered first derivative. The two samples at each end stay
/// zero; the retarded-time band keeps them out of reach.
fn derivative_row(row: &[f64], h: f64) -> Vec<f64> {
    let n = row.len();
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] = (row[j - 2] - 8.0 * row[j - 1] + 8.0 * row[j + 1] - row[j + 2]) / (12.0 * h);
    }
    out
}

/// Fourth-order centered second derivative, same edge convention.
fn second_derivative_row(row: &[f64], h: f64) -> Vec<f64> {
    let n = row.len();
    let h2 = h * h;
    let mut out = vec![0.0; n];
    for j in 2..n - 2 {
        out[j] = (-row[j - 2] + 16.0 * row[j - 1] - 30.0 * row[j] + 16.0 * row[j + 1]
            - row[j + 2])
            / (12.0 * h2);
    }
    out
}

/// Cubic Lagrange interpolation of a uniformly sampled row at time t.
/// Callers keep t within [t0 + 4 dt, t_end - 4 dt]; the four-point stencil
/// then never touches the zeroed derivative edges.
fn cubic_eval(row: &[f64], axis: &TimeAxis, t: f64) -> f64 {
    let u = (t - axis.t0) / axis.dt;
    let j = (u.floor() as usize).clamp(1, axis.n - 3);
    let s = u - j as f64;
    let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w1 = (s * s - 1.0) * (s - 2.0) / 2.0;
    let w2 = -s * (s + 1.0) * (s - 2.0) / 2.0;
    let w3 = s * (s * s - 1.0) / 6.0;
    w0 * row[j - 1] + w1 * row[j] + w2 * row[j + 1] + w3 * row[j + 2]
}

#[derive(Clone, Copy)]
enum TimeKernel {
    Velocity,
    Displacement,
}

/// Shared core of the retarded-time indicators. Both kernels reduce to the
/// same shape a(x, r)/r - b(x, r): the velocity kernel pairs the first and
/// second time derivatives, the displacement kernel the trace and its first
/// derivative.
fn near_time_core(
    data: &TimeSeriesData,
    grid: &ImageGrid,
    filter: &FilterParams,
    kernel: TimeKernel,
    label: &str,
) -> Result<ReconstructionResult> {
    if data.dim != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: data.dim });
    }
    if grid.dim != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: grid.dim });
    }
    let required = match kernel {
        TimeKernel::Velocity => Excitation::Velocity,
        TimeKernel::Displacement => Excitation::Displacement,
    };
    require_excitation(data.excitation, required)?;
    let sensors = sensor_meta(&data.meta)?;
    let axis = &data.axis;
    if axis.n < 9 {
        return Err(Error::validation(
            "axis",
            format!("retarded-time indicators need at least 9 samples, got {}", axis.n),
        ));
    }
    check_nodes_inside(grid, sensors)?;

    let smoothed: Vec<Vec<f64>>;
    let rows: &[Vec<f64>] = if filter.window > 1 {
        smoothed =
            data.channels.par_iter().map(|r| moving_average(r, filter.window)).collect();
        &smoothed
    } else {
        &data.channels
    };
    let (a_rows, b_rows): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match kernel {
        TimeKernel::Velocity => (
            rows.par_iter().map(|r| derivative_row(r, axis.dt)).collect(),
            rows.par_iter().map(|r| second_derivative_row(r, axis.dt)).collect(),
        ),
        TimeKernel::Displacement => (
            rows.to_vec(),
            rows.par_iter().map(|r| derivative_row(r, axis.dt)).collect(),
        ),
    };

    let t_lo = axis.t0 + 4.0 * axis.dt;
    let t_hi = axis.t_end() - 4.0 * axis.dt;
    let eps = DEGENERATE_FRACTION * sensors.radius;
    let w = sensors.weight;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let y = grid.position(flat);
            let mut acc = 0.0;
            for (i, (x, nu)) in sensors.points.iter().zip(&sensors.normals).enumerate() {
                let dx = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                let r = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
                if r < eps {
                    return Err(Error::DegenerateGeometry { sensor: i, eps });
                }
                if r < t_lo || r > t_hi {
                    return Err(Error::RetardedTimeOutOfRange { sensor: i, node: flat, t: r });
                }
                let dot = dx[0] * nu[0] + dx[1] * nu[1] + dx[2] * nu[2];
                let bracket =
                    cubic_eval(&a_rows[i], axis, r) / r - cubic_eval(&b_rows[i], axis, r);
                acc += w * dot / (2.0 * PI * r * r) * bracket;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;

    let meta = ReconstructionMeta {
        indicator: label.to_string(),
        excitation: required,
        snr_db: data.snr_db,
        filter_window: Some(filter.window),
        k_band: None,
        imag_residue: None,
    };
    ReconstructionResult::checked(grid.with_values(values)?, meta)
}

/// Retarded-time indicator for 3D velocity sources.
///
/// Value at y: sum over sensors x of
/// ((x - y) . nu) / (2 pi r^2) * [dp(x, r)/r - dpp(x, r)],  r = |x - y|,
/// with dp and dpp the first and second time derivatives of the trace,
/// optionally smoothed first.
pub fn indicator_near_time_3d(
    data: &TimeSeriesData,
    grid: &ImageGrid,
    filter: &FilterParams,
) -> Result<ReconstructionResult> {
    near_time_core(data, grid, filter, TimeKernel::Velocity, "near-time-3d")
}

/// Retarded-time indicator for 3D displacement sources.
///
/// The pairing of the sensor-normal kernel derivative with the trace
/// reduces, for the free-space kernel delta(t - r)/(4 pi r), to
/// ((x - y) . nu) / (2 pi r^2) * [dp(x, r) - p(x, r)/r] per unit surface.
/// A displacement field is the time derivative of the matching velocity
/// field, and moving that derivative across the pairing flips the sign, so
/// the source-recovering kernel is the negative:
/// ((x - y) . nu) / (2 pi r^2) * [p(x, r)/r - dp(x, r)].
/// The frequency-domain cross-check lives in [`indicator_disp_near_freq`].
pub fn indicator_near_time_disp_3d(
    data: &TimeSeriesData,
    grid: &ImageGrid,
    filter: &FilterParams,
) -> Result<ReconstructionResult> {
    near_time_core(data, grid, filter, TimeKernel::Displacement, "disp-near-time-3d")
}

#[derive(Clone, Copy)]
enum FreqKernel {
    Velocity,
    Displacement,
}

/// Shared core of the frequency-domain near-field indicators: a double
/// weighted sum over sensors and wavenumber midpoints of a Hankel-kernel
/// normal derivative against the conjugated spectrum.
fn near_freq_core(
    spectral: &SpectralData,
    grid: &ImageGrid,
    kernel: FreqKernel,
    label: &str,
) -> Result<ReconstructionResult> {
    let dim = spectral.dim;
    if grid.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: grid.dim });
    }
    let required = match kernel {
        FreqKernel::Velocity => Excitation::Velocity,
        FreqKernel::Displacement => Excitation::Displacement,
    };
    require_excitation(spectral.excitation, required)?;
    let sensors = sensor_meta(&spectral.meta)?;
    check_nodes_inside(grid, sensors)?;

    let ks = spectral.k_axis.nodes();
    let dk = spectral.k_axis.dk();
    let w = sensors.weight;
    let eps = DEGENERATE_FRACTION * sensors.radius;
    // prefactor and wavenumber power of the k-integral
    let (c, pow) = match (kernel, dim) {
        (FreqKernel::Velocity, 3) => (1.0 / (2.0 * PI * PI), 2),
        (FreqKernel::Velocity, _) => (1.0 / (2.0 * PI), 1),
        (FreqKernel::Displacement, _) => (1.0 / (2.0 * PI * PI), 1),
    };

    let values = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let y = grid.position(flat);
            let mut acc = 0.0;
            for (i, (x, nu)) in sensors.points.iter().zip(&sensors.normals).enumerate() {
                let dx = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                let r = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
                if r < eps {
                    return Err(Error::DegenerateGeometry { sensor: i, eps });
                }
                let row = &spectral.channels[i];
                for (j, &k) in ks.iter().enumerate() {
                    let knd =
                        kernel_normal_derivative(dim, KernelFamily::Hankel, *x, *nu, y, k)?;
                    let z = knd * row[j].conj();
                    let term = match kernel {
                        FreqKernel::Velocity => k.powi(pow) * z.re,
                        // Re[-i k z]: the spectrum of displacement data is
                        // -ik times the velocity spectrum, which turns the
                        // velocity kernel k^2 Re[z] into k Im[z].
                        FreqKernel::Displacement => k * z.im,
                    };
                    acc += w * dk * term;
                }
            }
            Ok(c * acc)
        })
        .collect::<Result<Vec<f64>>>()?;

    let meta = ReconstructionMeta {
        indicator: label.to_string(),
        excitation: required,
        snr_db: spectral.snr_db,
        filter_window: None,
        k_band: Some((spectral.k_axis.k_min, spectral.k_axis.k_max)),
        imag_residue: None,
    };
    ReconstructionResult::checked(grid.with_values(values)?, meta)
}

/// Frequency-domain near-field indicator for velocity sources.
///
/// 3D: 1/(2 pi^2) * int_0^K int_Gamma Re[d_nu h0(kr) conj(u)] k^2 ds dk;
/// 2D: 1/(2 pi)   * int_0^K int_Gamma Re[d_nu H0(kr) conj(u)] k   ds dk.
pub fn indicator_near_freq(
    spectral: &SpectralData,
    grid: &ImageGrid,
    dim: usize,
) -> Result<ReconstructionResult> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid(format!("indicator dimension must be 2 or 3, got {dim}")));
    }
    if spectral.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: spectral.dim });
    }
    near_freq_core(spectral, grid, FreqKernel::Velocity, "near-freq")
}

/// Frequency-domain near-field indicator for 3D displacement sources:
/// 1/(2 pi^2) * int_0^K int_Gamma k Im[d_nu h0(kr) conj(u)] ds dk.
///
/// Displacement data transforms to -ik times the velocity spectrum, so the
/// k^2 Re[..] velocity integrand becomes k Im[..] here; see
/// [`indicator_near_time_disp_3d`] for the matching time-domain sign.
pub fn indicator_disp_near_freq(
    spectral: &SpectralData,
    grid: &ImageGrid,
) -> Result<ReconstructionResult> {
    if spectral.dim != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: spectral.dim });
    }
    near_freq_core(spectral, grid, FreqKernel::Displacement, "disp-near-freq")
}

#[derive(Clone, Copy)]
enum FarKernel {
    Velocity,
    Displacement,
}

/// Complex node coefficient of the far-field frequency-space sum: the cell
/// volume, the dimension constant, the |x| weight, and the node spectrum.
fn far_coefficient(
    kernel: FarKernel,
    dim: usize,
    cell_volume: f64,
    len: f64,
    p: Complex64,
) -> Complex64 {
    let c3 = 1.0 / (2.0 * PI * PI);
    match (kernel, dim) {
        (FarKernel::Velocity, 3) => c3 * cell_volume * p,
        // e^{-i pi/4} / sqrt(2 pi^3), the principal branch of the
        // half-order frequency weight, times sqrt(|x|)
        (FarKernel::Velocity, _) => {
            Complex64::from_polar((2.0 * PI.powi(3)).sqrt().recip(), -FRAC_PI_4)
                * (cell_volume * len.sqrt())
                * p
        }
        // i/|x| weight; the excluded origin makes the singularity harmless
        (FarKernel::Displacement, _) => {
            Complex64::new(0.0, c3 * cell_volume / len) * p
        }
    }
}

/// Phase table e^{i a y} for one image axis against the direction axis.
fn phase_table(grid: &ImageGrid, axis: usize, coords: &[f64]) -> Vec<Vec<Complex64>> {
    (0..grid.shape[axis])
        .map(|iy| {
            let y = grid.axis_coord(axis, iy);
            coords.iter().map(|&a| Complex64::from_polar(1.0, a * y)).collect()
        })
        .collect()
}

/// Shared core of the far-field indicators. The spectrum of every channel
/// is taken once at k = |x|; the plane-wave factor e^{i x . y} factorizes
/// per axis, so the node sum contracts one direction axis at a time instead
/// of visiting every (node, image point) pair.
fn far_core(
    data: &TimeSeriesData,
    grid: &ImageGrid,
    kernel: FarKernel,
    label: &str,
) -> Result<ReconstructionResult> {
    let dim = data.dim;
    if grid.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: grid.dim });
    }
    let required = match kernel {
        FarKernel::Velocity => Excitation::Velocity,
        FarKernel::Displacement => Excitation::Displacement,
    };
    require_excitation(data.excitation, required)?;
    let dgrid = direction_meta(&data.meta)?;
    let axis = &data.axis;

    let limit = NYQUIST_FRACTION * PI / axis.dt;
    for (idx, node) in dgrid.nodes.iter().enumerate() {
        if node.len > limit {
            return Err(Error::MissingSpectrum { node: idx, k: node.len, limit });
        }
    }

    // per-node spectra at k = |x|, then the full coefficient tensor with
    // zeros at the excluded origin slots
    let coeffs: Vec<Complex64> = (0..dgrid.nodes.len())
        .into_par_iter()
        .map(|j| {
            let node = &dgrid.nodes[j];
            let p = transform_at(&data.channels[j], axis, node.len);
            far_coefficient(kernel, dim, dgrid.cell_volume, node.len, p)
        })
        .collect();
    let n = dgrid.n_per_axis;
    let mut tensor = vec![Complex64::new(0.0, 0.0); n.pow(dim as u32)];
    for (node, &c) in dgrid.nodes.iter().zip(&coeffs) {
        let [i, j, k] = node.ijk;
        let flat = if dim == 3 { (i * n + j) * n + k } else { i * n + j };
        tensor[flat] = c;
    }

    let ph: Vec<Vec<Vec<Complex64>>> =
        (0..dim).map(|a| phase_table(grid, a, &dgrid.axis_coords)).collect();
    let zero = Complex64::new(0.0, 0.0);
    // contract axis 0 in parallel over the slowest image axis; the inner
    // order is fixed, so reruns agree bitwise
    let complex_vals: Vec<Complex64> = (0..grid.shape[0])
        .into_par_iter()
        .flat_map_iter(|iy0| {
            let e0 = &ph[0][iy0];
            if dim == 3 {
                let mut t0 = vec![zero; n * n];
                for i in 0..n {
                    let w = e0[i];
                    let base = i * n * n;
                    for (jk, slot) in t0.iter_mut().enumerate() {
                        *slot += w * tensor[base + jk];
                    }
                }
                let mut out = Vec::with_capacity(grid.shape[1] * grid.shape[2]);
                for e1 in &ph[1] {
                    let mut t1 = vec![zero; n];
                    for j in 0..n {
                        let w = e1[j];
                        let base = j * n;
                        for (k, slot) in t1.iter_mut().enumerate() {
                            *slot += w * t0[base + k];
                        }
                    }
                    for e2 in &ph[2] {
                        let mut s = zero;
                        for k in 0..n {
                            s += e2[k] * t1[k];
                        }
                        out.push(s);
                    }
                }
                out
            } else {
                let mut t0 = vec![zero; n];
                for i in 0..n {
                    let w = e0[i];
                    let base = i * n;
                    for (j, slot) in t0.iter_mut().enumerate() {
                        *slot += w * tensor[base + j];
                    }
                }
                let mut out = Vec::with_capacity(grid.shape[1]);
                for e1 in &ph[1] {
                    let mut s = zero;
                    for j in 0..n {
                        s += e1[j] * t0[j];
                    }
                    out.push(s);
                }
                out
            }
        })
        .collect();

    let residue =
        complex_vals.iter().map(|v| v.im.abs()).sum::<f64>() / complex_vals.len() as f64;
    let values: Vec<f64> = complex_vals.iter().map(|v| v.re).collect();
    let meta = ReconstructionMeta {
        indicator: label.to_string(),
        excitation: required,
        snr_db: data.snr_db,
        filter_window: None,
        k_band: None,
        imag_residue: Some(residue),
    };
    ReconstructionResult::checked(grid.with_values(values)?, meta)
}

/// Far-field indicator for velocity sources in two or three dimensions.
///
/// Real part of sum over direction nodes of
/// c_d * cell_volume * |x|^{(3-d)/2} * e^{i x . y} * P(x),
/// where P(x) is the channel spectrum at k = |x|, c_3 = 1/(2 pi^2) and
/// c_2 = e^{-i pi/4} / sqrt(2 pi^3). The mean |Im| over image nodes lands
/// in the meta as a self-diagnostic.
pub fn indicator_far(
    data: &TimeSeriesData,
    grid: &ImageGrid,
    dim: usize,
) -> Result<ReconstructionResult> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid(format!("indicator dimension must be 2 or 3, got {dim}")));
    }
    if data.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: data.dim });
    }
    far_core(data, grid, FarKernel::Velocity, "far")
}

/// Far-field indicator for 3D displacement sources: the velocity sum with
/// the half-order weight replaced by i/|x|.
pub fn indicator_disp_far(data: &TimeSeriesData, grid: &ImageGrid) -> Result<ReconstructionResult> {
    if data.dim != 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: data.dim });
    }
    far_core(data, grid, FarKernel::Displacement, "disp-far")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{
        near_field_2d, near_field_3d, near_field_displacement_3d, far_field_2d, QuadratureParams,
    };
    use crate::geometry::{
        make_circle_array, make_direction_grid, make_image_grid, make_sphere_array,
    };
    use crate::sources::{SourceSpec, SourceTerm};
    use crate::spectral::{time_to_freq, WavenumberAxis};

    fn gaussian_spec(dim: usize, amplitude: f64, center: [f64; 3], sharpness: f64) -> SourceSpec {
        SourceSpec::new(
            dim,
            vec![SourceTerm::Gaussian { amplitude, center, sharpness }],
            1.0,
        )
        .unwrap()
    }

    fn zero_near_data(excitation: Excitation) -> TimeSeriesData {
        let sensors = make_sphere_array(8, 2.0).unwrap();
        let axis = TimeAxis::new(0.0, 4.0, 40).unwrap();
        let rows = vec![vec![0.0; axis.n]; 8];
        let mut data =
            TimeSeriesData::new(3, Excitation::Velocity, axis, ChannelMeta::Sensors(sensors), rows)
                .unwrap();
        data.excitation = excitation;
        data
    }

    fn zero_spectral(dim: usize, excitation: Excitation) -> SpectralData {
        let sensors = if dim == 2 {
            make_circle_array(8, 2.0).unwrap()
        } else {
            make_sphere_array(8, 2.0).unwrap()
        };
        let k_axis = WavenumberAxis::new(0.0, 10.0, 6).unwrap();
        let rows = vec![vec![Complex64::new(0.0, 0.0); 6]; 8];
        let mut s =
            SpectralData::new(dim, Excitation::Velocity, k_axis, ChannelMeta::Sensors(sensors), rows)
                .unwrap();
        s.excitation = excitation;
        s
    }

    fn zero_far_data(dim: usize, excitation: Excitation) -> TimeSeriesData {
        let dgrid = make_direction_grid(dim, 4.0, 4).unwrap();
        let axis = TimeAxis::new(-1.0, 1.0, 50).unwrap();
        let rows = vec![vec![0.0; axis.n]; dgrid.nodes.len()];
        let mut data =
            TimeSeriesData::new(dim, Excitation::Velocity, axis, ChannelMeta::Grid(dgrid), rows)
                .unwrap();
        data.excitation = excitation;
        data
    }

    fn small_grid(dim: usize, half: f64, n: usize) -> ImageGrid {
        let bounds = vec![[-half, half]; dim];
        let shape = vec![n; dim];
        make_image_grid(dim, &bounds, &shape).unwrap()
    }

    #[test]
    fn filter_params_rules() {
        assert!(FilterParams::new(4).is_err());
        assert!(FilterParams::new(0).is_err());
        assert_eq!(FilterParams::new(5).unwrap().window, 5);
        assert_eq!(FilterParams::none().window, 1);
        assert_eq!(FilterParams::auto(Some(20.0)).window, 5);
        assert_eq!(FilterParams::auto(Some(20.1)).window, 1);
        assert_eq!(FilterParams::auto(Some(-1.0)).window, 5);
        assert_eq!(FilterParams::auto(None).window, 1);
    }

    #[test]
    fn zero_data_maps_to_zero_for_every_indicator() {
        let g3 = small_grid(3, 0.5, 3);
        let g2 = small_grid(2, 0.5, 3);
        let results = vec![
            indicator_near_time_3d(&zero_near_data(Excitation::Velocity), &g3, &FilterParams::none())
                .unwrap(),
            indicator_near_time_disp_3d(
                &zero_near_data(Excitation::Displacement),
                &g3,
                &FilterParams::none(),
            )
            .unwrap(),
            indicator_near_freq(&zero_spectral(2, Excitation::Velocity), &g2, 2).unwrap(),
            indicator_near_freq(&zero_spectral(3, Excitation::Velocity), &g3, 3).unwrap(),
            indicator_disp_near_freq(&zero_spectral(3, Excitation::Displacement), &g3).unwrap(),
            indicator_far(&zero_far_data(2, Excitation::Velocity), &g2, 2).unwrap(),
            indicator_far(&zero_far_data(3, Excitation::Velocity), &g3, 3).unwrap(),
            indicator_disp_far(&zero_far_data(3, Excitation::Displacement), &g3).unwrap(),
        ];
        let labels: Vec<&str> = results.iter().map(|r| r.meta.indicator.as_str()).collect();
        assert_eq!(
            labels,
            vec![
                "near-time-3d",
                "disp-near-time-3d",
                "near-freq",
                "near-freq",
                "disp-near-freq",
                "far",
                "far",
                "disp-far"
            ]
        );
        for r in &results {
            assert!(r.grid.values.iter().all(|&v| v == 0.0));
        }
        assert_eq!(results[5].meta.imag_residue, Some(0.0));
    }

    #[test]
    fn near_time_peak_sits_within_one_cell_of_gaussian_center() {
        let center = [0.3, -0.2, 0.1];
        let spec = gaussian_spec(3, 1.0, center, 40.0);
        let sensors = make_sphere_array(60, 2.0).unwrap();
        let axis = TimeAxis::new(0.0, 3.5, 250).unwrap();
        let quad = QuadratureParams { n_theta: 24, n_phi: 24, n_gauss: 32, scan: 48 };
        let data = near_field_3d(&spec, &sensors, &axis, &quad).unwrap();
        let grid = small_grid(3, 0.6, 15);
        let rec = indicator_near_time_3d(&data, &grid, &FilterParams::none()).unwrap();
        let best = (0..rec.grid.len())
            .max_by(|&a, &b| rec.grid.values[a].total_cmp(&rec.grid.values[b]))
            .unwrap();
        let pos = rec.grid.position(best);
        let cell = rec.grid.spacing(0);
        for a in 0..3 {
            assert!(
                (pos[a] - center[a]).abs() <= cell + 1e-12,
                "axis {a}: peak at {:.4}, center {:.4}",
                pos[a],
                center[a]
            );
        }
        // quantitative: the indicator approximates the source amplitude
        assert!(rec.grid.values[best] > 0.5, "peak value {:.4}", rec.grid.values[best]);
        assert_eq!(rec.meta.filter_window, Some(1));
    }

    #[test]
    fn near_time_displacement_peak_and_sign() {
        let center = [0.25, -0.15, 0.1];
        let spec = gaussian_spec(3, 1.0, center, 40.0);
        let sensors = make_sphere_array(48, 2.0).unwrap();
        let axis = TimeAxis::new(0.0, 3.5, 200).unwrap();
        let quad = QuadratureParams { n_theta: 24, n_phi: 24, n_gauss: 32, scan: 48 };
        let data = near_field_displacement_3d(&spec, &sensors, &axis, &quad).unwrap();
        let grid = small_grid(3, 0.55, 13);
        let rec = indicator_near_time_disp_3d(&data, &grid, &FilterParams::none()).unwrap();
        let best = (0..rec.grid.len())
            .max_by(|&a, &b| rec.grid.values[a].total_cmp(&rec.grid.values[b]))
            .unwrap();
        let pos = rec.grid.position(best);
        let cell = rec.grid.spacing(0);
        for a in 0..3 {
            assert!((pos[a] - center[a]).abs() <= cell + 1e-12);
        }
        assert!(rec.grid.values[best] > 0.5, "peak value {:.4}", rec.grid.values[best]);
    }

    #[test]
    fn near_time_reports_out_of_band_retarded_time() {
        let spec = gaussian_spec(3, 1.0, [0.0, 0.0, 0.0], 40.0);
        let sensors = make_sphere_array(16, 2.0).unwrap();
        let axis = TimeAxis::new(0.0, 1.5, 60).unwrap();
        let quad = QuadratureParams { n_theta: 8, n_phi: 8, n_gauss: 8, scan: 16 };
        let data = near_field_3d(&spec, &sensors, &axis, &quad).unwrap();
        let grid = small_grid(3, 0.4, 3);
        let err = indicator_near_time_3d(&data, &grid, &FilterParams::none()).unwrap_err();
        match err {
            Error::RetardedTimeOutOfRange { sensor, node, t } => {
                assert!(sensor < 16);
                assert!(node < grid.len());
                assert!(t > 1.0, "retarded time {t}");
            }
            other => panic!("expected a retarded-time error, got {other:?}"),
        }
    }

    #[test]
    fn near_ops_reject_mismatched_inputs() {
        let g3 = small_grid(3, 0.5, 3);
        let g2 = small_grid(2, 0.5, 3);

        let disp = zero_near_data(Excitation::Displacement);
        assert!(matches!(
            indicator_near_time_3d(&disp, &g3, &FilterParams::none()),
            Err(Error::ExcitationMismatch { .. })
        ));
        let vel = zero_near_data(Excitation::Velocity);
        assert!(matches!(
            indicator_near_time_disp_3d(&vel, &g3, &FilterParams::none()),
            Err(Error::ExcitationMismatch { .. })
        ));

        let far = zero_far_data(3, Excitation::Velocity);
        assert!(matches!(
            indicator_near_time_3d(&far, &g3, &FilterParams::none()),
            Err(Error::InvalidArgument(_))
        ));

        let wide = small_grid(3, 3.0, 3);
        let data = zero_near_data(Excitation::Velocity);
        assert!(matches!(
            indicator_near_time_3d(&data, &wide, &FilterParams::none()),
            Err(Error::Geometry(_))
        ));

        let s2 = zero_spectral(2, Excitation::Velocity);
        assert!(matches!(
            indicator_near_freq(&s2, &g2, 3),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            indicator_disp_near_freq(&s2, &g2),
            Err(Error::DimensionMismatch { .. })
        ));
        let s3v = zero_spectral(3, Excitation::Velocity);
        assert!(matches!(
            indicator_disp_near_freq(&s3v, &g3),
            Err(Error::ExcitationMismatch { .. })
        ));
    }

    #[test]
    fn far_ops_reject_mismatched_inputs() {
        let g3 = small_grid(3, 0.5, 3);
        let d3 = zero_far_data(3, Excitation::Velocity);
        assert!(matches!(indicator_far(&d3, &g3, 2), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            indicator_disp_far(&d3, &g3),
            Err(Error::ExcitationMismatch { .. })
        ));
        let near = zero_near_data(Excitation::Velocity);
        assert!(matches!(
            indicator_far(&near, &g3, 3),
            Err(Error::InvalidArgument(_))
        ));
        let d2 = zero_far_data(2, Excitation::Displacement);
        assert!(matches!(indicator_disp_far(&d2, &g3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn far_nyquist_guard_fires() {
        let dgrid = make_direction_grid(2, 50.0, 5).unwrap();
        let axis = TimeAxis::from_parts(-1.0, 0.05, 41).unwrap();
        let rows = vec![vec![0.0; axis.n]; dgrid.nodes.len()];
        let data =
            TimeSeriesData::new(2, Excitation::Velocity, axis, ChannelMeta::Grid(dgrid), rows)
                .unwrap();
        let grid = small_grid(2, 0.5, 3);
        match indicator_far(&data, &grid, 2).unwrap_err() {
            Error::MissingSpectrum { k, limit, .. } => {
                assert!(k > limit, "k = {k}, limit = {limit}");
            }
            other => panic!("expected a missing-spectrum error, got {other:?}"),
        }
    }

    #[test]
    fn near_freq_recovers_gaussian_amplitude_2d() {
        let amplitude = 1.5;
        let center = [0.15, -0.1, 0.0];
        let spec = gaussian_spec(2, amplitude, center, 20.0);
        let sensors = make_circle_array(80, 1.0).unwrap();
        let axis = TimeAxis::new(0.0, 30.0, 3000).unwrap();
        let quad = QuadratureParams { n_theta: 16, n_phi: 16, n_gauss: 24, scan: 48 };
        let data = near_field_2d(&spec, &sensors, &axis, &quad).unwrap();
        let k_axis = WavenumberAxis::new(0.0, 30.0, 100).unwrap();
        let spectral = time_to_freq(&data, &k_axis).unwrap();
        let bounds = [[center[0] - 0.2, center[0] + 0.2], [center[1] - 0.2, center[1] + 0.2]];
        let grid = make_image_grid(2, &bounds, &[5, 5]).unwrap();
        let rec = indicator_near_freq(&spectral, &grid, 2).unwrap();
        let center_flat = grid.index_of(center);
        let got = rec.grid.values[center_flat];
        assert!(
            (got - amplitude).abs() <= 0.1 * amplitude,
            "value at center {got:.4}, amplitude {amplitude}"
        );
        let best = (0..rec.grid.len())
            .max_by(|&a, &b| rec.grid.values[a].total_cmp(&rec.grid.values[b]))
            .unwrap();
        assert_eq!(best, center_flat);
        assert_eq!(rec.meta.k_band, Some((0.0, 30.0)));
    }

    /// a p1 + p2 for time data of identical shape.
    fn lincomb_time(a: f64, d1: &TimeSeriesData, d2: &TimeSeriesData) -> TimeSeriesData {
        let mut out = d1.clone();
        for (row, r2) in out.channels.iter_mut().zip(&d2.channels) {
            for (v, &w) in row.iter_mut().zip(r2) {
                *v = a * *v + w;
            }
        }
        out
    }

    fn lincomb_spectral(a: f64, d1: &SpectralData, d2: &SpectralData) -> SpectralData {
        let mut out = d1.clone();
        for (row, r2) in out.channels.iter_mut().zip(&d2.channels) {
            for (v, &w) in row.iter_mut().zip(r2) {
                *v = a * *v + w;
            }
        }
        out
    }

    /// Deterministic filler so linearity is checked on non-trivial data.
    fn fill_time(data: &mut TimeSeriesData, phase: f64) {
        for (i, row) in data.channels.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (phase + 0.37 * i as f64 + 0.11 * j as f64).sin();
            }
        }
    }

    fn fill_spectral(data: &mut SpectralData, phase: f64) {
        for (i, row) in data.channels.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let t = phase + 0.29 * i as f64 + 0.17 * j as f64;
                *v = Complex64::new(t.sin(), t.cos());
            }
        }
    }

    #[test]
    fn every_indicator_is_linear_in_its_data() {
        let a = 2.5;
        let g3 = small_grid(3, 0.35, 2);
        let g2 = small_grid(2, 0.35, 2);
        let tol = 1e-9;

        let check = |lhs: &ReconstructionResult, r1: &ReconstructionResult, r2: &ReconstructionResult| {
            for i in 0..lhs.grid.len() {
                let want = a * r1.grid.values[i] + r2.grid.values[i];
                let scale = 1.0_f64.max(want.abs());
                assert!(
                    (lhs.grid.values[i] - want).abs() <= tol * scale,
                    "node {i}: {} vs {}",
                    lhs.grid.values[i],
                    want
                );
            }
        };

        // retarded-time pair
        for exc in [Excitation::Velocity, Excitation::Displacement] {
            let mut d1 = zero_near_data(exc);
            let mut d2 = zero_near_data(exc);
            fill_time(&mut d1, 0.3);
            fill_time(&mut d2, 1.1);
            let f = FilterParams::new(3).unwrap();
            let run = |d: &TimeSeriesData| match exc {
                Excitation::Velocity => indicator_near_time_3d(d, &g3, &f).unwrap(),
                Excitation::Displacement => indicator_near_time_disp_3d(d, &g3, &f).unwrap(),
            };
            check(&run(&lincomb_time(a, &d1, &d2)), &run(&d1), &run(&d2));
        }

        // frequency-domain trio
        for (dim, exc) in [(2, Excitation::Velocity), (3, Excitation::Velocity), (3, Excitation::Displacement)] {
            let mut s1 = zero_spectral(dim, exc);
            let mut s2 = zero_spectral(dim, exc);
            fill_spectral(&mut s1, 0.4);
            fill_spectral(&mut s2, 1.7);
            let g = if dim == 2 { &g2 } else { &g3 };
            let run = |s: &SpectralData| match exc {
                Excitation::Velocity => indicator_near_freq(s, g, dim).unwrap(),
                Excitation::Displacement => indicator_disp_near_freq(s, g).unwrap(),
            };
            check(&run(&lincomb_spectral(a, &s1, &s2)), &run(&s1), &run(&s2));
        }

        // far-field trio
        for (dim, exc) in [(2, Excitation::Velocity), (3, Excitation::Velocity), (3, Excitation::Displacement)] {
            let mut d1 = zero_far_data(dim, exc);
            let mut d2 = zero_far_data(dim, exc);
            fill_time(&mut d1, 0.6);
            fill_time(&mut d2, 2.3);
            let g = if dim == 2 { &g2 } else { &g3 };
            let run = |d: &TimeSeriesData| match exc {
                Excitation::Velocity => indicator_far(d, g, dim).unwrap(),
                Excitation::Displacement => indicator_disp_far(d, g).unwrap(),
            };
            check(&run(&lincomb_time(a, &d1, &d2)), &run(&d1), &run(&d2));
        }
    }

    /// Direct per-image-point evaluation of the far-field sum, time
    /// quadrature recomputed for every (point, node) pair.
    fn far_brute(data: &TimeSeriesData, grid: &ImageGrid, kernel: FarKernel) -> Vec<Complex64> {
        let dgrid = match &data.meta {
            ChannelMeta::Grid(g) => g,
            _ => unreachable!(),
        };
        (0..grid.len())
            .map(|flat| {
                let y = grid.position(flat);
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, node) in dgrid.nodes.iter().enumerate() {
                    let p = transform_at(&data.channels[j], &data.axis, node.len);
                    let c = far_coefficient(kernel, data.dim, dgrid.cell_volume, node.len, p);
                    let xy = node.point[0] * y[0] + node.point[1] * y[1] + node.point[2] * y[2];
                    acc += c * Complex64::from_polar(1.0, xy);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn far_spectral_path_matches_brute_force() {
        let cases: Vec<(usize, Excitation, FarKernel)> = vec![
            (2, Excitation::Velocity, FarKernel::Velocity),
            (3, Excitation::Velocity, FarKernel::Velocity),
            (3, Excitation::Displacement, FarKernel::Displacement),
        ];
        for (dim, exc, kernel) in cases {
            let dgrid = make_direction_grid(dim, 2.0, 5).unwrap();
            let axis = TimeAxis::new(-1.5, 1.5, 60).unwrap();
            let mut data = TimeSeriesData::new(
                dim,
                Excitation::Velocity,
                axis,
                ChannelMeta::Grid(dgrid),
                vec![vec![0.0; 61]; if dim == 2 { 24 } else { 124 }],
            )
            .unwrap();
            data.excitation = exc;
            fill_time(&mut data, 0.9);
            let grid = small_grid(dim, 0.8, 3);
            let rec = match kernel {
                FarKernel::Velocity => indicator_far(&data, &grid, dim).unwrap(),
                FarKernel::Displacement => indicator_disp_far(&data, &grid).unwrap(),
            };
            let brute = far_brute(&data, &grid, kernel);
            let mut brute_residue = 0.0;
            for (i, b) in brute.iter().enumerate() {
                let scale = 1.0_f64.max(b.re.abs());
                assert!(
                    (rec.grid.values[i] - b.re).abs() <= 1e-8 * scale,
                    "dim {dim}: node {i}: {} vs {}",
                    rec.grid.values[i],
                    b.re
                );
                brute_residue += b.im.abs();
            }
            brute_residue /= brute.len() as f64;
            let residue = rec.meta.imag_residue.unwrap();
            assert!((residue - brute_residue).abs() <= 1e-8 * 1.0_f64.max(brute_residue));
        }
    }

    #[test]
    fn far2d_translation_moves_the_peak_with_the_source() {
        let s = 30.0;
        let shift = [0.3, -0.2, 0.0];
        let spec0 = gaussian_spec(2, 1.0, [0.0, 0.0, 0.0], s);
        let spec1 = gaussian_spec(2, 1.0, shift, s);
        let dgrid = make_direction_grid(2, 6.0, 13).unwrap();
        let axis = TimeAxis::new(-2.0, 12.0, 280).unwrap();
        let quad = QuadratureParams { n_theta: 16, n_phi: 16, n_gauss: 32, scan: 48 };
        let d0 = far_field_2d(&spec0, &dgrid, &axis, &quad).unwrap();
        let d1 = far_field_2d(&spec1, &dgrid, &axis, &quad).unwrap();
        let grid = small_grid(2, 0.5, 11);
        let r0 = indicator_far(&d0, &grid, 2).unwrap();
        let r1 = indicator_far(&d1, &grid, 2).unwrap();
        let argmax = |r: &ReconstructionResult| {
            (0..r.grid.len())
                .max_by(|&a, &b| r.grid.values[a].total_cmp(&r.grid.values[b]))
                .unwrap()
        };
        let p0 = grid.multi_index(argmax(&r0));
        let p1 = grid.multi_index(argmax(&r1));
        // cell 0.1: the shift is exactly (3, -2) cells
        let moved = [p1[0] as isize - p0[0] as isize, p1[1] as isize - p0[1] as isize];
        assert!((moved[0] - 3).abs() <= 1, "x offset {}", moved[0]);
        assert!((moved[1] + 2).abs() <= 1, "y offset {}", moved[1]);
    }

    /// Far-field trace of the unit ball of radius a centered at the origin:
    /// every channel carries (a^2 - t^2)/4 inside |t| <= a.
    fn ball_far_rows(axis: &TimeAxis, n_channels: usize, a: f64) -> Vec<Vec<f64>> {
        let row: Vec<f64> = axis
            .times()
            .iter()
            .map(|&t| if t.abs() <= a { (a * a - t * t) / 4.0 } else { 0.0 })
            .collect();
        vec![row; n_channels]
    }

    #[test]
    fn far3d_ball_reconstruction_is_symmetric_and_quantitative() {
        let a = 0.4;
        let dgrid = make_direction_grid(3, 10.0, 15).unwrap();
        let axis = TimeAxis::new(-1.0, 1.0, 80).unwrap();
        let rows = ball_far_rows(&axis, dgrid.nodes.len(), a);
        let data =
            TimeSeriesData::new(3, Excitation::Velocity, axis, ChannelMeta::Grid(dgrid), rows)
                .unwrap();
        let grid = small_grid(3, 0.6, 9);
        let rec = indicator_far(&data, &grid, 3).unwrap();

        let mut interior = Vec::new();
        let mut exterior = Vec::new();
        for flat in 0..grid.len() {
            let p = rec.grid.position(flat);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r <= 0.7 * a {
                interior.push(rec.grid.values[flat]);
            } else if r >= 1.4 * a {
                exterior.push(rec.grid.values[flat]);
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let im = mean(&interior);
        let em = mean(&exterior);
        assert!((im - 1.0).abs() <= 0.25, "interior mean {im:.4}");
        assert!(em.abs() <= 0.3, "exterior mean {em:.4}");

        // identical channels and symmetric grids: the image inherits every
        // axis flip and axis swap of the cube
        let m = grid.shape[0];
        for flat in 0..grid.len() {
            let [i, j, k] = rec.grid.multi_index(flat);
            let v = rec.grid.values[flat];
            let flip = rec.grid.values[rec.grid.flat_index([m - 1 - i, j, k])];
            let swap = rec.grid.values[rec.grid.flat_index([j, i, k])];
            assert!((v - flip).abs() <= 1e-6 * 1.0_f64.max(v.abs()));
            assert!((v - swap).abs() <= 1e-6 * 1.0_f64.max(v.abs()));
        }
    }

    #[test]
    fn near_freq_symmetric_inputs_give_symmetric_image() {
        let sensors = make_circle_array(64, 1.5).unwrap();
        let k_axis = WavenumberAxis::new(0.0, 8.0, 20).unwrap();
        // sensor-independent rows: whatever the k-profile, the image must
        // inherit the symmetry of the circle and the square grid
        let row: Vec<Complex64> = (0..20)
            .map(|j| {
                let t = 0.3 + 0.41 * j as f64;
                Complex64::new(t.sin(), (0.2 * j as f64).cos())
            })
            .collect();
        let spectral = SpectralData::new(
            2,
            Excitation::Velocity,
            k_axis,
            ChannelMeta::Sensors(sensors),
            vec![row; 64],
        )
        .unwrap();
        let grid = small_grid(2, 0.4, 7);
        let rec = indicator_near_freq(&spectral, &grid, 2).unwrap();
        let m = grid.shape[0];
        for flat in 0..grid.len() {
            let [i, j, _] = rec.grid.multi_index(flat);
            let v = rec.grid.values[flat];
            let flip = rec.grid.values[rec.grid.flat_index([m - 1 - i, j, 0])];
            let swap = rec.grid.values[rec.grid.flat_index([j, i, 0])];
            assert!((v - flip).abs() <= 1e-6 * 1.0_f64.max(v.abs()));
            assert!((v - swap).abs() <= 1e-6 * 1.0_f64.max(v.abs()));
        }
    }

    #[test]
    fn disp_far_ball_is_positive_inside() {
        let a = 0.4;
        let dgrid = make_direction_grid(3, 10.0, 15).unwrap();
        let axis = TimeAxis::new(-1.0, 1.0, 80).unwrap();
        // displacement trace of the ball: -t/2 inside |t| < a, with the
        // jump at |t| = a sampled at its midpoint value
        let row: Vec<f64> = axis
            .times()
            .iter()
            .map(|&t| {
                if t.abs() < a - 1e-12 {
                    -t / 2.0
                } else if (t.abs() - a).abs() <= 1e-12 {
                    -t / 4.0
                } else {
                    0.0
                }
            })
            .collect();
        let rows = vec![row; dgrid.nodes.len()];
        let mut data =
            TimeSeriesData::new(3, Excitation::Velocity, axis, ChannelMeta::Grid(dgrid), rows)
                .unwrap();
        data.excitation = Excitation::Displacement;
        let grid = small_grid(3, 0.6, 9);
        let rec = indicator_disp_far(&data, &grid).unwrap();
        let mut interior = Vec::new();
        for flat in 0..grid.len() {
            let p = rec.grid.position(flat);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r <= 0.7 * a {
                interior.push(rec.grid.values[flat]);
            }
        }
        assert!(interior.iter().all(|&v| v > 0.0), "interior values {interior:?}");
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean - 1.0).abs() <= 0.3, "interior mean {mean:.4}");
    }

    #[test]
    fn disp_near_freq_ball_interior_mean_is_quantitative() {
        let a = 0.4;
        let spec = SourceSpec::new(
            3,
            vec![SourceTerm::BallIndicator { center: [0.0, 0.0, 0.0], radius: a, level: 1.0 }],
            0.5,
        )
        .unwrap();
        let sensors = make_sphere_array(400, 1.0).unwrap();
        let axis = TimeAxis::new(0.0, 2.0, 400).unwrap();
        let quad = QuadratureParams::default();
        let data = near_field_displacement_3d(&spec, &sensors, &axis, &quad).unwrap();

        let k_axis = WavenumberAxis::new(0.0, 20.0, 60).unwrap();
        let spectral = time_to_freq(&data, &k_axis).unwrap();
        let grid = small_grid(3, 0.55, 9);
        let freq = indicator_disp_near_freq(&spectral, &grid).unwrap();

        let mut interior = Vec::new();
        for flat in 0..grid.len() {
            let p = grid.position(flat);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r <= 0.8 * a {
                interior.push(freq.grid.values[flat]);
            }
        }
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean - 1.0).abs() <= 0.15, "interior mean {mean:.4}");
    }

    /// The cross-method oracle runs on a smooth source: the retarded-time
    /// path differentiates the traces, and a displacement trace of a
    /// discontinuous source carries genuine jumps that no fixed stencil
    /// resolves.
    #[test]
    fn disp_time_and_freq_paths_agree_on_smooth_source() {
        let center = [0.1, -0.05, 0.12];
        let spec = SourceSpec::new(
            3,
            vec![SourceTerm::Gaussian { amplitude: 1.0, center, sharpness: 25.0 }],
            0.55,
        )
        .unwrap();
        let sensors = make_sphere_array(200, 1.0).unwrap();
        let axis = TimeAxis::new(0.0, 2.0, 200).unwrap();
        let quad = QuadratureParams { n_theta: 20, n_phi: 20, n_gauss: 24, scan: 32 };
        let data = near_field_displacement_3d(&spec, &sensors, &axis, &quad).unwrap();

        let k_axis = WavenumberAxis::new(0.0, 20.0, 50).unwrap();
        let spectral = time_to_freq(&data, &k_axis).unwrap();
        let grid = small_grid(3, 0.45, 9);
        let freq = indicator_disp_near_freq(&spectral, &grid).unwrap();
        let time = indicator_near_time_disp_3d(&data, &grid, &FilterParams::none()).unwrap();

        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.len() {
            num += (freq.grid.values[i] - time.grid.values[i]).powi(2);
            den += freq.grid.values[i].powi(2);
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 0.05, "cross-method relative discrepancy {rel:.4}");
    }
}
