//! Frequency-domain data and the identities tying the two domains together.
//!
//! The transform convention throughout is F[g](k) = integral of g(t) e^{+ikt}
//! over the trace's time range, approximated with the trapezoid rule on the
//! trace's own axis. This is a continuous-transform approximation, not an
//! FFT: wavenumber nodes are free to sit anywhere, which the indicator
//! integrals need.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{
    near_field_2d, near_field_3d, ChannelMeta, Excitation, QuadratureParams, TimeAxis,
    TimeSeriesData,
};
use crate::geometry::SensorArray;
use crate::sources::SourceSpec;
use crate::specfun::{bessel_j0, hankel1, kernel_normal_derivative, sph_bessel_j0, KernelFamily};

const PI: f64 = std::f64::consts::PI;

/// Open wavenumber band (k_min, k_max) sampled at the midpoints of n equal
/// cells. Nodes are strictly increasing and never touch k = 0, where the
/// outgoing kernels are singular.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberAxis {
    pub k_min: f64,
    pub k_max: f64,
    pub n: usize,
}

impl WavenumberAxis {
    pub fn new(k_min: f64, k_max: f64, n: usize) -> Result<WavenumberAxis> {
        if !k_min.is_finite() || k_min < 0.0 {
            return Err(Error::validation("k_min", "band start must be finite and nonnegative"));
        }
        if !k_max.is_finite() || !(k_max > k_min) {
            return Err(Error::validation("k_max", "band end must exceed the band start"));
        }
        if n == 0 {
            return Err(Error::validation("steps", "need at least one wavenumber node"));
        }
        Ok(WavenumberAxis { k_min, k_max, n })
    }

    /// Cell width, which is also the weight of each node in midpoint-rule
    /// integrals over the band.
    pub fn dk(&self) -> f64 {
        (self.k_max - self.k_min) / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.k_min + (j as f64 + 0.5) * self.dk()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }
}

/// Multi-channel frequency data, one complex row per channel with one entry
/// per wavenumber node.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub dim: usize,
    pub excitation: Excitation,
    pub k_axis: WavenumberAxis,
    pub meta: ChannelMeta,
    pub channels: Vec<Vec<Complex64>>,
    /// noise level of the time data this was transformed from
    pub snr_db: Option<f64>,
}

impl SpectralData {
    pub fn new(
        dim: usize,
        excitation: Excitation,
        k_axis: WavenumberAxis,
        meta: ChannelMeta,
        channels: Vec<Vec<Complex64>>,
    ) -> Result<SpectralData> {
        if channels.len() != meta.channel_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} data rows for {} channels",
                channels.len(),
                meta.channel_count()
            )));
        }
        for (i, row) in channels.iter().enumerate() {
            if row.len() != k_axis.n {
                return Err(Error::ShapeMismatch(format!(
                    "channel {i} has {} entries, axis has {}",
                    row.len(),
                    k_axis.n
                )));
            }
        }
        Ok(SpectralData { dim, excitation, k_axis, meta, channels, snr_db: None })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }
}

/// Trapezoid approximation of F[g](k) = integral of g(t) e^{+ikt} dt over the
/// axis range. Works for any real k; negative k gives the conjugate of the
/// value at |k| because the trace is real.
pub fn transform_at(row: &[f64], axis: &TimeAxis, k: f64) -> Complex64 {
    debug_assert_eq!(row.len(), axis.n);
    let rot = Complex64::from_polar(1.0, k * axis.dt);
    let mut phase = Complex64::from_polar(1.0, k * axis.t0);
    let mut sum = Complex64::new(0.0, 0.0);
    let last = row.len() - 1;
    for (j, &g) in row.iter().enumerate() {
        let w = if j == 0 || j == last { 0.5 * g } else { g };
        sum += phase * w;
        phase *= rot;
    }
    sum * axis.dt
}

/// Transforms every channel onto the nodes of `k_axis`.
pub fn time_to_freq(data: &TimeSeriesData, k_axis: &WavenumberAxis) -> Result<SpectralData> {
    let nodes = k_axis.nodes();
    let channels: Vec<Vec<Complex64>> = data
        .channels
        .par_iter()
        .map(|row| nodes.iter().map(|&k| transform_at(row, &data.axis, k)).collect())
        .collect();
    let mut out =
        SpectralData::new(data.dim, data.excitation, k_axis.clone(), data.meta.clone(), channels)?;
    out.snr_db = data.snr_db;
    Ok(out)
}

fn point_from_slice(label: &str, p: &[f64], dim: usize) -> Result<[f64; 3]> {
    if p.len() != dim {
        return Err(Error::validation(
            label,
            format!("expected {dim} coordinates, got {}", p.len()),
        ));
    }
    let mut out = [0.0; 3];
    out[..dim].copy_from_slice(p);
    Ok(out)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Outgoing fundamental solution of the Helmholtz equation.
fn helmholtz_kernel(dim: usize, r: f64, k: f64) -> Result<Complex64> {
    match dim {
        2 => Ok(Complex64::new(0.0, 0.25) * hankel1(0, k * r)?),
        3 => Ok(Complex64::from_polar(1.0, k * r) / (4.0 * PI * r)),
        _ => Err(Error::DimensionMismatch { expected: 3, got: dim }),
    }
}

/// Discretization of the symmetric bilinear form
///   I(y, z) = integral over the sensor surface of
///             Phi(x, y; k) d/dnu F0(|x - z|; k) ds(x),
/// where Phi is the outgoing kernel and F0 the regular radial wave function
/// (J0 in 2D, j0 in 3D). The continuum form satisfies I(y, z) = I(z, y) for
/// points strictly inside the surface; the discrete sum inherits that up to
/// quadrature error.
pub fn reciprocity_integral(
    y: &[f64],
    z: &[f64],
    sensors: &SensorArray,
    k: f64,
) -> Result<Complex64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    let dim = sensors.dim;
    let yp = point_from_slice("y", y, dim)?;
    let zp = point_from_slice("z", z, dim)?;
    for (label, p) in [("y", yp), ("z", zp)] {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        if r >= sensors.radius {
            return Err(Error::geometry(format!(
                "point {label} at distance {r:.6} is not strictly inside the sensor surface of radius {}",
                sensors.radius
            )));
        }
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (x, nu) in sensors.points.iter().zip(&sensors.normals) {
        let phi = helmholtz_kernel(dim, dist(*x, yp), k)?;
        let dn = kernel_normal_derivative(dim, KernelFamily::Bessel, *x, *nu, zp, k)?;
        sum += phi * dn;
    }
    Ok(sum * sensors.weight)
}

/// Relative defect of the imaginary-part identity
///   Im u(x, k) = k/(4 pi) integral of j0(k|x - z|) S(z) dz   (3D)
///   Im u(x, k) = 1/4 integral of J0(k|x - z|) S(z) dz        (2D)
/// at a point x outside the source support, where u(x, k) is the transform
/// of the velocity trace at x. The trace and the volume quadrature are built
/// internally; the residual is |Im u - rhs| / |u|, or the absolute defect
/// when u vanishes (zero source).
pub fn imag_part_identity_residual(
    spec: &SourceSpec,
    x: &[f64],
    k: f64,
    quad: &QuadratureParams,
) -> Result<f64> {
    let controls = ResidualControls::preset(spec, k);
    imag_residual_with_controls(spec, x, k, quad, &controls)
}

/// Discretization knobs of the imaginary-part check, split out so the
/// convergence of the residual under refinement is itself testable.
pub(crate) struct ResidualControls {
    pub t_end: f64,
    pub dt: f64,
    pub raster_n: usize,
}

impl ResidualControls {
    pub(crate) fn preset(spec: &SourceSpec, k: f64) -> ResidualControls {
        // dt keeps the trapezoid phase error (k dt)^2 / 12 under about 2e-5.
        let dt_phase = 0.05 / k.max(1.0);
        if spec.dim == 2 {
            // 2D traces have a slow tail; 60 units of travel leave a
            // truncation well below the identity tolerances.
            ResidualControls { t_end: 60.0, dt: dt_phase.min(0.01), raster_n: 400 }
        } else {
            ResidualControls { t_end: 0.0, dt: dt_phase.min(0.005), raster_n: 160 }
        }
    }
}

pub(crate) fn imag_residual_with_controls(
    spec: &SourceSpec,
    x: &[f64],
    k: f64,
    quad: &QuadratureParams,
    controls: &ResidualControls,
) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::invalid(format!("wavenumber must be positive, got {k}")));
    }
    let dim = spec.dim;
    let xp = point_from_slice("x", x, dim)?;
    let d = (xp[0] * xp[0] + xp[1] * xp[1] + xp[2] * xp[2]).sqrt();
    if d < spec.support_radius {
        return Err(Error::geometry(format!(
            "evaluation point at distance {d:.6} lies inside the source support ball of radius {}",
            spec.support_radius
        )));
    }

    // One-sensor array at x; the stored weight is irrelevant here.
    let sensor = SensorArray {
        dim,
        radius: d,
        points: vec![xp],
        normals: vec![[xp[0] / d, xp[1] / d, xp[2] / d]],
        weight: 1.0,
    };
    // In 3D the trace vanishes outside [d - R, d + R]; in 2D the window is a
    // truncation choice carried by the controls.
    let t_end = if dim == 2 { controls.t_end } else { d + spec.support_radius + 0.25 };
    let steps = (t_end / controls.dt).ceil() as usize;
    let axis = TimeAxis::new(0.0, t_end, steps.max(16))?;
    let data = match dim {
        2 => near_field_2d(spec, &sensor, &axis, quad)?,
        _ => near_field_3d(spec, &sensor, &axis, quad)?,
    };
    let u = transform_at(&data.channels[0], &axis, k);

    let rhs = source_bessel_moment(spec, xp, k, controls.raster_n)
        * match dim {
            2 => 0.25,
            _ => k / (4.0 * PI),
        };

    let defect = (u.im - rhs).abs();
    if u.norm() < 1e-300 {
        return Ok(defect);
    }
    Ok(defect / u.norm())
}

/// Midpoint-rule volume integral of F0(k|x - z|) S(z) over the support box,
/// with F0 = J0 (2D) or j0 (3D).
fn source_bessel_moment(spec: &SourceSpec, x: [f64; 3], k: f64, n: usize) -> f64 {
    let rad = spec.support_radius;
    let h = 2.0 * rad / n as f64;
    let coord = |i: usize| -rad + (i as f64 + 0.5) * h;
    if spec.dim == 2 {
        let rows: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let zy = coord(i);
                let mut acc = 0.0;
                for j in 0..n {
                    let z = [coord(j), zy, 0.0];
                    let s = spec.eval_point(z);
                    if s != 0.0 {
                        acc += bessel_j0(k * dist(x, z)) * s;
                    }
                }
                acc
            })
            .sum();
        rows * h * h
    } else {
        let rows: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                let zz = coord(i);
                let mut acc = 0.0;
                for j in 0..n {
                    let zy = coord(j);
                    for l in 0..n {
                        let z = [coord(l), zy, zz];
                        let s = spec.eval_point(z);
                        if s != 0.0 {
                            acc += sph_bessel_j0(k * dist(x, z)) * s;
                        }
                    }
                }
                acc
            })
            .sum();
        rows * h * h * h
    }
}
