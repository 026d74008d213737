//! Analytic initial sources: sums of closed-form terms with explicit support
//! information.
//!
//! A [`SourceSpec`] owns a list of [`SourceTerm`]s plus a bounding support
//! ball of radius `support_radius` about the origin. Construction validates
//! every term and precompiles per-term acceleration data used by the forward
//! quadratures: bounding balls, and for every 3D indicator term a profile
//! test in body-local (z, r) coordinates. All 3D indicator terms are
//! rotationally symmetric by construction (radial stars about the vertical
//! axis, generating curves about a coordinate axis), which the wave-data
//! engines exploit to integrate the angular direction exactly.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ImageGrid;

/// One additive term of an initial source.
#[derive(Debug, Clone)]
pub enum SourceTerm {
    /// amplitude * exp(-sharpness |y - center|^2)
    Gaussian { amplitude: f64, center: [f64; 3], sharpness: f64 },
    /// amplitude * (y2^2 - y1^2) * exp(-sharpness |y|^2), 2D only
    PolyGaussian { amplitude: f64, sharpness: f64 },
    /// `level` inside the ball, 0 outside
    BallIndicator { center: [f64; 3], radius: f64, level: f64 },
    /// `level` inside the star-shaped body r <= base + sum b cos(m theta)
    /// about `center`; theta is the polar angle from +z (3D) or the plane
    /// angle (2D)
    RadialStarIndicator {
        center: [f64; 3],
        base: f64,
        harmonics: Vec<(f64, u32)>,
        level: f64,
    },
    /// `level` inside the solid obtained by rotating a generating curve
    /// (axial, perpendicular >= 0) about the given coordinate axis; 3D only
    AxisymmetricCurveIndicator {
        curve: Vec<[f64; 2]>,
        axis: usize,
        level: f64,
    },
}

/// Uniform radius lookup for a rotational body whose half-section is
/// star-shaped about a point on the axis.
#[derive(Debug)]
pub(crate) struct AxisymLut {
    pub center_a: f64,
    /// Boundary radius at uniform angles over [0, pi].
    pub radii: Vec<f64>,
}

impl AxisymLut {
    fn radius_at(&self, psi: f64) -> f64 {
        let n = self.radii.len();
        let t = (psi / std::f64::consts::PI).clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (t as usize).min(n - 2);
        let frac = t - i as f64;
        self.radii[i] * (1.0 - frac) + self.radii[i + 1] * frac
    }
}

/// Interior test of a 3D rotational body in body-local coordinates:
/// z along the symmetry axis measured from the body center, r the distance
/// to the body center.
#[derive(Debug, Clone)]
pub(crate) enum ZrProfile {
    Star {
        base: f64,
        harmonics: Arc<Vec<(f64, u32)>>,
    },
    Curve {
        /// absolute axial coordinate of the body center
        a_shift: f64,
        polygon: Arc<Vec<[f64; 2]>>,
        lut: Option<Arc<AxisymLut>>,
    },
}

impl ZrProfile {
    pub(crate) fn inside_zr(&self, z: f64, r: f64) -> bool {
        match self {
            ZrProfile::Star { base, harmonics } => {
                if r == 0.0 {
                    return true;
                }
                let c = (z / r).clamp(-1.0, 1.0);
                r <= star_radius_cos(*base, harmonics, c)
            }
            ZrProfile::Curve { a_shift, polygon, lut } => {
                let a = z + a_shift;
                let p = (r * r - z * z).max(0.0).sqrt();
                if let Some(lut) = lut {
                    let da = a - lut.center_a;
                    let rr = (da * da + p * p).sqrt();
                    if rr == 0.0 {
                        return true;
                    }
                    rr <= lut.radius_at(p.atan2(da))
                } else {
                    winding_number(polygon, [a, p]) != 0
                }
            }
        }
    }
}

/// rho(theta) evaluated through Chebyshev recurrences on c = cos(theta),
/// avoiding acos in the hot path.
pub(crate) fn star_radius_cos(base: f64, harmonics: &[(f64, u32)], c: f64) -> f64 {
    let m_max = harmonics.iter().map(|&(_, m)| m).max().unwrap_or(0);
    let mut r = base;
    if m_max == 0 {
        for &(b, _) in harmonics {
            r += b;
        }
        return r;
    }
    // T_m(c) = cos(m theta)
    let mut t_prev = 1.0;
    let mut t_cur = c;
    let mut table = Vec::with_capacity(m_max as usize + 1);
    table.push(1.0);
    if m_max >= 1 {
        table.push(c);
    }
    for _ in 2..=m_max {
        let t_next = 2.0 * c * t_cur - t_prev;
        t_prev = t_cur;
        t_cur = t_next;
        table.push(t_cur);
    }
    for &(b, m) in harmonics {
        r += b * table[m as usize];
    }
    r
}

fn star_radius_angle(base: f64, harmonics: &[(f64, u32)], theta: f64) -> f64 {
    let mut r = base;
    for &(b, m) in harmonics {
        r += b * (m as f64 * theta).cos();
    }
    r
}

/// Compiled form of a term: bounding ball plus the evaluation strategy the
/// quadrature engines dispatch on.
#[derive(Debug, Clone)]
pub(crate) struct CompiledTerm {
    pub ball_center: [f64; 3],
    pub ball_radius: f64,
    pub kind: CompiledKind,
}

#[derive(Debug, Clone)]
pub(crate) enum CompiledKind {
    Gaussian { amplitude: f64, center: [f64; 3], sharpness: f64 },
    PolyGaussian { amplitude: f64, sharpness: f64 },
    Ball { center: [f64; 3], radius: f64, level: f64 },
    /// 2D star-shaped indicator about `center`
    Star2 {
        level: f64,
        center: [f64; 3],
        base: f64,
        harmonics: Arc<Vec<(f64, u32)>>,
    },
    /// any 3D indicator: rotational body with axis direction `axis_dir`
    /// through `center` (the bounding-ball center, on the axis)
    Axisym3 {
        level: f64,
        center: [f64; 3],
        axis_dir: [f64; 3],
        profile: ZrProfile,
    },
}

impl CompiledTerm {
    pub(crate) fn eval(&self, y: [f64; 3]) -> f64 {
        match &self.kind {
            CompiledKind::Gaussian { amplitude, center, sharpness } => {
                let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
                amplitude * (-sharpness * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2])).exp()
            }
            CompiledKind::PolyGaussian { amplitude, sharpness } => {
                let r2 = y[0] * y[0] + y[1] * y[1];
                amplitude * (y[1] * y[1] - y[0] * y[0]) * (-sharpness * r2).exp()
            }
            CompiledKind::Ball { center, radius, level } => {
                let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
                if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius {
                    *level
                } else {
                    0.0
                }
            }
            CompiledKind::Star2 { level, center, base, harmonics } => {
                let dx = y[0] - center[0];
                let dy = y[1] - center[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r <= star_radius_angle(*base, harmonics, dy.atan2(dx)) {
                    *level
                } else {
                    0.0
                }
            }
            CompiledKind::Axisym3 { level, center, axis_dir, profile } => {
                let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
                let z = d[0] * axis_dir[0] + d[1] * axis_dir[1] + d[2] * axis_dir[2];
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                if profile.inside_zr(z, r) {
                    *level
                } else {
                    0.0
                }
            }
        }
    }
}

/// An initial source: dimension, additive terms, and a bounding support ball
/// of radius `support_radius` centred at the origin.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub dim: usize,
    pub terms: Vec<SourceTerm>,
    pub support_radius: f64,
    compiled: Vec<CompiledTerm>,
}

/// Number of boundary samples used when densifying generating curves for
/// interior tests.
const CURVE_SAMPLES: usize = 4096;

impl SourceSpec {
    pub fn new(dim: usize, terms: Vec<SourceTerm>, support_radius: f64) -> Result<SourceSpec> {
        if dim != 2 && dim != 3 {
            return Err(Error::DimensionMismatch { expected: 2, got: dim });
        }
        if !(support_radius > 0.0) {
            return Err(Error::validation("support_radius", "must be positive"));
        }
        let compiled = terms
            .iter()
            .map(|t| compile_term(dim, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(SourceSpec { dim, terms, support_radius, compiled })
    }

    pub(crate) fn compiled(&self) -> &[CompiledTerm] {
        &self.compiled
    }

    /// Unchecked point evaluation; `y` must already have the spec dimension
    /// (third component zero in 2D).
    pub(crate) fn eval_point(&self, y: [f64; 3]) -> f64 {
        self.compiled.iter().map(|t| t.eval(y)).sum()
    }

    /// Largest absolute term amplitude, used as the scale for statistical
    /// support checks.
    pub fn amplitude_scale(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                SourceTerm::Gaussian { amplitude, .. } => amplitude.abs(),
                SourceTerm::PolyGaussian { amplitude, sharpness } => {
                    // max of |amp| r^2 exp(-s r^2) over r
                    amplitude.abs() / (sharpness * std::f64::consts::E)
                }
                SourceTerm::BallIndicator { level, .. } => level.abs(),
                SourceTerm::RadialStarIndicator { level, .. } => level.abs(),
                SourceTerm::AxisymmetricCurveIndicator { level, .. } => level.abs(),
            })
            .fold(0.0, f64::max)
    }
}

fn compile_term(dim: usize, term: &SourceTerm) -> Result<CompiledTerm> {
    match term {
        SourceTerm::Gaussian { amplitude, center, sharpness } => {
            if !(sharpness > &0.0) {
                return Err(Error::validation("sharpness", "must be positive"));
            }
            if dim == 2 && center[2] != 0.0 {
                return Err(Error::validation("center", "2D term with nonzero third component"));
            }
            if !amplitude.is_finite() {
                return Err(Error::validation("amplitude", "must be finite"));
            }
            // exp(-42) ~ 5.7e-19: beyond this radius the term is numerically zero
            let r_eff = (42.0 / sharpness).sqrt();
            Ok(CompiledTerm {
                ball_center: *center,
                ball_radius: r_eff,
                kind: CompiledKind::Gaussian {
                    amplitude: *amplitude,
                    center: *center,
                    sharpness: *sharpness,
                },
            })
        }
        SourceTerm::PolyGaussian { amplitude, sharpness } => {
            if dim != 2 {
                return Err(Error::validation("term", "PolyGaussian is 2D only"));
            }
            if !(sharpness > &0.0) {
                return Err(Error::validation("sharpness", "must be positive"));
            }
            let r_eff = (44.0 / sharpness).sqrt();
            Ok(CompiledTerm {
                ball_center: [0.0; 3],
                ball_radius: r_eff,
                kind: CompiledKind::PolyGaussian { amplitude: *amplitude, sharpness: *sharpness },
            })
        }
        SourceTerm::BallIndicator { center, radius, level } => {
            if !(radius > &0.0) {
                return Err(Error::validation("radius", "must be positive"));
            }
            if dim == 2 && center[2] != 0.0 {
                return Err(Error::validation("center", "2D term with nonzero third component"));
            }
            Ok(CompiledTerm {
                ball_center: *center,
                ball_radius: *radius,
                kind: CompiledKind::Ball { center: *center, radius: *radius, level: *level },
            })
        }
        SourceTerm::RadialStarIndicator { center, base, harmonics, level } => {
            let swing: f64 = harmonics.iter().map(|(b, _)| b.abs()).sum();
            if !(base - swing > 0.0) {
                return Err(Error::validation(
                    "harmonics",
                    "radial profile must stay positive: base must exceed the harmonic swing",
                ));
            }
            if dim == 2 && center[2] != 0.0 {
                return Err(Error::validation("center", "2D term with nonzero third component"));
            }
            let harmonics = Arc::new(harmonics.clone());
            let kind = if dim == 2 {
                CompiledKind::Star2 {
                    level: *level,
                    center: *center,
                    base: *base,
                    harmonics: harmonics.clone(),
                }
            } else {
                CompiledKind::Axisym3 {
                    level: *level,
                    center: *center,
                    axis_dir: [0.0, 0.0, 1.0],
                    profile: ZrProfile::Star { base: *base, harmonics: harmonics.clone() },
                }
            };
            Ok(CompiledTerm { ball_center: *center, ball_radius: base + swing, kind })
        }
        SourceTerm::AxisymmetricCurveIndicator { curve, axis, level } => {
            if dim != 3 {
                return Err(Error::validation("term", "AxisymmetricCurveIndicator is 3D only"));
            }
            if *axis > 2 {
                return Err(Error::validation("axis", "rotation axis must be 0, 1, or 2"));
            }
            validate_generating_curve(curve)?;
            let dense = densify_curve(curve, CURVE_SAMPLES);
            let polygon = Arc::new(close_polygon(&dense));
            let lut = build_axisym_lut(&dense).map(Arc::new);
            // tightest bounding ball with its center constrained to the axis:
            // minimax over the axial center, convex in the center coordinate
            let radius_about = |c: f64| -> f64 {
                dense
                    .iter()
                    .map(|s| ((s[0] - c) * (s[0] - c) + s[1] * s[1]).sqrt())
                    .fold(0.0, f64::max)
            };
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in &dense {
                lo = lo.min(s[0]);
                hi = hi.max(s[0]);
            }
            for _ in 0..60 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                if radius_about(m1) < radius_about(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let ca = 0.5 * (lo + hi);
            let rad = radius_about(ca);
            let mut center = [0.0; 3];
            center[*axis] = ca;
            let mut axis_dir = [0.0; 3];
            axis_dir[*axis] = 1.0;
            Ok(CompiledTerm {
                ball_center: center,
                ball_radius: rad,
                kind: CompiledKind::Axisym3 {
                    level: *level,
                    center,
                    axis_dir,
                    profile: ZrProfile::Curve { a_shift: ca, polygon, lut },
                },
            })
        }
    }
}

fn validate_generating_curve(curve: &[[f64; 2]]) -> Result<()> {
    if curve.len() < 3 {
        return Err(Error::validation("curve", "need at least 3 generating samples"));
    }
    for s in curve {
        if s[1] < -1e-12 {
            return Err(Error::validation(
                "curve",
                "generating curve must keep perpendicular component >= 0",
            ));
        }
    }
    // reflecting about the axis closes the curve only when both endpoints
    // sit on the axis
    if curve[0][1].abs() > 1e-9 || curve[curve.len() - 1][1].abs() > 1e-9 {
        return Err(Error::OpenCurve);
    }
    Ok(())
}

/// Linear densification of the generating curve to at least `n` samples.
fn densify_curve(curve: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    if curve.len() >= n {
        return curve.to_vec();
    }
    let mut out = Vec::with_capacity(n);
    let segs = curve.len() - 1;
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64 * segs as f64;
        let s = (t as usize).min(segs - 1);
        let frac = t - s as f64;
        out.push([
            curve[s][0] * (1.0 - frac) + curve[s + 1][0] * frac,
            curve[s][1].max(0.0) * (1.0 - frac) + curve[s + 1][1].max(0.0) * frac,
        ]);
    }
    out
}

/// Closed polygon in the (axial, perpendicular) half-plane: the curve
/// followed by its mirror image, traversed back.
fn close_polygon(dense: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut poly: Vec<[f64; 2]> = dense.to_vec();
    for s in dense.iter().rev().skip(1) {
        if s[1] > 0.0 {
            poly.push([s[0], -s[1]]);
        }
    }
    poly
}

/// Nonzero-winding test of `p` against the closed polygon `poly`.
pub(crate) fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let mut wn = 0i32;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let left = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && left > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && left < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Builds the star-shaped radius table when the half-section is star-shaped
/// about the axial midpoint; returns None otherwise.
fn build_axisym_lut(dense: &[[f64; 2]]) -> Option<AxisymLut> {
    let (mut alo, mut ahi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in dense {
        alo = alo.min(s[0]);
        ahi = ahi.max(s[0]);
    }
    let ca = 0.5 * (alo + ahi);
    let mut angles = Vec::with_capacity(dense.len());
    let mut radii = Vec::with_capacity(dense.len());
    for s in dense {
        let (da, p) = (s[0] - ca, s[1].max(0.0));
        let r = (da * da + p * p).sqrt();
        if r == 0.0 {
            return None;
        }
        angles.push(p.atan2(da));
        radii.push(r);
    }
    // strictly monotone angle sweep over [0, pi] is required for the table
    for w in angles.windows(2) {
        if w[1] <= w[0] {
            return None;
        }
    }
    if angles[0].abs() > 1e-9 || (angles[angles.len() - 1] - std::f64::consts::PI).abs() > 1e-9 {
        return None;
    }
    let m = 8192;
    let mut table = Vec::with_capacity(m);
    let mut j = 0usize;
    for i in 0..m {
        let psi = std::f64::consts::PI * i as f64 / (m - 1) as f64;
        while j + 2 < angles.len() && angles[j + 1] < psi {
            j += 1;
        }
        let (a0, a1) = (angles[j], angles[j + 1]);
        let t = ((psi - a0) / (a1 - a0)).clamp(0.0, 1.0);
        table.push(radii[j] * (1.0 - t) + radii[j + 1] * t);
    }
    Some(AxisymLut { center_a: ca, radii: table })
}

/// Evaluates the source at a point; `y` must have exactly `spec.dim`
/// components.
pub fn eval_source(spec: &SourceSpec, y: &[f64]) -> Result<f64> {
    if y.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: y.len() });
    }
    let mut p = [0.0; 3];
    p[..y.len()].copy_from_slice(y);
    Ok(spec.eval_point(p))
}

/// Samples the source on every node of `grid`, returning a ground-truth
/// raster with the same geometry.
pub fn rasterize(spec: &SourceSpec, grid: &ImageGrid) -> Result<ImageGrid> {
    if grid.dim != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: grid.dim });
    }
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| spec.eval_point(grid.position(i)))
        .collect();
    grid.with_values(values)
}

/// Interior test for the solid of revolution defined by `curve` about the
/// coordinate axis `axis`, evaluated at the 3D point `y`.
pub fn inside_axisymmetric(curve: &[[f64; 2]], axis: usize, y: [f64; 3]) -> Result<bool> {
    if axis > 2 {
        return Err(Error::validation("axis", "rotation axis must be 0, 1, or 2"));
    }
    validate_generating_curve(curve)?;
    let dense = densify_curve(curve, CURVE_SAMPLES);
    let poly = close_polygon(&dense);
    let a = y[axis];
    let mut p2 = 0.0;
    for c in 0..3 {
        if c != axis {
            p2 += y[c] * y[c];
        }
    }
    Ok(winding_number(&poly, [a, p2.sqrt()]) != 0)
}

/// The generating curve of the axisymmetric body used by the 3D near-field
/// preset: (cos t + 0.65 cos 2t - 0.2, 1.5 sin t) for t in [0, pi].
pub fn peanut_curve(samples: usize) -> Vec<[f64; 2]> {
    let n = samples.max(3);
    (0..n)
        .map(|i| {
            let t = std::f64::consts::PI * i as f64 / (n - 1) as f64;
            [t.cos() + 0.65 * (2.0 * t).cos() - 0.2, 1.5 * t.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_image_grid;

    fn near2d_spec() -> SourceSpec {
        SourceSpec::new(
            2,
            vec![
                SourceTerm::Gaussian {
                    amplitude: 1.1,
                    center: [0.01, 0.12, 0.0],
                    sharpness: 30.0,
                },
                SourceTerm::PolyGaussian { amplitude: -100.0, sharpness: 20.0 },
            ],
            1.0,
        )
        .unwrap()
    }

    fn peanut_spec() -> SourceSpec {
        SourceSpec::new(
            3,
            vec![SourceTerm::AxisymmetricCurveIndicator {
                curve: peanut_curve(2048),
                axis: 0,
                level: 1.0,
            }],
            1.8,
        )
        .unwrap()
    }

    #[test]
    fn near2d_matches_closed_form() {
        let spec = near2d_spec();
        let f = |y1: f64, y2: f64| {
            1.1 * (-30.0 * ((y1 - 0.01).powi(2) + (y2 - 0.12).powi(2))).exp()
                - 100.0 * (y2 * y2 - y1 * y1) * (-20.0 * (y1 * y1 + y2 * y2)).exp()
        };
        for &(a, b) in &[(0.01, 0.12), (0.3, -0.2), (-0.5, 0.1), (0.0, 0.0)] {
            let got = eval_source(&spec, &[a, b]).unwrap();
            assert!((got - f(a, b)).abs() < 1e-14, "mismatch at ({a},{b})");
        }
    }

    #[test]
    fn dimension_checks() {
        let spec = near2d_spec();
        assert!(eval_source(&spec, &[0.0, 0.0, 0.0]).is_err());
        assert!(SourceSpec::new(
            3,
            vec![SourceTerm::PolyGaussian { amplitude: 1.0, sharpness: 1.0 }],
            1.0
        )
        .is_err());
        assert!(SourceSpec::new(
            2,
            vec![SourceTerm::AxisymmetricCurveIndicator {
                curve: peanut_curve(64),
                axis: 0,
                level: 1.0
            }],
            1.0
        )
        .is_err());
    }

    #[test]
    fn ball_indicator_levels() {
        let spec = SourceSpec::new(
            3,
            vec![SourceTerm::BallIndicator {
                center: [-0.4, -0.4, -0.4],
                radius: 0.4,
                level: 1.0,
            }],
            1.1,
        )
        .unwrap();
        assert_eq!(eval_source(&spec, &[-0.4, -0.4, -0.4]).unwrap(), 1.0);
        assert_eq!(eval_source(&spec, &[0.0, -0.4, -0.4]).unwrap(), 1.0);
        assert_eq!(eval_source(&spec, &[0.01, -0.4, -0.4]).unwrap(), 0.0);
    }

    #[test]
    fn pear_star_profile() {
        let spec = SourceSpec::new(
            3,
            vec![SourceTerm::RadialStarIndicator {
                center: [0.0, 0.0, 0.2],
                base: 0.4,
                harmonics: vec![(0.12, 3)],
                level: 0.5,
            }],
            1.1,
        )
        .unwrap();
        // along +z from the centre the profile radius is 0.4 + 0.12 = 0.52
        assert_eq!(eval_source(&spec, &[0.0, 0.0, 0.71]).unwrap(), 0.5);
        assert_eq!(eval_source(&spec, &[0.0, 0.0, 0.73]).unwrap(), 0.0);
        // at theta = pi/3, cos(3 theta) = -1: radius 0.28
        let d = 0.27;
        let y = [d * (std::f64::consts::FRAC_PI_3).sin(), 0.0, 0.2 + d * 0.5];
        assert_eq!(eval_source(&spec, &y[..]).unwrap(), 0.5);
        let d = 0.29;
        let y = [d * (std::f64::consts::FRAC_PI_3).sin(), 0.0, 0.2 + d * 0.5];
        assert_eq!(eval_source(&spec, &y[..]).unwrap(), 0.0);
    }

    #[test]
    fn star_2d_uses_plane_angle() {
        let spec = SourceSpec::new(
            2,
            vec![SourceTerm::RadialStarIndicator {
                center: [0.1, -0.2, 0.0],
                base: 0.3,
                harmonics: vec![(0.1, 2)],
                level: 2.0,
            }],
            1.0,
        )
        .unwrap();
        // along +x the radius is 0.3 + 0.1 = 0.4; along +y it is 0.2
        assert_eq!(eval_source(&spec, &[0.49, -0.2]).unwrap(), 2.0);
        assert_eq!(eval_source(&spec, &[0.51, -0.2]).unwrap(), 0.0);
        assert_eq!(eval_source(&spec, &[0.1, -0.01]).unwrap(), 2.0);
        assert_eq!(eval_source(&spec, &[0.1, 0.01]).unwrap(), 0.0);
    }

    #[test]
    fn star_profile_must_stay_positive() {
        assert!(SourceSpec::new(
            3,
            vec![SourceTerm::RadialStarIndicator {
                center: [0.0; 3],
                base: 0.4,
                harmonics: vec![(0.5, 3)],
                level: 1.0,
            }],
            1.0
        )
        .is_err());
    }

    #[test]
    fn peanut_contains_origin() {
        let spec = peanut_spec();
        assert_eq!(eval_source(&spec, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
        // on-axis endpoints of the generating curve: 1.45 and -0.55
        assert_eq!(eval_source(&spec, &[1.44, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_source(&spec, &[1.46, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(eval_source(&spec, &[-0.54, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_source(&spec, &[-0.56, 0.0, 0.0]).unwrap(), 0.0);
        assert!(inside_axisymmetric(&peanut_curve(4096), 0, [0.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn axisym_interior_matches_ray_casting() {
        // parity oracle: cast a ray in +p and count crossings of the densified
        // boundary at 1e4 samples
        let curve = peanut_curve(10_000);
        let dense = close_polygon(&curve);
        let ray_inside = |a: f64, p: f64| {
            let mut crossings = 0;
            let n = dense.len();
            for i in 0..n {
                let u = dense[i];
                let v = dense[(i + 1) % n];
                if (u[0] <= a) != (v[0] <= a) {
                    let t = (a - u[0]) / (v[0] - u[0]);
                    if u[1] + t * (v[1] - u[1]) > p {
                        crossings += 1;
                    }
                }
            }
            crossings % 2 == 1
        };
        let spec = peanut_spec();
        let mut checked = 0;
        for i in 0..40 {
            for j in 0..40 {
                let a = -1.9 + 3.7 * i as f64 / 39.0;
                let p = 0.002 + 1.7 * j as f64 / 39.0;
                // skip a thin band around the boundary where the two
                // densifications may legitimately disagree
                let spec_val = eval_source(&spec, &[a, p, 0.0]).unwrap() > 0.5;
                let nudge = 2e-3;
                let same_band = ray_inside(a - nudge, p) == ray_inside(a + nudge, p)
                    && ray_inside(a, (p - nudge).max(0.0)) == ray_inside(a, p + nudge);
                if same_band {
                    assert_eq!(spec_val, ray_inside(a, p), "disagreement at ({a},{p})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1200, "too few interior comparisons: {checked}");
    }

    #[test]
    fn open_curve_is_rejected() {
        let mut curve = peanut_curve(128);
        curve[0][1] = 0.2;
        assert!(matches!(
            SourceSpec::new(
                3,
                vec![SourceTerm::AxisymmetricCurveIndicator { curve, axis: 0, level: 1.0 }],
                2.0
            ),
            Err(Error::OpenCurve)
        ));
    }

    #[test]
    fn terms_vanish_outside_support_ball() {
        let specs = [near2d_spec(), peanut_spec()];
        let tol = 1e-6;
        for spec in &specs {
            let scale = spec.amplitude_scale();
            let mut rng = 123456789u64;
            let mut unit = || {
                // xorshift; adequate for sampling test points
                rng ^= rng << 13;
                rng ^= rng >> 7;
                rng ^= rng << 17;
                (rng >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..4000 {
                let r = spec.support_radius * (1.0 + unit());
                let phi = 2.0 * std::f64::consts::PI * unit();
                let y = if spec.dim == 2 {
                    [r * phi.cos(), r * phi.sin(), 0.0]
                } else {
                    let z = 2.0 * unit() - 1.0;
                    let rho = (1.0 - z * z).sqrt();
                    [r * rho * phi.cos(), r * rho * phi.sin(), r * z]
                };
                let v = spec.eval_point(y);
                assert!(
                    v.abs() <= tol * scale,
                    "source of scale {scale} reaches {v} at |y| = {r}"
                );
            }
        }
    }

    #[test]
    fn rasterize_is_row_major() {
        let spec = near2d_spec();
        let grid = make_image_grid(2, &[[-1.0, 1.0], [-1.0, 1.0]], &[7, 5]).unwrap();
        let raster = rasterize(&spec, &grid).unwrap();
        for flat in 0..raster.len() {
            let p = raster.position(flat);
            let want = eval_source(&spec, &p[..2]).unwrap();
            assert_eq!(raster.values[flat], want);
        }
        assert!(rasterize(&peanut_spec(), &grid).is_err());
    }

    #[test]
    fn zr_profile_agrees_with_point_test() {
        // the (z, r) fast path and the 3D point evaluation must agree
        let spec = peanut_spec();
        let term = &spec.compiled()[0];
        let (center, profile) = match &term.kind {
            CompiledKind::Axisym3 { center, profile, .. } => (*center, profile.clone()),
            _ => unreachable!(),
        };
        let mut rng = 987654321u64;
        let mut unit = || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let y = [4.0 * unit() - 2.0, 4.0 * unit() - 2.0, 4.0 * unit() - 2.0];
            let d = [y[0] - center[0], y[1] - center[1], y[2] - center[2]];
            let z = d[0];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let via_zr = profile.inside_zr(z, r);
            let via_point = term.eval(y) > 0.5;
            assert_eq!(via_zr, via_point, "mismatch at {y:?}");
        }
    }
}
