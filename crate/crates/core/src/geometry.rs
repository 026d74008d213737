//! Sensor arrays, direction grids, and image grids.
//!
//! Points are stored as `[f64; 3]` regardless of dimension; 2D entities use
//! the first two components and keep the third at zero.

use crate::error::{Error, Result};

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Orthonormal pair spanning the plane perpendicular to the unit vector `w`.
pub(crate) fn orthonormal_frame(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if w[0].abs() <= w[1].abs() && w[0].abs() <= w[2].abs() {
        [1.0, 0.0, 0.0]
    } else if w[1].abs() <= w[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let e1 = {
        let c = cross3(w, pick);
        scale3(c, 1.0 / norm3(c))
    };
    let e2 = cross3(w, e1);
    (e1, e2)
}

/// Closed measurement surface: n sensors on a circle (2D) or sphere (3D) of
/// radius R about the origin, with outward unit normals and one scalar
/// quadrature weight per sensor (surface measure / n).
#[derive(Debug, Clone)]
pub struct SensorArray {
    pub dim: usize,
    pub radius: f64,
    pub points: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    /// Surface measure carried by each sensor: 2 pi R / n or 4 pi R^2 / n.
    pub weight: f64,
}

impl SensorArray {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds an equi-angular circular array of `n` sensors with radius `radius`.
pub fn make_circle_array(n: usize, radius: f64) -> Result<SensorArray> {
    if n == 0 {
        return Err(Error::invalid("sensor count must be positive"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("array radius must be positive, got {radius}")));
    }
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        let (s, c) = phi.sin_cos();
        points.push([radius * c, radius * s, 0.0]);
        normals.push([c, s, 0.0]);
    }
    let weight = 2.0 * std::f64::consts::PI * radius / n as f64;
    Ok(SensorArray { dim: 2, radius, points, normals, weight })
}

/// Builds a Fibonacci-lattice spherical array of `n` sensors with radius
/// `radius`. All sensors carry the equal weight 4 pi R^2 / n.
pub fn make_sphere_array(n: usize, radius: f64) -> Result<SensorArray> {
    if n == 0 {
        return Err(Error::invalid("sensor count must be positive"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("array radius must be positive, got {radius}")));
    }
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut points = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let rho = (1.0 - z * z).max(0.0).sqrt();
        let phi = golden_angle * i as f64;
        let (s, c) = phi.sin_cos();
        let nrm = [rho * c, rho * s, z];
        normals.push(nrm);
        points.push(scale3(nrm, radius));
    }
    let weight = 4.0 * std::f64::consts::PI * radius * radius / n as f64;
    Ok(SensorArray { dim: 3, radius, points, normals, weight })
}

/// One node of a [`DirectionGrid`]: the Cartesian point, its length, and its
/// unit direction.
#[derive(Debug, Clone)]
pub struct DirectionNode {
    pub point: [f64; 3],
    pub len: f64,
    pub dir: [f64; 3],
    /// Per-axis index into [`DirectionGrid::axis_coords`].
    pub ijk: [usize; 3],
}

/// Uniform Cartesian grid over [-extent, extent]^dim used to discretise the
/// frequency-space integral of the far-field indicators. The origin node, if
/// present, is excluded.
#[derive(Debug, Clone)]
pub struct DirectionGrid {
    pub dim: usize,
    pub extent: f64,
    pub n_per_axis: usize,
    /// Volume element (2 extent / (n - 1))^dim attached to every node.
    pub cell_volume: f64,
    /// Node coordinates along each axis (shared by all axes).
    pub axis_coords: Vec<f64>,
    pub nodes: Vec<DirectionNode>,
}

/// Builds a uniform direction grid with `n_per_axis` nodes per axis covering
/// [-extent, extent]^dim, dropping any node with |x| < 1e-12 * extent.
pub fn make_direction_grid(dim: usize, extent: f64, n_per_axis: usize) -> Result<DirectionGrid> {
    if dim != 2 && dim != 3 {
        return Err(Error::DimensionMismatch { expected: 2, got: dim });
    }
    if !(extent > 0.0) {
        return Err(Error::invalid(format!("grid extent must be positive, got {extent}")));
    }
    if n_per_axis < 2 {
        return Err(Error::invalid("direction grid needs at least 2 nodes per axis"));
    }
    let step = 2.0 * extent / (n_per_axis - 1) as f64;
    let axis_coords: Vec<f64> = (0..n_per_axis).map(|i| -extent + step * i as f64).collect();
    let eps = 1e-12 * extent;
    let mut nodes = Vec::new();
    let kk = if dim == 3 { n_per_axis } else { 1 };
    for i in 0..n_per_axis {
        for j in 0..n_per_axis {
            for k in 0..kk {
                let p = [
                    axis_coords[i],
                    axis_coords[j],
                    if dim == 3 { axis_coords[k] } else { 0.0 },
                ];
                let len = norm3(p);
                if len < eps {
                    continue;
                }
                nodes.push(DirectionNode {
                    point: p,
                    len,
                    dir: scale3(p, 1.0 / len),
                    ijk: [i, j, k],
                });
            }
        }
    }
    Ok(DirectionGrid {
        dim,
        extent,
        n_per_axis,
        cell_volume: step.powi(dim as i32),
        axis_coords,
        nodes,
    })
}

/// Rectilinear sampling grid with a flat row-major value array, used both for
/// ground-truth rasters and for reconstructions.
#[derive(Debug, Clone)]
pub struct ImageGrid {
    pub dim: usize,
    /// Inclusive bounds per axis.
    pub bounds: Vec<[f64; 2]>,
    /// Node count per axis.
    pub shape: Vec<usize>,
    /// Row-major node values: the last axis varies fastest.
    pub values: Vec<f64>,
}

impl ImageGrid {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        let n = self.shape[axis];
        if n < 2 {
            0.0
        } else {
            (self.bounds[axis][1] - self.bounds[axis][0]) / (n - 1) as f64
        }
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.bounds[axis][0] + self.spacing(axis) * i as f64
    }

    /// Multi-index of a flat index; axes beyond `dim` read as 0.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.shape[a];
            rem /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: [usize; 3]) -> usize {
        let mut flat = 0;
        for a in 0..self.dim {
            flat = flat * self.shape[a] + idx[a];
        }
        flat
    }

    /// Coordinates of the node with the given flat index.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.axis_coord(a, idx[a]);
        }
        p
    }

    /// Flat index of the grid node nearest to `p` (clamped to the grid).
    pub fn index_of(&self, p: [f64; 3]) -> usize {
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            let h = self.spacing(a);
            let i = if h == 0.0 {
                0
            } else {
                (((p[a] - self.bounds[a][0]) / h).round().max(0.0) as usize)
                    .min(self.shape[a] - 1)
            };
            idx[a] = i;
        }
        self.flat_index(idx)
    }

    /// Same grid geometry with all values replaced.
    pub fn with_values(&self, values: Vec<f64>) -> Result<ImageGrid> {
        if values.len() != self.len() {
            return Err(Error::ShapeMismatch(format!(
                "grid holds {} nodes, got {} values",
                self.len(),
                values.len()
            )));
        }
        Ok(ImageGrid {
            dim: self.dim,
            bounds: self.bounds.clone(),
            shape: self.shape.clone(),
            values,
        })
    }

    /// True when `other` shares dimension, bounds, and shape.
    pub fn same_geometry(&self, other: &ImageGrid) -> bool {
        self.dim == other.dim
            && self.shape == other.shape
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| a[0] == b[0] && a[1] == b[1])
    }
}

/// Builds an image grid with the given per-axis bounds and node counts,
/// values initialised to zero.
pub fn make_image_grid(dim: usize, bounds: &[[f64; 2]], shape: &[usize]) -> Result<ImageGrid> {
    if dim != 2 && dim != 3 {
        return Err(Error::DimensionMismatch { expected: 2, got: dim });
    }
    if bounds.len() != dim || shape.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "need {dim} bounds and shapes, got {} and {}",
            bounds.len(),
            shape.len()
        )));
    }
    for (a, b) in bounds.iter().enumerate() {
        if !(b[0] < b[1]) {
            return Err(Error::invalid(format!("axis {a} bounds must increase, got {b:?}")));
        }
        if shape[a] < 2 {
            return Err(Error::invalid("image grid needs at least 2 nodes per axis"));
        }
    }
    let len: usize = shape.iter().product();
    Ok(ImageGrid {
        dim,
        bounds: bounds.to_vec(),
        shape: shape.to_vec(),
        values: vec![0.0; len],
    })
}
