//! Regular 3-D grid geometry and dense scalar fields.
//!
//! All material fields, travel-time fields and kernel coefficient fields live
//! on one shared regular grid with uniform spacing. Storage is x-fastest:
//! `index = i + nx*(j + ny*k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of a regular grid: origin, uniform spacing and node counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl GridGeometry {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
        }
        if dims.iter().any(|&n| n < 3) {
            return Err(Error::Config(format!(
                "grid needs at least 3 nodes per axis for central differences, got {dims:?}"
            )));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Self { origin, spacing, dims })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        ]
    }

    /// Upper corner of the grid box.
    pub fn max_corner(&self) -> [f64; 3] {
        self.node(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1)
    }

    /// True if `p` lies inside the grid box (inclusive).
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= self.origin[a] - 1e-12 && p[a] <= hi[a] + 1e-12)
    }

    /// Nearest grid node to `p`.
    pub fn nearest_node(&self, p: [f64; 3]) -> Result<[usize; 3]> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { point: p });
        }
        let mut out = [0usize; 3];
        for a in 0..3 {
            let t = ((p[a] - self.origin[a]) / self.spacing).round();
            out[a] = (t.max(0.0) as usize).min(self.dims[a] - 1);
        }
        Ok(out)
    }

    /// Cell index and fractional offsets for interpolation at `p`.
    ///
    /// Returns `(base, frac)` with `base[a] <= dims[a]-2` so that the eight
    /// surrounding corners are always valid.
    pub fn locate(&self, p: [f64; 3]) -> Result<([usize; 3], [f64; 3])> {
        if !self.contains(p) {
            return Err(Error::OutOfBounds { point: p });
        }
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let t = (p[a] - self.origin[a]) / self.spacing;
            let mut i = t.floor() as isize;
            if i < 0 {
                i = 0;
            }
            let max_base = (self.dims[a] - 2) as isize;
            if i > max_base {
                i = max_base;
            }
            base[a] = i as usize;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        Ok((base, frac))
    }

    /// Iterate all node index triples, x-fastest.
    pub fn iter_nodes(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| [i, j, k])))
    }
}

/// Dense scalar field on a regular grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid3 {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
}

impl Grid3 {
    pub fn new(geom: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::Config(format!(
                "field length {} does not match grid dims {:?}",
                values.len(),
                geom.dims
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("field contains non-finite values".into()));
        }
        Ok(Self { geom, values })
    }

    pub fn constant(geom: GridGeometry, value: f64) -> Self {
        Self { geom, values: vec![value; geom.len()] }
    }

    /// Fill from a function of position.
    pub fn from_fn(geom: GridGeometry, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut values = vec![0.0; geom.len()];
        for [i, j, k] in geom.iter_nodes() {
            values[geom.idx(i, j, k)] = f(geom.node(i, j, k));
        }
        Self { geom, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.geom.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.geom.idx(i, j, k);
        self.values[idx] = v;
    }

    /// Trilinear interpolation at `p`. Exact at grid nodes.
    pub fn interp(&self, p: [f64; 3]) -> Result<f64> {
        let (b, f) = self.geom.locate(p)?;
        let [i, j, k] = b;
        let c000 = self.at(i, j, k);
        let c100 = self.at(i + 1, j, k);
        let c010 = self.at(i, j + 1, k);
        let c110 = self.at(i + 1, j + 1, k);
        let c001 = self.at(i, j, k + 1);
        let c101 = self.at(i + 1, j, k + 1);
        let c011 = self.at(i, j + 1, k + 1);
        let c111 = self.at(i + 1, j + 1, k + 1);
        let (fx, fy, fz) = (f[0], f[1], f[2]);
        let c00 = c000 * (1.0 - fx) + c100 * fx;
        let c10 = c010 * (1.0 - fx) + c110 * fx;
        let c01 = c001 * (1.0 - fx) + c101 * fx;
        let c11 = c011 * (1.0 - fx) + c111 * fx;
        let c0 = c00 * (1.0 - fy) + c10 * fy;
        let c1 = c01 * (1.0 - fy) + c11 * fy;
        Ok(c0 * (1.0 - fz) + c1 * fz)
    }

    /// Central-difference gradient at a node; one-sided on the grid faces.
    pub fn node_gradient(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.geom.spacing;
        let [nx, ny, nz] = self.geom.dims;
        let d = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
        let gx = if i == 0 {
            d(self.at(0, j, k), self.at(1, j, k), h)
        } else if i == nx - 1 {
            d(self.at(nx - 2, j, k), self.at(nx - 1, j, k), h)
        } else {
            d(self.at(i - 1, j, k), self.at(i + 1, j, k), 2.0 * h)
        };
        let gy = if j == 0 {
            d(self.at(i, 0, k), self.at(i, 1, k), h)
        } else if j == ny - 1 {
            d(self.at(i, ny - 2, k), self.at(i, ny - 1, k), h)
        } else {
            d(self.at(i, j - 1, k), self.at(i, j + 1, k), 2.0 * h)
        };
        let gz = if k == 0 {
            d(self.at(i, j, 0), self.at(i, j, 1), h)
        } else if k == nz - 1 {
            d(self.at(i, j, nz - 2), self.at(i, j, nz - 1), h)
        } else {
            d(self.at(i, j, k - 1), self.at(i, j, k + 1), 2.0 * h)
        };
        [gx, gy, gz]
    }

    /// Seven-point discrete Laplacian at an interior node.
    pub fn node_laplacian(&self, i: usize, j: usize, k: usize) -> f64 {
        let h2 = self.geom.spacing * self.geom.spacing;
        let c = self.at(i, j, k);
        (self.at(i + 1, j, k) + self.at(i - 1, j, k) + self.at(i, j + 1, k)
            + self.at(i, j - 1, k)
            + self.at(i, j, k + 1)
            + self.at(i, j, k - 1)
            - 6.0 * c)
            / h2
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dense vector field; used for precomputed gradients.
#[derive(Debug, Clone)]
pub struct VecField3 {
    pub geom: GridGeometry,
    pub values: Vec<[f64; 3]>,
}

impl VecField3 {
    /// Node gradients of a scalar field, central differences inside,
    /// one-sided on faces.
    pub fn gradient_of(field: &Grid3) -> Self {
        let geom = field.geom;
        let mut values = vec![[0.0; 3]; geom.len()];
        for [i, j, k] in geom.iter_nodes() {
            values[geom.idx(i, j, k)] = field.node_gradient(i, j, k);
        }
        Self { geom, values }
    }

    /// Trilinear interpolation of the vector field at `p`.
    pub fn interp(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let (b, f) = self.geom.locate(p)?;
        let [i, j, k] = b;
        let mut out = [0.0; 3];
        let corners = [
            (self.geom.idx(i, j, k), (1.0 - f[0]) * (1.0 - f[1]) * (1.0 - f[2])),
            (self.geom.idx(i + 1, j, k), f[0] * (1.0 - f[1]) * (1.0 - f[2])),
            (self.geom.idx(i, j + 1, k), (1.0 - f[0]) * f[1] * (1.0 - f[2])),
            (self.geom.idx(i + 1, j + 1, k), f[0] * f[1] * (1.0 - f[2])),
            (self.geom.idx(i, j, k + 1), (1.0 - f[0]) * (1.0 - f[1]) * f[2]),
            (self.geom.idx(i + 1, j, k + 1), f[0] * (1.0 - f[1]) * f[2]),
            (self.geom.idx(i, j + 1, k + 1), (1.0 - f[0]) * f[1] * f[2]),
            (self.geom.idx(i + 1, j + 1, k + 1), f[0] * f[1] * f[2]),
        ];
        for (idx, w) in corners {
            for a in 0..3 {
                out[a] += w * self.values[idx][a];
            }
        }
        Ok(out)
    }
}

/// Axis-aligned sub-box of a grid given by inclusive node index ranges.
///
/// Marks the imaging domain inside the grid; the shell outside it
/// carries the background constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl IndexBox {
    pub fn validate(&self, geom: &GridGeometry) -> Result<()> {
        for a in 0..3 {
            if self.lo[a] > self.hi[a] || self.hi[a] >= geom.dims[a] {
                return Err(Error::Config(format!(
                    "domain box {:?} not inside grid dims {:?}",
                    self, geom.dims
                )));
            }
        }
        Ok(())
    }

    pub fn contains_index(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] <= self.hi[a])
    }

    pub fn contains_point(&self, geom: &GridGeometry, p: [f64; 3]) -> bool {
        let (lo, hi) = self.corners(geom);
        (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])
    }

    /// Physical corners of the box.
    pub fn corners(&self, geom: &GridGeometry) -> ([f64; 3], [f64; 3]) {
        (
            geom.node(self.lo[0], self.lo[1], self.lo[2]),
            geom.node(self.hi[0], self.hi[1], self.hi[2]),
        )
    }

    /// Diameter (corner-to-corner distance) of the box.
    pub fn diameter(&self, geom: &GridGeometry) -> f64 {
        let (lo, hi) = self.corners(geom);
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
    }

    pub fn iter_nodes(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let lo = self.lo;
        let hi = self.hi;
        (lo[2]..=hi[2]).flat_map(move |k| {
            (lo[1]..=hi[1]).flat_map(move |j| (lo[0]..=hi[0]).map(move |i| [i, j, k]))
        })
    }
}

pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}
