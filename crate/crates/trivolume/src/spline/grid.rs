use crate::algebra::Vec3;
use serde::{Deserialize, Serialize};

use super::SplineError;

/// A 3D control-point grid stored lexicographically with the first index
/// varying fastest: flat index = i + dims[0] * (j + dims[1] * k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid3 {
    dims: [usize; 3],
    points: Vec<Vec3>,
}

impl ControlGrid3 {
    pub fn new(dims: [usize; 3], points: Vec<Vec3>) -> Result<Self, SplineError> {
        let expected = dims[0] * dims[1] * dims[2];
        if points.len() != expected {
            return Err(SplineError::GridMismatch {
                expected,
                found: points.len(),
            });
        }
        if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
            return Err(SplineError::NonFinitePoint(bad));
        }
        Ok(ControlGrid3 { dims, points })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> Vec3) -> Self {
        let mut points = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    points.push(f(i, j, k));
                }
            }
        }
        ControlGrid3 { dims, points }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn unflatten(&self, flat: usize) -> (usize, usize, usize) {
        let i = flat % self.dims[0];
        let j = (flat / self.dims[0]) % self.dims[1];
        let k = flat / (self.dims[0] * self.dims[1]);
        (i, j, k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.points[self.flat_index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, p: Vec3) {
        let idx = self.flat_index(i, j, k);
        self.points[idx] = p;
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec3] {
        &mut self.points
    }

    /// Bounding box corners (min, max) over all control points.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::splat(f64::INFINITY);
        let mut hi = Vec3::splat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.min_componentwise(*p);
            hi = hi.max_componentwise(*p);
        }
        (lo, hi)
    }

    /// Replace every fiber along `axis` using `f`, which maps the old fiber
    /// to a new one (all fibers must map to the same new length).
    pub fn map_fibers(&self, axis: usize, f: impl Fn(&[Vec3]) -> Vec<Vec3>) -> ControlGrid3 {
        let [d0, d1, d2] = self.dims;
        let (fiber_len, n_outer, outer_dims): (usize, usize, [usize; 2]) = match axis {
            0 => (d0, d1 * d2, [d1, d2]),
            1 => (d1, d0 * d2, [d0, d2]),
            2 => (d2, d0 * d1, [d0, d1]),
            _ => panic!("axis out of range"),
        };
        let mut new_len = None;
        let mut new_fibers: Vec<Vec<Vec3>> = Vec::with_capacity(n_outer);
        for outer in 0..n_outer {
            let (a, b) = (outer % outer_dims[0], outer / outer_dims[0]);
            let mut fiber = Vec::with_capacity(fiber_len);
            for t in 0..fiber_len {
                let (i, j, k) = match axis {
                    0 => (t, a, b),
                    1 => (a, t, b),
                    _ => (a, b, t),
                };
                fiber.push(self.get(i, j, k));
            }
            let mapped = f(&fiber);
            match new_len {
                None => new_len = Some(mapped.len()),
                Some(l) => assert_eq!(l, mapped.len(), "fiber lengths must agree"),
            }
            new_fibers.push(mapped);
        }
        let nl = new_len.unwrap();
        let new_dims = match axis {
            0 => [nl, d1, d2],
            1 => [d0, nl, d2],
            _ => [d0, d1, nl],
        };
        let mut out = ControlGrid3::from_fn(new_dims, |_, _, _| Vec3::ZERO);
        for (outer, fiber) in new_fibers.iter().enumerate() {
            let (a, b) = (outer % outer_dims[0], outer / outer_dims[0]);
            for (t, &p) in fiber.iter().enumerate() {
                let (i, j, k) = match axis {
                    0 => (t, a, b),
                    1 => (a, t, b),
                    _ => (a, b, t),
                };
                out.set(i, j, k, p);
            }
        }
        out
    }
}

/// A 2D control grid (for boundary surfaces), first index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    dims: [usize; 2],
    points: Vec<Vec3>,
}

impl Grid2 {
    pub fn new(dims: [usize; 2], points: Vec<Vec3>) -> Result<Self, SplineError> {
        let expected = dims[0] * dims[1];
        if points.len() != expected {
            return Err(SplineError::GridMismatch {
                expected,
                found: points.len(),
            });
        }
        if let Some(bad) = points.iter().position(|p| !p.is_finite()) {
            return Err(SplineError::NonFinitePoint(bad));
        }
        Ok(Grid2 { dims, points })
    }

    pub fn from_fn(dims: [usize; 2], mut f: impl FnMut(usize, usize) -> Vec3) -> Self {
        let mut points = Vec::with_capacity(dims[0] * dims[1]);
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                points.push(f(i, j));
            }
        }
        Grid2 { dims, points }
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize) -> Vec3 {
        self.points[i + self.dims[0] * j]
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }
}
