//! The Jacobian determinant as a per-cell Bernstein polynomial, with the
//! positivity certificate and the Lipschitz/fill-distance machinery that
//! turns pointwise bounds into global ones.

mod certify;
mod fill;

pub use certify::{
    certify_cell, certify_field, certify_volume, CellStatus, CellVerdict, CertificateReport,
    FailingBox, DEFAULT_DELTA, DEFAULT_MAX_DEPTH,
};
pub use fill::fill_distance;

use crate::algebra::Vec3;
use crate::spline::{BSplineVolume, ScalarBezierCell};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error(transparent)]
    Spline(#[from] crate::spline::SplineError),
}

/// Locates the mesh cell containing a parameter point.
#[derive(Debug, Clone)]
pub struct CellLocator {
    // span start values per axis, plus the final 1.0
    edges: [Vec<f64>; 3],
}

impl CellLocator {
    pub fn from_volume(vol: &BSplineVolume) -> Self {
        let edges = [0, 1, 2].map(|axis| {
            let spans = vol.knots(axis).spans();
            let mut e: Vec<f64> = spans.iter().map(|s| s.start).collect();
            e.push(1.0);
            e
        });
        CellLocator { edges }
    }

    pub fn counts(&self) -> [usize; 3] {
        [
            self.edges[0].len() - 1,
            self.edges[1].len() - 1,
            self.edges[2].len() - 1,
        ]
    }

    fn locate_axis(&self, axis: usize, t: f64) -> usize {
        let e = &self.edges[axis];
        let n = e.len() - 1;
        // last interval is closed on the right
        let idx = e.partition_point(|&v| v <= t);
        idx.clamp(1, n) - 1
    }

    pub fn locate(&self, p: Vec3) -> usize {
        let i = self.locate_axis(0, p.x);
        let j = self.locate_axis(1, p.y);
        let k = self.locate_axis(2, p.z);
        let [nu, nv, _] = self.counts();
        i + nu * (j + nv * k)
    }
}

/// det(J) of a volume, stored per cell as a trivariate Bernstein polynomial
/// of degrees (3p-1, 3q-1, 3r-1), together with its three global-parameter
/// partial derivatives.
#[derive(Debug, Clone)]
pub struct JacobianField {
    cells: Vec<ScalarBezierCell>,
    grads: Vec<[ScalarBezierCell; 3]>,
    locator: CellLocator,
}

impl JacobianField {
    /// Expand det(J) per cell from the six signed triple products of the
    /// derivative Bezier cells.
    pub fn from_volume(vol: &BSplineVolume) -> Self {
        let bezier = vol.to_bezier_cells();
        let cells: Vec<ScalarBezierCell> = bezier
            .par_iter()
            .map(|cell| {
                // d[coord][axis]: local-parameter derivative polynomials
                let d: Vec<Vec<ScalarBezierCell>> = (0..3)
                    .map(|coord| {
                        let comp = cell.component(coord);
                        (0..3).map(|axis| comp.derivative_local(axis)).collect()
                    })
                    .collect();
                let minor = |r0: usize, r1: usize, c0: usize, c1: usize| {
                    let a = d[r0][c0].multiply(&d[r1][c1]).expect("same box");
                    let b = d[r0][c1].multiply(&d[r1][c0]).expect("same box");
                    a.sub(&b).expect("same degrees")
                };
                let m0 = minor(1, 2, 1, 2);
                let m1 = minor(1, 2, 0, 2);
                let m2 = minor(1, 2, 0, 1);
                let det_local = d[0][0]
                    .multiply(&m0)
                    .expect("same box")
                    .sub(&d[0][1].multiply(&m1).expect("same box"))
                    .expect("same degrees")
                    .add(&d[0][2].multiply(&m2).expect("same box"))
                    .expect("same degrees");
                // local derivatives to global parameter scale
                let s = cell.cell_box.size();
                det_local.scale(1.0 / (s.x * s.y * s.z))
            })
            .collect();
        let grads = cells
            .par_iter()
            .map(|c| [0, 1, 2].map(|axis| c.derivative_global(axis)))
            .collect();
        JacobianField {
            cells,
            grads,
            locator: CellLocator::from_volume(vol),
        }
    }

    pub fn cells(&self) -> &[ScalarBezierCell] {
        &self.cells
    }

    pub fn locator(&self) -> &CellLocator {
        &self.locator
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// det(J) at a parameter point, from the Bernstein expansion.
    pub fn eval(&self, p: Vec3) -> f64 {
        let cell = self.locator.locate(p);
        self.cells[cell].eval_global(p)
    }

    /// Gradient of det(J) with respect to the global parameters.
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        let cell = self.locator.locate(p);
        let g = &self.grads[cell];
        Vec3::new(
            g[0].eval_global(p),
            g[1].eval_global(p),
            g[2].eval_global(p),
        )
    }

    /// Upper bound on `max ||grad det(J)||` over the whole domain, from the
    /// Bernstein convex-hull bound on each partial derivative per cell.
    pub fn lipschitz_bound(&self) -> f64 {
        self.grads
            .iter()
            .map(|g| {
                let sq: f64 = g.iter().map(|c| c.max_abs_coeff().powi(2)).sum();
                sq.sqrt()
            })
            .fold(0.0, f64::max)
    }
}
