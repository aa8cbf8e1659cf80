//! Positivity certification of the Jacobian spline by Bernstein coefficient
//! checks with recursive midpoint subdivision.
//!
//! A Bernstein polynomial whose coefficients all exceed `delta > 0` is
//! itself above `delta` on its box (convex hull). Coefficients at or below
//! `delta` are inconclusive and trigger subdivision into eight children, up
//! to `max_depth`; sub-boxes still inconclusive at the depth limit are
//! reported as failing.

use super::JacobianField;
use crate::algebra::Box3;
use crate::spline::{BSplineVolume, ScalarBezierCell};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Certified,
    Indeterminate,
}

/// A sub-box whose coefficient minimum stayed at or below delta at the
/// subdivision depth limit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailingBox {
    pub cell_box: Box3,
    pub min_coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellVerdict {
    pub cell: usize,
    pub status: CellStatus,
    /// Deepest subdivision level that was examined.
    pub depth_used: usize,
    /// Minimum Bernstein coefficient over all leaf boxes; a lower bound for
    /// the polynomial on the cell.
    pub min_coeff: f64,
    pub failing: Vec<FailingBox>,
}

impl CellVerdict {
    pub fn is_certified(&self) -> bool {
        self.status == CellStatus::Certified
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub delta: f64,
    pub max_depth: usize,
    pub verdicts: Vec<CellVerdict>,
    pub certified: bool,
}

impl CertificateReport {
    pub fn certified_fraction(&self) -> f64 {
        if self.verdicts.is_empty() {
            return 1.0;
        }
        self.verdicts.iter().filter(|v| v.is_certified()).count() as f64
            / self.verdicts.len() as f64
    }

    pub fn failing_cells(&self) -> impl Iterator<Item = &CellVerdict> {
        self.verdicts.iter().filter(|v| !v.is_certified())
    }
}

fn recurse(
    cell: &ScalarBezierCell,
    delta: f64,
    depth: usize,
    max_depth: usize,
    depth_used: &mut usize,
    min_coeff: &mut f64,
    failing: &mut Vec<FailingBox>,
) {
    *depth_used = (*depth_used).max(depth);
    let min = cell.min_coeff();
    if min > delta {
        *min_coeff = min_coeff.min(min);
        return;
    }
    if depth == max_depth {
        *min_coeff = min_coeff.min(min);
        failing.push(FailingBox { cell_box: cell.cell_box, min_coeff: min });
        return;
    }
    for child in cell.subdivide() {
        recurse(&child, delta, depth + 1, max_depth, depth_used, min_coeff, failing);
    }
}

/// Certify a single scalar Bernstein cell.
pub fn certify_cell(cell: &ScalarBezierCell, delta: f64, max_depth: usize) -> CellVerdict {
    assert!(delta > 0.0, "delta must be positive");
    let mut depth_used = 0;
    let mut min_coeff = f64::INFINITY;
    let mut failing = Vec::new();
    recurse(cell, delta, 0, max_depth, &mut depth_used, &mut min_coeff, &mut failing);
    CellVerdict {
        cell: 0,
        status: if failing.is_empty() {
            CellStatus::Certified
        } else {
            CellStatus::Indeterminate
        },
        depth_used,
        min_coeff,
        failing,
    }
}

/// Certify every cell of a Jacobian field.
pub fn certify_field(field: &JacobianField, delta: f64, max_depth: usize) -> CertificateReport {
    let verdicts: Vec<CellVerdict> = field
        .cells()
        .par_iter()
        .enumerate()
        .map(|(idx, cell)| {
            let mut v = certify_cell(cell, delta, max_depth);
            v.cell = idx;
            v
        })
        .collect();
    let certified = verdicts.iter().all(|v| v.is_certified());
    CertificateReport { delta, max_depth, verdicts, certified }
}

/// Expand det(J) and certify the whole volume.
pub fn certify_volume(vol: &BSplineVolume, delta: f64, max_depth: usize) -> CertificateReport {
    certify_field(&JacobianField::from_volume(vol), delta, max_depth)
}
