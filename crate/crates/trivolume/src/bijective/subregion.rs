//! Divide-and-conquer planning: the eight octant subregions, first-owner
//! assignment of free controls, and knot-insertion refinement for
//! subregions that run out of degrees of freedom.

use super::maxmin::control_support_box;
use crate::algebra::Box3;
use crate::jacobian::CertificateReport;
use crate::spline::{BSplineVolume, SplineError};

/// The ordered octant sweep with per-subregion free-control sets.
#[derive(Debug, Clone)]
pub struct SubregionPlan {
    pub subregions: [Box3; 8],
    /// Flat control indices owned by each subregion; pairwise disjoint.
    pub free_sets: [Vec<usize>; 8],
}

impl SubregionPlan {
    pub fn total_free(&self) -> usize {
        self.free_sets.iter().map(|s| s.len()).sum()
    }
}

/// Interior controls whose support touches a failing sub-box become free;
/// each is owned by the octant containing its support-box center (low half
/// on ties). Controls supported entirely by certified territory stay
/// frozen.
///
/// Ownership by support center rather than by first intersecting octant:
/// wide basis supports intersect the first octant almost always, which
/// starves the later sub-problems of their local degrees of freedom.
pub fn plan_subregions(vol: &BSplineVolume, report: &CertificateReport) -> SubregionPlan {
    let subregions = Box3::UNIT.octants();
    let failing: Vec<Box3> = report
        .failing_cells()
        .flat_map(|v| v.failing.iter().map(|f| f.cell_box))
        .collect();
    let dims = vol.grid().dims();
    let mut free_sets: [Vec<usize>; 8] = Default::default();
    for flat in 0..vol.grid().len() {
        let (i, j, k) = vol.grid().unflatten(flat);
        let interior =
            i > 0 && i + 1 < dims[0] && j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2];
        if !interior {
            continue;
        }
        let support = control_support_box(vol, flat);
        if !failing.iter().any(|f| support.intersects_open(f)) {
            continue;
        }
        let c = support.center();
        let owner = usize::from(c.x > 0.5)
            + 2 * usize::from(c.y > 0.5)
            + 4 * usize::from(c.z > 0.5);
        free_sets[owner].push(flat);
    }
    SubregionPlan { subregions, free_sets }
}

/// Halve every knot span that overlaps the subregion, adding basis
/// functions with more compact supports there. The refined volume
/// reproduces the input exactly.
pub fn local_offset_refine(
    vol: &BSplineVolume,
    subregion: &Box3,
) -> Result<BSplineVolume, SplineError> {
    let mut out = vol.clone();
    for axis in 0..3 {
        let (lo, hi) = (subregion.min[axis], subregion.max[axis]);
        let midpoints: Vec<f64> = vol
            .knots(axis)
            .spans()
            .iter()
            .filter(|s| s.start < hi && lo < s.end)
            .map(|s| 0.5 * (s.start + s.end))
            .collect();
        for m in midpoints {
            out = out.insert_knot(axis, m)?;
        }
    }
    Ok(out)
}
