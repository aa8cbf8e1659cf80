//! Fill distance of a point set in a box: the one-sided Hausdorff distance
//! `max_{x in region} min_{p in pts} |x - p|`, bounded by branch and bound.

use super::CertifyError;
use crate::algebra::{Box3, Vec3};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const REL_GAP: f64 = 5e-4;

struct Entry {
    upper: f64,
    order: usize,
    node_box: Box3,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.upper == other.upper && self.order == other.order
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.order.cmp(&self.order))
    }
}

fn nearest_distance(pts: &[Vec3], x: Vec3) -> f64 {
    pts.iter()
        .map(|p| (*p - x).norm_sq())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Certified upper bound on the fill distance, within `5e-4` of the region
/// diagonal of the true value.
///
/// The distance-to-nearest-point function is 1-Lipschitz, so on a box B
/// with center c and half-diagonal r its maximum lies in
/// `[g(c), g(c) + r]`. Boxes whose upper bound cannot beat the best
/// evaluated center are pruned; the rest are split until the global gap
/// closes.
pub fn fill_distance(pts: &[Vec3], region: Box3) -> Result<f64, CertifyError> {
    if pts.is_empty() {
        return Err(CertifyError::EmptyPointSet);
    }
    let gap_target = REL_GAP * region.diagonal();
    let mut order = 0usize;
    let mut heap = BinaryHeap::new();
    let g0 = nearest_distance(pts, region.center());
    let mut lower = g0;
    heap.push(Entry {
        upper: g0 + 0.5 * region.diagonal(),
        order,
        node_box: region,
    });
    while let Some(top) = heap.pop() {
        if top.upper - lower <= gap_target {
            return Ok(top.upper);
        }
        for child in top.node_box.octants() {
            let gc = nearest_distance(pts, child.center());
            lower = lower.max(gc);
            let upper = gc + 0.5 * child.diagonal();
            if upper > lower {
                order += 1;
                heap.push(Entry { upper, order, node_box: child });
            }
        }
    }
    Ok(lower)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_point() {
        let d = fill_distance(&[Vec3::splat(0.5)], Box3::UNIT).unwrap();
        let expect = 0.75f64.sqrt();
        assert!((d - expect).abs() < 1e-3, "{d} vs {expect}");
        assert!(d >= expect - 1e-12, "upper bound must not undershoot");
    }

    #[test]
    fn eight_corners() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Vec3::new(
                (i & 1) as f64,
                ((i >> 1) & 1) as f64,
                ((i >> 2) & 1) as f64,
            ));
        }
        let d = fill_distance(&pts, Box3::UNIT).unwrap();
        let expect = 0.75f64.sqrt();
        assert!((d - expect).abs() < 1e-3, "{d} vs {expect}");
    }

    #[test]
    fn matches_dense_grid_estimate() {
        let mut seed = 123456789u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let pts: Vec<Vec3> = (0..50).map(|_| Vec3::new(next(), next(), next())).collect();
        let d = fill_distance(&pts, Box3::UNIT).unwrap();
        let mut brute = 0.0f64;
        for iz in 0..64 {
            for iy in 0..64 {
                for ix in 0..64 {
                    let x = Vec3::new(
                        ix as f64 / 63.0,
                        iy as f64 / 63.0,
                        iz as f64 / 63.0,
                    );
                    brute = brute.max(nearest_distance(&pts, x));
                }
            }
        }
        assert!((d - brute).abs() < 2e-2, "{d} vs grid {brute}");
        // grid maximum can only undershoot the certified upper bound
        assert!(d >= brute - 1e-9);
    }

    #[test]
    fn empty_set_rejected() {
        assert!(fill_distance(&[], Box3::UNIT).is_err());
    }
}
