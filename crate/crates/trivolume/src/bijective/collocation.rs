//! Collocation point management: gradient-guided placement in failing
//! sub-boxes, removal in certified cells, Halton positioning.

use crate::algebra::{Box3, Vec3};
use crate::jacobian::{CertificateReport, JacobianField};
use std::collections::HashSet;

#[derive(Debug, Clone)]
pub struct CollocationPoint {
    pub point: Vec3,
    /// Coarse-to-fine level at which the point was introduced.
    pub level: usize,
    /// Owning cell id (refreshed on update).
    pub cell: usize,
}

#[derive(Debug, Clone)]
pub struct CollocationParams {
    /// Softmax width; `None` selects (g_max / 2)^2 per sub-box.
    pub sigma: Option<f64>,
    /// Sub-cuboid grid per failing sub-box.
    pub sub_grid: [usize; 3],
    /// Level-0 per-cell budget multiplier; level l scales it by 8^l.
    pub budget_base: f64,
    /// Hard cap on the total point count.
    pub max_total: usize,
    /// Starting offset into the Halton sequence.
    pub seed: u64,
}

impl Default for CollocationParams {
    fn default() -> Self {
        CollocationParams {
            sigma: None,
            sub_grid: [2, 2, 2],
            budget_base: 512.0,
            max_total: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub removed: usize,
    pub added: usize,
}

/// The set P of collocation points. No two points coincide within 1e-12.
#[derive(Debug, Clone, Default)]
pub struct CollocationSet {
    points: Vec<CollocationPoint>,
    halton_cursor: u64,
}

/// Radical-inverse (van der Corput) value of `index` in the given base.
pub fn halton(index: u64, base: u64) -> f64 {
    let mut n = index;
    let mut denom = 1.0;
    let mut out = 0.0;
    while n > 0 {
        denom *= base as f64;
        out += (n % base) as f64 / denom;
        n /= base;
    }
    out
}

/// Per-sub-cuboid point counts: the budget share of a failing sub-box is
/// distributed by a softmax in the Jacobian-gradient magnitude at the
/// sub-cuboid centers, then rounded up per sub-cuboid.
pub fn subcuboid_counts(
    level: usize,
    budget_base: f64,
    vol_ratio: f64,
    g: &[f64],
    sigma: Option<f64>,
) -> Vec<usize> {
    let budget = budget_base * 8f64.powi(level as i32);
    let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma = sigma.unwrap_or_else(|| (0.5 * g_max).powi(2));
    let weights: Vec<f64> = if sigma > 0.0 && sigma.is_finite() {
        g.iter().map(|&gi| (-(gi - g_max).powi(2) / sigma).exp()).collect()
    } else {
        vec![1.0; g.len()]
    };
    let sum: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| (budget * vol_ratio * w / sum).ceil().max(0.0) as usize)
        .collect()
}

fn quantize(p: Vec3) -> (i64, i64, i64) {
    let q = |v: f64| (v * 1e12).round() as i64;
    (q(p.x), q(p.y), q(p.z))
}

impl CollocationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CollocationPoint] {
        &self.points
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.point).collect()
    }

    /// Smallest det(J) over the set, `+inf` when empty.
    pub fn min_det(&self, field: &JacobianField) -> f64 {
        self.points
            .iter()
            .map(|p| field.eval(p.point))
            .fold(f64::INFINITY, f64::min)
    }

    /// One coarse-to-fine step: drop points in certified cells, then add
    /// gradient-guided points inside every failing sub-box.
    pub fn update(
        &mut self,
        report: &CertificateReport,
        field: &JacobianField,
        level: usize,
        params: &CollocationParams,
    ) -> UpdateStats {
        let mut stats = UpdateStats::default();
        if self.halton_cursor == 0 {
            self.halton_cursor = params.seed + 1;
        }

        // refresh owning cells (the mesh may have been refined)
        for p in self.points.iter_mut() {
            p.cell = field.locator().locate(p.point);
        }
        let before = self.points.len();
        self.points.retain(|p| {
            report
                .verdicts
                .get(p.cell)
                .map(|v| !v.is_certified())
                .unwrap_or(false)
        });
        stats.removed = before - self.points.len();

        let mut keys: HashSet<(i64, i64, i64)> =
            self.points.iter().map(|p| quantize(p.point)).collect();

        let [gl, gm, gn] = params.sub_grid;
        let grid_n = gl * gm * gn;
        'outer: for verdict in report.failing_cells() {
            let cell_box = field.cells()[verdict.cell].cell_box;
            for failing in &verdict.failing {
                let vol_ratio = failing.cell_box.volume() / cell_box.volume();
                // gradient magnitude at sub-cuboid centers
                let mut subs = Vec::with_capacity(grid_n);
                let mut g = Vec::with_capacity(grid_n);
                for kz in 0..gn {
                    for ky in 0..gm {
                        for kx in 0..gl {
                            let lo = Vec3::new(
                                kx as f64 / gl as f64,
                                ky as f64 / gm as f64,
                                kz as f64 / gn as f64,
                            );
                            let hi = Vec3::new(
                                (kx + 1) as f64 / gl as f64,
                                (ky + 1) as f64 / gm as f64,
                                (kz + 1) as f64 / gn as f64,
                            );
                            let sub = Box3::new(
                                failing.cell_box.lerp(lo),
                                failing.cell_box.lerp(hi),
                            );
                            g.push(field.gradient(sub.center()).norm());
                            subs.push(sub);
                        }
                    }
                }
                let counts =
                    subcuboid_counts(level, params.budget_base, vol_ratio, &g, params.sigma);
                for (sub, count) in subs.iter().zip(counts) {
                    for _ in 0..count {
                        if self.points.len() >= params.max_total {
                            break 'outer;
                        }
                        let idx = self.halton_cursor;
                        self.halton_cursor += 1;
                        let local = Vec3::new(
                            halton(idx, 2),
                            halton(idx, 3),
                            halton(idx, 5),
                        );
                        let point = sub.lerp(local);
                        if keys.insert(quantize(point)) {
                            self.points.push(CollocationPoint {
                                point,
                                level,
                                cell: verdict.cell,
                            });
                            stats.added += 1;
                        }
                    }
                }
            }
        }
        stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::jacobian::{certify_field, JacobianField};

    #[test]
    fn halton_first_values() {
        // base 2: 1/2, 1/4, 3/4, 1/8 ...
        assert!((halton(1, 2) - 0.5).abs() < 1e-15);
        assert!((halton(2, 2) - 0.25).abs() < 1e-15);
        assert!((halton(3, 2) - 0.75).abs() < 1e-15);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton(2, 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_splits_evenly() {
        let g = vec![3.0; 8];
        let counts = subcuboid_counts(0, 512.0, 0.125, &g, None);
        let (lo, hi) = (
            counts.iter().min().unwrap(),
            counts.iter().max().unwrap(),
        );
        assert!(hi - lo <= 1, "counts {counts:?}");
        assert_eq!(*hi, 8); // 512/8 per box, split 8 ways
    }

    #[test]
    fn zero_gradient_field_is_uniform_not_nan() {
        let g = vec![0.0; 8];
        let counts = subcuboid_counts(0, 512.0, 0.125, &g, None);
        assert!(counts.iter().all(|&c| c == 8), "counts {counts:?}");
    }

    #[test]
    fn counts_match_direct_formula() {
        // independent evaluation of the allocation
        let g = vec![0.1, 0.4, 2.0, 0.05, 1.1, 0.9, 1.9, 0.2];
        let level = 1;
        let (base, ratio, sigma) = (512.0, 0.25, 0.8);
        let counts = subcuboid_counts(level, base, ratio, &g, Some(sigma));
        let gmax: f64 = 2.0;
        let expw: Vec<f64> = g
            .iter()
            .map(|&gi| (-(gi - gmax) * (gi - gmax) / sigma).exp())
            .collect();
        let wsum: f64 = expw.iter().sum();
        let budget = 2f64.powi((3 * level + 9) as i32);
        for (c, w) in counts.iter().zip(&expw) {
            let expect = (budget * ratio * w / wsum).ceil() as usize;
            assert_eq!(*c, expect);
        }
        // the steepest-gradient sub-cuboid receives the maximum count
        let argmax = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(counts[argmax], *counts.iter().max().unwrap());
    }

    #[test]
    fn certified_report_empties_the_set() {
        let vol = fixtures::unit_cube(3, 6);
        let field = JacobianField::from_volume(&vol);
        let report = certify_field(&field, 1e-3, 2);
        assert!(report.certified);
        let mut set = CollocationSet::new();
        // preload a fake point
        set.points.push(CollocationPoint { point: Vec3::splat(0.5), level: 0, cell: 0 });
        let stats = set.update(&report, &field, 0, &CollocationParams::default());
        assert_eq!(stats.removed, 1);
        assert_eq!(stats.added, 0);
        assert!(set.is_empty());
    }

    #[test]
    fn folded_volume_gets_points_inside_failing_boxes() {
        let vol = fixtures::folded_cube(3, 6);
        let field = JacobianField::from_volume(&vol);
        let report = certify_field(&field, 1e-3, 2);
        assert!(!report.certified);
        let mut set = CollocationSet::new();
        let stats = set.update(&report, &field, 0, &CollocationParams::default());
        assert!(stats.added > 0);
        // every point lies in its owning cell and inside a failing cell
        for p in set.points() {
            let v = &report.verdicts[p.cell];
            assert!(!v.is_certified());
            let cell_box = field.cells()[p.cell].cell_box;
            assert!(cell_box.contains(p.point));
        }
        // no duplicates within 1e-12
        let mut keys: Vec<_> = set.points().iter().map(|p| quantize(p.point)).collect();
        keys.sort();
        let n0 = keys.len();
        keys.dedup();
        assert_eq!(n0, keys.len());
    }

    #[test]
    fn updates_are_deterministic() {
        let vol = fixtures::folded_cube(3, 6);
        let field = JacobianField::from_volume(&vol);
        let report = certify_field(&field, 1e-3, 2);
        let mut a = CollocationSet::new();
        let mut b = CollocationSet::new();
        a.update(&report, &field, 0, &CollocationParams::default());
        b.update(&report, &field, 0, &CollocationParams::default());
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.points().iter().zip(b.points()) {
            assert_eq!(pa.point, pb.point);
        }
    }
}
