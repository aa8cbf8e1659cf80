//! Parameterization quality: Frobenius condition number, iso-parametric
//! orthogonality, per-sub-cuboid scaled Jacobian, and fairness energy.

use crate::algebra::{Box3, Mat3, Vec3};
use crate::quadrature::{gauss_legendre_unit, QuadratureRule};
use crate::spline::BSplineVolume;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("zero tangent vector; orthogonality undefined")]
    ZeroTangent,
    #[error("computed domain volume {0} is not positive; the map is not bijective")]
    NonPositiveVolume(f64),
    #[error(transparent)]
    Spline(#[from] crate::spline::SplineError),
}

/// Frobenius condition number kappa = |J|_F |J^-1|_F; at least 3 for any
/// nonsingular 3x3 matrix, +inf on singular input.
pub fn condition_number(j: &Mat3) -> f64 {
    match j.inverse() {
        Some(inv) => (j.frobenius_sq() * inv.frobenius_sq()).sqrt(),
        None => f64::INFINITY,
    }
}

/// Orthogonality of an iso-parametric frame: the product of
/// `1 - |cos|` over the three tangent pairs; 1 exactly on orthogonal
/// frames, 0 when two tangents align.
pub fn orthogonality(gx: Vec3, gy: Vec3, gz: Vec3) -> Result<f64, QualityError> {
    let (nx, ny, nz) = (gx.norm(), gy.norm(), gz.norm());
    if nx == 0.0 || ny == 0.0 || nz == 0.0 {
        return Err(QualityError::ZeroTangent);
    }
    let c1 = (gx.dot(gy) / (nx * ny)).abs();
    let c2 = (gy.dot(gz) / (ny * nz)).abs();
    let c3 = (gz.dot(gx) / (nz * nx)).abs();
    Ok((1.0 - c1) * (1.0 - c2) * (1.0 - c3))
}

/// Exact quadrature of det(J) over the whole parameter cube: the domain
/// volume of a bijective map.
pub fn domain_volume(vol: &BSplineVolume) -> f64 {
    let degrees = vol.degrees();
    let orders = [0, 1, 2].map(|a| (3 * degrees[a]).div_ceil(2).max(1));
    let rule = QuadratureRule::over_boxes(&vol.cells(), orders);
    let per_cell: Vec<f64> = (0..rule.num_cells())
        .into_par_iter()
        .map(|c| {
            let (nodes, weights) = rule.cell_nodes(c);
            nodes
                .iter()
                .zip(weights)
                .map(|(p, w)| w * vol.jacobian(*p).expect("in domain").det())
                .sum()
        })
        .collect();
    per_cell.iter().sum()
}

/// Average scaled Jacobian over each sub-cuboid of a uniform grid
/// partition of the parameter cube. The volume-weighted mean is 1.
pub fn volume_distortion_grid(
    vol: &BSplineVolume,
    grid: [usize; 3],
    quad_order: Option<usize>,
) -> Result<Vec<f64>, QualityError> {
    let omega = domain_volume(vol);
    if omega <= 0.0 {
        return Err(QualityError::NonPositiveVolume(omega));
    }
    let degrees = vol.degrees();
    let order =
        quad_order.unwrap_or_else(|| (3 * degrees.iter().max().unwrap()).div_ceil(2).max(1));
    let (gnodes, gweights) = gauss_legendre_unit(order);
    let cells = vol.cells();
    let sub_boxes: Vec<Box3> = {
        let mut out = Vec::with_capacity(grid[0] * grid[1] * grid[2]);
        for k in 0..grid[2] {
            for j in 0..grid[1] {
                for i in 0..grid[0] {
                    let lo = Vec3::new(
                        i as f64 / grid[0] as f64,
                        j as f64 / grid[1] as f64,
                        k as f64 / grid[2] as f64,
                    );
                    let hi = Vec3::new(
                        (i + 1) as f64 / grid[0] as f64,
                        (j + 1) as f64 / grid[1] as f64,
                        (k + 1) as f64 / grid[2] as f64,
                    );
                    out.push(Box3::new(lo, hi));
                }
            }
        }
        out
    };
    // integrate det(J) over each sub-cuboid, split along cell boundaries so
    // the integrand stays polynomial per piece
    let values: Vec<f64> = sub_boxes
        .par_iter()
        .map(|sub| {
            let mut integral = 0.0;
            for cell in &cells {
                let Some(piece) = sub.intersection(cell) else { continue };
                let size = piece.size();
                for (kz, &tz) in gnodes.iter().enumerate() {
                    for (ky, &ty) in gnodes.iter().enumerate() {
                        for (kx, &tx) in gnodes.iter().enumerate() {
                            let p = piece.lerp(Vec3::new(tx, ty, tz));
                            let w = gweights[kx]
                                * gweights[ky]
                                * gweights[kz]
                                * size.x
                                * size.y
                                * size.z;
                            integral += w * vol.jacobian(p).expect("in domain").det();
                        }
                    }
                }
            }
            integral / sub.volume() / omega
        })
        .collect();
    Ok(values)
}

/// The fairness energy: quadrature of the summed squared Frobenius norms of
/// the coordinate Hessians. Exact at the default order.
pub fn fairness_energy(vol: &BSplineVolume, orders: Option<[usize; 3]>) -> f64 {
    let degrees = vol.degrees();
    let orders = orders.unwrap_or([degrees[0] + 1, degrees[1] + 1, degrees[2] + 1]);
    let rule = QuadratureRule::over_boxes(&vol.cells(), orders);
    let per_cell: Vec<f64> = (0..rule.num_cells())
        .into_par_iter()
        .map(|c| {
            let (nodes, weights) = rule.cell_nodes(c);
            let mut acc = 0.0;
            for (p, w) in nodes.iter().zip(weights) {
                let hs = vol.hessians(*p).expect("in domain");
                let d: f64 = hs.iter().map(Mat3::frobenius_sq).sum();
                acc += w * d;
            }
            acc
        })
        .collect();
    per_cell.iter().sum()
}

/// Serialize possibly-infinite floats as JSON strings ("inf", "-inf"),
/// keeping reports valid JSON.
pub mod json_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Named(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Finite(*v).serialize(s)
        } else if v.is_nan() {
            Repr::Named("nan".into()).serialize(s)
        } else if *v > 0.0 {
            Repr::Named("inf".into()).serialize(s)
        } else {
            Repr::Named("-inf".into()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Named(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "unknown float name {other}"
                ))),
            },
        }
    }
}

/// Wall-clock stage timings; displayed but never serialized, so identical
/// runs produce identical report files.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub harmonic_s: f64,
    pub bijective_s: f64,
    pub mips_s: f64,
    pub certify_s: f64,
    pub metrics_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Samples per direction for the kappa / orthogonality extrema.
    pub sampling_resolution: usize,
    /// Sub-cuboid grid for the scaled-Jacobian distribution.
    pub dvol_grid: [usize; 3],
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig { sampling_resolution: 33, dvol_grid: [4, 4, 4] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    #[serde(with = "json_float")]
    pub max_kappa: f64,
    #[serde(with = "json_float")]
    pub min_orth: f64,
    #[serde(with = "json_float")]
    pub max_orth: f64,
    pub min_dvol: f64,
    pub max_dvol: f64,
    pub fairness_energy: f64,
    pub domain_volume: f64,
    pub sampling_resolution: usize,
    pub dvol_grid: [usize; 3],
    #[serde(skip)]
    pub timings: StageTimings,
}

impl QualityReport {
    /// One line in the layout of the published comparison tables:
    /// max kappa, min/max orthogonality, min/max scaled Jacobian.
    pub fn table_row(&self) -> String {
        format!(
            "{:.2}, {:.2}, {:.2}, {:.2}, {:.2}",
            self.max_kappa, self.min_orth, self.max_orth, self.min_dvol, self.max_dvol
        )
    }
}

/// Dense-sampled quality extrema plus integrated quantities.
pub fn quality_report(
    vol: &BSplineVolume,
    config: &QualityConfig,
) -> Result<QualityReport, QualityError> {
    let r = config.sampling_resolution.max(2);
    let samples: Vec<usize> = (0..r * r * r).collect();
    let stats = samples
        .par_iter()
        .map(|&s| {
            let (i, j, k) = (s % r, (s / r) % r, s / (r * r));
            let p = Vec3::new(
                i as f64 / (r - 1) as f64,
                j as f64 / (r - 1) as f64,
                k as f64 / (r - 1) as f64,
            );
            let jac = vol.jacobian(p).expect("in domain");
            let kappa = condition_number(&jac);
            let orth = orthogonality(jac.col(0), jac.col(1), jac.col(2)).unwrap_or(0.0);
            (kappa, orth, orth)
        })
        .collect::<Vec<_>>();
    let mut max_kappa = f64::NEG_INFINITY;
    let mut min_orth = f64::INFINITY;
    let mut max_orth = f64::NEG_INFINITY;
    for (kappa, o1, _) in stats {
        max_kappa = max_kappa.max(kappa);
        min_orth = min_orth.min(o1);
        max_orth = max_orth.max(o1);
    }
    let dvol = volume_distortion_grid(vol, config.dvol_grid, None)?;
    let min_dvol = dvol.iter().copied().fold(f64::INFINITY, f64::min);
    let max_dvol = dvol.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(QualityReport {
        max_kappa,
        min_orth,
        max_orth,
        min_dvol,
        max_dvol,
        fairness_energy: fairness_energy(vol, None),
        domain_volume: domain_volume(vol),
        sampling_resolution: r,
        dvol_grid: config.dvol_grid,
        timings: StageTimings::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mips::conformal_distortion;

    #[test]
    fn kappa_of_identity_is_three() {
        assert!((condition_number(&Mat3::IDENTITY) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn kappa_of_anisotropic_stretch() {
        let j = Mat3::diagonal(Vec3::new(1.0, 1.0, 2.0));
        // sqrt(6) * sqrt(2.25) = sqrt(13.5)
        assert!((condition_number(&j) - 13.5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn kappa_scale_invariant_and_bounded_below() {
        let j = Mat3::from_rows(
            Vec3::new(1.0, 0.5, 0.0),
            Vec3::new(0.0, 2.0, 0.25),
            Vec3::new(0.3, 0.0, 1.5),
        );
        let a = condition_number(&j);
        let b = condition_number(&j.scale(12.0));
        assert!((a - b).abs() < 1e-12 * a);
        assert!(a >= 3.0);
    }

    #[test]
    fn kappa_relates_to_conformal_distortion() {
        let j = Mat3::from_rows(
            Vec3::new(2.0, 0.1, 0.0),
            Vec3::new(0.0, 1.0, 0.4),
            Vec3::new(0.2, 0.0, 0.7),
        );
        let kappa = condition_number(&j);
        let dcon = conformal_distortion(&j);
        assert!((dcon - (kappa * kappa - 1.0) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn orthogonality_cases() {
        let e1 = Vec3::new(1.0, 0.0, 0.0);
        let e2 = Vec3::new(0.0, 1.0, 0.0);
        let e3 = Vec3::new(0.0, 0.0, 1.0);
        assert!((orthogonality(e1, e2, e3).unwrap() - 1.0).abs() < 1e-15);
        // parallel pair collapses to zero
        assert!(orthogonality(e1, e1 * 2.0, e3).unwrap().abs() < 1e-15);
        // 45-degree pair: (1 - sqrt(2)/2)
        let g = Vec3::new(1.0, 1.0, 0.0) * (1.0 / 2f64.sqrt());
        let expect = 1.0 - 2f64.sqrt() / 2.0;
        assert!((orthogonality(e1, g, e3).unwrap() - expect).abs() < 1e-12);
        assert!(orthogonality(Vec3::ZERO, e2, e3).is_err());
    }

    #[test]
    fn identity_cube_distortion_grid_is_unity() {
        let vol = fixtures::unit_cube(3, 5);
        for grid in [[1, 1, 1], [2, 3, 2], [4, 4, 4]] {
            let d = volume_distortion_grid(&vol, grid, None).unwrap();
            for v in d {
                assert!((v - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn affine_cube_distortion_grid_is_unity() {
        let vol = fixtures::affine_cube(
            2,
            5,
            Mat3::diagonal(Vec3::new(2.0, 3.0, 4.0)),
            Vec3::ZERO,
        );
        let d = volume_distortion_grid(&vol, [3, 3, 3], None).unwrap();
        for v in d {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn distortion_grid_weighted_mean_is_one() {
        let vol = fixtures::twisted_cube(3, 6, 50.0);
        let grid = [4, 4, 4];
        let d = volume_distortion_grid(&vol, grid, None).unwrap();
        // uniform grid: plain mean is the volume-weighted mean
        let mean: f64 = d.iter().sum::<f64>() / d.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9, "mean {mean}");
        let min = d.iter().copied().fold(f64::INFINITY, f64::min);
        let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(min <= 1.0 + 1e-12 && max >= 1.0 - 1e-12);
    }

    #[test]
    fn folded_volume_rejected_by_distortion_grid() {
        // reflection makes the signed volume integral drop; build a case
        // with negative total volume by flipping the whole cube
        let vol = fixtures::map_controls(&fixtures::unit_cube(2, 4), |p| {
            Vec3::new(-p.x, p.y, p.z)
        });
        assert!(matches!(
            volume_distortion_grid(&vol, [2, 2, 2], None),
            Err(QualityError::NonPositiveVolume(_))
        ));
    }

    #[test]
    fn fairness_energy_zero_for_affine() {
        let vol = fixtures::affine_cube(
            3,
            5,
            Mat3::from_rows(
                Vec3::new(1.0, 0.2, 0.0),
                Vec3::new(0.0, 2.0, 0.1),
                Vec3::new(0.0, 0.0, 0.5),
            ),
            Vec3::new(4.0, 5.0, 6.0),
        );
        let e = fairness_energy(&vol, None);
        assert!(e >= 0.0);
        assert!(e < 1e-20, "affine fairness {e}");
    }

    #[test]
    fn fairness_energy_stable_under_over_integration() {
        let vol = fixtures::perturbed_cube(3, 6, 0.05, 11);
        let a = fairness_energy(&vol, None);
        let b = fairness_energy(&vol, Some([8, 8, 8]));
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn fairness_energy_matches_assembled_form() {
        use crate::harmonic::{assemble_fairness_form, VolumeSkeleton};
        let vol = fixtures::perturbed_cube(2, 5, 0.04, 31);
        let skel = VolumeSkeleton::new(
            vol.knots(0).clone(),
            vol.knots(1).clone(),
            vol.knots(2).clone(),
        );
        let form = assemble_fairness_form(&skel, None).unwrap();
        let via_form = crate::harmonic::energy_of(&form, &vol);
        let direct = fairness_energy(&vol, None);
        assert!(
            (via_form - direct).abs() <= 1e-9 * direct.abs().max(1.0),
            "{via_form} vs {direct}"
        );
    }

    #[test]
    fn identity_cube_report() {
        let vol = fixtures::unit_cube(3, 5);
        let report = quality_report(&vol, &QualityConfig::default()).unwrap();
        assert!((report.max_kappa - 3.0).abs() < 1e-10);
        assert!((report.min_orth - 1.0).abs() < 1e-10);
        assert!((report.max_orth - 1.0).abs() < 1e-10);
        assert!((report.min_dvol - 1.0).abs() < 1e-10);
        assert!((report.max_dvol - 1.0).abs() < 1e-10);
        assert!((report.domain_volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_shear_report_matches_closed_form() {
        let m = Mat3::from_rows(
            Vec3::new(1.0, 0.5, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let vol = fixtures::affine_cube(2, 4, m, Vec3::ZERO);
        let report = quality_report(&vol, &QualityConfig::default()).unwrap();
        let kappa = condition_number(&m);
        let orth = orthogonality(m.col(0), m.col(1), m.col(2)).unwrap();
        assert!((report.max_kappa - kappa).abs() < 1e-9);
        assert!((report.min_orth - orth).abs() < 1e-9);
        assert!((report.max_orth - orth).abs() < 1e-9);
        assert!((report.min_dvol - 1.0).abs() < 1e-9);
    }

    #[test]
    fn report_roundtrips_with_infinite_kappa() {
        let report = QualityReport {
            max_kappa: f64::INFINITY,
            min_orth: 0.0,
            max_orth: 1.0,
            min_dvol: -0.5,
            max_dvol: 2.0,
            fairness_energy: 1.0,
            domain_volume: 0.9,
            sampling_resolution: 17,
            dvol_grid: [4, 4, 4],
            timings: StageTimings::default(),
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"inf\""));
        let back: QualityReport = serde_json::from_str(&json).unwrap();
        assert!(back.max_kappa.is_infinite());
    }
}
