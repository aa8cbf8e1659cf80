//! Bundled synthetic models: cubes, twists, tapers, bends, and folds.
//!
//! Each fixture is a concrete control net. The smooth formulas below are
//! applied to the Greville points of an identity net, so every fixture is a
//! genuine polynomial B-spline volume (not an approximation claim about the
//! formula). Boundary-surface fixtures are face restrictions of these nets.

use crate::algebra::{Mat3, Vec3};
use crate::spline::{BSplineSurface, BSplineVolume, ControlGrid3, FaceLabel, KnotVector};

/// Uniform clamped knots: `n_basis` functions of the given degree.
pub fn uniform_knots(degree: usize, n_basis: usize) -> KnotVector {
    KnotVector::open_uniform(degree, n_basis)
}

/// The identity map of the unit cube.
pub fn unit_cube(degree: usize, n_basis: usize) -> BSplineVolume {
    let kv = uniform_knots(degree, n_basis);
    BSplineVolume::identity(kv.clone(), kv.clone(), kv)
}

/// Map every control point of `vol` through `f`.
pub fn map_controls(vol: &BSplineVolume, mut f: impl FnMut(Vec3) -> Vec3) -> BSplineVolume {
    let grid = ControlGrid3::from_fn(vol.grid().dims(), |i, j, k| f(vol.grid().get(i, j, k)));
    vol.with_grid(grid).expect("same dims")
}

/// Affine image of the unit cube: `x -> m x + shift`.
pub fn affine_cube(degree: usize, n_basis: usize, m: Mat3, shift: Vec3) -> BSplineVolume {
    map_controls(&unit_cube(degree, n_basis), |p| m.mul_vec(p) + shift)
}

/// Cube whose cross-section rotates about the vertical axis, linearly in z,
/// by `angle_deg` degrees total.
pub fn twisted_cube(degree: usize, n_basis: usize, angle_deg: f64) -> BSplineVolume {
    let theta = angle_deg.to_radians();
    map_controls(&unit_cube(degree, n_basis), |p| {
        let a = theta * p.z;
        let (s, c) = a.sin_cos();
        let (dx, dy) = (p.x - 0.5, p.y - 0.5);
        Vec3::new(0.5 + c * dx - s * dy, 0.5 + s * dx + c * dy, p.z)
    })
}

/// Block that narrows towards the top: the z = 1 cross-section is scaled by
/// `top_scale` relative to the base.
pub fn tapered_block(degree: usize, n_basis: usize, top_scale: f64) -> BSplineVolume {
    map_controls(&unit_cube(degree, n_basis), |p| {
        let s = 1.0 + (top_scale - 1.0) * p.z;
        Vec3::new(0.5 + s * (p.x - 0.5), 0.5 + s * (p.y - 0.5), p.z)
    })
}

/// Block bent around the y axis through `sweep_deg` degrees at unit inner
/// radius, a smooth domain-of-revolution shape.
pub fn revolved_block(degree: usize, n_basis: usize, sweep_deg: f64) -> BSplineVolume {
    let sweep = sweep_deg.to_radians();
    map_controls(&unit_cube(degree, n_basis), |p| {
        let r = 1.0 + p.x;
        let phi = sweep * p.z;
        Vec3::new(r * phi.cos() - 1.0, p.y, r * phi.sin())
    })
}

/// Cube whose top face is pressed inward by a smooth bump of the given
/// depth; concave for depths large enough, which makes the harmonic initial
/// map fold near the dent.
pub fn dented_cube(degree: usize, n_basis: usize, depth: f64) -> BSplineVolume {
    map_controls(&unit_cube(degree, n_basis), |p| {
        let bump = (-((p.x - 0.5).powi(2) + (p.y - 0.5).powi(2)) / 0.045).exp();
        let top = 1.0 - depth * bump;
        Vec3::new(p.x, p.y, p.z * top)
    })
}

/// Identity cube with one interior control point reflected through the
/// xi = 1 face plane, producing a folded (non-bijective) map. Reflects the
/// interior control at grid index `(1, j, k)`; the long flight across the
/// domain folds the map for `n_basis >= 6`.
pub fn folded_cube_at(degree: usize, n_basis: usize, j: usize, k: usize) -> BSplineVolume {
    let vol = unit_cube(degree, n_basis);
    let dims = vol.grid().dims();
    assert!(dims.iter().all(|&d| d >= 6), "need n_basis >= 6 for a real fold");
    assert!(j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2]);
    let mut grid = vol.grid().clone();
    let mut p = grid.get(1, j, k);
    p.x = 2.0 - p.x;
    grid.set(1, j, k, p);
    vol.with_grid(grid).expect("same dims")
}

/// [`folded_cube_at`] with the reflected control centered in eta and zeta.
pub fn folded_cube(degree: usize, n_basis: usize) -> BSplineVolume {
    folded_cube_at(degree, n_basis, n_basis / 2, n_basis / 2)
}

/// Identity-based volume with a smooth random perturbation of the interior
/// controls, small enough to stay bijective.
pub fn perturbed_cube(degree: usize, n_basis: usize, amplitude: f64, seed: u64) -> BSplineVolume {
    let vol = unit_cube(degree, n_basis);
    let dims = vol.grid().dims();
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        ((state >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0
    };
    let grid = ControlGrid3::from_fn(dims, |i, j, k| {
        let interior =
            i > 0 && i + 1 < dims[0] && j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2];
        let base = vol.grid().get(i, j, k);
        if interior {
            base + Vec3::new(next(), next(), next()) * amplitude
        } else {
            base
        }
    });
    vol.with_grid(grid).expect("same dims")
}

/// The six boundary faces of a volume, in canonical label order.
pub fn faces_of(vol: &BSplineVolume) -> Vec<BSplineSurface> {
    FaceLabel::ALL.iter().map(|&l| vol.face(l)).collect()
}

/// Named fixtures bundled with the command-line tool.
pub fn by_name(name: &str) -> Option<BSplineVolume> {
    match name {
        "cube" => Some(unit_cube(3, 6)),
        "affine-cube" => Some(affine_cube(
            3,
            6,
            Mat3::diagonal(Vec3::new(2.0, 3.0, 4.0)),
            Vec3::ZERO,
        )),
        "twisted-cube-30" => Some(twisted_cube(3, 8, 30.0)),
        "tapered-block" => Some(tapered_block(3, 6, 0.45)),
        "revolved-block" => Some(revolved_block(3, 6, 60.0)),
        "dented-cube" => Some(dented_cube(3, 8, 0.72)),
        "folded-cube" => Some(folded_cube(3, 6)),
        _ => None,
    }
}

/// All fixture names accepted by [`by_name`].
pub const NAMES: [&str; 7] = [
    "cube",
    "affine-cube",
    "twisted-cube-30",
    "tapered-block",
    "revolved-block",
    "dented-cube",
    "folded-cube",
];
