//! Stage 1: the initial map minimizing the integrated squared Laplacian
//! with the boundary controls fixed, via a sparse SPD solve.

mod assemble;

pub use assemble::{
    assemble_fairness_form, assemble_laplace_form, BasisProductKernel, VolumeSkeleton,
};

use crate::algebra::Vec3;
use crate::sparse::{pcg, CsrMatrix, PcgError};
use rayon::prelude::*;
use crate::spline::{BSplineSurface, BSplineVolume, ControlGrid3, FaceLabel, SplineError};
use thiserror::Error;

pub const DEFAULT_PCG_TOL: f64 = 1e-10;
const EDGE_TOL_REL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HarmonicError {
    #[error("face {face} is incompatible with the volume skeleton: {detail}")]
    Incompatible { face: FaceLabel, detail: String },
    #[error("missing face {0}")]
    MissingFace(FaceLabel),
    #[error("face {0} appears more than once")]
    DuplicateFace(FaceLabel),
    #[error(
        "adjacent faces disagree on shared boundary controls: max deviation {max_deviation:e} exceeds tolerance {tolerance:e}"
    )]
    EdgeMismatch { max_deviation: f64, tolerance: f64 },
    #[error("degrees below 2 make the energy singular; elevate the input first")]
    DegreeTooLow,
    #[error(transparent)]
    Solver(#[from] PcgError),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Fixed boundary controls plus the free interior index set.
#[derive(Debug, Clone)]
pub struct BoundaryAssignment {
    /// One entry per control point; boundary slots hold their fixed value.
    pub fixed: Vec<Option<Vec3>>,
    /// Flat indices of the free (interior) controls, ascending.
    pub free: Vec<usize>,
    pub dims: [usize; 3],
}

/// The boundary-constrained quadratic energy reduced to the free controls:
/// one scalar system shared by the three coordinates.
#[derive(Debug)]
pub struct QuadraticForm {
    /// Free-by-free block, symmetric positive definite.
    pub matrix: CsrMatrix,
    /// Per-coordinate right-hand side from the boundary coupling.
    pub rhs: [Vec<f64>; 3],
    pub free: Vec<usize>,
}

fn order_faces(faces: &[BSplineSurface]) -> Result<[&BSplineSurface; 6], HarmonicError> {
    let mut found: [Option<&BSplineSurface>; 6] = [None; 6];
    for f in faces {
        let slot = FaceLabel::ALL.iter().position(|&l| l == f.label).unwrap();
        if found[slot].is_some() {
            return Err(HarmonicError::DuplicateFace(f.label));
        }
        found[slot] = Some(f);
    }
    let mut out = Vec::with_capacity(6);
    for (slot, f) in found.into_iter().enumerate() {
        match f {
            Some(f) => out.push(f),
            None => return Err(HarmonicError::MissingFace(FaceLabel::ALL[slot])),
        }
    }
    Ok(out.try_into().unwrap())
}

/// Derive the volume's knot skeleton from six compatible faces.
pub fn skeleton_from_faces(faces: &[BSplineSurface]) -> Result<VolumeSkeleton, HarmonicError> {
    let ordered = order_faces(faces)?;
    // eta0 face is parameterized by (xi, zeta); zeta0 by (xi, eta)
    let u = ordered[2].knots_a.clone();
    let v = ordered[0].knots_a.clone();
    let w = ordered[0].knots_b.clone();
    let skel = VolumeSkeleton::new(u, v, w);
    for f in ordered {
        let (a_axis, b_axis) = f.label.free_axes();
        for (axis, kv) in [(a_axis, &f.knots_a), (b_axis, &f.knots_b)] {
            let expect = skel.knots(axis);
            if kv != expect {
                return Err(HarmonicError::Incompatible {
                    face: f.label,
                    detail: format!(
                        "axis {axis} knots/degree differ (degree {} vs {})",
                        kv.degree(),
                        expect.degree()
                    ),
                });
            }
        }
    }
    Ok(skel)
}

/// Assign all boundary control points from the six faces and collect the
/// free interior indices.
pub fn fix_boundary(
    skel: &VolumeSkeleton,
    faces: &[BSplineSurface],
) -> Result<BoundaryAssignment, HarmonicError> {
    let ordered = order_faces(faces)?;
    let dims = skel.dims();
    let total = dims[0] * dims[1] * dims[2];
    let mut fixed: Vec<Option<Vec3>> = vec![None; total];
    let flat = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);

    // scale reference for the shared-edge tolerance
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for f in ordered {
        for p in f.grid.points() {
            lo = lo.min_componentwise(*p);
            hi = hi.max_componentwise(*p);
        }
    }
    let tolerance = EDGE_TOL_REL * (hi - lo).norm().max(f64::MIN_POSITIVE);

    let mut max_deviation = 0.0f64;
    for f in ordered {
        let (axis, value) = f.label.fixed_axis();
        let (a_axis, b_axis) = f.label.free_axes();
        let fdims = f.grid.dims();
        let expect = [dims[a_axis], dims[b_axis]];
        if fdims != expect {
            return Err(HarmonicError::Incompatible {
                face: f.label,
                detail: format!("control grid {fdims:?}, expected {expect:?}"),
            });
        }
        let fixed_idx = if value == 0.0 { 0 } else { dims[axis] - 1 };
        for b in 0..fdims[1] {
            for a in 0..fdims[0] {
                let mut idx = [0usize; 3];
                idx[axis] = fixed_idx;
                idx[a_axis] = a;
                idx[b_axis] = b;
                let slot = flat(idx[0], idx[1], idx[2]);
                let p = f.grid.get(a, b);
                match fixed[slot] {
                    None => fixed[slot] = Some(p),
                    Some(existing) => {
                        max_deviation = max_deviation.max((existing - p).norm());
                    }
                }
            }
        }
    }
    if max_deviation > tolerance {
        return Err(HarmonicError::EdgeMismatch { max_deviation, tolerance });
    }
    let free: Vec<usize> = (0..total).filter(|&s| fixed[s].is_none()).collect();
    Ok(BoundaryAssignment { fixed, free, dims })
}

/// Reduce a full symmetric form to the free set with boundary coupling on
/// the right-hand side.
pub fn reduce_form(
    full: &CsrMatrix,
    assignment: &BoundaryAssignment,
) -> QuadraticForm {
    let free = &assignment.free;
    let pos_of: Vec<Option<usize>> = {
        let mut v = vec![None; full.n()];
        for (fi, &g) in free.iter().enumerate() {
            v[g] = Some(fi);
        }
        v
    };
    let mut tri = Vec::new();
    let mut rhs = [vec![0.0; free.len()], vec![0.0; free.len()], vec![0.0; free.len()]];
    for (fi, &g) in free.iter().enumerate() {
        let (cols, vals) = full.row(g);
        for (&c, &v) in cols.iter().zip(vals) {
            match pos_of[c] {
                Some(fj) => tri.push((fi, fj, v)),
                None => {
                    let b = assignment.fixed[c].expect("non-free implies fixed");
                    rhs[0][fi] -= v * b.x;
                    rhs[1][fi] -= v * b.y;
                    rhs[2][fi] -= v * b.z;
                }
            }
        }
    }
    QuadraticForm {
        matrix: CsrMatrix::from_triplets(free.len(), &tri),
        rhs,
        free: free.clone(),
    }
}

/// Transfinite (Coons-style) interior fill of a control net from its fixed
/// boundary, with Greville abscissae as the blending parameters. Exact for
/// boundary data sampled from any trilinear-or-simpler map.
pub fn coons_fill(skel: &VolumeSkeleton, assignment: &BoundaryAssignment) -> ControlGrid3 {
    let dims = skel.dims();
    let fixed = &assignment.fixed;
    let flat = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
    let bp = |i: usize, j: usize, k: usize| fixed[flat(i, j, k)].expect("boundary slot");
    let (li, lj, lk) = (dims[0] - 1, dims[1] - 1, dims[2] - 1);
    let ga: Vec<f64> = (0..dims[0]).map(|i| skel.knots(0).greville(i)).collect();
    let gb: Vec<f64> = (0..dims[1]).map(|j| skel.knots(1).greville(j)).collect();
    let gc: Vec<f64> = (0..dims[2]).map(|k| skel.knots(2).greville(k)).collect();
    ControlGrid3::from_fn(dims, |i, j, k| {
        if let Some(p) = fixed[flat(i, j, k)] {
            return p;
        }
        let (a, b, c) = (ga[i], gb[j], gc[k]);
        let faces = bp(0, j, k) * (1.0 - a)
            + bp(li, j, k) * a
            + bp(i, 0, k) * (1.0 - b)
            + bp(i, lj, k) * b
            + bp(i, j, 0) * (1.0 - c)
            + bp(i, j, lk) * c;
        let edges = bp(0, 0, k) * ((1.0 - a) * (1.0 - b))
            + bp(li, 0, k) * (a * (1.0 - b))
            + bp(0, lj, k) * ((1.0 - a) * b)
            + bp(li, lj, k) * (a * b)
            + bp(0, j, 0) * ((1.0 - a) * (1.0 - c))
            + bp(li, j, 0) * (a * (1.0 - c))
            + bp(0, j, lk) * ((1.0 - a) * c)
            + bp(li, j, lk) * (a * c)
            + bp(i, 0, 0) * ((1.0 - b) * (1.0 - c))
            + bp(i, lj, 0) * (b * (1.0 - c))
            + bp(i, 0, lk) * ((1.0 - b) * c)
            + bp(i, lj, lk) * (b * c);
        let corners = bp(0, 0, 0) * ((1.0 - a) * (1.0 - b) * (1.0 - c))
            + bp(li, 0, 0) * (a * (1.0 - b) * (1.0 - c))
            + bp(0, lj, 0) * ((1.0 - a) * b * (1.0 - c))
            + bp(li, lj, 0) * (a * b * (1.0 - c))
            + bp(0, 0, lk) * ((1.0 - a) * (1.0 - b) * c)
            + bp(li, 0, lk) * (a * (1.0 - b) * c)
            + bp(0, lj, lk) * ((1.0 - a) * b * c)
            + bp(li, lj, lk) * (a * b * c);
        faces - edges + corners
    })
}

#[derive(Debug, Clone)]
pub struct HarmonicOutcome {
    pub volume: BSplineVolume,
    /// Value of the minimized energy.
    pub energy: f64,
    pub pcg_iterations: usize,
    pub relative_residual: f64,
}

/// Solve the boundary-constrained energy minimization for the free controls
/// of `form`, returning per-coordinate values.
pub fn solve_form(
    form: &QuadraticForm,
    init: Option<&[Vec3]>,
    tol: f64,
    max_iter: usize,
) -> Result<([Vec<f64>; 3], usize, f64), HarmonicError> {
    let mut out: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut iterations = 0;
    let mut residual = 0.0f64;
    for coord in 0..3 {
        let x0: Option<Vec<f64>> =
            init.map(|points| form.free.iter().enumerate().map(|(fi, _)| points[fi][coord]).collect());
        let sol = pcg(&form.matrix, &form.rhs[coord], x0.as_deref(), tol, max_iter)?;
        iterations = iterations.max(sol.iterations);
        residual = residual.max(sol.relative_residual);
        out[coord] = sol.x;
    }
    Ok((out, iterations, residual))
}

/// Stage 1 entry point: build the initial volume whose interior minimizes
/// the integrated squared Laplacian under the given boundary.
///
/// Directions of degree < 2 are exactly degree-elevated on ingest so that
/// the energy is nonsingular.
pub fn harmonic_map(
    faces: &[BSplineSurface],
    tol: f64,
) -> Result<HarmonicOutcome, HarmonicError> {
    let skel = skeleton_from_faces(faces)?;
    let assignment = fix_boundary(&skel, faces)?;
    let coons = coons_fill(&skel, &assignment);
    let vol = BSplineVolume::new(
        skel.knots(0).clone(),
        skel.knots(1).clone(),
        skel.knots(2).clone(),
        coons,
    )?;
    let vol = if vol.degrees().iter().any(|&d| d < 2) {
        vol.elevate_linear_axes()?
    } else {
        vol
    };
    harmonic_map_of_volume(&vol, tol)
}

/// As [`harmonic_map`], starting from a volume whose boundary is already in
/// place (its interior is used as the PCG initial guess).
pub fn harmonic_map_of_volume(
    vol: &BSplineVolume,
    tol: f64,
) -> Result<HarmonicOutcome, HarmonicError> {
    if vol.degrees().iter().any(|&d| d < 2) {
        return Err(HarmonicError::DegreeTooLow);
    }
    let skel = VolumeSkeleton::new(
        vol.knots(0).clone(),
        vol.knots(1).clone(),
        vol.knots(2).clone(),
    );
    let dims = skel.dims();
    let interior = |flat: usize| {
        let i = flat % dims[0];
        let j = (flat / dims[0]) % dims[1];
        let k = flat / (dims[0] * dims[1]);
        i > 0 && i + 1 < dims[0] && j > 0 && j + 1 < dims[1] && k > 0 && k + 1 < dims[2]
    };
    let fixed: Vec<Option<Vec3>> = vol
        .grid()
        .points()
        .iter()
        .enumerate()
        .map(|(s, p)| if interior(s) { None } else { Some(*p) })
        .collect();
    let free: Vec<usize> = (0..fixed.len()).filter(|&s| fixed[s].is_none()).collect();
    let assignment = BoundaryAssignment { fixed, free, dims };

    let full = assemble_laplace_form(&skel, None)?;
    let form = reduce_form(&full, &assignment);
    let init: Vec<Vec3> = assignment
        .free
        .iter()
        .map(|&g| vol.grid().points()[g])
        .collect();
    let (coords, pcg_iterations, relative_residual) =
        solve_form(&form, Some(&init), tol, 10_000)?;

    let mut grid = vol.grid().clone();
    for (fi, &g) in assignment.free.iter().enumerate() {
        let (i, j, k) = grid.unflatten(g);
        grid.set(i, j, k, Vec3::new(coords[0][fi], coords[1][fi], coords[2][fi]));
    }
    let volume = vol.with_grid(grid)?;
    let energy = laplace_energy(&volume, None);
    Ok(HarmonicOutcome { volume, energy, pcg_iterations, relative_residual })
}

/// c' A c summed over the three coordinates of the control net.
pub fn energy_of(full: &CsrMatrix, vol: &BSplineVolume) -> f64 {
    let points = vol.grid().points();
    let mut energy = 0.0;
    for coord in 0..3 {
        let c: Vec<f64> = points.iter().map(|p| p[coord]).collect();
        energy += full.quadratic_form(&c);
    }
    energy
}

/// The integrated squared Laplacian of the map by pointwise quadrature.
///
/// Squaring happens per node, so exact-zero energies come out at roundoff
/// of the squares rather than of the assembled form.
pub fn laplace_energy(vol: &BSplineVolume, orders: Option<[usize; 3]>) -> f64 {
    let degrees = vol.degrees();
    let orders = orders.unwrap_or([degrees[0] + 1, degrees[1] + 1, degrees[2] + 1]);
    let rule = crate::quadrature::QuadratureRule::over_boxes(&vol.cells(), orders);
    let per_cell: Vec<f64> = (0..rule.num_cells())
        .into_par_iter()
        .map(|c| {
            let (nodes, weights) = rule.cell_nodes(c);
            let mut acc = 0.0;
            for (p, w) in nodes.iter().zip(weights) {
                let hs = vol.hessians(*p).expect("in domain");
                let lap: f64 = hs
                    .iter()
                    .map(|h| {
                        let t = h.m[0][0] + h.m[1][1] + h.m[2][2];
                        t * t
                    })
                    .sum();
                acc += w * lap;
            }
            acc
        })
        .collect();
    per_cell.iter().sum()
}
