//! Assembly of second-derivative quadratic forms (Laplacian energy and the
//! fairness energy) over the spline basis by per-cell Gauss quadrature.

use super::HarmonicError;
use crate::quadrature::gauss_legendre_unit;
use crate::sparse::CsrMatrix;
use crate::spline::{eval_basis_ders, KnotVector};
use rayon::prelude::*;

/// Degrees and knots of a volume, without control points.
#[derive(Debug, Clone)]
pub struct VolumeSkeleton {
    kvs: [KnotVector; 3],
}

impl VolumeSkeleton {
    pub fn new(u: KnotVector, v: KnotVector, w: KnotVector) -> Self {
        VolumeSkeleton { kvs: [u, v, w] }
    }

    pub fn knots(&self, axis: usize) -> &KnotVector {
        &self.kvs[axis]
    }

    pub fn degrees(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.kvs[a].degree())
    }

    pub fn dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.kvs[a].num_basis())
    }

    pub fn num_controls(&self) -> usize {
        self.dims().iter().product()
    }
}

/// Which products of second derivatives the form integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisProductKernel {
    /// (Lap N_a)(Lap N_b): the integrated squared-Laplacian energy.
    Laplace,
    /// Frobenius product of the basis Hessians: the fairness energy.
    Fairness,
}

/// Assemble the symmetric form over all controls. `orders` defaults to
/// degree + 1 points per direction, exact for these polynomial integrands.
pub fn assemble_form(
    skel: &VolumeSkeleton,
    kernel: BasisProductKernel,
    orders: Option<[usize; 3]>,
) -> Result<CsrMatrix, HarmonicError> {
    let degrees = skel.degrees();
    if degrees.iter().any(|&d| d < 2) {
        return Err(HarmonicError::DegreeTooLow);
    }
    let orders = orders.unwrap_or([degrees[0] + 1, degrees[1] + 1, degrees[2] + 1]);
    let rules: Vec<(Vec<f64>, Vec<f64>)> =
        orders.iter().map(|&n| gauss_legendre_unit(n)).collect();
    let dims = skel.dims();
    let spans: [Vec<crate::spline::KnotSpan>; 3] =
        [0, 1, 2].map(|a| skel.knots(a).spans());

    let mut cells: Vec<[usize; 3]> = Vec::new();
    for kw in 0..spans[2].len() {
        for jv in 0..spans[1].len() {
            for iu in 0..spans[0].len() {
                cells.push([iu, jv, kw]);
            }
        }
    }

    let blocks: Vec<Vec<(usize, usize, f64)>> = cells
        .par_iter()
        .map(|&[iu, jv, kw]| {
            let cell_spans = [&spans[0][iu], &spans[1][jv], &spans[2][kw]];
            let n_active: usize = degrees.iter().map(|d| d + 1).product();
            let mut local = vec![0.0f64; n_active * n_active];

            // per-axis nodes in the span plus basis derivative tables
            let axis_tables: Vec<Vec<(f64, Vec<Vec<f64>>)>> = (0..3)
                .map(|axis| {
                    let span = cell_spans[axis];
                    let (nodes, weights) = &rules[axis];
                    nodes
                        .iter()
                        .zip(weights)
                        .map(|(&t, &w)| {
                            let x = span.start + t * span.width();
                            let (_, ders) =
                                eval_basis_ders(skel.knots(axis), x, 2).expect("in domain");
                            (w * span.width(), ders)
                        })
                        .collect()
                })
                .collect();

            let span_offsets = [
                cell_spans[0].index - degrees[0],
                cell_spans[1].index - degrees[1],
                cell_spans[2].index - degrees[2],
            ];

            let (n0, n1, n2) = (degrees[0] + 1, degrees[1] + 1, degrees[2] + 1);
            let mut row = vec![[0.0f64; 6]; n_active];
            for (w2, d2) in &axis_tables[2] {
                for (w1, d1) in &axis_tables[1] {
                    for (w0, d0) in &axis_tables[0] {
                        let weight = w0 * w1 * w2;
                        for aw in 0..n2 {
                            for av in 0..n1 {
                                for au in 0..n0 {
                                    let a = au + n0 * (av + n1 * aw);
                                    row[a] = [
                                        d0[2][au] * d1[0][av] * d2[0][aw],
                                        d0[0][au] * d1[2][av] * d2[0][aw],
                                        d0[0][au] * d1[0][av] * d2[2][aw],
                                        d0[1][au] * d1[1][av] * d2[0][aw],
                                        d0[1][au] * d1[0][av] * d2[1][aw],
                                        d0[0][au] * d1[1][av] * d2[1][aw],
                                    ];
                                }
                            }
                        }
                        match kernel {
                            BasisProductKernel::Laplace => {
                                for a in 0..n_active {
                                    let la = row[a][0] + row[a][1] + row[a][2];
                                    for b in 0..n_active {
                                        let lb = row[b][0] + row[b][1] + row[b][2];
                                        // parenthesized so (a,b) and (b,a)
                                        // round identically
                                        local[a * n_active + b] += weight * (la * lb);
                                    }
                                }
                            }
                            BasisProductKernel::Fairness => {
                                for a in 0..n_active {
                                    let sa = row[a];
                                    for b in 0..n_active {
                                        let sb = row[b];
                                        let dot = sa[0] * sb[0]
                                            + sa[1] * sb[1]
                                            + sa[2] * sb[2]
                                            + 2.0 * (sa[3] * sb[3] + sa[4] * sb[4] + sa[5] * sb[5]);
                                        local[a * n_active + b] += weight * dot;
                                    }
                                }
                            }
                        }
                    }
                }
            }

            let global = |a: usize| {
                let au = a % n0;
                let av = (a / n0) % n1;
                let aw = a / (n0 * n1);
                (span_offsets[0] + au)
                    + dims[0] * ((span_offsets[1] + av) + dims[1] * (span_offsets[2] + aw))
            };
            let mut tri = Vec::with_capacity(n_active * n_active);
            for a in 0..n_active {
                for b in 0..n_active {
                    let v = local[a * n_active + b];
                    if v != 0.0 {
                        tri.push((global(a), global(b), v));
                    }
                }
            }
            tri
        })
        .collect();

    let triplets: Vec<(usize, usize, f64)> = blocks.into_iter().flatten().collect();
    Ok(CsrMatrix::from_triplets(skel.num_controls(), &triplets))
}

pub fn assemble_laplace_form(
    skel: &VolumeSkeleton,
    orders: Option<[usize; 3]>,
) -> Result<CsrMatrix, HarmonicError> {
    assemble_form(skel, BasisProductKernel::Laplace, orders)
}

pub fn assemble_fairness_form(
    skel: &VolumeSkeleton,
    orders: Option<[usize; 3]>,
) -> Result<CsrMatrix, HarmonicError> {
    assemble_form(skel, BasisProductKernel::Fairness, orders)
}
