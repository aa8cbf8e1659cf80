//! Tensor-product B-spline and Bernstein/Bezier primitives.

mod basis;
mod bezier;
mod grid;
mod knots;
mod surface;
mod volume;

pub use basis::{eval_basis, eval_basis_ders};
pub use bezier::{BezierCell, ScalarBezierCell};
pub use grid::{ControlGrid3, Grid2};
pub use knots::{KnotSpan, KnotVector};
pub use surface::{BSplineSurface, FaceLabel};
pub use volume::BSplineVolume;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("parameter {value} lies outside the [0,1] domain")]
    OutOfDomain { value: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("control grid has {found} points, expected {expected}")]
    GridMismatch { expected: usize, found: usize },
    #[error("non-finite control point at flat index {0}")]
    NonFinitePoint(usize),
    #[error("operands are defined over different boxes")]
    BoxMismatch,
    #[error("rational (weighted) spline input is not supported")]
    RationalUnsupported,
    #[error("{0}")]
    Unsupported(String),
}
