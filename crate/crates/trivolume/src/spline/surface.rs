use crate::algebra::Vec3;
use serde::{Deserialize, Serialize};

use super::{eval_basis, Grid2, KnotVector, SplineError};

/// Which face of the unit cube a boundary surface covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceLabel {
    #[serde(rename = "xi0")]
    Xi0,
    #[serde(rename = "xi1")]
    Xi1,
    #[serde(rename = "eta0")]
    Eta0,
    #[serde(rename = "eta1")]
    Eta1,
    #[serde(rename = "zeta0")]
    Zeta0,
    #[serde(rename = "zeta1")]
    Zeta1,
}

impl FaceLabel {
    pub const ALL: [FaceLabel; 6] = [
        FaceLabel::Xi0,
        FaceLabel::Xi1,
        FaceLabel::Eta0,
        FaceLabel::Eta1,
        FaceLabel::Zeta0,
        FaceLabel::Zeta1,
    ];

    /// The volume axis held constant on this face, and its value.
    pub fn fixed_axis(self) -> (usize, f64) {
        match self {
            FaceLabel::Xi0 => (0, 0.0),
            FaceLabel::Xi1 => (0, 1.0),
            FaceLabel::Eta0 => (1, 0.0),
            FaceLabel::Eta1 => (1, 1.0),
            FaceLabel::Zeta0 => (2, 0.0),
            FaceLabel::Zeta1 => (2, 1.0),
        }
    }

    /// The two volume axes that parameterize this face, in surface
    /// (a, b) order.
    pub fn free_axes(self) -> (usize, usize) {
        match self.fixed_axis().0 {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }
}

impl std::fmt::Display for FaceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FaceLabel::Xi0 => "xi0",
            FaceLabel::Xi1 => "xi1",
            FaceLabel::Eta0 => "eta0",
            FaceLabel::Eta1 => "eta1",
            FaceLabel::Zeta0 => "zeta0",
            FaceLabel::Zeta1 => "zeta1",
        };
        f.write_str(s)
    }
}

/// A boundary B-spline surface, one of the six cube faces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineSurface {
    pub label: FaceLabel,
    pub knots_a: KnotVector,
    pub knots_b: KnotVector,
    pub grid: Grid2,
}

impl BSplineSurface {
    pub fn new(
        label: FaceLabel,
        knots_a: KnotVector,
        knots_b: KnotVector,
        grid: Grid2,
    ) -> Result<Self, SplineError> {
        let expected = [knots_a.num_basis(), knots_b.num_basis()];
        if grid.dims() != expected {
            return Err(SplineError::GridMismatch {
                expected: expected[0] * expected[1],
                found: grid.dims()[0] * grid.dims()[1],
            });
        }
        Ok(BSplineSurface { label, knots_a, knots_b, grid })
    }

    pub fn eval(&self, a: f64, b: f64) -> Result<Vec3, SplineError> {
        let (sa, na) = eval_basis(&self.knots_a, a)?;
        let (sb, nb) = eval_basis(&self.knots_b, b)?;
        let (pa, pb) = (self.knots_a.degree(), self.knots_b.degree());
        let mut acc = Vec3::ZERO;
        for (jb, wb) in nb.iter().enumerate() {
            for (ja, wa) in na.iter().enumerate() {
                let point = self.grid.get(sa - pa + ja, sb - pb + jb);
                acc += point * (wa * wb);
            }
        }
        Ok(acc)
    }
}
