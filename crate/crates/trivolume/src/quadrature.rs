//! Gauss–Legendre quadrature on intervals, boxes, and spline meshes.

use crate::algebra::{Box3, Vec3};

/// Nodes and weights of the n-point Gauss–Legendre rule on [0, 1].
///
/// Roots of the Legendre polynomial are found by Newton iteration from the
/// Chebyshev-based initial guess; exact for polynomials of degree 2n - 1.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' by the three-term recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// A tensor-product quadrature rule over a collection of boxes.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub orders: [usize; 3],
    cells: Vec<CellRule>,
}

#[derive(Debug, Clone)]
struct CellRule {
    cell_box: Box3,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Tensor rule with `orders[d]` points per direction on each box.
    pub fn over_boxes(boxes: &[Box3], orders: [usize; 3]) -> Self {
        let (nx, wx) = gauss_legendre_unit(orders[0]);
        let (ny, wy) = gauss_legendre_unit(orders[1]);
        let (nz, wz) = gauss_legendre_unit(orders[2]);
        let cells = boxes
            .iter()
            .map(|b| {
                let size = b.size();
                let vol_scale = size.x * size.y * size.z;
                let mut nodes = Vec::with_capacity(orders.iter().product());
                let mut weights = Vec::with_capacity(orders.iter().product());
                for (kz, &tz) in nz.iter().enumerate() {
                    for (ky, &ty) in ny.iter().enumerate() {
                        for (kx, &tx) in nx.iter().enumerate() {
                            nodes.push(b.lerp(Vec3::new(tx, ty, tz)));
                            weights.push(wx[kx] * wy[ky] * wz[kz] * vol_scale);
                        }
                    }
                }
                CellRule { cell_box: *b, nodes, weights }
            })
            .collect();
        QuadratureRule { orders, cells }
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_box(&self, cell: usize) -> Box3 {
        self.cells[cell].cell_box
    }

    pub fn cell_nodes(&self, cell: usize) -> (&[Vec3], &[f64]) {
        (&self.cells[cell].nodes, &self.cells[cell].weights)
    }

    pub fn iter_nodes(&self) -> impl Iterator<Item = (Vec3, f64)> + '_ {
        self.cells
            .iter()
            .flat_map(|c| c.nodes.iter().copied().zip(c.weights.iter().copied()))
    }

    pub fn total_nodes(&self) -> usize {
        self.cells.iter().map(|c| c.nodes.len()).sum()
    }

    /// Integrate a pointwise function over all cells, sequential and in a
    /// fixed order.
    pub fn integrate(&self, mut f: impl FnMut(Vec3) -> f64) -> f64 {
        let mut acc = 0.0;
        for cell in &self.cells {
            let mut cell_acc = 0.0;
            for (node, w) in cell.nodes.iter().zip(&cell.weights) {
                cell_acc += w * f(*node);
            }
            acc += cell_acc;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_order_rules_match_tables() {
        let (n1, w1) = gauss_legendre_unit(1);
        assert!((n1[0] - 0.5).abs() < 1e-15);
        assert!((w1[0] - 1.0).abs() < 1e-15);

        let (n2, w2) = gauss_legendre_unit(2);
        let c = 0.5 - 0.5 / 3.0f64.sqrt();
        assert!((n2[0] - c).abs() < 1e-14);
        assert!((w2[0] - 0.5).abs() < 1e-14);
        assert!((w2[1] - 0.5).abs() < 1e-14);

        let (n5, w5) = gauss_legendre_unit(5);
        assert!((n5[2] - 0.5).abs() < 1e-14);
        assert!((w5[2] - 0.5688888888888889 * 0.5).abs() < 1e-13);
    }

    #[test]
    fn polynomial_exactness() {
        for n in 1..=8 {
            let (nodes, weights) = gauss_legendre_unit(n);
            for d in 0..=(2 * n - 1) {
                let got: f64 = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(x, w)| w * x.powi(d as i32))
                    .sum();
                let expect = 1.0 / (d as f64 + 1.0);
                assert!(
                    (got - expect).abs() < 1e-13,
                    "n={n} degree={d}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn cell_weights_sum_to_cell_volume() {
        let boxes = [
            Box3::UNIT,
            Box3::new(Vec3::new(0.25, 0.5, 0.0), Vec3::new(0.5, 1.0, 0.125)),
        ];
        let rule = QuadratureRule::over_boxes(&boxes, [3, 4, 2]);
        for c in 0..rule.num_cells() {
            let (_, w) = rule.cell_nodes(c);
            let sum: f64 = w.iter().sum();
            assert!((sum - boxes[c].volume()).abs() < 1e-14);
            assert!(w.iter().all(|&wi| wi > 0.0));
        }
    }

    #[test]
    fn integrates_trivariate_polynomial_exactly() {
        let rule = QuadratureRule::over_boxes(&[Box3::UNIT], [3, 3, 3]);
        // f = x^2 y^3 z, integral = 1/3 * 1/4 * 1/2
        let got = rule.integrate(|p| p.x * p.x * p.y * p.y * p.y * p.z);
        assert!((got - 1.0 / 24.0).abs() < 1e-15);
    }
}
