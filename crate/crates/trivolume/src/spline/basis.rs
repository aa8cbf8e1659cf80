//! Cox–de Boor evaluation of B-spline basis functions and derivatives.

use super::{KnotVector, SplineError};

/// Evaluate the `degree + 1` basis functions that are nonzero at `u`.
///
/// Returns the containing span index and values `N[j] = N_{span-degree+j}(u)`.
/// The values are nonnegative and sum to one.
pub fn eval_basis(kv: &KnotVector, u: f64) -> Result<(usize, Vec<f64>), SplineError> {
    let span = kv.find_span(u)?;
    let p = kv.degree();
    let knots = kv.knots();
    let mut values = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    values[0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    Ok((span, values))
}

/// Evaluate basis functions and derivatives up to `order`.
///
/// `ders[k][j]` is the k-th derivative of `N_{span-degree+j}` at `u`.
/// Derivatives above the degree are identically zero.
pub fn eval_basis_ders(
    kv: &KnotVector,
    u: f64,
    order: usize,
) -> Result<(usize, Vec<Vec<f64>>), SplineError> {
    let span = kv.find_span(u)?;
    let p = kv.degree();
    let knots = kv.knots();
    let n = order.min(p);

    // ndu: upper triangle holds basis values by degree, lower triangle the
    // knot differences they were divided by.
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = u - knots[span + 1 - j];
        right[j] = knots[span + j] - u;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; order + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }

    let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                a[s2][j] =
                    (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][(rk + j as isize) as usize];
                d += a[s2][j] * ndu[(rk + j as isize) as usize][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }

    let mut factor = p as f64;
    for k in 1..=n {
        for j in 0..=p {
            ders[k][j] *= factor;
        }
        factor *= (p - k) as f64;
    }
    Ok((span, ders))
}
