use super::SplineError;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul};

/// A nonempty knot span `[start, end)` of a knot vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotSpan {
    /// Index into the knot array such that `knots[index] < knots[index + 1]`.
    pub index: usize,
    pub start: f64,
    pub end: f64,
}

impl KnotSpan {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// An open (clamped) knot vector on [0,1].
///
/// The first and last `degree + 1` knots are pinned to 0 and 1, interior
/// knots have multiplicity at most `degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self, SplineError> {
        if knots.len() < 2 * (degree + 1) {
            return Err(SplineError::InvalidKnots(format!(
                "need at least {} knots for degree {}, got {}",
                2 * (degree + 1),
                degree,
                knots.len()
            )));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() {
                return Err(SplineError::InvalidKnots("non-finite knot".into()));
            }
            if w[0] > w[1] {
                return Err(SplineError::InvalidKnots(format!(
                    "knot sequence decreases at index {i}: {} > {}",
                    w[0], w[1]
                )));
            }
        }
        for k in &knots[..=degree] {
            if *k != 0.0 {
                return Err(SplineError::InvalidKnots(
                    "first degree+1 knots must equal 0 (clamped)".into(),
                ));
            }
        }
        for k in &knots[knots.len() - degree - 1..] {
            if *k != 1.0 {
                return Err(SplineError::InvalidKnots(
                    "last degree+1 knots must equal 1 (clamped)".into(),
                ));
            }
        }
        let kv = KnotVector { degree, knots };
        for (value, mult) in kv.interior_multiplicities() {
            if mult > degree.max(1) || (degree == 0 && mult > 0) || (degree > 0 && mult > degree) {
                return Err(SplineError::InvalidKnots(format!(
                    "interior knot {value} has multiplicity {mult} > degree {degree}"
                )));
            }
        }
        Ok(kv)
    }

    /// Knot vector of a single Bezier segment: `degree + 1` zeros then ones.
    pub fn bezier(degree: usize) -> Self {
        let mut knots = vec![0.0; degree + 1];
        knots.extend(vec![1.0; degree + 1]);
        KnotVector { degree, knots }
    }

    /// Clamped vector with uniformly spaced interior knots giving
    /// `num_basis` basis functions.
    pub fn open_uniform(degree: usize, num_basis: usize) -> Self {
        assert!(num_basis >= degree + 1);
        let interior = num_basis - degree - 1;
        let mut knots = vec![0.0; degree + 1];
        for i in 1..=interior {
            knots.push(i as f64 / (interior + 1) as f64);
        }
        knots.extend(vec![1.0; degree + 1]);
        KnotVector { degree, knots }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct interior knot values with their multiplicities.
    pub fn interior_multiplicities(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &k in &self.knots {
            if k <= 0.0 || k >= 1.0 {
                continue;
            }
            match out.last_mut() {
                Some((v, m)) if *v == k => *m += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }

    /// The nonempty spans, left to right.
    pub fn spans(&self) -> Vec<KnotSpan> {
        let mut out = Vec::new();
        for i in self.degree..self.num_basis() {
            if self.knots[i] < self.knots[i + 1] {
                out.push(KnotSpan {
                    index: i,
                    start: self.knots[i],
                    end: self.knots[i + 1],
                });
            }
        }
        out
    }

    /// Index of the knot span containing `u`; the last span at `u = 1`.
    pub fn find_span(&self, u: f64) -> Result<usize, SplineError> {
        if !(0.0..=1.0).contains(&u) {
            return Err(SplineError::OutOfDomain { value: u });
        }
        let n = self.num_basis() - 1;
        if u >= self.knots[n + 1] {
            // u == 1: walk back to the last nonempty span
            let mut s = n;
            while self.knots[s] >= self.knots[s + 1] {
                s -= 1;
            }
            return Ok(s);
        }
        let (mut lo, mut hi) = (self.degree, n + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Greville abscissa of basis function `i`: the average of
    /// `knots[i+1 ..= i+degree]`.
    pub fn greville(&self, i: usize) -> f64 {
        if self.degree == 0 {
            return 0.5 * (self.knots[i] + self.knots[i + 1]);
        }
        let s: f64 = self.knots[i + 1..=i + self.degree].iter().sum();
        s / self.degree as f64
    }

    /// Parametric support `[knots[i], knots[i + degree + 1]]` of basis `i`.
    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.knots[i], self.knots[i + self.degree + 1])
    }

    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Single knot insertion at `u` (Boehm). Returns the refined vector plus
    /// the combination coefficients to rebuild any compatible control row.
    pub fn insert_knot(&self, u: f64) -> Result<(KnotVector, InsertionPlan), SplineError> {
        if !(0.0 < u && u < 1.0) {
            return Err(SplineError::InvalidKnots(format!(
                "can only insert interior knots, got {u}"
            )));
        }
        if self.multiplicity(u) >= self.degree {
            return Err(SplineError::InvalidKnots(format!(
                "knot {u} already has full multiplicity"
            )));
        }
        let span = self.find_span(u)?;
        let p = self.degree;
        let mut new_knots = self.knots.clone();
        new_knots.insert(span + 1, u);
        let mut alphas = Vec::with_capacity(p);
        for i in span - p + 1..=span {
            let denom = self.knots[i + p] - self.knots[i];
            alphas.push((u - self.knots[i]) / denom);
        }
        let plan = InsertionPlan {
            span,
            degree: p,
            old_count: self.num_basis(),
            alphas,
        };
        Ok((KnotVector { degree: p, knots: new_knots }, plan))
    }

    /// Repeatedly inserts knots until every interior knot has multiplicity
    /// == degree, which makes the control points per-span Bezier
    /// coefficients. Returns the refined vector and the insertion plans in
    /// application order.
    pub fn to_full_multiplicity(&self) -> (KnotVector, Vec<InsertionPlan>) {
        let mut kv = self.clone();
        let mut plans = Vec::new();
        loop {
            let next = kv
                .interior_multiplicities()
                .into_iter()
                .find(|&(_, m)| m < kv.degree);
            match next {
                Some((value, _)) => {
                    let (refined, plan) = kv.insert_knot(value).expect("insertable");
                    plans.push(plan);
                    kv = refined;
                }
                None => return (kv, plans),
            }
        }
    }
}

/// Coefficients of one Boehm knot insertion step.
#[derive(Debug, Clone)]
pub struct InsertionPlan {
    span: usize,
    degree: usize,
    old_count: usize,
    alphas: Vec<f64>,
}

impl InsertionPlan {
    pub fn new_count(&self) -> usize {
        self.old_count + 1
    }

    /// Apply the insertion to a row of control values.
    pub fn apply<T>(&self, old: &[T]) -> Vec<T>
    where
        T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(old.len(), self.old_count);
        let (span, p) = (self.span, self.degree);
        let mut out = Vec::with_capacity(old.len() + 1);
        out.extend_from_slice(&old[..=span - p]);
        for (off, &alpha) in self.alphas.iter().enumerate() {
            let i = span - p + 1 + off;
            out.push(old[i] * alpha + old[i - 1] * (1.0 - alpha));
        }
        out.extend_from_slice(&old[span..]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unclamped() {
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.6, 0.4, 1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_excess_multiplicity() {
        // interior 0.5 with multiplicity 3 > degree 2
        assert!(KnotVector::new(
            2,
            vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0]
        )
        .is_err());
    }

    #[test]
    fn span_lookup() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(kv.num_basis(), 4);
        assert_eq!(kv.find_span(0.25).unwrap(), 2);
        assert_eq!(kv.find_span(0.5).unwrap(), 3);
        assert_eq!(kv.find_span(1.0).unwrap(), 3);
        assert!(kv.find_span(1.5).is_err());
        assert_eq!(kv.spans().len(), 2);
    }

    #[test]
    fn insertion_preserves_count_arithmetic() {
        let kv = KnotVector::new(3, vec![0.0; 4].into_iter().chain([0.4, 1.0, 1.0, 1.0, 1.0]).collect())
            .unwrap();
        let (refined, plan) = kv.insert_knot(0.7).unwrap();
        assert_eq!(refined.num_basis(), kv.num_basis() + 1);
        let row: Vec<f64> = (0..kv.num_basis()).map(|i| i as f64).collect();
        let new_row = plan.apply(&row);
        assert_eq!(new_row.len(), kv.num_basis() + 1);
    }

    #[test]
    fn full_multiplicity_gives_bezier_segments() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.3, 0.7, 1.0, 1.0, 1.0]).unwrap();
        let (full, plans) = kv.to_full_multiplicity();
        assert_eq!(plans.len(), 2);
        for (_, m) in full.interior_multiplicities() {
            assert_eq!(m, 2);
        }
        // spans * degree + 1 basis functions
        assert_eq!(full.num_basis(), 3 * 2 + 1);
    }

    #[test]
    fn greville_of_bezier_is_uniform() {
        let kv = KnotVector::bezier(3);
        let g: Vec<f64> = (0..4).map(|i| kv.greville(i)).collect();
        for (i, gi) in g.iter().enumerate() {
            assert!((gi - i as f64 / 3.0).abs() < 1e-15);
        }
    }
}
