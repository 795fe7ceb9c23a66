//! Point sets, weights and potentials.

use crate::error::{invalid, Result};

/// `n` points in `d` dimensions stored row-major.
///
/// Every point is both a source and a target of the summation.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    /// Wraps a row-major buffer of `n * d` coordinates.
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return invalid("dimension must be at least 1");
        }
        if data.is_empty() || !data.len().is_multiple_of(d) {
            return invalid(format!(
                "buffer of {} values is not a non-empty multiple of d={d}",
                data.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "non-finite coordinate at point {}, axis {}",
                pos / d,
                pos % d
            ));
        }
        let n = data.len() / d;
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != d {
                return invalid(format!("row {i} has {} values, expected {d}", r.as_ref().len()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(data, d)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; a point set holds at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Copies the listed rows, in order, into a new point set.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return invalid(format!("point index {i} out of range (n={})", self.n));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, self.d)
    }
}

/// Source weights `w_j`, one per point.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("non-finite weight at index {i}"));
        }
        Ok(Self(values))
    }

    /// Checks the weight count against a point set.
    pub fn check_len(&self, points: &PointSet) -> Result<()> {
        if self.0.len() != points.len() {
            return invalid(format!(
                "{} weights for {} points",
                self.0.len(),
                points.len()
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Potentials `u_i`, indexed like the targets they were computed for.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialVector(pub Vec<f64>);

impl PotentialVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Squared Euclidean distance. Four independent accumulators let the
/// compiler vectorize the loop; the summation order is fixed.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let t = x[l] - y[l];
            acc[l] += t * t;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let t = x - y;
        tail += t * t;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(PointSet::new(vec![], 2).is_err());
        assert!(PointSet::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(PointSet::new(vec![1.0, 2.0], 0).is_err());
        assert!(PointSet::new(vec![1.0, f64::NAN], 2).is_err());
        assert!(PointSet::new(vec![1.0, f64::INFINITY], 1).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn rows_and_gather() {
        let p = PointSet::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.dim(), 2);
        assert_eq!(p.row(1), &[2.0, 3.0]);
        let g = p.gather(&[2, 0]).unwrap();
        assert_eq!(g.as_slice(), &[4.0, 5.0, 0.0, 1.0]);
        assert!(p.gather(&[3]).is_err());
    }

    #[test]
    fn sq_dist_matches_naive() {
        for d in [1, 3, 4, 7, 16, 33] {
            let a: Vec<f64> = (0..d).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..d).map(|i| (i as f64 * 1.3).cos()).collect();
            let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            assert!((sq_dist(&a, &b) - naive).abs() <= 1e-13 * naive.max(1.0));
        }
    }
}
