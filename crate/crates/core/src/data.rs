//! Standardized regression data.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centering and scaling applied to one raw column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    /// Euclidean length of the centered column.
    pub scale: f64,
}

/// Design with columns of mean 0 and unit length, and a centered response.
///
/// Immutable once built. The Gram matrix `X^T X` and `X^T y` are cached for the
/// coordinate-descent solvers.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    columns: Vec<ColumnScale>,
    y_mean: f64,
    gram: Array2<f64>,
    xty: Array1<f64>,
    yty: f64,
}

impl Dataset {
    /// Centers every column of `raw_x` and scales it to unit Euclidean length;
    /// centers `raw_y`.
    pub fn standardize(raw_x: ArrayView2<'_, f64>, raw_y: ArrayView1<'_, f64>) -> Result<Self> {
        let (n, p) = raw_x.dim();
        if raw_y.len() != n {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: n,
                found: raw_y.len(),
            });
        }
        if n < 2 {
            return Err(Error::TooFewRows { required: 2, found: n });
        }
        if let Some(i) = raw_x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "design matrix", index: i });
        }
        if let Some(i) = raw_y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "response", index: i });
        }

        let mut x = raw_x.to_owned();
        let mut columns = Vec::with_capacity(p);
        for (j, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
            let raw_norm = col.dot(&col).sqrt();
            let mean = col.sum() / n as f64;
            col -= mean;
            // second pass removes the rounding left by the first
            let resid = col.sum() / n as f64;
            col -= resid;
            let scale = col.dot(&col).sqrt();
            if !(scale > 1e-12 * raw_norm.max(1.0)) {
                return Err(Error::ZeroVariance { column: j });
            }
            col /= scale;
            columns.push(ColumnScale { mean: mean + resid, scale });
        }

        let y_mean = raw_y.sum() / n as f64;
        let mut y = raw_y.to_owned() - y_mean;
        let resid = y.sum() / n as f64;
        y -= resid;

        Ok(Self::from_parts(x, y, columns, y_mean + resid))
    }

    fn from_parts(x: Array2<f64>, y: Array1<f64>, columns: Vec<ColumnScale>, y_mean: f64) -> Self {
        let gram = x.t().dot(&x);
        let xty = x.t().dot(&y);
        let yty = y.dot(&y);
        Self {
            x,
            y,
            columns,
            y_mean,
            gram,
            xty,
            yty,
        }
    }

    /// Same design with a different (already centered) response, e.g. for
    /// permutation or noiseless checks.
    pub fn with_response(&self, y: ArrayView1<'_, f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: self.n(),
                found: y.len(),
            });
        }
        let mean = y.sum() / self.n() as f64;
        Ok(Self::from_parts(
            self.x.clone(),
            y.to_owned() - mean,
            self.columns.clone(),
            self.y_mean + mean,
        ))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn standardization(&self) -> &[ColumnScale] {
        &self.columns
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn gram(&self) -> ArrayView2<'_, f64> {
        self.gram.view()
    }

    pub fn xty(&self) -> ArrayView1<'_, f64> {
        self.xty.view()
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    /// `y - X b`.
    pub fn residual(&self, b: &[f64]) -> Array1<f64> {
        &self.y - &self.x.dot(&ArrayView1::from(b))
    }

    /// `||y - X b||^2 / 2`, evaluated from the residual.
    pub fn half_rss(&self, b: &[f64]) -> f64 {
        let r = self.residual(b);
        0.5 * r.dot(&r)
    }

    /// Maps standardized coefficients back to the raw scale; returns the
    /// intercept and slopes.
    pub fn to_raw_scale(&self, b: &[f64]) -> (f64, Vec<f64>) {
        let slopes: Vec<f64> = b
            .iter()
            .zip(&self.columns)
            .map(|(bj, c)| bj / c.scale)
            .collect();
        let intercept =
            self.y_mean - slopes.iter().zip(&self.columns).map(|(s, c)| s * c.mean).sum::<f64>();
        (intercept, slopes)
    }

    pub(crate) fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len == self.p() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                what,
                expected: self.p(),
                found: len,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn toy_column() {
        let x = array![[1.0], [2.0], [3.0]];
        let y = array![1.0, 2.0, 3.0];
        let d = Dataset::standardize(x.view(), y.view()).unwrap();
        let r = 0.5f64.sqrt();
        for (got, want) in d.x().column(0).iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(d.y().to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(d.standardization()[0], ColumnScale { mean: 2.0, scale: 2f64.sqrt() });
    }

    #[test]
    fn idempotent() {
        let x = array![[1.0, 0.3], [2.0, -1.0], [3.0, 4.0], [-2.0, 0.5]];
        let y = array![1.0, -2.0, 0.5, 3.0];
        let d1 = Dataset::standardize(x.view(), y.view()).unwrap();
        let d2 = Dataset::standardize(d1.x(), d1.y()).unwrap();
        for (a, b) in d1.x().iter().zip(d2.x().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in d1.y().iter().zip(d2.y().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn invariants_hold() {
        let x = Array2::from_shape_fn((7, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 1e3 + j as f64);
        let y = Array1::from_shape_fn(7, |i| 1e6 + i as f64);
        let d = Dataset::standardize(x.view(), y.view()).unwrap();
        for col in d.x().axis_iter(Axis(1)) {
            assert!(col.mean().unwrap().abs() <= 1e-10);
            assert!((col.dot(&col).sqrt() - 1.0).abs() <= 1e-10);
        }
        assert!(d.y().mean().unwrap().abs() <= 1e-10);
    }

    #[test]
    fn raw_scale_round_trip() {
        let x = array![[1.0, 5.0], [2.0, 3.0], [4.0, 8.0], [0.0, 1.0]];
        let b_raw = [2.0, -0.5];
        let y = x.dot(&array![2.0, -0.5]) + 3.0;
        let d = Dataset::standardize(x.view(), y.view()).unwrap();
        let b_std: Vec<f64> = b_raw.iter().zip(d.standardization()).map(|(b, c)| b * c.scale).collect();
        let (icpt, slopes) = d.to_raw_scale(&b_std);
        assert!((icpt - 3.0).abs() < 1e-12);
        assert!((slopes[0] - 2.0).abs() < 1e-12 && (slopes[1] + 0.5).abs() < 1e-12);
        assert!(d.half_rss(&b_std) < 1e-20);
    }

    #[test]
    fn rejects_bad_input() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]];
        let y = array![1.0, 2.0, 3.0];
        assert!(matches!(Dataset::standardize(x.view(), y.view()), Err(Error::ZeroVariance { column: 0 })));
        let x = array![[1.0], [f64::NAN], [3.0]];
        assert!(matches!(Dataset::standardize(x.view(), y.view()), Err(Error::NonFinite { .. })));
        let x = array![[1.0]];
        assert!(matches!(Dataset::standardize(x.view(), array![1.0].view()), Err(Error::TooFewRows { .. })));
        let x = array![[1.0], [2.0]];
        assert!(matches!(Dataset::standardize(x.view(), y.view()), Err(Error::DimensionMismatch { .. })));
    }
}
