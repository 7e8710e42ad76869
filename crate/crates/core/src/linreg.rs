//! Ordinary least squares with an intercept.
//!
//! Features and target are centred, so the intercept is not part of the
//! norm being minimised. The centred problem is solved with a complete
//! orthogonal decomposition: Householder QR with column pivoting, truncated
//! at numerical rank, then a QR of the transposed trapezoidal factor. For a
//! rank-deficient design this yields the minimum-norm coefficient vector.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Dataset;

/// Columns whose remaining norm falls below this fraction of the first
/// pivot's norm are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    coefficients: Vec<f64>,
    intercept: f64,
    column_names: Vec<String>,
}

impl LinearModel {
    pub fn new(coefficients: Vec<f64>, intercept: f64, column_names: Vec<String>) -> Result<Self> {
        if coefficients.len() != column_names.len() {
            return Err(Error::ColumnMismatch { expected: column_names.len(), got: coefficients.len() });
        }
        if !intercept.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Malformed("linear model has non-finite parameters".into()));
        }
        Ok(Self { coefficients, intercept, column_names })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        if features.cols() != self.coefficients.len() && features.rows() > 0 {
            return Err(Error::ColumnMismatch { expected: self.coefficients.len(), got: features.cols() });
        }
        Ok(features
            .iter_rows()
            .map(|row| self.intercept + row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum::<f64>())
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Householder reflector `I - 2 v v^T / (v^T v)` mapping `x` onto `alpha e_0`.
struct Reflector {
    v: Vec<f64>,
    vtv: f64,
}

impl Reflector {
    /// Returns `None` when `x` is already zero.
    fn annihilate(x: &[f64]) -> Option<(Self, f64)> {
        let nx = norm(x);
        if nx == 0.0 {
            return None;
        }
        let alpha = if x[0] >= 0.0 { -nx } else { nx };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            return None;
        }
        Some((Self { v, vtv }, alpha))
    }

    fn apply(&self, y: &mut [f64]) {
        let s = 2.0 * dot(&self.v, y) / self.vtv;
        for (yi, vi) in y.iter_mut().zip(&self.v) {
            *yi -= s * vi;
        }
    }
}

/// Minimum-norm least-squares solution of `a x = b` for column-major `a`
/// (`cols[j]` is column j, all of length `b.len()`).
pub fn lstsq_min_norm(mut cols: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    let p = cols.len();
    let mut perm: Vec<usize> = (0..p).collect();
    let mut rank = 0;
    let mut first_norm = 0.0;
    for k in 0..n.min(p) {
        let (pivot, pivot_norm) = (k..p)
            .map(|j| (j, norm(&cols[j][k..])))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if k == 0 {
            first_norm = pivot_norm;
        }
        if pivot_norm <= RANK_TOLERANCE * first_norm || pivot_norm == 0.0 {
            break;
        }
        cols.swap(k, pivot);
        perm.swap(k, pivot);
        let Some((h, alpha)) = Reflector::annihilate(&cols[k][k..]) else { break };
        cols[k][k] = alpha;
        for x in &mut cols[k][k + 1..] {
            *x = 0.0;
        }
        for col in &mut cols[k + 1..] {
            h.apply(&mut col[k..]);
        }
        h.apply(&mut b[k..]);
        rank = k + 1;
    }

    let mut solution = vec![0.0; p];
    if rank == 0 {
        return solution;
    }

    // Rows of the r x p trapezoidal factor, stored as columns of its transpose.
    let mut rt: Vec<Vec<f64>> = (0..rank).map(|i| (0..p).map(|j| if j >= i { cols[j][i] } else { 0.0 }).collect()).collect();
    let mut reflectors = Vec::with_capacity(rank);
    for k in 0..rank {
        match Reflector::annihilate(&rt[k][k..]) {
            Some((h, alpha)) => {
                rt[k][k] = alpha;
                for x in &mut rt[k][k + 1..] {
                    *x = 0.0;
                }
                for col in &mut rt[k + 1..] {
                    h.apply(&mut col[k..]);
                }
                reflectors.push(Some(h));
            }
            None => reflectors.push(None),
        }
    }
    // rt now holds T (upper triangular, r x r) in its leading rows, with
    // R = [T^T 0] Z^T. Solve T^T w = (Q^T b)[..r] by forward substitution.
    let mut w = vec![0.0; p];
    for i in 0..rank {
        let s: f64 = (0..i).map(|j| rt[i][j] * w[j]).sum();
        w[i] = (b[i] - s) / rt[i][i];
    }
    for (k, h) in reflectors.iter().enumerate().rev() {
        if let Some(h) = h {
            h.apply(&mut w[k..]);
        }
    }
    for (j, &src) in perm.iter().enumerate() {
        solution[src] = w[j];
    }
    solution
}

/// Fits `target ~ intercept + features . coefficients` by least squares.
pub fn fit_ols(ds: &Dataset) -> Result<LinearModel> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset to fit"));
    }
    let n = ds.len() as f64;
    let x = ds.features();
    let p = ds.n_features();
    let means: Vec<f64> = (0..p).map(|j| x.column(j).sum::<f64>() / n).collect();
    let y_mean = ds.target().iter().sum::<f64>() / n;
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j).map(|v| v - means[j]).collect()).collect();
    let yc: Vec<f64> = ds.target().iter().map(|v| v - y_mean).collect();
    let coefficients = lstsq_min_norm(cols, yc);
    let intercept = y_mean - dot(&means, &coefficients);
    LinearModel::new(coefficients, intercept, ds.column_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn dataset(rows: &[Vec<f64>], y: &[f64]) -> Dataset {
        let x = Matrix::from_rows(rows).unwrap();
        let names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Dataset::new(x, y.to_vec(), names, (0..y.len()).collect()).unwrap()
    }

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let ds = dataset(&rows, &y);
        let m = fit_ols(&ds).unwrap();
        assert!((m.coefficients()[0] - 2.0).abs() < 1e-9);
        assert!((m.intercept() - 1.0).abs() < 1e-9);
        for (p, t) in m.predict(ds.features()).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_target_gives_zero_coefficients() {
        let rows = [vec![1.0, 5.0, 1.0], vec![2.0, -1.0, 1.0], vec![0.5, 3.0, 1.0], vec![4.0, 0.0, 1.0]];
        let m = fit_ols(&dataset(&rows, &[7.0; 4])).unwrap();
        assert!(m.coefficients().iter().all(|&c| c == 0.0));
        assert_eq!(m.intercept(), 7.0);
    }

    #[test]
    fn duplicated_column_splits_weight() {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| 4.0 * i as f64).collect();
        let m = fit_ols(&dataset(&rows, &y)).unwrap();
        assert!((m.coefficients()[0] - 2.0).abs() < 1e-9, "{:?}", m.coefficients());
        assert!((m.coefficients()[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_row() {
        let m = fit_ols(&dataset(&[vec![3.0, 4.0]], &[9.0])).unwrap();
        assert_eq!(m.coefficients(), &[0.0, 0.0]);
        assert_eq!(m.intercept(), 9.0);
    }

    #[test]
    fn predict_examples() {
        let m = LinearModel::new(vec![0.0; 2], 5.0, vec!["a".into(), "b".into()]).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 8.0]]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), vec![5.0, 5.0]);
        let m = LinearModel::new(vec![1.0; 3], 0.0, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert_eq!(m.predict(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap()).unwrap(), vec![6.0]);
        assert_eq!(m.predict(&x), Err(Error::ColumnMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = Dataset::new(Matrix::zeros(0, 1), vec![], vec!["x".into()], vec![]).unwrap();
        assert!(fit_ols(&ds).is_err());
    }
}
