//! Dense vector and matrix primitives.
//!
//! Everything downstream works at desk scale (dimensions in the tens), so the
//! representation is a plain contiguous `Vec<f64>` with no blocking or views.
//! All constructors reject non-finite entries; every other invariant in the
//! crate builds on that.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm below which a vector is treated as unnormalizable.
pub const NORM_FLOOR: f64 = 1e-12;

/// Dense vector of finite `f64` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Vec<f64> {
        v.0
    }
}

impl Vector {
    /// Internal constructor that skips the finiteness check. Hot numeric
    /// paths use it so transient non-finite values (a diverging training run)
    /// surface as a reported error downstream instead of a panic here.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Vector(entries)
    }

    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig(
                "vector entries must be finite".into(),
            ));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// Standard normal draw, one entry per dimension.
    pub fn standard_normal<R: Rng>(dim: usize, rng: &mut R) -> Self {
        Vector((0..dim).map(|_| rng.sample(StandardNormal)).collect())
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

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|e| e * factor).collect())
    }

    /// `self + factor * other`, entrywise.
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.add_scaled(-1.0, other)
    }

    /// Unit vector in the same direction, or the raw norm if it sits below
    /// `NORM_FLOOR` and cannot be normalized meaningfully.
    pub fn normalized(&self) -> std::result::Result<Vector, f64> {
        let n = self.norm();
        if n < NORM_FLOOR {
            return Err(n);
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Cosine of the angle between two vectors; 0.0 when either is zero.
    pub fn cosine(&self, other: &Vector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            return 0.0;
        }
        self.dot(other) / denom
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<Matrix> for RawMatrix {
    fn from(m: Matrix) -> RawMatrix {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if data.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig(
                "matrix entries must be finite".into(),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|e| e * factor).collect(),
        }
    }

    /// `A x`.
    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for (i, slot) in out.iter_mut().enumerate() {
            let row = self.row(i);
            *slot = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        Vector(out)
    }

    /// `A^T y`, without materializing the transpose.
    pub fn tr_matvec(&self, y: &[f64]) -> Vector {
        debug_assert_eq!(self.rows, y.len());
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (j, slot) in out.iter_mut().enumerate() {
                *slot += self.get(i, j) * yi;
            }
        }
        Vector(out)
    }
}

/// Matrix with orthonormal columns, built from a seeded Gaussian draw by
/// modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Requires `rows >= cols`. Random Gaussian columns are far from dependent in
/// every realistic draw, so the residual-norm guard only trips on misuse.
pub fn orthonormal_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if rows < cols {
        return Err(Error::InvalidConfig(format!(
            "cannot orthonormalize {cols} columns in {rows} rows"
        )));
    }
    let mut columns: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rows).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for k in 0..cols {
        // Two projection passes keep orthogonality near machine precision.
        for _pass in 0..2 {
            for j in 0..k {
                let dot: f64 = columns[k]
                    .iter()
                    .zip(&columns[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let prev = columns[j].clone();
                for (c, p) in columns[k].iter_mut().zip(&prev) {
                    *c -= dot * p;
                }
            }
        }
        let norm: f64 = columns[k].iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::InvalidConfig(
                "Gaussian draw produced dependent columns".into(),
            ));
        }
        for c in columns[k].iter_mut() {
            *c /= norm;
        }
    }
    Ok(Matrix::from_fn(rows, cols, |i, j| columns[j][i]))
}

/// Seeded random rotation of the full space.
pub fn random_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> Result<Matrix> {
    orthonormal_columns(dim, dim, rng)
}

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order with matching eigenvector columns.
/// Intended for Gram matrices of a handful of attributes; the sweep count is
/// generous for anything that small.
pub fn symmetric_eigen(mat: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = mat.rows();
    if mat.cols() != n {
        return Err(Error::InvalidConfig("eigendecomposition needs a square matrix".into()));
    }
    let mut a = mat.clone();
    let mut v = Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
    let scale: f64 = (0..n).map(|i| a.get(i, i).abs()).fold(1.0, f64::max);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).partial_cmp(&a.get(i, i)).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok((values, vectors))
}
