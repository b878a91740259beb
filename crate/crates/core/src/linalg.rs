//! Dense linear algebra used by the estimators and the data generator.
//!
//! Everything here works on small, dense, row-major matrices. The largest
//! objects touched in practice are tall design matrices (n × k with k ≤ ~12),
//! which only ever go through the Householder QR path.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Condition number above which a system is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite entry in input")]
    NonFinite,
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        })
    }

    /// Builds an n × k matrix from k columns of length n.
    pub fn from_columns(columns: &[&[f64]]) -> Result<Self, LinalgError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(LinalgError::Dimension("columns of unequal length".into()));
        }
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `self' * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::Dimension(format!(
                "({}x{})' * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = other.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                for (j, &b) in b_row.iter().enumerate() {
                    out[(i, j)] += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::Dimension(format!(
                "{}x{} * vector of {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self' * v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.rows != v.len() {
            return Err(LinalgError::Dimension(format!(
                "({}x{})' * vector of {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        Ok(out)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..i).all(|j| {
                    let (a, b) = (self[(i, j)], self[(j, i)]);
                    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
                })
            })
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = LinalgError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Matrix::from_rows(&rows)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product evaluated as if in twice the working precision: products are
/// split exactly with fused multiply-add and the running sum carries its
/// rounding error, so heavy cancellation still yields a result accurate to a
/// few ulps of the exact value.
pub fn accurate_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut err = 0.0;
    for (x, y) in a.iter().zip(b) {
        let prod = x * y;
        let prod_err = x.mul_add(*y, -prod);
        let next = sum + prod;
        let z = next - sum;
        err += (sum - (next - z)) + (prod - z) + prod_err;
        sum = next;
    }
    sum + err
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension("Cholesky of a non-square matrix".into()));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Cheap lower bound on the 2-norm condition number: (max lᵢᵢ / min lᵢᵢ)².
    pub fn condition_estimate(&self) -> f64 {
        let n = self.lower.rows();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let d = self.lower[(i, i)];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        (hi / lo).powi(2)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let l = &self.lower;
        let n = l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lower.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        symmetrize(&mut inv);
        inv
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    singular: bool,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension("LU of a non-square matrix".into()));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut singular = scale == 0.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
                .unwrap_or(k);
            if lu[(p, k)].abs() <= f64::EPSILON * scale {
                singular = true;
                continue;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        let v = lu[(k, j)];
                        lu[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm, singular })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// 1-norm condition number via an explicit inverse. Fine for the small
/// systems this crate solves.
pub fn condition_number(a: &Matrix) -> Result<f64, LinalgError> {
    let lu = Lu::new(a)?;
    if lu.is_singular() {
        return Ok(f64::INFINITY);
    }
    let c = a.norm_one() * lu.inverse().norm_one();
    Ok(if c.is_finite() { c } else { f64::INFINITY })
}

/// Solves `A x = b`. Symmetric positive definite systems go through
/// Cholesky, everything else through pivoted LU.
pub fn linear_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(LinalgError::Dimension(format!(
            "{}x{} system with rhs of {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    if !a.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if a.is_symmetric(1e-14) {
        if let Ok(ch) = Cholesky::new(a) {
            let condition = condition_number(a)?;
            if condition > CONDITION_LIMIT {
                return Err(LinalgError::Singular { condition });
            }
            return Ok(ch.solve(b));
        }
    }
    let lu = Lu::new(a)?;
    let condition = if lu.is_singular() {
        f64::INFINITY
    } else {
        a.norm_one() * lu.inverse().norm_one()
    };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(LinalgError::Singular { condition });
    }
    Ok(lu.solve(b))
}

/// Symmetric positive definite solve/inverse with Jacobi (diagonal)
/// equilibration, so badly scaled regressors don't trip the condition check.
#[derive(Debug, Clone)]
pub struct ScaledSpd {
    scale: Vec<f64>,
    chol: Cholesky,
}

impl ScaledSpd {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension("non-square system".into()));
        }
        let n = a.rows();
        let mut scale = Vec::with_capacity(n);
        for i in 0..n {
            let d = a[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::Singular {
                    condition: f64::INFINITY,
                });
            }
            scale.push(1.0 / d.sqrt());
        }
        let mut s = a.clone();
        for i in 0..n {
            for j in 0..n {
                s[(i, j)] *= scale[i] * scale[j];
            }
        }
        let chol = Cholesky::new(&s).map_err(|_| LinalgError::Singular {
            condition: f64::INFINITY,
        })?;
        let condition = chol.condition_estimate();
        if condition > CONDITION_LIMIT {
            return Err(LinalgError::Singular { condition });
        }
        Ok(Self { scale, chol })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let sb: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        let y = self.chol.solve(&sb);
        y.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = self.chol.inverse();
        let n = inv.rows();
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] *= self.scale[i] * self.scale[j];
            }
        }
        inv
    }
}

/// Householder QR of a tall matrix whose columns have been scaled to unit
/// Euclidean norm. Zero columns are kept (with a zero scale) and show up as
/// a zero diagonal entry of R.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Householder vectors below the diagonal, R on and above it.
    qr: Matrix,
    /// Householder scalars (`v` normalized so that v₀ = 1).
    tau: Vec<f64>,
    rdiag: Vec<f64>,
    col_scale: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self, LinalgError> {
        let (m, n) = (a.rows(), a.cols());
        if m < n {
            return Err(LinalgError::Dimension(format!("QR of a wide {m}x{n} matrix")));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let mut qr = a.clone();
        let mut col_scale = vec![0.0; n];
        for (j, cs) in col_scale.iter_mut().enumerate() {
            let norm = (0..m).map(|i| qr[(i, j)].powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                *cs = 1.0 / norm;
                for i in 0..m {
                    qr[(i, j)] /= norm;
                }
            }
        }
        let mut tau = vec![0.0; n];
        let mut rdiag = vec![0.0; n];
        for k in 0..n {
            let norm = (k..m).map(|i| qr[(i, k)].powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                rdiag[k] = 0.0;
                continue;
            }
            let alpha = if qr[(k, k)] > 0.0 { -norm } else { norm };
            let v0 = qr[(k, k)] - alpha;
            for i in (k + 1)..m {
                qr[(i, k)] /= v0;
            }
            qr[(k, k)] = 1.0;
            let t = -v0 / alpha;
            tau[k] = t;
            for j in (k + 1)..n {
                let mut s = 0.0;
                for i in k..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= t;
                for i in k..m {
                    let v = qr[(i, k)];
                    qr[(i, j)] -= s * v;
                }
            }
            rdiag[k] = alpha;
        }
        for (k, &d) in rdiag.iter().enumerate() {
            qr[(k, k)] = d;
        }
        Ok(Self {
            qr,
            tau,
            rdiag,
            col_scale,
        })
    }

    pub fn rows(&self) -> usize {
        self.qr.rows()
    }

    pub fn cols(&self) -> usize {
        self.qr.cols()
    }

    /// |R_jj| for the unit-norm scaled columns: the length of the part of
    /// column j not explained by the columns before it.
    pub fn relative_diagonal(&self) -> Vec<f64> {
        self.rdiag.iter().map(|d| d.abs()).collect()
    }

    /// Indices of columns that are (numerically) linear combinations of the
    /// preceding columns, or identically zero.
    pub fn deficient_columns(&self) -> Vec<usize> {
        let d = self.relative_diagonal();
        d.iter()
            .enumerate()
            .filter(|(j, &v)| self.col_scale[*j] == 0.0 || v < 1.0 / CONDITION_LIMIT)
            .map(|(j, _)| j)
            .collect()
    }

    /// Condition estimate of the column-equilibrated matrix from the R diagonal.
    pub fn condition_estimate(&self) -> f64 {
        let d = self.relative_diagonal();
        let hi = d.iter().copied().fold(0.0, f64::max);
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    fn reflect(&self, k: usize, y: &mut [f64]) {
        let m = self.rows();
        let t = self.tau[k];
        if t == 0.0 {
            return;
        }
        let mut s = y[k];
        for i in (k + 1)..m {
            s += self.qr[(i, k)] * y[i];
        }
        s *= t;
        y[k] -= s;
        for i in (k + 1)..m {
            y[i] -= s * self.qr[(i, k)];
        }
    }

    /// Overwrites `y` with `Q' y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        for k in 0..self.cols() {
            self.reflect(k, y);
        }
    }

    /// Overwrites `y` with `Q y`.
    pub fn apply_q(&self, y: &mut [f64]) {
        for k in (0..self.cols()).rev() {
            self.reflect(k, y);
        }
    }

    /// Orthogonal projection of `y` onto the column space.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut w = y.to_vec();
        self.apply_qt(&mut w);
        for v in w.iter_mut().skip(self.cols()) {
            *v = 0.0;
        }
        self.apply_q(&mut w);
        w
    }

    pub fn project_matrix(&self, a: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), a.cols());
        for j in 0..a.cols() {
            let p = self.project(&a.column(j));
            for (i, v) in p.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Least-squares coefficients for the original (unscaled) columns.
    pub fn solve_least_squares(&self, y: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.cols();
        let condition = self.condition_estimate();
        if !self.deficient_columns().is_empty() || condition > CONDITION_LIMIT {
            return Err(LinalgError::Singular { condition });
        }
        let mut w = y.to_vec();
        self.apply_qt(&mut w);
        let mut b = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in (i + 1)..n {
                s -= self.qr[(i, k)] * b[k];
            }
            b[i] = s / self.qr[(i, i)];
        }
        Ok(b.iter().zip(&self.col_scale).map(|(v, s)| v * s).collect())
    }

    /// `(A'A)⁻¹` for the original columns, via `R⁻¹ R⁻ᵀ`.
    pub fn gram_inverse(&self) -> Result<Matrix, LinalgError> {
        let n = self.cols();
        let condition = self.condition_estimate();
        if !self.deficient_columns().is_empty() || condition > CONDITION_LIMIT {
            return Err(LinalgError::Singular { condition });
        }
        // R⁻¹ is upper triangular.
        let mut rinv = Matrix::zeros(n, n);
        for j in 0..n {
            rinv[(j, j)] = 1.0 / self.qr[(j, j)];
            for i in (0..j).rev() {
                let mut s = 0.0;
                for k in (i + 1)..=j {
                    s += self.qr[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = -s / self.qr[(i, i)];
            }
        }
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let s: f64 = (j..n).map(|k| rinv[(i, k)] * rinv[(j, k)]).sum();
                let v = s * self.col_scale[i] * self.col_scale[j];
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), unsorted.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Dimension("eigen of a non-square matrix".into()));
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = a.rows();
    let mut m = a.clone();
    symmetrize(&mut m);
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum();
        let total: f64 = m.data.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| m[(i, i)]).collect(), v))
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accurate_dot_survives_cancellation() {
        let a = [1e16, 1.0, -1e16, 3.0];
        let b = [1.0, 1.0, 1.0, 1.0 / 3.0];
        assert_eq!(dot(&a, &b), 1.0);
        assert_eq!(accurate_dot(&a, &b), 2.0);
        // 0.1·0.1 is not exact in binary; its product error is recovered.
        let x = [0.1, -0.01];
        assert_eq!(accurate_dot(&x, &[0.1, 1.0]), 0.1f64.mul_add(0.1, -0.01));
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = vec![1.5, -2.0, 3.25];
        let x = linear_solve(&Matrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let x = linear_solve(&a, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut s = 7u64;
        let n = 20;
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = lcg(&mut s);
            }
            a[(i, i)] += n as f64;
        }
        let b: Vec<f64> = (0..n).map(|_| lcg(&mut s)).collect();
        let x = linear_solve(&a, &b).unwrap();
        let r: Vec<f64> = a.matvec(&x).unwrap().iter().zip(&b).map(|(u, v)| u - v).collect();
        assert!(norm2(&r) <= 1e-8 * norm2(&b));
    }

    #[test]
    fn singular_system_reports_condition() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match linear_solve(&a, &[1.0, 2.0]) {
            Err(LinalgError::Singular { condition }) => assert!(condition > CONDITION_LIMIT),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn qr_flags_collinear_column() {
        let x = Matrix::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![1.0, 2.0, 4.0],
            vec![1.0, 3.0, 6.0],
            vec![1.0, 4.0, 8.0],
        ])
        .unwrap();
        let qr = Qr::new(&x).unwrap();
        assert_eq!(qr.deficient_columns(), vec![2]);
    }

    #[test]
    fn qr_projection_is_idempotent() {
        let mut s = 3u64;
        let x = Matrix::from_row_major(30, 4, (0..120).map(|_| lcg(&mut s)).collect()).unwrap();
        let qr = Qr::new(&x).unwrap();
        let y: Vec<f64> = (0..30).map(|_| lcg(&mut s)).collect();
        let p1 = qr.project(&y);
        let p2 = qr.project(&p1);
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-13);
        }
        // residual orthogonal to columns
        let r: Vec<f64> = y.iter().zip(&p1).map(|(a, b)| a - b).collect();
        for v in x.t_matvec(&r).unwrap() {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn gram_inverse_matches_cholesky_inverse() {
        let mut s = 11u64;
        let x = Matrix::from_row_major(40, 3, (0..120).map(|_| lcg(&mut s)).collect()).unwrap();
        let g = Qr::new(&x).unwrap().gram_inverse().unwrap();
        let xtx = x.t_matmul(&x).unwrap();
        let inv = Cholesky::new(&xtx).unwrap().inverse();
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - inv[(i, j)]).abs() < 1e-10 * inv[(i, i)].abs());
            }
        }
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 1.0],
        ])
        .unwrap();
        let (vals, vecs) = symmetric_eigen(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[(i, k)] * vals[k] * vecs[(j, k)]).sum();
                assert!((r - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scaled_spd_handles_bad_scaling() {
        let a = Matrix::from_rows(&[vec![1e10, 1e4], vec![1e4, 1.0]]).unwrap();
        let f = ScaledSpd::new(&a).unwrap();
        let x = f.solve(&[1e10, 1.0]);
        let back = a.matvec(&x).unwrap();
        assert!((back[0] - 1e10).abs() < 1e-3 && (back[1] - 1.0).abs() < 1e-9);
    }
}
