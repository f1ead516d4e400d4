//! Tolerance-aware linear algebra on tangent-space vectors.
//!
//! All routines work on chart-coordinate vectors together with an explicit
//! diagonal inner product, so the same code serves Euclidean charts, the
//! Minkowski form of the hyperboloid model and uniformly rescaled Hermitian
//! charts. Dimensions stay small (a few to ~16), so everything is dense and
//! allocation-happy on purpose.

use crate::error::{GeomError, Result};

/// Chart-coordinate vector.
#[derive(Clone, PartialEq)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vector(s.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// self + s * other
    pub fn axpy(&self, s: f64, other: &Vector) -> Vector {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl std::fmt::Debug for Vector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x:.6}")?;
        }
        write!(f, "]")
    }
}

/// Diagonal inner product on a chart: `<a, b> = sum_i w_i a_i b_i`.
///
/// Weights are all `1` for Euclidean and spherical charts, `(-1, 1, ..., 1)`
/// for the hyperboloid chart (positive definite on its tangent spaces), and a
/// uniform positive scale for rescaled Hermitian charts. Product charts
/// concatenate the factor weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Form(Vec<f64>);

impl Form {
    pub fn euclidean(n: usize) -> Self {
        Form(vec![1.0; n])
    }

    /// First coordinate timelike.
    pub fn minkowski(n: usize) -> Self {
        let mut w = vec![1.0; n];
        w[0] = -1.0;
        Form(w)
    }

    pub fn scaled(n: usize, weight: f64) -> Self {
        Form(vec![weight; n])
    }

    pub fn concat(parts: &[Form]) -> Self {
        let mut w = Vec::new();
        for p in parts {
            w.extend_from_slice(&p.0);
        }
        Form(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn inner(&self, a: &Vector, b: &Vector) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.0
            .iter()
            .zip(a.0.iter().zip(&b.0))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    /// Norm of a vector on which the form is positive (tangent vectors).
    pub fn norm(&self, a: &Vector) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn check_dim(&self, v: &Vector) -> Result<()> {
        if v.len() != self.len() {
            return Err(GeomError::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// Absolute residual bound plus relative rank cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rank_rel: f64,
}

impl Tolerance {
    pub fn new(abs: f64, rank_rel: f64) -> Result<Self> {
        if !(abs > 0.0) {
            return Err(GeomError::InvalidParameter(format!(
                "tolerance abs must be positive, got {abs}"
            )));
        }
        if !(rank_rel > 0.0 && rank_rel < 1.0) {
            return Err(GeomError::InvalidParameter(format!(
                "tolerance rank_rel must lie in (0, 1), got {rank_rel}"
            )));
        }
        Ok(Tolerance { abs, rank_rel })
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rank_rel: 1e-8,
        }
    }
}

/// A subspace of a chart tangent space, stored as a basis orthonormal with
/// respect to the attached form.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Vec<Vector>,
    form: Form,
}

impl Subspace {
    pub fn empty(form: Form) -> Self {
        Subspace {
            basis: Vec::new(),
            form,
        }
    }

    /// Wraps a basis that is already orthonormal for `form`; checked.
    pub fn from_orthonormal(basis: Vec<Vector>, form: Form, tol: &Tolerance) -> Result<Self> {
        let s = Subspace { basis, form };
        let defect = s.orthonormality_defect();
        if defect > tol.abs.max(1e-12) * 10.0 {
            return Err(GeomError::FrameDegenerate(format!(
                "basis not orthonormal (defect {defect:.3e})"
            )));
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.form.len()
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    /// Max deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.form.inner(a, b) - target).abs());
            }
        }
        worst
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        self.form.check_dim(v)?;
        let mut out = Vector::zeros(v.len());
        for b in &self.basis {
            out = out.axpy(self.form.inner(b, v), b);
        }
        Ok(out)
    }

    /// Relative distance of `v` from the subspace, in `[0, 1]`.
    ///
    /// Vectors with norm at or below `zero_guard` count as contained
    /// (residual 0); this keeps near-zero finite-difference noise from
    /// blowing up under the normalization.
    pub fn containment_residual(&self, v: &Vector, zero_guard: f64) -> Result<f64> {
        self.form.check_dim(v)?;
        let n = self.form.norm(v);
        if n <= zero_guard {
            return Ok(0.0);
        }
        let rejected = v.sub(&self.project(v)?);
        Ok((self.form.norm(&rejected) / n).min(1.0))
    }

    /// Projector matrix `P` with `P v = project(v)`, row-major.
    pub fn projector(&self) -> Matrix {
        let n = self.ambient_dim();
        let w = self.form.weights();
        let mut p = Matrix::zeros(n, n);
        for b in &self.basis {
            for r in 0..n {
                for c in 0..n {
                    *p.at_mut(r, c) += b[r] * w[c] * b[c];
                }
            }
        }
        p
    }
}

/// Max over `u`'s basis of the containment residual in `w`; `0` iff `u ⊆ w`
/// up to tolerance. Empty `u` is vacuously contained.
pub fn subspace_residual(u: &Subspace, w: &Subspace) -> Result<f64> {
    if u.ambient_dim() != w.ambient_dim() {
        return Err(GeomError::DimensionMismatch {
            expected: w.ambient_dim(),
            got: u.ambient_dim(),
        });
    }
    let mut worst: f64 = 0.0;
    for b in u.basis() {
        worst = worst.max(w.containment_residual(b, 0.0)?);
    }
    Ok(worst)
}

/// Modified Gram-Schmidt with one re-orthogonalization pass and a
/// rank-revealing cutoff: a candidate whose residual norm falls below
/// `rank_rel` times the largest residual norm seen so far in the elimination
/// sequence is discarded as dependent.
pub fn orthonormalize(vectors: &[Vector], form: &Form, tol: &Tolerance) -> Result<Subspace> {
    if vectors.is_empty() {
        return Ok(Subspace::empty(form.clone()));
    }
    let n = form.len();
    for v in vectors {
        form.check_dim(v)?;
        if !v.is_finite() {
            return Err(GeomError::NonFinite("orthonormalize input"));
        }
    }
    let mut basis: Vec<Vector> = Vec::new();
    let mut max_seen: f64 = 0.0;
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            w = w.axpy(-form.inner(b, &w), b);
        }
        // second pass mops up cancellation error
        for b in &basis {
            w = w.axpy(-form.inner(b, &w), b);
        }
        let nw = form.norm(&w);
        if nw > tol.rank_rel * max_seen && nw > 0.0 {
            basis.push(w.scale(1.0 / nw));
            max_seen = max_seen.max(nw);
        }
        if basis.len() == n {
            break;
        }
    }
    Ok(Subspace {
        basis,
        form: form.clone(),
    })
}

/// Small dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *t.at_mut(c, r) = self.at(r, c);
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    *out.at_mut(r, c) += a * other.at(k, c);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x += y;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x -= y;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.len());
        let mut out = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += self.at(r, c) * v[c];
            }
            out[r] = acc;
        }
        out
    }
}

/// Solves a small dense symmetric positive-definite system by Gaussian
/// elimination with partial pivoting. Used for coordinate solves against
/// Gram matrices of immersion differentials.
#[allow(clippy::needless_range_loop)]
pub fn solve_small(a: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || rhs.len() != n {
        return Err(GeomError::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    let mut m = a.clone();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m.at(r, col).abs() > m.at(piv, col).abs() {
                piv = r;
            }
        }
        if m.at(piv, col).abs() < 1e-300 {
            return Err(GeomError::RankDeficient {
                expected: n,
                found: col,
                location: "solve_small".into(),
            });
        }
        if piv != col {
            for c in 0..n {
                let tmp = m.at(col, c);
                *m.at_mut(col, c) = m.at(piv, c);
                *m.at_mut(piv, c) = tmp;
            }
            b.swap(col, piv);
        }
        let d = m.at(col, col);
        for r in col + 1..n {
            let f = m.at(r, col) / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                *m.at_mut(r, c) -= f * m.at(col, c);
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= m.at(col, c) * x[c];
        }
        x[col] = acc / m.at(col, col);
    }
    Ok(x)
}
