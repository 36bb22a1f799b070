//! Dense real matrices and vectors.
//!
//! Storage is column-major so that [`vectorize`] (column stacking) is a plain
//! copy of the backing buffer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for [`spectral_norm`].
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap shared by the iterative norm routines.
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidParameter("vector dimension must be positive".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(data))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Vector(vec![0.0; dim])
    }

    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Vector(data)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|x| c * x).collect())
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector sub {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&x| f(x)).collect())
    }
}

/// Number of nonzero entries.
pub fn l0_norm(v: &Vector) -> usize {
    v.0.iter().filter(|&&x| x != 0.0).count()
}

pub fn l2_norm(v: &Vector) -> f64 {
    norm2(&v.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    /// Column-major: entry (i, j) lives at `j * rows + i`.
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(value.is_finite());
        let mut m = Self::zeros(rows, cols);
        m.data.fill(value);
        m
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Builds a matrix from a generator over 0-based `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[j * rows + i] = f(i, j);
            }
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let mut col_major = vec![0.0; data.len()];
        for i in 0..rows {
            for j in 0..cols {
                col_major[j * rows + i] = data[i * cols + j];
            }
        }
        Self::from_col_major(rows, cols, col_major)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(r, c, &flat)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[j * self.rows + i] = value;
    }

    /// The column-major buffer.
    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        self.map(|x| c * x)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other, "sub")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.get(k, j);
                if b != 0.0 {
                    axpy(b, self.column(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    fn check_same_shape(&self, other: &Matrix, op: &str) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// `y = M x` into a preallocated buffer.
    pub(crate) fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        y.fill(0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.column(j), y);
            }
        }
    }

    /// `y = Mᵀ x` into a preallocated buffer.
    pub(crate) fn mul_t_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = dot(self.column(j), x);
        }
    }
}

/// Column-stacked vectorization.
pub fn vectorize(m: &Matrix) -> Vector {
    Vector::from_vec_unchecked(m.data.clone())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
    Matrix::from_col_major(rows, cols, v.as_slice().to_vec())
}

pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_same_shape(b, "hadamard")?;
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    })
}

pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    if m.cols != v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matvec {}x{} by vector of dim {}",
            m.rows,
            m.cols,
            v.dim()
        )));
    }
    let mut y = vec![0.0; m.rows];
    m.mul_vec_into(v.as_slice(), &mut y);
    Ok(Vector::from_vec_unchecked(y))
}

/// Largest singular value by power iteration on the smaller Gram matrix.
///
/// Starts from [`start_vector`], a deterministic non-periodic positive
/// vector; if that is annihilated, or converges suspiciously fast, a second
/// deterministic start with alternating signs is tried and the larger
/// estimate kept. Stops once the
/// geometric tail estimate of the remaining change in the estimate drops
/// below `tol` relative.
pub fn spectral_norm(m: &Matrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = GramOperator::new(m);
    let n = gram.dim();
    match power_iterate(&gram, start_vector(n), tol)? {
        // Converging immediately means the start sat in an eigenspace, not
        // necessarily the top one; confirm from the perturbed start.
        Some((s, iters)) if iters > 2 || n == 1 => Ok(s),
        first => {
            let second = power_iterate(&gram, perturbed_start(n), tol)?;
            match (first, second) {
                (Some((a, _)), Some((b, _))) => Ok(a.max(b)),
                (Some((a, _)), None) | (None, Some((a, _))) => Ok(a),
                (None, None) => Err(Error::NoConvergence {
                    iterations: 0,
                    estimate: 0.0,
                    iterate: vec![],
                }),
            }
        }
    }
}

fn golden(i: usize) -> f64 {
    ((i as f64 + 1.0) * 0.618_033_988_749_895).fract()
}

/// Unit vector with entries `1 + frac((i+1)φ)/2`: positive like all-ones but
/// not periodic, so it has a component along every Fourier mode. An exactly
/// constant start lies in the zero-frequency invariant subspace of a
/// block-circulant map and converges to the wrong singular value there.
pub fn start_vector(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * golden(i)).collect();
    normalize(&mut v);
    v
}

/// Second deterministic start, used when the first is degenerate.
fn perturbed_start(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 1 { -1.0 } else { 1.0 } * (0.5 + golden(i + n)))
        .collect();
    normalize(&mut v);
    v
}

/// `MᵀM` or `MMᵀ`, whichever is smaller, applied matrix-free.
struct GramOperator<'a> {
    m: &'a Matrix,
    tall: bool,
    scratch: std::cell::RefCell<Vec<f64>>,
}

impl<'a> GramOperator<'a> {
    fn new(m: &'a Matrix) -> Self {
        let tall = m.rows >= m.cols;
        let inner = if tall { m.rows } else { m.cols };
        GramOperator {
            m,
            tall,
            scratch: std::cell::RefCell::new(vec![0.0; inner]),
        }
    }

    fn dim(&self) -> usize {
        if self.tall {
            self.m.cols
        } else {
            self.m.rows
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut t = self.scratch.borrow_mut();
        if self.tall {
            self.m.mul_vec_into(x, &mut t);
            self.m.mul_t_vec_into(&t, y);
        } else {
            self.m.mul_t_vec_into(x, &mut t);
            self.m.mul_vec_into(&t, y);
        }
    }
}

/// Returns the estimate and the iteration count, or `Ok(None)` when the
/// start vector is annihilated.
fn power_iterate(gram: &GramOperator<'_>, mut v: Vec<f64>, tol: f64) -> Result<Option<(f64, usize)>> {
    let n = v.len();
    let mut w = vec![0.0; n];
    let mut prev = f64::NAN;
    let mut prev_delta = f64::NAN;
    for iter in 0..MAX_ITERATIONS {
        gram.apply(&v, &mut w);
        // Rayleigh quotient of the Gram operator at unit v.
        let lambda = dot(&v, &w).max(0.0);
        let wn = norm2(&w);
        if wn == 0.0 {
            return Ok(if iter == 0 { None } else { Some((0.0, iter)) });
        }
        let sigma = lambda.sqrt();
        if prev.is_finite() {
            let delta = (sigma - prev).abs();
            let rate = if prev_delta > 0.0 { (delta / prev_delta).min(0.999) } else { 0.5 };
            let tail = if delta == 0.0 { 0.0 } else { delta * rate / (1.0 - rate) };
            if delta <= tol * sigma && tail <= tol * sigma {
                return Ok(Some((sigma, iter)));
            }
            prev_delta = delta;
        }
        prev = sigma;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        estimate: prev,
        iterate: v,
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * c + k] * b[4 * c + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn normalize(x: &mut [f64]) {
    let n = norm2(x);
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

/// Largest singular value by Lanczos on the smaller Gram matrix with full
/// reorthogonalization.
///
/// Same start vector, degenerate-start retry and iteration cap as
/// [`spectral_norm`]; converges in far fewer operator applications when the
/// top of the spectrum is clustered (as it is for large random matrices).
/// Stops when the Ritz residual bound `beta_j |y_j|` of the largest Ritz
/// value drops below `tol` relative.
pub fn spectral_norm_lanczos(m: &Matrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = GramOperator::new(m);
    let n = gram.dim();
    match lanczos_top(&gram, start_vector(n), tol)? {
        Some((l, false)) => Ok(l.sqrt()),
        // The Krylov space closed early, so it may miss the top eigenvalue.
        first => {
            let second = lanczos_top(&gram, perturbed_start(n), tol)?;
            match (first, second) {
                (Some((a, _)), Some((b, _))) => Ok(a.max(b).sqrt()),
                (Some((a, _)), None) | (None, Some((a, _))) => Ok(a.sqrt()),
                (None, None) => Err(Error::NoConvergence {
                    iterations: 0,
                    estimate: 0.0,
                    iterate: vec![],
                }),
            }
        }
    }
}

/// Top eigenvalue of the Gram operator and whether the Krylov space became
/// invariant before reaching full dimension; `Ok(None)` if `q` is annihilated.
fn lanczos_top(gram: &GramOperator<'_>, q: Vec<f64>, tol: f64) -> Result<Option<(f64, bool)>> {
    let n = gram.dim();
    let steps = n.min(MAX_ITERATIONS);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut theta = 0.0;
    for j in 0..steps {
        gram.apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        if j == 0 && norm2(&w) == 0.0 {
            return Ok(None);
        }
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let bnext = norm2(&w);
        theta = tridiagonal_top_eigenvalue(&alpha, &beta);
        let y_last = tridiagonal_eigvec_last(&alpha, &beta, theta);
        let residual = bnext * y_last.abs();
        let closed = bnext <= 1e-12 * theta.abs();
        if residual <= tol * theta.abs() || closed || j + 1 == n {
            return Ok(Some((theta.max(0.0), closed && j + 1 < n)));
        }
        beta.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
    }
    Err(Error::NoConvergence {
        iterations: steps,
        estimate: theta.max(0.0).sqrt(),
        iterate: basis.pop().unwrap_or_default(),
    })
}

/// Number of eigenvalues of the symmetric tridiagonal `(alpha, beta)` below `x`.
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (k, &a) in alpha.iter().enumerate() {
        let b2 = if k == 0 { 0.0 } else { beta[k - 1] * beta[k - 1] };
        d = a - x - if k == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_top_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..n {
        let r = if k > 0 { beta[k - 1].abs() } else { 0.0 } + if k < n - 1 { beta[k].abs() } else { 0.0 };
        lo = lo.min(alpha[k] - r);
        hi = hi.max(alpha[k] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Last component of the unit eigenvector for eigenvalue `theta`, by two
/// steps of shifted inverse iteration (Thomas algorithm).
fn tridiagonal_eigvec_last(alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    let n = alpha.len();
    if n == 1 {
        return 1.0;
    }
    let shift = theta + 1e-10 * theta.abs().max(1e-300);
    let mut y = vec![1.0; n];
    for _ in 0..2 {
        // Solve (T - shift I) z = y.
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = alpha[0] - shift;
        c[0] = if n > 1 { beta[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for k in 1..n {
            denom = alpha[k] - shift - beta[k - 1] * c[k - 1];
            if denom == 0.0 {
                denom = -f64::EPSILON;
            }
            c[k] = if k < n - 1 { beta[k] / denom } else { 0.0 };
            d[k] = (y[k] - beta[k - 1] * d[k - 1]) / denom;
        }
        y[n - 1] = d[n - 1];
        for k in (0..n - 1).rev() {
            y[k] = d[k] - c[k] * y[k + 1];
        }
        normalize(&mut y);
    }
    y[n - 1]
}

/// All singular values, descending, by one-sided (Hestenes) Jacobi.
///
/// Slow but simple and accurate to a few ulps; used to cross-check the
/// iterative routines.
pub fn jacobi_singular_values(m: &Matrix) -> Vec<f64> {
    let a = if m.rows >= m.cols { m.clone() } else { m.transpose() };
    let (rows, n) = (a.rows, a.cols);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for j in 0..n {
            for k in (j + 1)..n {
                let alpha = dot(&cols[j], &cols[j]);
                let beta = dot(&cols[k], &cols[k]);
                let gamma = dot(&cols[j], &cols[k]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(k);
                for (x, y) in left[j].iter_mut().zip(right[0].iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = c * u - s * v;
                    *y = s * u + c * v;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    debug_assert!(cols.iter().all(|c| c.len() == rows));
    let mut sv: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn spectral_norm_small_cases() {
        assert_eq!(spectral_norm(&Matrix::identity(3), DEFAULT_TOL).unwrap(), 1.0);
        let d = spectral_norm(&Matrix::diag(&[3.0, -5.0]), DEFAULT_TOL).unwrap();
        assert!((d - 5.0).abs() < 1e-9);
        let nil = spectral_norm(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), DEFAULT_TOL).unwrap();
        assert!((nil - 1.0).abs() < 1e-9);
        assert_eq!(spectral_norm(&Matrix::zeros(4, 7), DEFAULT_TOL).unwrap(), 0.0);
        let ones = spectral_norm(&Matrix::ones(3, 5), DEFAULT_TOL).unwrap();
        assert!((ones - 15f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn lanczos_small_cases() {
        let d = spectral_norm_lanczos(&Matrix::diag(&[3.0, -5.0]), DEFAULT_TOL).unwrap();
        assert!((d - 5.0).abs() < 1e-9);
        let nil = spectral_norm_lanczos(&m(&[&[0.0, 1.0], &[0.0, 0.0]]), DEFAULT_TOL).unwrap();
        assert!((nil - 1.0).abs() < 1e-9);
        assert_eq!(spectral_norm_lanczos(&Matrix::zeros(2, 3), DEFAULT_TOL).unwrap(), 0.0);
        let v = spectral_norm_lanczos(&m(&[&[1.0, 2.0, 3.0]]), DEFAULT_TOL).unwrap();
        assert!((v - 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn start_vector_orthogonal_to_top_singular_vector() {
        // Dominant direction (1, -1), with the smaller one along (1, 1).
        let a = m(&[&[2.0, -2.0], &[0.1, 0.1]]);
        let expected = 8f64.sqrt();
        assert!((spectral_norm(&a, DEFAULT_TOL).unwrap() - expected).abs() < 1e-8);
        assert!((spectral_norm_lanczos(&a, DEFAULT_TOL).unwrap() - expected).abs() < 1e-8);

        // Symmetric 3u uᵀ + v vᵀ with v the start vector itself.
        let v = start_vector(2);
        let u = [v[1], -v[0]];
        let b = Matrix::from_fn(2, 2, |i, j| 3.0 * u[i] * u[j] + v[i] * v[j]);
        assert!((spectral_norm(&b, DEFAULT_TOL).unwrap() - 3.0).abs() < 1e-8);
        assert!((spectral_norm_lanczos(&b, DEFAULT_TOL).unwrap() - 3.0).abs() < 1e-8);
    }

    #[test]
    fn circulant_with_small_constant_mode() {
        // circ(1, 2, 0, -2): eigenvalue 1 on the constant vector, |1 ± 4i| elsewhere.
        let c = [1.0, 2.0, 0.0, -2.0];
        let a = Matrix::from_fn(4, 4, |i, j| c[(j + 4 - i) % 4]);
        let expected = 17f64.sqrt();
        assert!((spectral_norm(&a, DEFAULT_TOL).unwrap() - expected).abs() < 1e-8);
        assert!((spectral_norm_lanczos(&a, DEFAULT_TOL).unwrap() - expected).abs() < 1e-8);
    }

    #[test]
    fn jacobi_on_known_matrices() {
        assert_eq!(jacobi_singular_values(&Matrix::diag(&[3.0, -5.0])), vec![5.0, 3.0]);
        let sv = jacobi_singular_values(&Matrix::ones(2, 3));
        assert!((sv[0] - 6f64.sqrt()).abs() < 1e-14 && sv[1].abs() < 1e-14);
    }

    #[test]
    fn vectorize_stacks_columns() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(vectorize(&a).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vectorize(&m(&[&[5.0]])).as_slice(), &[5.0]);
        let wide = m(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(vectorize(&wide).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(vectorize(&wide.transpose()).as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(unvectorize(&vectorize(&a), 2, 2).unwrap(), a);
        assert!(unvectorize(&vectorize(&a), 3, 2).is_err());
    }

    #[test]
    fn hadamard_and_matvec() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(hadamard(&a, &Matrix::ones(2, 2)).unwrap(), a);
        assert_eq!(hadamard(&a, &Matrix::zeros(2, 2)).unwrap(), Matrix::zeros(2, 2));
        assert!(hadamard(&a, &Matrix::ones(2, 3)).is_err());
        let v = Vector::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(matvec(&a, &v).unwrap().as_slice(), &[-1.0, -1.0]);
        assert!(matvec(&a, &Vector::new(vec![1.0]).unwrap()).is_err());
    }

    #[test]
    fn vector_norms() {
        let v = Vector::new(vec![3.0, 0.0, -4.0]).unwrap();
        assert_eq!(l0_norm(&v), 2);
        assert_eq!(l2_norm(&v), 5.0);
        assert_eq!(l0_norm(&Vector::zeros(4)), 0);
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(Matrix::from_row_major(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Matrix::from_col_major(1, 1, vec![f64::INFINITY]).is_err());
        let a = Matrix::from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(a.get(1, 0), 4.0);
        assert_eq!(a.to_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn tridiagonal_helpers_agree_with_closed_form() {
        // Path-graph Laplacian-like matrix 2 on the diagonal, -1 off it:
        // eigenvalues 2 - 2 cos(k pi / (n + 1)).
        let n = 9;
        let alpha = vec![2.0; n];
        let beta = vec![-1.0; n - 1];
        let top = tridiagonal_top_eigenvalue(&alpha, &beta);
        let expected = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((top - expected).abs() < 1e-12);
        assert_eq!(sturm_count(&alpha, &beta, 0.0), 0);
        assert_eq!(sturm_count(&alpha, &beta, 4.0), n);
    }
}
