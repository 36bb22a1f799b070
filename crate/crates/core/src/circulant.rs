//! Convolution with wrap-around padding as a doubly block circulant linear map,
//! and its spectral norm through per-frequency `d' x d` blocks.
//!
//! # Layout
//!
//! A feature map `X ∈ ℝ^{d×p×p}` is flattened channel-major, then row, then
//! column: entry `(t, a, b)` (0-based) sits at `t·p² + a·p + b`. With this
//! ordering the full map is the block matrix `[B_st]` with `s` indexing block
//! rows, and inside `B_st` the block in block-row `a`, block-column `c` is
//! `circ(K[s, t, (c − a) mod p, :])`. Equivalently, the (1-based) coefficient
//! linking output `(s, a, b)` to input `(t, c, e)` is
//! `K[s, t, (c − a) % p + 1, (e − b) % p + 1]` with `%` the usual modulo.
//! `tests::layout_pinned_positions` hardcodes a handful of these positions.

use num_complex::Complex64;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm_lanczos, Matrix, Vector, DEFAULT_TOL};

/// 1-based modulo: `k % n` except that multiples of `n` map to `n`.
///
/// Accepts any integer `k` (including nonpositive ones) and always returns a
/// value in `1..=n`.
#[inline]
pub fn wrap_index(k: i64, n: usize) -> usize {
    let n = n as i64;
    let r = k.rem_euclid(n);
    if r == 0 {
        n as usize
    } else {
        r as usize
    }
}

/// Flat position of 0-based `(channel, row, col)` in a `p x p` feature map.
#[inline]
pub fn feature_index(channel: usize, row: usize, col: usize, p: usize) -> usize {
    channel * p * p + row * p + col
}

/// Filters `ℱ ∈ ℝ^{d'×d×q×q}`, stored row-major over `(s, t, i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTensor {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    data: Vec<f64>,
}

impl ConvTensor {
    pub fn new(out_channels: usize, in_channels: usize, kernel: usize, data: Vec<f64>) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kernel == 0 {
            return Err(Error::InvalidParameter("conv tensor dimensions must be positive".into()));
        }
        if data.len() != out_channels * in_channels * kernel * kernel {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {out_channels}x{in_channels}x{kernel}x{kernel} tensor",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("conv tensor"));
        }
        Ok(ConvTensor {
            out_channels,
            in_channels,
            kernel,
            data,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Self {
        Self::new(out_channels, in_channels, kernel, vec![0.0; out_channels * in_channels * kernel * kernel])
            .expect("valid dims")
    }

    /// Generator over 0-based `(s, t, i, j)`.
    pub fn from_fn(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(out_channels * in_channels * kernel * kernel);
        for s in 0..out_channels {
            for t in 0..in_channels {
                for i in 0..kernel {
                    for j in 0..kernel {
                        data.push(f(s, t, i, j));
                    }
                }
            }
        }
        Self::new(out_channels, in_channels, kernel, data).expect("generated entries must be finite")
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize, i: usize, j: usize) -> f64 {
        let q = self.kernel;
        self.data[((s * self.in_channels + t) * q + i) * q + j]
    }

    /// The `q x q` kernel `ℱ[s, t, :, :]`, row-major.
    pub fn filter(&self, s: usize, t: usize) -> &[f64] {
        let q2 = self.kernel * self.kernel;
        let start = (s * self.in_channels + t) * q2;
        &self.data[start..start + q2]
    }

    /// Copy with every filter `(s, t)` where `keep(s, t)` is false set to zero.
    pub fn with_filters_zeroed(&self, keep: impl Fn(usize, usize) -> bool) -> ConvTensor {
        let mut out = self.clone();
        let q2 = self.kernel * self.kernel;
        for s in 0..self.out_channels {
            for t in 0..self.in_channels {
                if !keep(s, t) {
                    let start = (s * self.in_channels + t) * q2;
                    out.data[start..start + q2].fill(0.0);
                }
            }
        }
        out
    }

    /// The `d' x d` slice `ℱ[:, :, i, j]`.
    pub fn tap_matrix(&self, i: usize, j: usize) -> Matrix {
        Matrix::from_fn(self.out_channels, self.in_channels, |s, t| self.get(s, t, i, j))
    }
}

/// `K ∈ ℝ^{d'×d×p×p}`: each filter placed in the top-left corner of a
/// `p x p` zero block.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedKernel {
    out_channels: usize,
    in_channels: usize,
    size: usize,
    data: Vec<f64>,
}

impl PaddedKernel {
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// Spatial size `p`.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, s: usize, t: usize, i: usize, j: usize) -> f64 {
        let p = self.size;
        self.data[((s * self.in_channels + t) * p + i) * p + j]
    }

    /// Row `K[s, t, i, :]`.
    pub fn row(&self, s: usize, t: usize, i: usize) -> &[f64] {
        let p = self.size;
        let start = ((s * self.in_channels + t) * p + i) * p;
        &self.data[start..start + p]
    }
}

pub fn pad_kernel(f: &ConvTensor, p: usize) -> Result<PaddedKernel> {
    let q = f.kernel;
    if p <= q {
        return Err(Error::InvalidParameter(format!(
            "spatial size p = {p} must exceed kernel size q = {q}"
        )));
    }
    let (dout, din) = (f.out_channels, f.in_channels);
    let mut data = vec![0.0; dout * din * p * p];
    for s in 0..dout {
        for t in 0..din {
            for i in 0..q {
                for j in 0..q {
                    data[((s * din + t) * p + i) * p + j] = f.get(s, t, i, j);
                }
            }
        }
    }
    Ok(PaddedKernel {
        out_channels: dout,
        in_channels: din,
        size: p,
        data,
    })
}

/// Circulant matrix whose first row is `a` and whose row `i` is `a` rotated
/// right by `i` (0-based).
pub fn circ(a: &Vector) -> Matrix {
    let a = a.as_slice();
    let n = a.len();
    Matrix::from_fn(n, n, |i, j| a[(j + n - i) % n])
}

/// The `p² x p²` doubly block circulant block `B_st`.
pub fn build_block(k: &PaddedKernel, s: usize, t: usize) -> Result<Matrix> {
    if s >= k.out_channels || t >= k.in_channels {
        return Err(Error::InvalidParameter(format!(
            "channel pair ({s}, {t}) out of range for {}x{} kernel",
            k.out_channels, k.in_channels
        )));
    }
    let p = k.size;
    Ok(Matrix::from_fn(p * p, p * p, |row, col| {
        let (a, b) = (row / p, row % p);
        let (c, e) = (col / p, col % p);
        k.get(s, t, (c + p - a) % p, (e + p - b) % p)
    }))
}

/// The full `p²d' x p²d` map `W = [B_st]` with `vec(Y) = W vec(X)`.
pub fn build_full_map(k: &PaddedKernel) -> Matrix {
    let p = k.size;
    let p2 = p * p;
    Matrix::from_fn(p2 * k.out_channels, p2 * k.in_channels, |row, col| {
        let (s, r) = (row / p2, row % p2);
        let (t, c) = (col / p2, col % p2);
        let (a, b) = (r / p, r % p);
        let (ci, e) = (c / p, c % p);
        k.get(s, t, (ci + p - a) % p, (e + p - b) % p)
    })
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    /// All singular values, descending, by one-sided (Hestenes) Jacobi.
    ///
    /// Columns are rotated pairwise until mutually orthogonal, which is
    /// Jacobi diagonalization of the Hermitian Gram matrix `AᴴA` carried out
    /// on `A` itself. Works on the side with fewer columns.
    pub fn singular_values(&self) -> Vec<f64> {
        // Columns of A, or of Aᴴ when A is wide.
        let (n, mut cols): (usize, Vec<Vec<Complex64>>) = if self.rows >= self.cols {
            (
                self.cols,
                (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).collect()).collect(),
            )
        } else {
            (
                self.rows,
                (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j).conj()).collect()).collect(),
            )
        };
        let eps = 1e-15;
        for _sweep in 0..100 {
            let mut rotated = false;
            for j in 0..n {
                for k in (j + 1)..n {
                    let (alpha, beta, gamma) = {
                        let (cj, ck) = (&cols[j], &cols[k]);
                        let alpha: f64 = cj.iter().map(|z| z.norm_sqr()).sum();
                        let beta: f64 = ck.iter().map(|z| z.norm_sqr()).sum();
                        let gamma: Complex64 = cj.iter().zip(ck).map(|(a, b)| a.conj() * b).sum();
                        (alpha, beta, gamma)
                    };
                    let g = gamma.norm();
                    if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    // Phase-align column k so the pair's inner product is real.
                    let phase = gamma / g;
                    let zeta = (beta - alpha) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let t = if zeta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    let (left, right) = cols.split_at_mut(k);
                    let (cj, ck) = (&mut left[j], &mut right[0]);
                    for (a, b) in cj.iter_mut().zip(ck.iter_mut()) {
                        let bt = *b * phase.conj();
                        let na = *a * c - bt * s;
                        let nb = *a * s + bt * c;
                        *a = na;
                        *b = nb;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Top singular value via Lanczos on the real embedding
    /// `[[Re, −Im], [Im, Re]]`, whose singular values are those of `self`,
    /// each twice. Much cheaper than [`Self::singular_values`] for large blocks.
    pub fn largest_singular_value(&self) -> Result<f64> {
        let (r, c) = (self.rows, self.cols);
        let real = Matrix::from_fn(2 * r, 2 * c, |i, j| {
            let z = self.get(i % r, j % c);
            match (i < r, j < c) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        spectral_norm_lanczos(&real, DEFAULT_TOL)
    }
}

/// `P^(u,v)` for 1-based frequencies `u, v ∈ [p]`:
/// `P_st = Σ_{i,j ∈ [q]} ω^{u i} K[s,t,i,j] ω^{v j}` with `ω = exp(2πi/p)` and
/// `i, j` 1-based.
pub fn frequency_block(k: &PaddedKernel, u: usize, v: usize) -> ComplexMatrix {
    let p = k.size;
    let omega = |e: usize| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((e % p) as f64) / p as f64);
    let row_phase: Vec<Complex64> = (1..=p).map(|i| omega(u * i)).collect();
    let col_phase: Vec<Complex64> = (1..=p).map(|j| omega(v * j)).collect();
    ComplexMatrix::from_fn(k.out_channels, k.in_channels, |s, t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..p {
            for j in 0..p {
                let x = k.get(s, t, i, j);
                if x != 0.0 {
                    acc += row_phase[i] * col_phase[j] * x;
                }
            }
        }
        acc
    })
}

/// `‖W‖₂` as the largest singular value over the `p²` frequency blocks.
pub fn spectral_norm_via_dft(k: &PaddedKernel) -> Result<f64> {
    use rayon::prelude::*;
    let p = k.size;
    let norms: Vec<f64> = (0..p * p)
        .into_par_iter()
        .map(|idx| frequency_block(k, idx / p + 1, idx % p + 1).largest_singular_value())
        .collect::<Result<_>>()?;
    Ok(norms.into_iter().fold(0.0, f64::max))
}

/// Wrap-around convolution by the literal sum
/// `Y[s,a,b] = Σ_{t,i,j} X[t, (a+i−1)%p, (b+j−1)%p] K[s,t,i,j]` (1-based, `%`
/// as in [`wrap_index`]), over the `q x q` support of each filter.
pub fn convolve_direct(f: &ConvTensor, p: usize, x: &[f64]) -> Result<Vec<f64>> {
    let (dout, din, q) = (f.out_channels, f.in_channels, f.kernel);
    if x.len() != din * p * p {
        return Err(Error::DimensionMismatch(format!(
            "feature map of length {} for {din} channels of {p}x{p}",
            x.len()
        )));
    }
    let mut y = vec![0.0; dout * p * p];
    for s in 0..dout {
        for a in 1..=p {
            for b in 1..=p {
                let mut acc = 0.0;
                for t in 0..din {
                    for i in 1..=q {
                        for j in 1..=q {
                            let r = wrap_index((a + i - 1) as i64, p) - 1;
                            let c = wrap_index((b + j - 1) as i64, p) - 1;
                            acc += x[feature_index(t, r, c, p)] * f.get(s, t, i - 1, j - 1);
                        }
                    }
                }
                y[feature_index(s, a - 1, b - 1, p)] = acc;
            }
        }
    }
    Ok(y)
}

/// Wrap-around convolution as one matrix product: filters reshaped to
/// `d' x (d q²)` times the `(d q²) x p²` matrix of shifted inputs.
pub(crate) struct Im2Col {
    weights: Matrix,
    in_channels: usize,
    kernel: usize,
    p: usize,
}

impl Im2Col {
    pub(crate) fn new(f: &ConvTensor, p: usize) -> Self {
        let q = f.kernel;
        let weights = Matrix::from_fn(f.out_channels, f.in_channels * q * q, |s, col| {
            let t = col / (q * q);
            let r = col % (q * q);
            f.get(s, t, r / q, r % q)
        });
        Im2Col {
            weights,
            in_channels: f.in_channels,
            kernel: q,
            p,
        }
    }

    /// Applies the layer to `n` stacked feature maps, `xs` laid out as
    /// `n` consecutive flattened maps. Output uses the same convention.
    pub(crate) fn apply_batch(&self, xs: &[f64], n: usize) -> Vec<f64> {
        let (p, q, din) = (self.p, self.kernel, self.in_channels);
        let p2 = p * p;
        let dout = self.weights.rows();
        let in_len = din * p2;
        debug_assert_eq!(xs.len(), n * in_len);
        // Column (sample, a, b) of the shifted-input matrix.
        let rows = din * q * q;
        let mut cols = vec![0.0; rows * n * p2];
        for sample in 0..n {
            let x = &xs[sample * in_len..(sample + 1) * in_len];
            for a in 0..p {
                for b in 0..p {
                    let col = sample * p2 + a * p + b;
                    let dst = &mut cols[col * rows..(col + 1) * rows];
                    let mut r = 0;
                    for t in 0..din {
                        for i in 0..q {
                            let row = (a + i) % p;
                            for j in 0..q {
                                dst[r] = x[feature_index(t, row, (b + j) % p, p)];
                                r += 1;
                            }
                        }
                    }
                }
            }
        }
        let shifted = Matrix::from_col_major(rows, n * p2, cols).expect("finite inputs");
        let out = self.weights.matmul(&shifted).expect("conforming shapes");
        // out is dout x (n p²) column-major; regroup into per-sample maps.
        let mut y = vec![0.0; n * dout * p2];
        for sample in 0..n {
            for pix in 0..p2 {
                let col = out.column(sample * p2 + pix);
                for s in 0..dout {
                    y[sample * dout * p2 + s * p2 + pix] = col[s];
                }
            }
        }
        y
    }
}
