//! Dense matrix substrate and the frozen random stream.
//!
//! Matrices are row-major `f64` with shapes validated at the API boundary.
//! Randomness is a ChaCha12 stream with an explicit Box-Muller normal
//! transform, so a seed pins every experiment output bit-for-bit across
//! platforms. Eigen/SVD are Jacobi-based; sizes in this crate stay well under
//! 10^3 per side, where Jacobi is accurate and fast enough.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
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
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch("ragged row lengths".into()));
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Copies column `j` into a fresh vector (storage is row-major).
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// All columns, copied out; handy for hot loops over neuron weights.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
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

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
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
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| c * x).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|&x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Column-stacked flattening (the `vec` operator).
    pub fn vec_columns(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                v.push(self[(i, j)]);
            }
        }
        v
    }

    pub fn from_vec_columns(rows: usize, cols: usize, v: &[f64]) -> Result<Matrix> {
        if v.len() != rows * cols {
            return Err(Error::InvalidDimensions(format!(
                "expected {} entries, got {}",
                rows * cols,
                v.len()
            )));
        }
        let mut m = Matrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = v[j * rows + i];
            }
        }
        Ok(m)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Seeded random stream: ChaCha12 words mapped through Box-Muller.
///
/// The generator and the normal transform are both frozen so that recorded
/// experiment outputs replay bit-identically for a given seed. The stream is
/// single-owner; derive independent child streams with [`RngStream::derive`]
/// instead of sharing one.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
    draws: u64,
    cached_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
            draws: 0,
            cached_normal: None,
        }
    }

    /// Child stream keyed by `(this seed, tags...)`; order-independent use of
    /// siblings is safe because each child is its own stream.
    pub fn derive(&self, tags: &[u64]) -> RngStream {
        RngStream::new(derive_seed(self.seed, tags))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of raw 64-bit words consumed so far.
    pub fn position(&self) -> u64 {
        self.draws
    }

    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform draw in (0, 1], 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal via Box-Muller; pairs are generated together and the
    /// second value is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn fill_gaussian(&mut self, buf: &mut [f64]) {
        for x in buf {
            *x = self.gaussian();
        }
    }
}

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic seed derivation: folds `tags` into `master` one at a time.
/// Adding new tag combinations never perturbs seeds of existing ones.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = mix64(master);
    for &t in tags {
        s = mix64(s ^ t);
    }
    s
}

/// FNV-1a over the label bytes, for folding strings into seed derivations.
pub fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Matrix with i.i.d. standard normal entries, filled in row-major order.
pub fn standard_gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimensions(format!(
            "gaussian matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let mut m = Matrix::zeros(rows, cols);
    rng.fill_gaussian(m.data_mut());
    Ok(m)
}

/// Thin SVD `A = U diag(sigma) V^T` of a `d x K` matrix with `K <= d`,
/// computed by one-sided Jacobi. Singular values come back descending;
/// `U` is `d x K` with orthonormal columns, `V` is `K x K` orthogonal.
pub fn thin_svd(a: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    let (d, k) = (a.rows(), a.cols());
    if k > d {
        return Err(Error::InvalidDimensions(format!(
            "thin_svd requires cols <= rows, got {d}x{k}"
        )));
    }
    let mut b = a.clone();
    let mut v = Matrix::identity(k);
    // One-sided Jacobi: rotate column pairs of B until all pairs are
    // orthogonal relative to their norms.
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..d {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let bp = b[(i, p)];
                    let bq = b[(i, q)];
                    b[(i, p)] = c * bp - s * bq;
                    b[(i, q)] = s * bp + c * bq;
                }
                for i in 0..k {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k)
        .map(|j| (0..d).map(|i| b[(i, j)] * b[(i, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap());
    let mut u = Matrix::zeros(d, k);
    let mut vv = Matrix::zeros(k, k);
    let mut sigma = Vec::with_capacity(k);
    for (out_j, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        let inv = if s > 0.0 { 1.0 / s } else { 0.0 };
        for i in 0..d {
            u[(i, out_j)] = b[(i, j)] * inv;
        }
        for i in 0..k {
            vv[(i, out_j)] = v[(i, j)];
        }
    }
    Ok((u, sigma, vv))
}

/// Left/right singular factors of a fresh `d x K` standard Gaussian matrix.
pub fn orthonormal_factors(d: usize, k: usize, rng: &mut RngStream) -> Result<(Matrix, Matrix)> {
    if k == 0 || k > d {
        return Err(Error::InvalidDimensions(format!(
            "orthonormal_factors requires 1 <= K <= d, got d={d}, K={k}"
        )));
    }
    let a = standard_gaussian_matrix(d, k, rng)?;
    let (u, _sigma, v) = thin_svd(&a)?;
    Ok((u, v))
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi.
/// The input is symmetrized as `(S + S^T)/2` first.
pub fn symmetric_eigenvalues(s: &Matrix) -> Result<Vec<f64>> {
    if s.rows() != s.cols() {
        return Err(Error::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = 0.5 * (s[(i, j)] + s[(j, i)]);
        }
    }
    let scale = a.max_abs().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-16 * scale {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = c * aip - sn * aiq;
                    a[(i, q)] = sn * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[(p, i)];
                    let aqi = a[(q, i)];
                    a[(p, i)] = c * api - sn * aqi;
                    a[(q, i)] = sn * api + c * aqi;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

pub fn min_symmetric_eigenvalue(s: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(s)?[0])
}

pub fn max_symmetric_eigenvalue(s: &Matrix) -> Result<f64> {
    Ok(*symmetric_eigenvalues(s)?.last().unwrap())
}

pub fn frobenius_distance(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let mut acc = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc.sqrt())
}
