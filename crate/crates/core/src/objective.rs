//! Empirical and population loss/gradient machinery.
//!
//! The gradient has two algebraically identical routes: a streaming residual
//! pass in O(NdK), used everywhere, and the covariance-matrix assembly
//! `vec(grad) = OmegaHat(W,W) vec(W) - OmegaHat(W*,W) vec(W*) - vec(E(W))`,
//! kept as a second path for cross-checking. Population quantities are
//! Monte Carlo estimates with reported standard errors.
//!
//! All N-indexed sums reduce over fixed-size chunks folded in index order, so
//! results are bit-stable regardless of rayon's worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, RngStream};
use crate::teacher::{relu, Dataset, TeacherSpec};

const CHUNK: usize = 4096;

fn check_shapes(w: &Matrix, data: &Dataset) -> Result<()> {
    if w.rows() != data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "weight rows {} vs input dim {}",
            w.rows(),
            data.dim()
        )));
    }
    Ok(())
}

/// `(1/2N) sum_i (sum_j relu(w_j^T x_i) - y_i)^2`.
pub fn empirical_loss(w: &Matrix, data: &Dataset) -> Result<f64> {
    check_shapes(w, data)?;
    let cols = w.columns();
    let n = data.n();
    let partials: Vec<f64> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = 0.0;
            for i in chunk {
                let x = data.inputs.row(i);
                let pred: f64 = cols.iter().map(|c| relu(dot(c, x))).sum();
                let r = pred - data.labels[i];
                acc += r * r;
            }
            acc
        })
        .collect();
    Ok(partials.iter().sum::<f64>() / (2.0 * n as f64))
}

/// Streaming gradient of the empirical loss; column k is
/// `(1/N) sum_i (pred_i - y_i) 1{w_k^T x_i >= 0} x_i`.
/// The kink indicator is inclusive: the subgradient at 0 is taken as 1.
pub fn empirical_gradient(w: &Matrix, data: &Dataset) -> Result<Matrix> {
    check_shapes(w, data)?;
    let cols = w.columns();
    let (d, k) = (w.rows(), w.cols());
    let n = data.n();
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; d * k];
            let mut acts = vec![0.0; k];
            for i in chunk {
                let x = data.inputs.row(i);
                let mut pred = 0.0;
                for (j, c) in cols.iter().enumerate() {
                    let z = dot(c, x);
                    acts[j] = z;
                    pred += relu(z);
                }
                let r = pred - data.labels[i];
                for (j, &z) in acts.iter().enumerate() {
                    if z >= 0.0 {
                        let col_acc = &mut acc[j * d..(j + 1) * d];
                        for (a, &xv) in col_acc.iter_mut().zip(x) {
                            *a += r * xv;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; d * k];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut g = Matrix::zeros(d, k);
    for j in 0..k {
        for i in 0..d {
            g[(i, j)] = total[j * d + i] * inv_n;
        }
    }
    Ok(g)
}

/// `(1/N) sum_i x_i x_i^T 1{w_a^T x_i >= 0} 1{w_b^T x_i >= 0}`.
pub fn sigma_hat(w_a: &[f64], w_b: &[f64], inputs: &Matrix) -> Result<Matrix> {
    let d = inputs.cols();
    if w_a.len() != d || w_b.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "weight vectors of length {}/{} vs input dim {d}",
            w_a.len(),
            w_b.len()
        )));
    }
    let n = inputs.rows();
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; d * d];
            for i in chunk {
                let x = inputs.row(i);
                if dot(w_a, x) >= 0.0 && dot(w_b, x) >= 0.0 {
                    for r in 0..d {
                        let xr = x[r];
                        let row = &mut acc[r * d..(r + 1) * d];
                        for (a, &xc) in row.iter_mut().zip(x) {
                            *a += xr * xc;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Matrix::zeros(d, d);
    for p in &partials {
        for (t, v) in total.data_mut().iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total.scale(1.0 / n as f64))
}

/// Noise contribution to the gradient: column k is
/// `(1/N) sum_i eps_i 1{w_k^T x_i >= 0} x_i`.
pub fn error_matrix(w: &Matrix, data: &Dataset) -> Result<Matrix> {
    check_shapes(w, data)?;
    let noise = data.noise()?;
    let cols = w.columns();
    let (d, k) = (w.rows(), w.cols());
    let n = data.n();
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; d * k];
            for i in chunk {
                let x = data.inputs.row(i);
                let eps = noise[i];
                if eps == 0.0 {
                    continue;
                }
                for (j, c) in cols.iter().enumerate() {
                    if dot(c, x) >= 0.0 {
                        let col_acc = &mut acc[j * d..(j + 1) * d];
                        for (a, &xv) in col_acc.iter_mut().zip(x) {
                            *a += eps * xv;
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut g = Matrix::zeros(d, k);
    let inv_n = 1.0 / n as f64;
    let mut total = vec![0.0; d * k];
    for p in &partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    for j in 0..k {
        for i in 0..d {
            g[(i, j)] = total[j * d + i] * inv_n;
        }
    }
    Ok(g)
}

/// The two-term split of the gradient: `total = signal - noise_part`.
#[derive(Debug, Clone)]
pub struct GradientDecomposition {
    pub signal: Matrix,
    pub noise_part: Matrix,
    pub total: Matrix,
}

pub fn gradient_decomposition(w: &Matrix, data: &Dataset) -> Result<GradientDecomposition> {
    let noise = data.noise()?.to_vec();
    let noise_part = error_matrix(w, data)?;
    let total = empirical_gradient(w, data)?;
    // Signal term: the gradient evaluated against the noiseless labels.
    let mut denoised = data.clone();
    for (y, eps) in denoised.labels.iter_mut().zip(&noise) {
        *y -= eps;
    }
    let signal = empirical_gradient(w, &denoised)?;
    Ok(GradientDecomposition {
        signal,
        noise_part,
        total,
    })
}

/// `dK x dK` grid of `d x d` blocks; block (row k, col j) is
/// `sigma_hat(wa_j, wb_k)`.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub d: usize,
    pub k: usize,
    mat: Matrix,
}

impl BlockMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn block(&self, k_row: usize, j_col: usize) -> Matrix {
        let mut b = Matrix::zeros(self.d, self.d);
        for r in 0..self.d {
            for c in 0..self.d {
                b[(r, c)] = self.mat[(k_row * self.d + r, j_col * self.d + c)];
            }
        }
        b
    }

    /// `y = Omega v` for a column-stacked `v` of length dK.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.d * self.k;
        assert_eq!(v.len(), n);
        (0..n).map(|i| dot(self.mat.row(i), v)).collect()
    }
}

/// Assembles the full covariance grid in one pass over the samples.
pub fn omega_hat(wa: &Matrix, wb: &Matrix, inputs: &Matrix) -> Result<BlockMatrix> {
    if wa.rows() != wb.rows() || wa.cols() != wb.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            wa.rows(),
            wa.cols(),
            wb.rows(),
            wb.cols()
        )));
    }
    if wa.rows() != inputs.cols() {
        return Err(Error::ShapeMismatch(format!(
            "weight rows {} vs input dim {}",
            wa.rows(),
            inputs.cols()
        )));
    }
    let (d, k) = (wa.rows(), wa.cols());
    let cols_a = wa.columns();
    let cols_b = wb.columns();
    let n = inputs.rows();
    let dk = d * k;
    let partials: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; dk * dk];
            let mut outer = vec![0.0; d * d];
            let mut act_a = vec![false; k];
            let mut act_b = vec![false; k];
            for i in chunk {
                let x = inputs.row(i);
                let mut any_a = false;
                let mut any_b = false;
                for j in 0..k {
                    act_a[j] = dot(&cols_a[j], x) >= 0.0;
                    act_b[j] = dot(&cols_b[j], x) >= 0.0;
                    any_a |= act_a[j];
                    any_b |= act_b[j];
                }
                if !any_a || !any_b {
                    continue;
                }
                for r in 0..d {
                    let xr = x[r];
                    for c in 0..d {
                        outer[r * d + c] = xr * x[c];
                    }
                }
                for kb in 0..k {
                    if !act_b[kb] {
                        continue;
                    }
                    for ja in 0..k {
                        if !act_a[ja] {
                            continue;
                        }
                        for r in 0..d {
                            let dst =
                                &mut acc[(kb * d + r) * dk + ja * d..(kb * d + r) * dk + ja * d + d];
                            let src = &outer[r * d..(r + 1) * d];
                            for (a, &o) in dst.iter_mut().zip(src) {
                                *a += o;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = Matrix::zeros(dk, dk);
    for p in &partials {
        for (t, v) in total.data_mut().iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(BlockMatrix {
        d,
        k,
        mat: total.scale(1.0 / n as f64),
    })
}

/// Gradient assembled through the covariance route of the vec identity:
/// `vec(grad) = OmegaHat(W,W) vec(W) - OmegaHat(W*,W) vec(W*) - vec(E(W))`.
/// Test/verification path; the streaming route is the production one.
pub fn gradient_via_omega(w: &Matrix, w_star: &Matrix, data: &Dataset) -> Result<Matrix> {
    let o_ww = omega_hat(w, w, &data.inputs)?;
    let o_sw = omega_hat(w_star, w, &data.inputs)?;
    let e = error_matrix(w, data)?;
    let term1 = o_ww.apply(&w.vec_columns());
    let term2 = o_sw.apply(&w_star.vec_columns());
    let ev = e.vec_columns();
    let v: Vec<f64> = term1
        .iter()
        .zip(&term2)
        .zip(&ev)
        .map(|((a, b), c)| a - b - c)
        .collect();
    Matrix::from_vec_columns(w.rows(), w.cols(), &v)
}

/// Monte Carlo estimate of `E[X X^T 1{w_a^T X >= 0} 1{w_b^T X >= 0}]` with a
/// conservative (max over entries) standard-error estimate.
pub fn population_sigma_mc(
    w_a: &[f64],
    w_b: &[f64],
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<(Matrix, f64)> {
    if n_mc < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "population_sigma_mc needs n_mc >= 1e4, got {n_mc}"
        )));
    }
    let d = w_a.len();
    if w_b.len() != d {
        return Err(Error::ShapeMismatch("weight vector lengths differ".into()));
    }
    let base = rng.next_u64();
    let n_chunks = n_mc.div_ceil(CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut sub = RngStream::new(crate::numerics::derive_seed(base, &[c as u64]));
            let count = CHUNK.min(n_mc - c * CHUNK);
            let mut sum = vec![0.0; d * d];
            let mut sumsq = vec![0.0; d * d];
            let mut x = vec![0.0; d];
            for _ in 0..count {
                sub.fill_gaussian(&mut x);
                if dot(w_a, &x) >= 0.0 && dot(w_b, &x) >= 0.0 {
                    for r in 0..d {
                        let xr = x[r];
                        for cc in 0..d {
                            let z = xr * x[cc];
                            sum[r * d + cc] += z;
                            sumsq[r * d + cc] += z * z;
                        }
                    }
                }
                // Inactive draws contribute exact zeros to both accumulators.
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = vec![0.0; d * d];
    let mut sumsq = vec![0.0; d * d];
    for (s, q) in &partials {
        for i in 0..d * d {
            sum[i] += s[i];
            sumsq[i] += q[i];
        }
    }
    let n = n_mc as f64;
    let mut mean = Matrix::zeros(d, d);
    let mut se_max = 0.0_f64;
    for r in 0..d {
        for c in 0..d {
            let m = sum[r * d + c] / n;
            mean[(r, c)] = m;
            let var = (sumsq[r * d + c] / n - m * m).max(0.0);
            se_max = se_max.max((var / n).sqrt());
        }
    }
    Ok((mean, se_max))
}

/// Unbiased MC estimate of the population gradient: the empirical gradient on
/// a freshly drawn noiseless dataset of size `n_mc`.
pub fn population_gradient_mc(
    w: &Matrix,
    spec: &TeacherSpec,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    if n_mc < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "population_gradient_mc needs n_mc >= 1e4, got {n_mc}"
        )));
    }
    let noiseless = spec.clone().with_noise(0.0);
    let ds = crate::teacher::generate_dataset(&noiseless, n_mc, rng)?;
    empirical_gradient(w, &ds)
}

/// Finite-sample Hessian of the empirical loss on the activation cell of `W`:
/// equals `omega_hat(W, W, inputs)`. If any sample sits exactly on an
/// activation boundary, `W` is perturbed by 1e-12 first.
pub fn empirical_hessian(w: &Matrix, inputs: &Matrix) -> Result<BlockMatrix> {
    let cols = w.columns();
    let on_boundary = (0..inputs.rows()).any(|i| {
        let x = inputs.row(i);
        cols.iter().any(|c| dot(c, x) == 0.0)
    });
    if on_boundary {
        let mut wp = w.clone();
        for v in wp.data_mut() {
            *v += 1e-12;
        }
        omega_hat(&wp, &wp, inputs)
    } else {
        omega_hat(w, w, inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{frobenius_distance, min_symmetric_eigenvalue, standard_gaussian_matrix};
    use crate::teacher::{generate_dataset, make_ground_truth};

    fn one_sample_dataset() -> Dataset {
        // d=1, K=1, w*=1, x=2, y=2, noiseless.
        Dataset {
            inputs: Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
            labels: vec![2.0],
            noise: Some(vec![0.0]),
            seed: 0,
            nu: 0.0,
        }
    }

    #[test]
    fn loss_at_truth_is_zero() {
        let mut rng = RngStream::new(1);
        let spec = make_ground_truth(6, 3, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, 200, &mut rng.derive(&[0])).unwrap();
        let loss = empirical_loss(&spec.w_star, &ds).unwrap();
        assert!(loss < 1e-20, "loss {loss}");
    }

    #[test]
    fn loss_hand_case() {
        let ds = one_sample_dataset();
        let w = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        assert!((empirical_loss(&w, &ds).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn loss_matches_two_pass_oracle() {
        let mut rng = RngStream::new(2);
        let spec = make_ground_truth(5, 3, 1.0, 2.0, &mut rng).unwrap().with_noise(0.2);
        let ds = generate_dataset(&spec, 300, &mut rng.derive(&[0])).unwrap();
        let w = standard_gaussian_matrix(5, 3, &mut rng).unwrap();
        // Oracle: materialize all predictions first, then sum squared residuals.
        let preds: Vec<f64> = (0..ds.n())
            .map(|i| crate::teacher::forward(&w, ds.inputs.row(i)).unwrap())
            .collect();
        let oracle: f64 = preds
            .iter()
            .zip(&ds.labels)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / (2.0 * ds.n() as f64);
        let loss = empirical_loss(&w, &ds).unwrap();
        assert!((loss - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn gradient_zero_at_truth() {
        let mut rng = RngStream::new(3);
        let spec = make_ground_truth(6, 3, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, 200, &mut rng.derive(&[0])).unwrap();
        let g = empirical_gradient(&spec.w_star, &ds).unwrap();
        assert!(g.max_abs() < 1e-14);
    }

    #[test]
    fn gradient_hand_case() {
        let ds = one_sample_dataset();
        let w = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        let g = empirical_gradient(&w, &ds).unwrap();
        assert!((g[(0, 0)] + 2.0).abs() < 1e-15);
    }

    /// Central finite differences of the empirical loss, coordinate by
    /// coordinate; independent of the streaming gradient path.
    pub(crate) fn finite_difference_gradient(w: &Matrix, data: &Dataset, h: f64) -> Matrix {
        let mut g = Matrix::zeros(w.rows(), w.cols());
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                let mut wp = w.clone();
                wp[(i, j)] += h;
                let mut wm = w.clone();
                wm[(i, j)] -= h;
                let fp = empirical_loss(&wp, data).unwrap();
                let fm = empirical_loss(&wm, data).unwrap();
                g[(i, j)] = (fp - fm) / (2.0 * h);
            }
        }
        g
    }

    pub(crate) fn min_kink_margin(w: &Matrix, data: &Dataset) -> f64 {
        let cols = w.columns();
        let mut margin = f64::INFINITY;
        for i in 0..data.n() {
            let x = data.inputs.row(i);
            let xn = dot(x, x).sqrt();
            for c in &cols {
                margin = margin.min(dot(c, x).abs() / xn.max(1e-300));
            }
        }
        margin
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let mut checked = 0;
        let mut attempt = 0;
        while checked < 5 {
            attempt += 1;
            let ds = generate_dataset(&spec, 80, &mut rng.derive(&[attempt])).unwrap();
            let w = spec
                .w_star
                .add(&standard_gaussian_matrix(4, 2, &mut rng).unwrap().scale(0.1))
                .unwrap();
            if min_kink_margin(&w, &ds) < 1e-4 {
                continue;
            }
            let g = empirical_gradient(&w, &ds).unwrap();
            let fd = finite_difference_gradient(&w, &ds, 1e-6);
            let rel = frobenius_distance(&g, &fd).unwrap() / g.frobenius_norm();
            assert!(rel <= 1e-6, "rel {rel}");
            checked += 1;
        }
    }

    #[test]
    fn sigma_hat_symmetry_and_psd() {
        let mut rng = RngStream::new(5);
        let x = standard_gaussian_matrix(500, 4, &mut rng).unwrap();
        let wa: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        let wb: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        let ab = sigma_hat(&wa, &wb, &x).unwrap();
        let ba = sigma_hat(&wb, &wa, &x).unwrap();
        assert_eq!(ab.transpose().data(), ba.data());
        let aa = sigma_hat(&wa, &wa, &x).unwrap();
        assert!(min_symmetric_eigenvalue(&aa).unwrap() >= -1e-10);
    }

    #[test]
    fn sigma_hat_scale_invariance() {
        let mut rng = RngStream::new(6);
        let x = standard_gaussian_matrix(200, 3, &mut rng).unwrap();
        let wa: Vec<f64> = (0..3).map(|_| rng.gaussian()).collect();
        let wb: Vec<f64> = (0..3).map(|_| rng.gaussian()).collect();
        let scaled: Vec<f64> = wa.iter().map(|v| 7.5 * v).collect();
        let a = sigma_hat(&wa, &wb, &x).unwrap();
        let b = sigma_hat(&scaled, &wb, &x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn sigma_hat_same_vector_converges_to_half_identity() {
        let mut rng = RngStream::new(7);
        let d = 3;
        let x = standard_gaussian_matrix(1_000_000, d, &mut rng).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
        let s = sigma_hat(&w, &w, &x).unwrap();
        for r in 0..d {
            for c in 0..d {
                let expect = if r == c { 0.5 } else { 0.0 };
                assert!((s[(r, c)] - expect).abs() < 5e-3, "entry ({r},{c}) = {}", s[(r, c)]);
            }
        }
    }

    #[test]
    fn sigma_hat_opposite_halfspaces_vanish() {
        let mut rng = RngStream::new(8);
        let x = standard_gaussian_matrix(10_000, 3, &mut rng).unwrap();
        let w: Vec<f64> = (0..3).map(|_| rng.gaussian()).collect();
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let s = sigma_hat(&w, &neg, &x).unwrap();
        // Only measure-zero ties could contribute.
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn error_matrix_zero_without_noise() {
        let mut rng = RngStream::new(9);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, 100, &mut rng.derive(&[0])).unwrap();
        let e = error_matrix(&spec.w_star, &ds).unwrap();
        assert_eq!(e.max_abs(), 0.0);
    }

    #[test]
    fn error_matrix_requires_noise_record() {
        let mut rng = RngStream::new(10);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let mut ds = generate_dataset(&spec, 50, &mut rng.derive(&[0])).unwrap();
        ds.noise = None;
        assert!(matches!(
            error_matrix(&spec.w_star, &ds),
            Err(Error::MissingNoiseRecord)
        ));
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = RngStream::new(11);
        let spec = make_ground_truth(5, 3, 1.0, 2.0, &mut rng).unwrap().with_noise(0.4);
        let ds = generate_dataset(&spec, 400, &mut rng.derive(&[0])).unwrap();
        let w = standard_gaussian_matrix(5, 3, &mut rng).unwrap();
        let dec = gradient_decomposition(&w, &ds).unwrap();
        let recon = dec.signal.sub(&dec.noise_part).unwrap();
        assert!(frobenius_distance(&recon, &dec.total).unwrap() < 1e-12);
    }

    #[test]
    fn omega_hat_assembles_the_gradient() {
        let mut rng = RngStream::new(12);
        for trial in 0..5u64 {
            let spec = make_ground_truth(5, 3, 1.0, 2.0, &mut rng).unwrap().with_noise(0.3);
            let ds = generate_dataset(&spec, 300, &mut rng.derive(&[trial])).unwrap();
            let w = standard_gaussian_matrix(5, 3, &mut rng).unwrap();
            let via_omega = gradient_via_omega(&w, &spec.w_star, &ds).unwrap();
            let streaming = empirical_gradient(&w, &ds).unwrap();
            assert!(frobenius_distance(&via_omega, &streaming).unwrap() < 1e-10);
        }
    }

    #[test]
    fn omega_hat_self_is_symmetric_psd() {
        let mut rng = RngStream::new(13);
        let x = standard_gaussian_matrix(400, 4, &mut rng).unwrap();
        let w = standard_gaussian_matrix(4, 3, &mut rng).unwrap();
        let o = omega_hat(&w, &w, &x).unwrap();
        let m = o.as_matrix();
        let mut asym = 0.0_f64;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        assert!(asym < 1e-10);
        assert!(min_symmetric_eigenvalue(m).unwrap() >= -1e-8);
    }

    #[test]
    fn population_sigma_same_vector_is_half_identity() {
        let mut rng = RngStream::new(14);
        let w = vec![0.3, -1.2, 0.7];
        let (s, se) = population_sigma_mc(&w, &w, 200_000, &mut rng).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expect = if r == c { 0.5 } else { 0.0 };
                assert!(
                    (s[(r, c)] - expect).abs() <= 3.0 * se,
                    "entry ({r},{c}) = {} se {se}",
                    s[(r, c)]
                );
            }
        }
    }

    #[test]
    fn population_sigma_orthogonal_case() {
        // w_a = e1, w_b = e2 in R^2: diagonal 1/4, off-diagonal 1/(2 pi).
        let mut rng = RngStream::new(15);
        let (s, se) = population_sigma_mc(&[1.0, 0.0], &[0.0, 1.0], 1_000_000, &mut rng).unwrap();
        let off = 1.0 / (2.0 * std::f64::consts::PI);
        assert!((s[(0, 0)] - 0.25).abs() <= 3.0 * se);
        assert!((s[(1, 1)] - 0.25).abs() <= 3.0 * se);
        assert!((s[(0, 1)] - off).abs() <= 3.0 * se);
        assert!((s[(1, 0)] - off).abs() <= 3.0 * se);
    }

    #[test]
    fn population_gradient_zero_at_truth() {
        let mut rng = RngStream::new(16);
        let spec = make_ground_truth(5, 3, 1.0, 2.0, &mut rng).unwrap();
        let g = population_gradient_mc(&spec.w_star, &spec, 100_000, &mut rng).unwrap();
        // MC standard error of each entry is O(1/sqrt(n_mc)) with O(1) scale.
        let se = 3.0 * 6.0 / (100_000f64).sqrt();
        assert!(g.max_abs() < 3.0 * se, "max {}", g.max_abs());
    }

    #[test]
    fn population_gradient_mc_rate() {
        // Doubling n_mc shrinks the estimator's sampling std by ~ sqrt(2).
        let mut rng = RngStream::new(17);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let w = spec
            .w_star
            .add(&standard_gaussian_matrix(4, 2, &mut rng).unwrap().scale(0.05))
            .unwrap();
        let spread = |n_mc: usize, rng: &mut RngStream| {
            let reps = 50;
            let grads: Vec<Matrix> = (0..reps)
                .map(|_| population_gradient_mc(&w, &spec, n_mc, rng).unwrap())
                .collect();
            let mut mean = Matrix::zeros(4, 2);
            for g in &grads {
                mean = mean.add(g).unwrap();
            }
            let mean = mean.scale(1.0 / reps as f64);
            (grads
                .iter()
                .map(|g| {
                    let d = frobenius_distance(g, &mean).unwrap();
                    d * d
                })
                .sum::<f64>()
                / reps as f64)
                .sqrt()
        };
        let s1 = spread(10_000, &mut rng);
        let s2 = spread(20_000, &mut rng);
        let ratio = s1 / s2;
        assert!(
            (ratio - std::f64::consts::SQRT_2).abs() < 0.2 * std::f64::consts::SQRT_2,
            "ratio {ratio}"
        );
    }

    #[test]
    fn cross_estimator_consistency() {
        // Population gradient via the Omega assembly (A.2 structure) vs the
        // fresh-sample MC estimate.
        let mut rng = RngStream::new(18);
        let spec = make_ground_truth(3, 2, 1.0, 2.0, &mut rng).unwrap();
        let w = spec
            .w_star
            .add(&standard_gaussian_matrix(3, 2, &mut rng).unwrap().scale(0.1))
            .unwrap();
        let n_mc = 400_000;
        let (d, k) = (3usize, 2usize);
        let mut omega_grad = Matrix::zeros(d, k);
        let mut se_acc = 0.0;
        for kk in 0..k {
            let wk = w.col(kk);
            let mut col = vec![0.0; d];
            for j in 0..k {
                let (s1, e1) = population_sigma_mc(&w.col(j), &wk, n_mc, &mut rng).unwrap();
                let (s2, e2) =
                    population_sigma_mc(&spec.w_star.col(j), &wk, n_mc, &mut rng).unwrap();
                let wj = w.col(j);
                let wsj = spec.w_star.col(j);
                for r in 0..d {
                    col[r] += dot(s1.row(r), &wj) - dot(s2.row(r), &wsj);
                }
                se_acc += (e1 + e2) * (wj.iter().map(|v| v * v).sum::<f64>().sqrt()
                    + wsj.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            for r in 0..d {
                omega_grad[(r, kk)] = col[r];
            }
        }
        let mc_grad = population_gradient_mc(&w, &spec, n_mc, &mut rng).unwrap();
        let diff = frobenius_distance(&omega_grad, &mc_grad).unwrap();
        // se_acc already sums worst-case per-entry errors across all terms;
        // the MC estimate itself adds a comparable contribution.
        let budget = 3.0 * (d as f64).sqrt() * se_acc;
        assert!(diff <= budget, "diff {diff} budget {budget}");
    }

    #[test]
    fn hessian_scalar_case() {
        // K=1, d=1, all-positive inputs with w > 0: Hessian = mean(x^2).
        let inputs = Matrix::from_vec(4, 1, vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        let w = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let h = empirical_hessian(&w, &inputs).unwrap();
        let expect = (1.0 + 4.0 + 0.25 + 9.0) / 4.0;
        assert!((h.as_matrix()[(0, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn hessian_positive_near_truth() {
        let mut rng = RngStream::new(19);
        let spec = make_ground_truth(10, 5, 1.0, 2.0, &mut rng).unwrap();
        let n = 20 * 10 * 5;
        let ds = generate_dataset(&spec, n, &mut rng.derive(&[0])).unwrap();
        let h = empirical_hessian(&spec.w_star, &ds.inputs).unwrap();
        let min_eig = min_symmetric_eigenvalue(h.as_matrix()).unwrap();
        assert!(min_eig > 0.0, "min eig {min_eig}");
    }

    #[test]
    fn hessian_directional_consistency() {
        let mut rng = RngStream::new(20);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, 200, &mut rng.derive(&[0])).unwrap();
        let w = spec
            .w_star
            .add(&standard_gaussian_matrix(4, 2, &mut rng).unwrap().scale(0.05))
            .unwrap();
        let h = 1e-6;
        let delta = standard_gaussian_matrix(4, 2, &mut rng).unwrap();
        // Reject directions that flip an activation pattern within +-h.
        let cols = w.columns();
        let dcols = delta.columns();
        let flips = (0..ds.n()).any(|i| {
            let x = ds.inputs.row(i);
            cols.iter().zip(&dcols).any(|(c, dc)| {
                let z = dot(c, x);
                z.abs() <= h * dot(dc, x).abs() * 2.0
            })
        });
        assert!(!flips, "unlucky draw: activation flip inside test step");
        let wp = w.add(&delta.scale(h)).unwrap();
        let wm = w.sub(&delta.scale(h)).unwrap();
        let gp = empirical_gradient(&wp, &ds).unwrap();
        let gm = empirical_gradient(&wm, &ds).unwrap();
        let fd = gp.sub(&gm).unwrap().scale(1.0 / (2.0 * h));
        let hess = empirical_hessian(&w, &ds.inputs).unwrap();
        let hv = hess.apply(&delta.vec_columns());
        let hv_mat = Matrix::from_vec_columns(4, 2, &hv).unwrap();
        assert!(frobenius_distance(&fd, &hv_mat).unwrap() < 1e-8);
    }
}
