//! Ground-truth network construction and synthetic data generation.
//!
//! The teacher is `y = sum_j relu(w_j^T x) + eps` with standard Gaussian
//! inputs. Its weight matrix is built as `U S V^T` from Gaussian singular
//! factors, with the spectrum evenly spaced between chosen extremes so the
//! condition number is controlled exactly.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{
    dot, orthonormal_factors, standard_gaussian_matrix, thin_svd, Matrix, RngStream,
};

#[inline]
pub fn relu(z: f64) -> f64 {
    z.max(0.0)
}

/// Ground truth: weight matrix plus the spectrum quantities that drive the
/// convergence constants.
#[derive(Debug, Clone)]
pub struct TeacherSpec {
    pub w_star: Matrix,
    /// Singular values of `w_star`, descending.
    pub sigma: Vec<f64>,
    /// Condition number `sigma_1 / sigma_K`.
    pub kappa: f64,
    /// `(prod_j sigma_j) / sigma_K^K`.
    pub lambda: f64,
    /// Label noise standard deviation (0 = noiseless).
    pub nu: f64,
}

impl TeacherSpec {
    pub fn d(&self) -> usize {
        self.w_star.rows()
    }

    pub fn k(&self) -> usize {
        self.w_star.cols()
    }

    pub fn sigma_min(&self) -> f64 {
        *self.sigma.last().unwrap()
    }

    pub fn with_noise(mut self, nu: f64) -> Self {
        assert!(nu >= 0.0);
        self.nu = nu;
        self
    }

    /// Recomputes kappa/lambda from an SVD of `w_star` and checks them
    /// against the stored values (1e-8 relative).
    pub fn validate(&self) -> Result<()> {
        let (_u, sigma, _v) = thin_svd(&self.w_star)?;
        let s_min = *sigma.last().unwrap();
        if s_min <= 0.0 {
            return Err(Error::InvalidArgument(
                "teacher weight matrix is column-rank deficient".into(),
            ));
        }
        let kappa = sigma[0] / s_min;
        let lambda = sigma.iter().product::<f64>() / s_min.powi(self.k() as i32);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        if rel(kappa, self.kappa) > 1e-8 || rel(lambda, self.lambda) > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "stored spectrum disagrees with w_star: kappa {} vs {}, lambda {} vs {}",
                self.kappa, kappa, self.lambda, lambda
            )));
        }
        Ok(())
    }
}

/// Builds a teacher with singular values evenly spaced from `sigma_max` down
/// to `sigma_min` (endpoints included) and Gaussian singular factors.
pub fn make_ground_truth(
    d: usize,
    k: usize,
    sigma_min: f64,
    sigma_max: f64,
    rng: &mut RngStream,
) -> Result<TeacherSpec> {
    if k < 2 || k > d {
        return Err(Error::InvalidDimensions(format!(
            "make_ground_truth requires 2 <= K <= d, got d={d}, K={k}"
        )));
    }
    if !(sigma_min > 0.0) || sigma_min > sigma_max {
        return Err(Error::InvalidArgument(format!(
            "need 0 < sigma_min <= sigma_max, got [{sigma_min}, {sigma_max}]"
        )));
    }
    let (u, v) = orthonormal_factors(d, k, rng)?;
    let step = (sigma_max - sigma_min) / (k - 1) as f64;
    let sigma: Vec<f64> = (0..k).map(|j| sigma_max - step * j as f64).collect();
    let mut us = u;
    for j in 0..k {
        for i in 0..d {
            us[(i, j)] *= sigma[j];
        }
    }
    let w_star = us.matmul(&v.transpose())?;
    let kappa = sigma[0] / sigma[k - 1];
    let lambda = sigma.iter().product::<f64>() / sigma[k - 1].powi(k as i32);
    Ok(TeacherSpec {
        w_star,
        sigma,
        kappa,
        lambda,
        nu: 0.0,
    })
}

/// Network output `sum_j relu(w_j^T x)` for one input.
pub fn forward(w: &Matrix, x: &[f64]) -> Result<f64> {
    if x.len() != w.rows() {
        return Err(Error::ShapeMismatch(format!(
            "input length {} vs weight rows {}",
            x.len(),
            w.rows()
        )));
    }
    let mut out = 0.0;
    for j in 0..w.cols() {
        let mut z = 0.0;
        for i in 0..w.rows() {
            z += w[(i, j)] * x[i];
        }
        out += relu(z);
    }
    Ok(out)
}

#[inline]
fn forward_cols(cols: &[Vec<f64>], x: &[f64]) -> f64 {
    cols.iter().map(|w| relu(dot(w, x))).sum()
}

/// Synthetic sample set drawn from a teacher.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `N x d`, row i is `x_i^T`.
    pub inputs: Matrix,
    pub labels: Vec<f64>,
    /// Per-sample noise, kept for diagnostics. `None` for datasets loaded
    /// from disk, where the noise cannot be reconstructed.
    pub noise: Option<Vec<f64>>,
    pub seed: u64,
    pub nu: f64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.inputs.rows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn noise(&self) -> Result<&[f64]> {
        self.noise.as_deref().ok_or(Error::MissingNoiseRecord)
    }

    /// Writes `# relu-recover dataset v1, ...` then one row per sample:
    /// d inputs and the label at 17 significant digits.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "{}", self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# relu-recover dataset v1, N={}, d={}, seed={}, nu={:.16e}\n",
            self.n(),
            self.dim(),
            self.seed,
            self.nu
        ));
        for i in 0..self.n() {
            let mut fields: Vec<String> =
                self.inputs.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            fields.push(format!("{:.16e}", self.labels[i]));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let f = BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let (n, d, seed, nu) = parse_dataset_header(&header)?;
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Parse(format!(
                    "expected {} fields per row, got {}",
                    d + 1,
                    fields.len()
                )));
            }
            for fld in &fields[..d] {
                data.push(parse_f64(fld)?);
            }
            labels.push(parse_f64(fields[d])?);
        }
        if labels.len() != n {
            return Err(Error::Parse(format!(
                "header claims N={n} but file has {} rows",
                labels.len()
            )));
        }
        Ok(Dataset {
            inputs: Matrix::from_vec(n, d, data)?,
            labels,
            noise: None,
            seed,
            nu,
        })
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
}

fn parse_dataset_header(header: &str) -> Result<(usize, usize, u64, f64)> {
    let rest = header
        .strip_prefix("# relu-recover dataset v1,")
        .ok_or_else(|| Error::Parse(format!("unrecognized dataset header: {header:?}")))?;
    let mut n = None;
    let mut d = None;
    let mut seed = None;
    let mut nu = None;
    for part in rest.split(',') {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field {part:?}")))?;
        match key.trim() {
            "N" => n = Some(val.trim().parse().map_err(|e| Error::Parse(format!("{e}")))?),
            "d" => d = Some(val.trim().parse().map_err(|e| Error::Parse(format!("{e}")))?),
            "seed" => seed = Some(val.trim().parse().map_err(|e| Error::Parse(format!("{e}")))?),
            "nu" => nu = Some(parse_f64(val)?),
            other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
        }
    }
    match (n, d, seed, nu) {
        (Some(n), Some(d), Some(s), Some(v)) => Ok((n, d, s, v)),
        _ => Err(Error::Parse("incomplete dataset header".into())),
    }
}

/// Draws N standard Gaussian inputs and labels them through the teacher,
/// adding `N(0, nu^2)` noise when `nu > 0`. Inputs are drawn before noise so
/// a noiseless twin run under the same seed sees identical inputs.
pub fn generate_dataset(spec: &TeacherSpec, n: usize, rng: &mut RngStream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be >= 1".into()));
    }
    let seed = rng.seed();
    let inputs = standard_gaussian_matrix(n, spec.d(), rng)?;
    let noise: Vec<f64> = if spec.nu > 0.0 {
        (0..n).map(|_| spec.nu * rng.gaussian()).collect()
    } else {
        vec![0.0; n]
    };
    let cols = spec.w_star.columns();
    let labels: Vec<f64> = (0..n)
        .map(|i| forward_cols(&cols, inputs.row(i)) + noise[i])
        .collect();
    Ok(Dataset {
        inputs,
        labels,
        noise: Some(noise),
        seed,
        nu: spec.nu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_basics() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn ground_truth_spectrum() {
        let mut rng = RngStream::new(1);
        let spec = make_ground_truth(10, 5, 1.0, 2.0, &mut rng).unwrap();
        let expect = [2.0, 1.75, 1.5, 1.25, 1.0];
        for (a, b) in spec.sigma.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((spec.kappa - 2.0).abs() < 1e-12);
        assert!((spec.lambda - 6.5625).abs() < 1e-12);
        spec.validate().unwrap();
    }

    #[test]
    fn ground_truth_isotropic() {
        let mut rng = RngStream::new(2);
        let spec = make_ground_truth(3, 2, 1.0, 1.0, &mut rng).unwrap();
        assert!((spec.kappa - 1.0).abs() < 1e-10);
        assert!((spec.lambda - 1.0).abs() < 1e-10);
        for s in &spec.sigma {
            assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ground_truth_rejects_bad_args() {
        let mut rng = RngStream::new(3);
        assert!(make_ground_truth(10, 1, 1.0, 2.0, &mut rng).is_err());
        assert!(make_ground_truth(3, 5, 1.0, 2.0, &mut rng).is_err());
        assert!(make_ground_truth(10, 5, 0.0, 2.0, &mut rng).is_err());
        assert!(make_ground_truth(10, 5, -1.0, 2.0, &mut rng).is_err());
    }

    #[test]
    fn forward_hand_cases() {
        let w = Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        assert_eq!(forward(&w, &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(forward(&w, &[-1.0, 3.0]).unwrap(), 0.0);
        let w2 = Matrix::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        assert_eq!(forward(&w2, &[3.0]).unwrap(), 9.0);
        assert!(forward(&w, &[1.0]).is_err());
    }

    #[test]
    fn forward_homogeneous_and_nonnegative() {
        let mut rng = RngStream::new(4);
        for _ in 0..20 {
            let w = standard_gaussian_matrix(4, 3, &mut rng).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
            let c = rng.uniform() * 3.0;
            let lhs = forward(&w.scale(c), &x).unwrap();
            let rhs = c * forward(&w, &x).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            assert!(forward(&w, &x).unwrap() >= 0.0);
        }
    }

    #[test]
    fn noiseless_labels_match_forward() {
        let mut rng = RngStream::new(5);
        let spec = make_ground_truth(6, 3, 1.0, 2.0, &mut rng).unwrap();
        let ds = generate_dataset(&spec, 50, &mut rng.derive(&[0])).unwrap();
        for i in 0..50 {
            let y = forward(&spec.w_star, ds.inputs.row(i)).unwrap();
            assert_eq!(y, ds.labels[i]);
        }
    }

    #[test]
    fn dataset_regeneration_is_bit_identical() {
        let mut rng = RngStream::new(6);
        let spec = make_ground_truth(5, 3, 1.0, 2.0, &mut rng).unwrap().with_noise(0.5);
        let a = generate_dataset(&spec, 100, &mut RngStream::new(99)).unwrap();
        let b = generate_dataset(&spec, 100, &mut RngStream::new(99)).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.noise, b.noise);
    }

    #[test]
    fn label_mean_matches_halfnormal_expectation() {
        // E[relu(w^T X)] = ||w|| / sqrt(2 pi) for standard Gaussian X.
        let mut rng = RngStream::new(7);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap();
        let n = 1_000_000;
        let ds = generate_dataset(&spec, n, &mut rng.derive(&[1])).unwrap();
        let mean = ds.labels.iter().sum::<f64>() / n as f64;
        let expect: f64 = (0..2)
            .map(|j| {
                let col = spec.w_star.col(j);
                dot(&col, &col).sqrt() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .sum();
        // Var(y) <= E[y^2]; a crude bound on the standard error suffices.
        let var = ds.labels.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} expect {expect} se {se}");
    }

    #[test]
    fn noise_variance_tracks_nu_squared() {
        let mut rng = RngStream::new(8);
        let nu = 0.7;
        let spec = make_ground_truth(3, 2, 1.0, 2.0, &mut rng).unwrap().with_noise(nu);
        let ds = generate_dataset(&spec, 1_000_000, &mut rng.derive(&[2])).unwrap();
        let noise = ds.noise().unwrap();
        let mean = noise.iter().sum::<f64>() / noise.len() as f64;
        let var = noise.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / noise.len() as f64;
        assert!((var - nu * nu).abs() < 0.01 * nu * nu, "var {var}");
    }

    #[test]
    fn dataset_csv_round_trip() {
        let mut rng = RngStream::new(9);
        let spec = make_ground_truth(4, 2, 1.0, 2.0, &mut rng).unwrap().with_noise(0.3);
        let ds = generate_dataset(&spec, 30, &mut rng.derive(&[3])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        ds.save_csv(&path).unwrap();
        let back = Dataset::load_csv(&path).unwrap();
        assert_eq!(back.n(), 30);
        assert_eq!(back.dim(), 4);
        assert_eq!(back.seed, ds.seed);
        for i in 0..30 {
            let rel = (back.labels[i] - ds.labels[i]).abs() / ds.labels[i].abs().max(1e-300);
            assert!(rel <= 1e-15);
        }
        assert!(back.noise().is_err());
    }
}
