//! Initializers and the fixed-step full-batch gradient descent loop.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::best_permutation_match;
use crate::numerics::{standard_gaussian_matrix, Matrix, RngStream};
use crate::objective::{empirical_gradient, empirical_loss};
use crate::teacher::{Dataset, TeacherSpec};

#[derive(Debug, Clone)]
pub struct GDConfig {
    /// Step size eta.
    pub eta: f64,
    /// Iteration budget T.
    pub max_iters: usize,
    /// Early-stop threshold on the gradient Frobenius norm; 0 disables and
    /// the loop runs exactly `max_iters` steps.
    pub grad_tol: f64,
    /// Trajectory recording cadence.
    pub record_every: usize,
}

impl GDConfig {
    pub fn new(eta: f64, max_iters: usize) -> Self {
        GDConfig {
            eta,
            max_iters,
            grad_tol: 0.0,
            record_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_iters < 1 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.record_every < 1 {
            return Err(Error::InvalidArgument("record_every must be >= 1".into()));
        }
        if self.grad_tol < 0.0 {
            return Err(Error::InvalidArgument("grad_tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    GradTol,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub iterations: Vec<usize>,
    pub losses: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Permutation-matched relative error vs the ground truth, when supplied.
    pub param_errors: Option<Vec<f64>>,
    pub final_w: Matrix,
    pub stop_reason: StopReason,
}

impl Trajectory {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap()
    }

    /// CSV export: `iter,loss,grad_norm,param_error` with the error column
    /// empty when no ground truth was supplied.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("iter,loss,grad_norm,param_error\n");
        for (idx, &it) in self.iterations.iter().enumerate() {
            let err = match &self.param_errors {
                Some(v) => format!("{:.16e}", v[idx]),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{}\n",
                it, self.losses[idx], self.grad_norms[idx], err
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(f, "{}", self.to_csv_string())?;
        Ok(())
    }
}

/// `W0 = W* + radius * Delta / ||Delta||_F` with Gaussian `Delta`; stands in
/// for tensor initialization, which this crate does not implement. Outputs
/// that mention the initializer label it "warm-start (tensor-init surrogate)".
pub fn warm_start_init(spec: &TeacherSpec, radius: f64, rng: &mut RngStream) -> Result<Matrix> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "warm start radius must be > 0, got {radius}"
        )));
    }
    let delta = standard_gaussian_matrix(spec.d(), spec.k(), rng)?;
    let norm = delta.frobenius_norm();
    spec.w_star.add(&delta.scale(radius / norm))
}

pub fn random_init(d: usize, k: usize, rng: &mut RngStream) -> Result<Matrix> {
    if k == 0 || k > d {
        return Err(Error::InvalidDimensions(format!(
            "random_init requires 1 <= K <= d, got d={d}, K={k}"
        )));
    }
    standard_gaussian_matrix(d, k, rng)
}

/// Fixed-step gradient descent `W^t = W^{t-1} - eta * grad(W^{t-1})`,
/// recording loss/gradient-norm (and parameter error when `w_star` is given)
/// at the configured cadence plus always the final state.
pub fn gradient_descent(
    w0: &Matrix,
    data: &Dataset,
    config: &GDConfig,
    w_star: Option<&Matrix>,
) -> Result<Trajectory> {
    config.validate()?;
    if w0.rows() != data.dim() {
        return Err(Error::ShapeMismatch(format!(
            "init rows {} vs input dim {}",
            w0.rows(),
            data.dim()
        )));
    }
    let mut w = w0.clone();
    let mut iterations = Vec::new();
    let mut losses = Vec::new();
    let mut grad_norms = Vec::new();
    let mut param_errors = w_star.map(|_| Vec::new());
    let mut stop_reason = StopReason::MaxIters;

    let record = |t: usize,
                      w: &Matrix,
                      grad_norm: f64,
                      iterations: &mut Vec<usize>,
                      losses: &mut Vec<f64>,
                      grad_norms: &mut Vec<f64>,
                      param_errors: &mut Option<Vec<f64>>|
     -> Result<()> {
        iterations.push(t);
        losses.push(empirical_loss(w, data)?);
        grad_norms.push(grad_norm);
        if let (Some(errs), Some(ws)) = (param_errors.as_mut(), w_star) {
            errs.push(best_permutation_match(w, ws)?.relative_error);
        }
        Ok(())
    };

    let mut t = 0usize;
    loop {
        let grad = empirical_gradient(&w, data)?;
        if !grad.is_finite() {
            return Err(Error::Diverged {
                iteration: t,
                quantity: "gradient",
                last_finite: Box::new(w),
            });
        }
        let grad_norm = grad.frobenius_norm();
        let at_cadence = t % config.record_every == 0;
        let tol_hit = config.grad_tol > 0.0 && grad_norm <= config.grad_tol;
        let budget_hit = t == config.max_iters;
        if at_cadence || tol_hit || budget_hit {
            record(
                t,
                &w,
                grad_norm,
                &mut iterations,
                &mut losses,
                &mut grad_norms,
                &mut param_errors,
            )?;
            if !losses.last().unwrap().is_finite() {
                return Err(Error::Diverged {
                    iteration: t,
                    quantity: "loss",
                    last_finite: Box::new(w),
                });
            }
        }
        if tol_hit {
            stop_reason = StopReason::GradTol;
            break;
        }
        if budget_hit {
            break;
        }
        let next = w.sub(&grad.scale(config.eta))?;
        if !next.is_finite() {
            return Err(Error::Diverged {
                iteration: t + 1,
                quantity: "iterate",
                last_finite: Box::new(w),
            });
        }
        w = next;
        t += 1;
    }
    Ok(Trajectory {
        iterations,
        losses,
        grad_norms,
        param_errors,
        final_w: w,
        stop_reason,
    })
}
