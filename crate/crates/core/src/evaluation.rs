//! Permutation-invariant error metrics and numerical checks of the local
//! geometry: Hessian floor, gradient Lipschitz constant, and the rate at
//! which the empirical gradient concentrates around the population one.
//!
//! A ReLU sum is invariant under relabeling hidden neurons (and only that;
//! sign flips change the function), so recovery error is measured after the
//! best column permutation.

use crate::error::{Error, Result};
use crate::numerics::{
    frobenius_distance, min_symmetric_eigenvalue, standard_gaussian_matrix, Matrix, RngStream,
};
use crate::objective::{empirical_gradient, empirical_hessian, population_gradient_mc};
use crate::teacher::{generate_dataset, TeacherSpec};

#[derive(Debug, Clone)]
pub struct PermutationMatch {
    /// Column j of the candidate is matched to column `permutation[j]` of
    /// the ground truth.
    pub permutation: Vec<usize>,
    pub error: f64,
    pub relative_error: f64,
}

/// Minimizes `||W - W* M_pi||_F` over permutations. The squared objective
/// decomposes into `sum_j ||w_j - w*_{pi(j)}||^2`, a linear assignment on the
/// K x K cost matrix. Exhaustive lexicographic search for K <= 8 (ties break
/// toward the identity); shortest-augmenting-path assignment beyond that.
pub fn best_permutation_match(w: &Matrix, w_star: &Matrix) -> Result<PermutationMatch> {
    if w.rows() != w_star.rows() || w.cols() != w_star.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            w.rows(),
            w.cols(),
            w_star.rows(),
            w_star.cols()
        )));
    }
    let k = w.cols();
    let mut cost = vec![vec![0.0; k]; k];
    for j in 0..k {
        let wj = w.col(j);
        for t in 0..k {
            let wt = w_star.col(t);
            cost[j][t] = wj
                .iter()
                .zip(&wt)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    }
    let permutation = if k <= 8 {
        exhaustive_assignment(&cost)
    } else {
        hungarian(&cost)
    };
    let error = permutation
        .iter()
        .enumerate()
        .map(|(j, &t)| cost[j][t])
        .sum::<f64>()
        .sqrt();
    let w_star_norm = w_star.frobenius_norm();
    Ok(PermutationMatch {
        permutation,
        error,
        relative_error: error / w_star_norm,
    })
}

/// Lexicographic enumeration with strict improvement, so the first (and thus
/// lexicographically smallest) minimizer wins ties.
fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let k = cost.len();
    let mut best = (f64::INFINITY, Vec::new());
    let mut perm = Vec::with_capacity(k);
    let mut used = vec![false; k];
    fn recurse(
        cost: &[Vec<f64>],
        perm: &mut Vec<usize>,
        used: &mut [bool],
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        let j = perm.len();
        if j == cost.len() {
            if acc < best.0 {
                *best = (acc, perm.clone());
            }
            return;
        }
        for t in 0..cost.len() {
            if !used[t] {
                used[t] = true;
                perm.push(t);
                recurse(cost, perm, used, acc + cost[j][t], best);
                perm.pop();
                used[t] = false;
            }
        }
    }
    recurse(cost, &mut perm, &mut used, 0.0, &mut best);
    best.1
}

/// Shortest augmenting path assignment with potentials, O(K^3).
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Success in the recovery sense: permutation-matched relative Frobenius
/// error at or below the threshold (default 1e-3).
pub fn is_success(w: &Matrix, w_star: &Matrix, threshold: f64) -> Result<bool> {
    Ok(best_permutation_match(w, w_star)?.relative_error <= threshold)
}

/// One measurement row of a theory check.
#[derive(Debug, Clone)]
pub struct ProbeRecord {
    pub check: &'static str,
    pub probe_id: usize,
    pub seed: u64,
    pub n: usize,
    pub radius: f64,
    pub value: f64,
}

/// Empirical estimates of the local-geometry constants, with the probe
/// metadata needed to reproduce each statistic.
#[derive(Debug, Clone)]
pub struct TheoryReport {
    /// Smallest empirical-Hessian eigenvalue seen over probes near W*.
    pub mu_hat: f64,
    /// Largest gradient difference ratio seen over probe pairs.
    pub l_hat: f64,
    /// Fitted log-log slope of the gradient deviation vs sample size.
    pub concentration_slope: f64,
    pub probes: Vec<ProbeRecord>,
}

impl TheoryReport {
    /// CSV body: `check,probe_id,seed,N,radius,value`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("check,probe_id,seed,N,radius,value\n");
        for p in &self.probes {
            out.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e}\n",
                p.check, p.probe_id, p.seed, p.n, p.radius, p.value
            ));
        }
        out
    }
}

/// Minimum empirical-Hessian eigenvalue over `n_probes` points on the
/// Frobenius sphere of the given radius around W*, all sharing one fresh
/// input sample of size N.
pub fn check_local_strong_convexity(
    spec: &TeacherSpec,
    n: usize,
    n_probes: usize,
    radius: f64,
    rng: &mut RngStream,
) -> Result<(f64, Vec<ProbeRecord>)> {
    let (d, k) = (spec.d(), spec.k());
    if radius > spec.sigma_min() / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "probe radius {radius} exceeds sigma_K/2 = {}",
            spec.sigma_min() / 2.0
        )));
    }
    if n < d * k {
        return Err(Error::InvalidArgument(format!(
            "need N >= dK = {}, got {n}",
            d * k
        )));
    }
    let inputs = standard_gaussian_matrix(n, d, &mut rng.derive(&[crate::hash_label("inputs")]))?;
    let mut records = Vec::with_capacity(n_probes);
    let mut mu_hat = f64::INFINITY;
    for probe in 0..n_probes {
        let mut probe_rng = rng.derive(&[probe as u64]);
        let delta = standard_gaussian_matrix(d, k, &mut probe_rng)?;
        let w = spec
            .w_star
            .add(&delta.scale(radius / delta.frobenius_norm()))?;
        let hess = empirical_hessian(&w, &inputs)?;
        let min_eig = min_symmetric_eigenvalue(hess.as_matrix())?;
        mu_hat = mu_hat.min(min_eig);
        records.push(ProbeRecord {
            check: "strong_convexity",
            probe_id: probe,
            seed: probe_rng.seed(),
            n,
            radius,
            value: min_eig,
        });
    }
    Ok((mu_hat, records))
}

/// Max ratio `||grad(W1) - grad(W2)||_F / ||W1 - W2||_F` over random pairs in
/// the radius-ball around W*. Both gradients in a pair are evaluated on the
/// same Monte Carlo sample (common random numbers), so the MC noise largely
/// cancels instead of inflating the ratio.
pub fn lipschitz_probe(
    spec: &TeacherSpec,
    n_pairs: usize,
    radius: f64,
    n_mc: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<ProbeRecord>)> {
    let (d, k) = (spec.d(), spec.k());
    if radius > spec.sigma_min() / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "probe radius {radius} exceeds sigma_K/2 = {}",
            spec.sigma_min() / 2.0
        )));
    }
    let min_dist = 1e-3 * spec.sigma_min();
    let noiseless = spec.clone().with_noise(0.0);
    let mut records = Vec::with_capacity(n_pairs);
    let mut l_hat = 0.0_f64;
    for pair in 0..n_pairs {
        let mut pair_rng = rng.derive(&[pair as u64]);
        let sample_ball = |r: &mut RngStream| -> Result<Matrix> {
            let delta = standard_gaussian_matrix(d, k, r)?;
            let scale = radius * r.uniform() / delta.frobenius_norm();
            spec.w_star.add(&delta.scale(scale))
        };
        let w1 = sample_ball(&mut pair_rng)?;
        let mut w2 = sample_ball(&mut pair_rng)?;
        while frobenius_distance(&w1, &w2)? < min_dist {
            w2 = sample_ball(&mut pair_rng)?;
        }
        let ds = generate_dataset(&noiseless, n_mc, &mut pair_rng)?;
        let g1 = empirical_gradient(&w1, &ds)?;
        let g2 = empirical_gradient(&w2, &ds)?;
        let ratio =
            frobenius_distance(&g1, &g2)? / frobenius_distance(&w1, &w2)?;
        l_hat = l_hat.max(ratio);
        records.push(ProbeRecord {
            check: "lipschitz",
            probe_id: pair,
            seed: pair_rng.seed(),
            n: n_mc,
            radius,
            value: ratio,
        });
    }
    Ok((l_hat, records))
}

/// Simple least-squares line fit with R^2.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r2,
    }
}

/// First recorded iteration from which the tail of a log10-loss curve is
/// linear: the least-squares fit over `[t0, end]` has R^2 >= `r2_min`, a
/// negative slope, and every pointwise residual at most `max_resid` log10
/// units (this last condition rejects flat heads that a global R^2 would
/// tolerate). `end` is the first record at or below `floor_log10`, or the
/// last record. Needs at least 5 points in the segment.
pub fn linear_segment_start(
    iterations: &[usize],
    log10_losses: &[f64],
    floor_log10: f64,
    r2_min: f64,
    max_resid: f64,
) -> Option<usize> {
    let end = log10_losses
        .iter()
        .position(|&l| l <= floor_log10)
        .unwrap_or(log10_losses.len() - 1);
    if end < 4 {
        return None;
    }
    for start in 0..=(end - 4) {
        let xs: Vec<f64> = iterations[start..=end].iter().map(|&t| t as f64).collect();
        let ys = &log10_losses[start..=end];
        let fit = fit_line(&xs, ys);
        let worst_resid = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - (fit.intercept + fit.slope * x)).abs())
            .fold(0.0_f64, f64::max);
        if fit.r2 >= r2_min && fit.slope < 0.0 && worst_resid <= max_resid {
            return Some(iterations[start]);
        }
    }
    None
}

/// Average gradient deviation from the MC population reference across sample
/// sizes, and the fitted log-log slope.
pub fn concentration_sweep(
    spec: &TeacherSpec,
    w: &Matrix,
    n_list: &[usize],
    trials: usize,
    n_mc_ref: usize,
    rng: &mut RngStream,
) -> Result<(f64, Vec<ProbeRecord>)> {
    if n_list.len() < 4 {
        return Err(Error::InvalidArgument(
            "concentration_sweep needs at least 4 sample sizes".into(),
        ));
    }
    let max_n = *n_list.iter().max().unwrap();
    let reference = population_gradient_mc(
        w,
        spec,
        n_mc_ref,
        &mut rng.derive(&[crate::hash_label("reference")]),
    )?;
    let mut records = Vec::new();
    if n_mc_ref < 10 * max_n {
        // Reference too coarse relative to the sweep; flag it in the table.
        records.push(ProbeRecord {
            check: "concentration_warning",
            probe_id: 0,
            seed: rng.seed(),
            n: n_mc_ref,
            radius: 0.0,
            value: f64::NAN,
        });
    }
    let mut log_n = Vec::with_capacity(n_list.len());
    let mut log_avg = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let mut sum = 0.0;
        for trial in 0..trials {
            let mut t_rng = rng.derive(&[n as u64, trial as u64]);
            let ds = generate_dataset(spec, n, &mut t_rng)?;
            let g = empirical_gradient(w, &ds)?;
            sum += frobenius_distance(&g, &reference)?;
        }
        let avg = sum / trials as f64;
        records.push(ProbeRecord {
            check: "concentration",
            probe_id: idx,
            seed: rng.seed(),
            n,
            radius: 0.0,
            value: avg,
        });
        log_n.push((n as f64).ln());
        log_avg.push(avg.ln());
    }
    let fit = fit_line(&log_n, &log_avg);
    Ok((fit.slope, records))
}
